//! Many-sorted signatures and first-order terms.
//!
//! A [`Signature`] declares sorts (some of which may be bound to the builtin
//! carriers `Int`, `Bool`, `Nat`) and function symbols. [`Term`]s are built
//! from variables, builtin literals and symbol applications, and are always
//! well-sorted with respect to a signature. Everything here is immutable
//! after construction; all operations are pure functions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

/// Builtin carrier attached to a declared sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinSort {
    Int,
    Bool,
    /// Nonnegative integers. Represented as `Int` plus a nonnegativity
    /// invariant enforced at literal construction.
    Nat,
}

impl BuiltinSort {
    pub fn is_numeric(self) -> bool {
        matches!(self, BuiltinSort::Int | BuiltinSort::Nat)
    }
}

/// A declared sort: a name plus an optional builtin interpretation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortDecl {
    pub name: String,
    pub builtin: Option<BuiltinSort>,
}

/// A declared function symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSymbol {
    pub name: String,
    pub arg_sorts: Vec<String>,
    pub result_sort: String,
    /// Interpreted symbols have a registered evaluation rule (arithmetic,
    /// comparisons, `lookup`, `isInt`, ...). Uninterpreted symbols are free
    /// constructors.
    pub interpreted: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("sort `{0}` declared twice")]
    DuplicateSort(String),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("symbol `{0}` with the same argument sorts declared twice")]
    DuplicateSymbol(String),
    #[error("name collision: `{0}` already declared")]
    NameCollision(String),
    #[error("no configuration sort designated")]
    NoCfgSort,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("ill-sorted term: {0}")]
    IllSorted(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("natural subtraction underflow: {0}")]
    NatUnderflow(String),
    #[error("term is not ground: variable `{0}`")]
    NotGround(String),
}

/// Names of the interpreted symbols that the evaluator knows about.
pub mod builtin_ops {
    pub const ADD: &str = "+";
    pub const SUB: &str = "-";
    pub const MUL: &str = "*";
    pub const DIV: &str = "/";
    pub const LT: &str = "<";
    pub const LE: &str = "<=";
    pub const GT: &str = ">";
    pub const GE: &str = ">=";
    pub const EQ: &str = "=";
    pub const NOT: &str = "!";
    pub const ABS: &str = "abs";
    pub const LOOKUP: &str = "lookup";
    pub const IS_INT: &str = "isInt";
    pub const IS_BOOL: &str = "isBool";
}

/// A many-sorted signature with a distinguished configuration sort.
#[derive(Debug, Clone)]
pub struct Signature {
    sorts: IndexMap<String, SortDecl>,
    symbols: Vec<FunctionSymbol>,
    cfg_sort: String,
}

/// Signatures compare as sets: declaration order is a serialization detail.
impl PartialEq for Signature {
    fn eq(&self, other: &Signature) -> bool {
        let key = |s: &FunctionSymbol| {
            (s.name.clone(), s.arg_sorts.clone(), s.result_sort.clone(), s.interpreted)
        };
        let mut a: Vec<_> = self.symbols.iter().map(key).collect();
        let mut b: Vec<_> = other.symbols.iter().map(key).collect();
        a.sort();
        b.sort();
        self.cfg_sort == other.cfg_sort && self.sorts == other.sorts && a == b
    }
}

impl Eq for Signature {}

impl Signature {
    pub fn new() -> Signature {
        Signature {
            sorts: IndexMap::new(),
            symbols: Vec::new(),
            cfg_sort: String::new(),
        }
    }

    pub fn add_sort(&mut self, name: &str, builtin: Option<BuiltinSort>) -> Result<(), SignatureError> {
        if self.sorts.contains_key(name) {
            return Err(SignatureError::DuplicateSort(name.to_string()));
        }
        self.sorts.insert(
            name.to_string(),
            SortDecl { name: name.to_string(), builtin },
        );
        if builtin.map_or(false, BuiltinSort::is_numeric) {
            self.register_numeric_ops(name);
        }
        if builtin == Some(BuiltinSort::Bool) {
            self.register_bool_ops(name);
        }
        // `abs : Int -> Nat` once both carriers exist.
        self.maybe_register_abs();
        Ok(())
    }

    fn register_numeric_ops(&mut self, sort: &str) {
        use builtin_ops::*;
        for op in [ADD, SUB, MUL, DIV] {
            self.push_symbol(FunctionSymbol {
                name: op.to_string(),
                arg_sorts: vec![sort.to_string(), sort.to_string()],
                result_sort: sort.to_string(),
                interpreted: true,
            });
        }
        if let Some(bool_sort) = self.sort_name_of_builtin(BuiltinSort::Bool) {
            for op in [LT, LE, GT, GE, EQ] {
                self.push_symbol(FunctionSymbol {
                    name: op.to_string(),
                    arg_sorts: vec![sort.to_string(), sort.to_string()],
                    result_sort: bool_sort.clone(),
                    interpreted: true,
                });
            }
        }
    }

    fn register_bool_ops(&mut self, sort: &str) {
        self.push_symbol(FunctionSymbol {
            name: builtin_ops::NOT.to_string(),
            arg_sorts: vec![sort.to_string()],
            result_sort: sort.to_string(),
            interpreted: true,
        });
        // Comparison operators for numeric sorts declared before Bool.
        let numeric: Vec<String> = self
            .sorts
            .values()
            .filter(|s| s.builtin.map_or(false, BuiltinSort::is_numeric))
            .map(|s| s.name.clone())
            .collect();
        for num in numeric {
            for op in [
                builtin_ops::LT,
                builtin_ops::LE,
                builtin_ops::GT,
                builtin_ops::GE,
                builtin_ops::EQ,
            ] {
                self.push_symbol(FunctionSymbol {
                    name: op.to_string(),
                    arg_sorts: vec![num.clone(), num.clone()],
                    result_sort: sort.to_string(),
                    interpreted: true,
                });
            }
        }
    }

    fn maybe_register_abs(&mut self) {
        let int = self.sort_name_of_builtin(BuiltinSort::Int);
        let nat = self.sort_name_of_builtin(BuiltinSort::Nat);
        if let (Some(int), Some(nat)) = (int, nat) {
            self.push_symbol(FunctionSymbol {
                name: builtin_ops::ABS.to_string(),
                arg_sorts: vec![int],
                result_sort: nat,
                interpreted: true,
            });
        }
    }

    fn push_symbol(&mut self, sym: FunctionSymbol) {
        if self
            .symbols
            .iter()
            .any(|s| s.name == sym.name && s.arg_sorts == sym.arg_sorts)
        {
            return;
        }
        self.symbols.push(sym);
    }

    pub fn add_symbol(
        &mut self,
        name: &str,
        arg_sorts: &[&str],
        result_sort: &str,
        interpreted: bool,
    ) -> Result<(), SignatureError> {
        for s in arg_sorts.iter().chain(std::iter::once(&result_sort)) {
            if !self.sorts.contains_key(*s) {
                return Err(SignatureError::UnknownSort(s.to_string()));
            }
        }
        if self
            .symbols
            .iter()
            .any(|s| s.name == name && s.arg_sorts.iter().map(String::as_str).eq(arg_sorts.iter().copied()))
        {
            return Err(SignatureError::DuplicateSymbol(name.to_string()));
        }
        self.symbols.push(FunctionSymbol {
            name: name.to_string(),
            arg_sorts: arg_sorts.iter().map(|s| s.to_string()).collect(),
            result_sort: result_sort.to_string(),
            interpreted,
        });
        Ok(())
    }

    pub fn set_cfg_sort(&mut self, name: &str) -> Result<(), SignatureError> {
        if !self.sorts.contains_key(name) {
            return Err(SignatureError::UnknownSort(name.to_string()));
        }
        self.cfg_sort = name.to_string();
        Ok(())
    }

    pub fn cfg_sort(&self) -> &str {
        &self.cfg_sort
    }

    pub fn sorts(&self) -> impl Iterator<Item = &SortDecl> {
        self.sorts.values()
    }

    pub fn symbols(&self) -> &[FunctionSymbol] {
        &self.symbols
    }

    /// User-declared symbols, excluding auto-registered builtin operators.
    pub fn declared_symbols(&self) -> impl Iterator<Item = &FunctionSymbol> {
        use builtin_ops::*;
        self.symbols.iter().filter(|s| {
            !matches!(
                s.name.as_str(),
                ADD | SUB | MUL | DIV | LT | LE | GT | GE | EQ | NOT | ABS
            )
        })
    }

    pub fn has_sort(&self, name: &str) -> bool {
        self.sorts.contains_key(name)
    }

    pub fn has_symbol_named(&self, name: &str) -> bool {
        self.symbols.iter().any(|s| s.name == name)
    }

    pub fn sort(&self, name: &str) -> Option<&SortDecl> {
        self.sorts.get(name)
    }

    pub fn builtin_of(&self, sort: &str) -> Option<BuiltinSort> {
        self.sorts.get(sort).and_then(|s| s.builtin)
    }

    pub fn sort_name_of_builtin(&self, b: BuiltinSort) -> Option<String> {
        self.sorts
            .values()
            .find(|s| s.builtin == Some(b))
            .map(|s| s.name.clone())
    }

    /// Resolves an application by name and argument sorts. Overloaded symbols
    /// (e.g. `+` on both `Int` and `Nat`) are disambiguated by the arguments.
    pub fn resolve(&self, name: &str, arg_sorts: &[String]) -> Option<&FunctionSymbol> {
        self.symbols
            .iter()
            .find(|s| s.name == name && s.arg_sorts == arg_sorts)
            .or_else(|| {
                // Numeric sorts mix in comparisons and arithmetic: a Nat
                // argument is acceptable where Int is expected.
                self.symbols.iter().find(|s| {
                    s.name == name
                        && s.arg_sorts.len() == arg_sorts.len()
                        && s.arg_sorts.iter().zip(arg_sorts).all(|(want, have)| {
                            want == have
                                || (self.builtin_of(want).map_or(false, BuiltinSort::is_numeric)
                                    && self.builtin_of(have).map_or(false, BuiltinSort::is_numeric))
                        })
                })
            })
    }

    pub fn symbols_named<'a>(
        &'a self,
        name: &'a str,
    ) -> impl Iterator<Item = &'a FunctionSymbol> + 'a {
        self.symbols.iter().filter(move |s| s.name == name)
    }
}

impl Default for Signature {
    fn default() -> Self {
        Signature::new()
    }
}

/// A sorted variable. Name and sort together identify the variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable {
    pub name: String,
    pub sort: String,
}

impl Variable {
    pub fn new(name: &str, sort: &str) -> Variable {
        Variable {
            name: name.to_string(),
            sort: sort.to_string(),
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// A term: a variable, a builtin literal, or a symbol application.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Variable),
    /// Integer literal. `sort` is the declared sort name (an `Int` or `Nat`
    /// sort); Nat literals are nonnegative by construction.
    Int { value: i64, sort: String },
    Bool { value: bool, sort: String },
    App { symbol: String, args: Vec<Term> },
}

impl Term {
    pub fn var(name: &str, sort: &str) -> Term {
        Term::Var(Variable::new(name, sort))
    }

    pub fn int(value: i64, sort: &str) -> Term {
        Term::Int {
            value,
            sort: sort.to_string(),
        }
    }

    /// Nat literal; panics on negative values (invariant of the Nat sort).
    pub fn nat(value: i64, sort: &str) -> Term {
        assert!(value >= 0, "Nat literal must be nonnegative");
        Term::int(value, sort)
    }

    pub fn boolean(value: bool, sort: &str) -> Term {
        Term::Bool {
            value,
            sort: sort.to_string(),
        }
    }

    pub fn app(symbol: &str, args: Vec<Term>) -> Term {
        Term::App {
            symbol: symbol.to_string(),
            args,
        }
    }

    pub fn constant(symbol: &str) -> Term {
        Term::app(symbol, vec![])
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Int { .. } | Term::Bool { .. } => true,
            Term::App { args, .. } => args.iter().all(Term::is_ground),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Int { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Term::Bool { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Result sort of a term over a signature.
pub fn sort_of(t: &Term, sig: &Signature) -> Result<String, TermError> {
    match t {
        Term::Var(v) => {
            if !sig.has_sort(&v.sort) {
                return Err(TermError::IllSorted(format!(
                    "variable `{}` has undeclared sort `{}`",
                    v.name, v.sort
                )));
            }
            Ok(v.sort.clone())
        }
        Term::Int { value, sort } => match sig.builtin_of(sort) {
            Some(BuiltinSort::Int) => Ok(sort.clone()),
            Some(BuiltinSort::Nat) if *value >= 0 => Ok(sort.clone()),
            Some(BuiltinSort::Nat) => Err(TermError::IllSorted(format!(
                "negative literal {value} at Nat sort `{sort}`"
            ))),
            _ => Err(TermError::IllSorted(format!(
                "integer literal at non-numeric sort `{sort}`"
            ))),
        },
        Term::Bool { sort, .. } => match sig.builtin_of(sort) {
            Some(BuiltinSort::Bool) => Ok(sort.clone()),
            _ => Err(TermError::IllSorted(format!(
                "boolean literal at non-Bool sort `{sort}`"
            ))),
        },
        Term::App { symbol, args } => {
            let arg_sorts = args
                .iter()
                .map(|a| sort_of(a, sig))
                .collect::<Result<Vec<_>, _>>()?;
            let sym = sig
                .resolve(symbol, &arg_sorts)
                .ok_or_else(|| match sig.symbols_named(symbol).next() {
                    Some(_) => TermError::IllSorted(format!(
                        "`{symbol}` not applicable to arguments of sorts {arg_sorts:?}"
                    )),
                    None => TermError::UnknownSymbol(symbol.to_string()),
                })?;
            Ok(sym.result_sort.clone())
        }
    }
}

/// A sort-preserving finite map from variables to terms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Substitution {
    map: BTreeMap<Variable, Term>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn singleton(v: Variable, t: Term) -> Substitution {
        let mut s = Substitution::new();
        s.insert(v, t);
        s
    }

    pub fn insert(&mut self, v: Variable, t: Term) {
        self.map.insert(v, t);
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.map.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Variable> {
        self.map.keys()
    }

    /// Simultaneous application: every mapped variable is replaced at once.
    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.map.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Int { .. } | Term::Bool { .. } => t.clone(),
            Term::App { symbol, args } => Term::App {
                symbol: symbol.clone(),
                args: args.iter().map(|a| self.apply(a)).collect(),
            },
        }
    }

    /// Composition: `(self.compose(other)).apply(t) == other.apply(self.apply(t))`.
    pub fn compose(&self, other: &Substitution) -> Substitution {
        let mut out = Substitution::new();
        for (v, t) in &self.map {
            out.insert(v.clone(), other.apply(t));
        }
        for (v, t) in &other.map {
            if !out.map.contains_key(v) {
                out.insert(v.clone(), t.clone());
            }
        }
        out
    }

    /// Normalizes to an idempotent substitution: no mapped variable occurs in
    /// any image. Returns `None` if a cycle prevents normalization.
    pub fn normalized(&self) -> Option<Substitution> {
        let mut cur = self.clone();
        for _ in 0..=cur.map.len() {
            let domain: BTreeSet<Variable> = cur.map.keys().cloned().collect();
            let dirty = cur
                .map
                .values()
                .any(|t| free_vars(t).iter().any(|v| domain.contains(v)));
            if !dirty {
                return Some(cur);
            }
            let snapshot = cur.clone();
            for t in cur.map.values_mut() {
                *t = snapshot.apply(t);
            }
            if cur == snapshot {
                return None;
            }
        }
        None
    }
}

/// Free variables of a term.
pub fn free_vars(t: &Term) -> BTreeSet<Variable> {
    let mut out = BTreeSet::new();
    collect_vars(t, &mut out);
    out
}

fn collect_vars(t: &Term, out: &mut BTreeSet<Variable>) {
    match t {
        Term::Var(v) => {
            out.insert(v.clone());
        }
        Term::Int { .. } | Term::Bool { .. } => {}
        Term::App { args, .. } => {
            for a in args {
                collect_vars(a, out);
            }
        }
    }
}

/// Deterministic fresh variable: base name, then `base0`, `base1`, ...
pub fn fresh_variable(base: &str, sort: &str, avoid: &BTreeSet<Variable>) -> Variable {
    let taken = |name: &str| avoid.iter().any(|v| v.name == name);
    if !taken(base) {
        return Variable::new(base, sort);
    }
    for i in 0.. {
        let name = format!("{base}{i}");
        if !taken(&name) {
            return Variable::new(&name, sort);
        }
    }
    unreachable!()
}

/// Syntactic matching of a (possibly non-ground) lhs against a ground subject.
/// Literals are compared by value. Returns `None` on mismatch.
pub fn match_term(lhs: &Term, subject: &Term) -> Option<Substitution> {
    let mut sub = Substitution::new();
    if match_into(lhs, subject, &mut sub) {
        Some(sub)
    } else {
        None
    }
}

fn match_into(lhs: &Term, subject: &Term, sub: &mut Substitution) -> bool {
    match lhs {
        Term::Var(v) => match sub.get(v) {
            Some(prev) => prev == subject,
            None => {
                sub.insert(v.clone(), subject.clone());
                true
            }
        },
        Term::Int { value, .. } => subject.as_int() == Some(*value),
        Term::Bool { value, .. } => subject.as_bool() == Some(*value),
        Term::App { symbol, args } => match subject {
            Term::App {
                symbol: s2,
                args: a2,
            } if symbol == s2 && args.len() == a2.len() => args
                .iter()
                .zip(a2)
                .all(|(l, s)| match_into(l, s, sub)),
            _ => false,
        },
    }
}

/// Outcome of syntactic unification: a substitution together with residual
/// equality constraints between builtin-sorted terms that are not solved
/// structurally (arithmetic is not a free algebra).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Unification {
    pub subst: Substitution,
    pub residual: Vec<(Term, Term)>,
}

/// Order-sorted syntactic unification with occurs check.
///
/// Subterms of builtin sort are unified structurally only when at least one
/// side is a variable and the other is a variable too; any other equation
/// between builtin-sorted terms becomes a residual constraint for the
/// constraint backend. Callers must rename the two terms apart.
pub fn unify(t1: &Term, t2: &Term, sig: &Signature) -> Option<Unification> {
    let mut state = Unification::default();
    let mut work = vec![(t1.clone(), t2.clone())];
    while let Some((a, b)) = work.pop() {
        let a = state.subst.apply(&a);
        let b = state.subst.apply(&b);
        if a == b {
            continue;
        }
        let sort_a = sort_of(&a, sig).ok()?;
        let sort_b = sort_of(&b, sig).ok()?;
        let builtin = sig.builtin_of(&sort_a);
        let compatible = sort_a == sort_b
            || (builtin.map_or(false, BuiltinSort::is_numeric)
                && sig.builtin_of(&sort_b).map_or(false, BuiltinSort::is_numeric));
        if !compatible {
            return None;
        }
        if builtin.is_some() {
            // Builtin-sorted equation: bind only variable/variable pairs,
            // defer everything else to the constraint backend.
            match (&a, &b) {
                (Term::Var(x), Term::Var(_)) => {
                    bind(&mut state, x.clone(), b.clone())?;
                }
                (Term::Int { .. }, Term::Int { .. }) => {
                    if a.as_int() != b.as_int() {
                        return None;
                    }
                }
                (Term::Bool { .. }, Term::Bool { .. }) => {
                    if a.as_bool() != b.as_bool() {
                        return None;
                    }
                }
                _ => state.residual.push((a.clone(), b.clone())),
            }
            continue;
        }
        match (&a, &b) {
            (Term::Var(x), _) => {
                if free_vars(&b).contains(x) {
                    return None; // occurs check
                }
                bind(&mut state, x.clone(), b.clone())?;
            }
            (_, Term::Var(y)) => {
                if free_vars(&a).contains(y) {
                    return None;
                }
                bind(&mut state, y.clone(), a.clone())?;
            }
            (
                Term::App { symbol: f, args: fa },
                Term::App { symbol: g, args: ga },
            ) => {
                if f != g || fa.len() != ga.len() {
                    return None;
                }
                for (x, y) in fa.iter().zip(ga) {
                    work.push((x.clone(), y.clone()));
                }
            }
            _ => return None,
        }
    }
    // Apply the final substitution through the residuals.
    state.residual = state
        .residual
        .iter()
        .map(|(a, b)| (state.subst.apply(a), state.subst.apply(b)))
        .collect();
    state.residual.retain(|(a, b)| a != b);
    Some(state)
}

fn bind(state: &mut Unification, v: Variable, t: Term) -> Option<()> {
    let single = Substitution::singleton(v.clone(), t.clone());
    let mut updated = Substitution::new();
    for (k, img) in state.subst.iter() {
        updated.insert(k.clone(), single.apply(img));
    }
    updated.insert(v, t);
    state.subst = updated.normalized()?;
    Some(())
}

/// Reduces all interpreted symbols in a ground term: arithmetic and
/// comparisons on `Int`/`Nat`, boolean negation, `abs`, environment `lookup`,
/// and the `isInt`/`isBool` recognizers.
pub fn evaluate_ground(t: &Term, sig: &Signature) -> Result<Term, TermError> {
    match t {
        Term::Var(v) => Err(TermError::NotGround(v.name.clone())),
        Term::Int { .. } | Term::Bool { .. } => Ok(t.clone()),
        Term::App { symbol, args } => {
            let args: Vec<Term> = args
                .iter()
                .map(|a| evaluate_ground(a, sig))
                .collect::<Result<_, _>>()?;
            let arg_sorts: Vec<String> = args
                .iter()
                .map(|a| sort_of(a, sig))
                .collect::<Result<_, _>>()?;
            let sym = sig
                .resolve(symbol, &arg_sorts)
                .ok_or_else(|| TermError::UnknownSymbol(symbol.clone()))?;
            if !sym.interpreted {
                return Ok(Term::App {
                    symbol: symbol.clone(),
                    args,
                });
            }
            evaluate_interpreted(sym, &args, sig)
        }
    }
}

fn evaluate_interpreted(
    sym: &FunctionSymbol,
    args: &[Term],
    sig: &Signature,
) -> Result<Term, TermError> {
    use builtin_ops::*;
    let result_sort = &sym.result_sort;
    match sym.name.as_str() {
        ADD | SUB | MUL | DIV => {
            let a = args[0].as_int().ok_or_else(|| stuck(sym, args))?;
            let b = args[1].as_int().ok_or_else(|| stuck(sym, args))?;
            let value = match sym.name.as_str() {
                ADD => a + b,
                SUB => a - b,
                MUL => a * b,
                // Truncation toward zero.
                DIV => {
                    if b == 0 {
                        return Err(TermError::DivisionByZero);
                    }
                    a / b
                }
                _ => unreachable!(),
            };
            if sig.builtin_of(result_sort) == Some(BuiltinSort::Nat) && value < 0 {
                return Err(TermError::NatUnderflow(format!(
                    "{a} {} {b}",
                    sym.name
                )));
            }
            Ok(Term::int(value, result_sort))
        }
        LT | LE | GT | GE => {
            let a = args[0].as_int().ok_or_else(|| stuck(sym, args))?;
            let b = args[1].as_int().ok_or_else(|| stuck(sym, args))?;
            let value = match sym.name.as_str() {
                LT => a < b,
                LE => a <= b,
                GT => a > b,
                GE => a >= b,
                _ => unreachable!(),
            };
            Ok(Term::boolean(value, result_sort))
        }
        EQ => Ok(Term::boolean(args[0] == args[1], result_sort)),
        NOT => {
            let a = args[0].as_bool().ok_or_else(|| stuck(sym, args))?;
            Ok(Term::boolean(!a, result_sort))
        }
        ABS => {
            let a = args[0].as_int().ok_or_else(|| stuck(sym, args))?;
            Ok(Term::int(a.abs(), result_sort))
        }
        LOOKUP => evaluate_lookup(&args[0], &args[1], result_sort, sig),
        IS_INT => Ok(Term::boolean(
            is_injection_of(&args[0], BuiltinSort::Int, sig),
            result_sort,
        )),
        IS_BOOL => Ok(Term::boolean(
            is_injection_of(&args[0], BuiltinSort::Bool, sig),
            result_sort,
        )),
        other => Err(TermError::IllSorted(format!(
            "interpreted symbol `{other}` has no evaluation rule"
        ))),
    }
}

fn stuck(sym: &FunctionSymbol, args: &[Term]) -> TermError {
    TermError::IllSorted(format!(
        "interpreted `{}` applied to non-literal arguments {args:?}",
        sym.name
    ))
}

/// `lookup(x, update(x, i, env)) = i`; `lookup(y, update(x, i, env)) =
/// lookup(y, env)` for `y != x`; `lookup(x, empty) = 0`. The environment is
/// any term built from a ternary constructor and a constant.
fn evaluate_lookup(
    key: &Term,
    env: &Term,
    result_sort: &str,
    sig: &Signature,
) -> Result<Term, TermError> {
    let mut env = env;
    loop {
        match env {
            Term::App { args, .. } if args.len() == 3 => {
                if &args[0] == key {
                    return Ok(args[1].clone());
                }
                env = &args[2];
            }
            Term::App { args, .. } if args.is_empty() => {
                return Ok(Term::int(0, result_sort));
            }
            _ => {
                return Err(TermError::IllSorted(format!(
                    "lookup into non-environment term {env:?} over {}",
                    sig.cfg_sort()
                )))
            }
        }
    }
}

/// Whether a term is an injection of a builtin value: an application of a
/// unary symbol whose argument sort carries the given builtin.
pub fn is_injection_of(t: &Term, builtin: BuiltinSort, sig: &Signature) -> bool {
    match t {
        Term::App { symbol, args } if args.len() == 1 => {
            let arg_sort = match sort_of(&args[0], sig) {
                Ok(s) => s,
                Err(_) => return false,
            };
            sig.builtin_of(&arg_sort) == Some(builtin)
                && sig
                    .symbols_named(symbol)
                    .any(|s| s.arg_sorts.len() == 1 && !s.interpreted)
        }
        _ => false,
    }
}

/// A total, sort-preserving map from variables to ground terms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundValuation {
    map: BTreeMap<Variable, Term>,
}

impl GroundValuation {
    pub fn new() -> GroundValuation {
        GroundValuation::default()
    }

    pub fn bind(&mut self, v: Variable, t: Term) {
        debug_assert!(t.is_ground());
        self.map.insert(v, t);
    }

    pub fn with(mut self, v: Variable, t: Term) -> GroundValuation {
        self.bind(v, t);
        self
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.map.iter()
    }

    /// Homomorphic extension to terms. All free variables must be bound.
    pub fn apply(&self, t: &Term) -> Result<Term, TermError> {
        match t {
            Term::Var(v) => self
                .map
                .get(v)
                .cloned()
                .ok_or_else(|| TermError::NotGround(v.name.clone())),
            Term::Int { .. } | Term::Bool { .. } => Ok(t.clone()),
            Term::App { symbol, args } => Ok(Term::App {
                symbol: symbol.clone(),
                args: args
                    .iter()
                    .map(|a| self.apply(a))
                    .collect::<Result<_, _>>()?,
            }),
        }
    }

    /// Applies and evaluates in one go.
    pub fn eval(&self, t: &Term, sig: &Signature) -> Result<Term, TermError> {
        evaluate_ground(&self.apply(t)?, sig)
    }

    pub fn as_substitution(&self) -> Substitution {
        let mut s = Substitution::new();
        for (v, t) in &self.map {
            s.insert(v.clone(), t.clone());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Signature of the counter language from the worked example: `[s, i]`
    /// configurations over naturals.
    pub fn counter_sig() -> Signature {
        let mut sig = Signature::new();
        sig.add_sort("Bool", Some(BuiltinSort::Bool)).unwrap();
        sig.add_sort("Nat", Some(BuiltinSort::Nat)).unwrap();
        sig.add_sort("Cfg", None).unwrap();
        sig.add_symbol("cfg", &["Nat", "Nat"], "Cfg", false).unwrap();
        sig.set_cfg_sort("Cfg").unwrap();
        sig
    }

    fn imp_like_sig() -> Signature {
        let mut sig = Signature::new();
        sig.add_sort("Bool", Some(BuiltinSort::Bool)).unwrap();
        sig.add_sort("Int", Some(BuiltinSort::Int)).unwrap();
        sig.add_sort("Id", None).unwrap();
        sig.add_sort("Env", None).unwrap();
        sig.add_sort("AE", None).unwrap();
        sig.add_symbol("intc", &["Int"], "AE", false).unwrap();
        sig.add_symbol("plus", &["AE", "AE"], "AE", false).unwrap();
        sig.add_symbol("x", &[], "Id", false).unwrap();
        sig.add_symbol("y", &[], "Id", false).unwrap();
        sig.add_symbol("empty", &[], "Env", false).unwrap();
        sig.add_symbol("update", &["Id", "Int", "Env"], "Env", false).unwrap();
        sig.add_symbol("lookup", &["Id", "Env"], "Int", true).unwrap();
        sig.add_symbol("isInt", &["AE"], "Bool", true).unwrap();
        sig
    }

    #[test]
    fn sort_of_examples() {
        let sig = imp_like_sig();
        // plus(⟦3⟧, ⟦x⟧) : AE — here with a looked-up variable child
        let t = Term::app(
            "plus",
            vec![
                Term::app("intc", vec![Term::int(3, "Int")]),
                Term::app(
                    "intc",
                    vec![Term::app(
                        "lookup",
                        vec![Term::constant("x"), Term::constant("empty")],
                    )],
                ),
            ],
        );
        assert_eq!(sort_of(&t, &sig).unwrap(), "AE");
        let v = Term::var("n", "Int");
        assert_eq!(sort_of(&v, &sig).unwrap(), "Int");
        let u = Term::app(
            "update",
            vec![Term::constant("x"), Term::int(1, "Int"), Term::constant("empty")],
        );
        assert_eq!(sort_of(&u, &sig).unwrap(), "Env");
    }

    #[test]
    fn sort_of_rejects_ill_sorted() {
        let sig = imp_like_sig();
        let t = Term::app("update", vec![Term::int(1, "Int"), Term::int(1, "Int"), Term::constant("empty")]);
        assert!(matches!(sort_of(&t, &sig), Err(TermError::IllSorted(_))));
    }

    #[test]
    fn substitution_application() {
        let sig = counter_sig();
        let n = Variable::new("n", "Nat");
        let sub = Substitution::singleton(n.clone(), Term::int(5, "Nat"));
        let t = Term::app("-", vec![Term::Var(n), Term::int(1, "Nat")]);
        let r = sub.apply(&t);
        assert_eq!(r, Term::app("-", vec![Term::int(5, "Nat"), Term::int(1, "Nat")]));
        assert_eq!(evaluate_ground(&r, &sig).unwrap(), Term::int(4, "Nat"));
        // identity
        assert_eq!(Substitution::new().apply(&t), t);
    }

    #[test]
    fn substitution_counter_rule_body() {
        // σ = {s↦0, i↦n} applied to [s+i, i−1] gives [0+n, n−1]
        let mut sub = Substitution::new();
        sub.insert(Variable::new("s", "Nat"), Term::int(0, "Nat"));
        sub.insert(Variable::new("i", "Nat"), Term::var("n", "Nat"));
        let body = Term::app(
            "cfg",
            vec![
                Term::app("+", vec![Term::var("s", "Nat"), Term::var("i", "Nat")]),
                Term::app("-", vec![Term::var("i", "Nat"), Term::int(1, "Nat")]),
            ],
        );
        let expect = Term::app(
            "cfg",
            vec![
                Term::app("+", vec![Term::int(0, "Nat"), Term::var("n", "Nat")]),
                Term::app("-", vec![Term::var("n", "Nat"), Term::int(1, "Nat")]),
            ],
        );
        assert_eq!(sub.apply(&body), expect);
    }

    #[test]
    fn match_term_examples() {
        let lhs = Term::app("cfg", vec![Term::var("s", "Nat"), Term::var("i", "Nat")]);
        let subject = Term::app("cfg", vec![Term::int(0, "Nat"), Term::int(3, "Nat")]);
        let sub = match_term(&lhs, &subject).unwrap();
        assert_eq!(sub.get(&Variable::new("s", "Nat")), Some(&Term::int(0, "Nat")));
        assert_eq!(sub.get(&Variable::new("i", "Nat")), Some(&Term::int(3, "Nat")));
        assert_eq!(sub.apply(&lhs), subject);

        // symbol clash
        let other = Term::app("other", vec![]);
        assert!(match_term(&lhs, &other).is_none());

        // plus(⟦a⟧,⟦b⟧) against plus(⟦2⟧,⟦5⟧)
        let l = Term::app(
            "plus",
            vec![
                Term::app("intc", vec![Term::var("a", "Int")]),
                Term::app("intc", vec![Term::var("b", "Int")]),
            ],
        );
        let s = Term::app(
            "plus",
            vec![
                Term::app("intc", vec![Term::int(2, "Int")]),
                Term::app("intc", vec![Term::int(5, "Int")]),
            ],
        );
        let sub = match_term(&l, &s).unwrap();
        assert_eq!(sub.get(&Variable::new("a", "Int")), Some(&Term::int(2, "Int")));
        assert_eq!(sub.get(&Variable::new("b", "Int")), Some(&Term::int(5, "Int")));
    }

    #[test]
    fn unify_renaming_and_residuals() {
        let sig = counter_sig();
        let t1 = Term::app("cfg", vec![Term::var("s", "Nat"), Term::var("i", "Nat")]);
        let t2 = Term::app("cfg", vec![Term::var("S1", "Nat"), Term::var("I1", "Nat")]);
        let u = unify(&t1, &t2, &sig).unwrap();
        assert!(u.residual.is_empty());
        assert_eq!(u.subst.apply(&t1), u.subst.apply(&t2));

        // cfg(c, n) vs cfg(c, 0): variable-vs-literal at builtin sort becomes
        // a residual equality.
        let a = Term::app("cfg", vec![Term::var("c", "Nat"), Term::var("n", "Nat")]);
        let b = Term::app("cfg", vec![Term::var("c2", "Nat"), Term::int(0, "Nat")]);
        let u = unify(&a, &b, &sig).unwrap();
        assert_eq!(u.residual.len(), 1);
        let (l, r) = &u.residual[0];
        assert!(matches!(l, Term::Var(_)));
        assert_eq!(r.as_int(), Some(0));

        // literal clash at builtin sort
        let x = Term::int(3, "Nat");
        let y = Term::int(4, "Nat");
        assert!(unify(&x, &y, &sig).is_none());
    }

    #[test]
    fn unify_sort_clash() {
        let sig = imp_like_sig();
        let a = Term::int(3, "Int");
        let b = Term::boolean(true, "Bool");
        assert!(unify(&a, &b, &sig).is_none());
    }

    #[test]
    fn unify_occurs_check() {
        let sig = imp_like_sig();
        let v = Term::var("a", "AE");
        let t = Term::app("plus", vec![Term::var("a", "AE"), Term::app("intc", vec![Term::int(1, "Int")])]);
        assert!(unify(&v, &t, &sig).is_none());
    }

    #[test]
    fn evaluate_lookup_equations() {
        let sig = imp_like_sig();
        let empty = Term::constant("empty");
        let x = Term::constant("x");
        let y = Term::constant("y");
        // lookup(x, update(x, 5, empty)) = 5
        let env = Term::app("update", vec![x.clone(), Term::int(5, "Int"), empty.clone()]);
        let t = Term::app("lookup", vec![x.clone(), env.clone()]);
        assert_eq!(evaluate_ground(&t, &sig).unwrap(), Term::int(5, "Int"));
        // lookup(y, empty) = 0
        let t = Term::app("lookup", vec![y.clone(), empty.clone()]);
        assert_eq!(evaluate_ground(&t, &sig).unwrap(), Term::int(0, "Int"));
        // lookup(y, update(x, 5, update(y, 7, empty))) = 7
        let env2 = Term::app(
            "update",
            vec![
                x,
                Term::int(5, "Int"),
                Term::app("update", vec![y.clone(), Term::int(7, "Int"), empty]),
            ],
        );
        let t = Term::app("lookup", vec![y, env2]);
        assert_eq!(evaluate_ground(&t, &sig).unwrap(), Term::int(7, "Int"));
    }

    #[test]
    fn evaluate_arithmetic() {
        let sig = counter_sig();
        let t = Term::app("+", vec![Term::int(2, "Nat"), Term::int(3, "Nat")]);
        assert_eq!(evaluate_ground(&t, &sig).unwrap(), Term::int(5, "Nat"));
        let d = Term::app("/", vec![Term::int(7, "Nat"), Term::int(0, "Nat")]);
        assert_eq!(evaluate_ground(&d, &sig), Err(TermError::DivisionByZero));
        let u = Term::app("-", vec![Term::int(1, "Nat"), Term::int(2, "Nat")]);
        assert!(matches!(evaluate_ground(&u, &sig), Err(TermError::NatUnderflow(_))));
    }

    #[test]
    fn evaluate_is_congruence() {
        let sig = counter_sig();
        // evaluating children first then the parent equals one-shot evaluation
        let inner = Term::app("+", vec![Term::int(1, "Nat"), Term::int(2, "Nat")]);
        let outer = Term::app("*", vec![inner.clone(), Term::int(4, "Nat")]);
        let child_first = Term::app("*", vec![evaluate_ground(&inner, &sig).unwrap(), Term::int(4, "Nat")]);
        assert_eq!(
            evaluate_ground(&outer, &sig).unwrap(),
            evaluate_ground(&child_first, &sig).unwrap()
        );
    }

    #[test]
    fn is_int_recognizer() {
        let sig = imp_like_sig();
        let lit = Term::app("intc", vec![Term::int(3, "Int")]);
        assert!(is_injection_of(&lit, BuiltinSort::Int, &sig));
        let sum = Term::app("plus", vec![lit.clone(), lit.clone()]);
        assert!(!is_injection_of(&sum, BuiltinSort::Int, &sig));
        // isInt holds for an injection of any Int-sorted term, literal or not
        let sym = Term::app(
            "intc",
            vec![Term::app("lookup", vec![Term::constant("x"), Term::var("e", "Env")])],
        );
        assert!(is_injection_of(&sym, BuiltinSort::Int, &sig));
    }

    #[test]
    fn free_vars_and_fresh() {
        let t = Term::app(
            "cfg",
            vec![
                Term::app("+", vec![Term::var("s", "Nat"), Term::var("i", "Nat")]),
                Term::app("-", vec![Term::var("i", "Nat"), Term::int(1, "Nat")]),
            ],
        );
        let fv = free_vars(&t);
        assert_eq!(fv.len(), 2);
        assert!(fv.contains(&Variable::new("s", "Nat")));
        assert!(fv.contains(&Variable::new("i", "Nat")));
        assert!(free_vars(&Term::int(5, "Nat")).is_empty());

        let avoid: BTreeSet<Variable> = [Variable::new("n", "Nat")].into_iter().collect();
        assert_eq!(fresh_variable("n", "Nat", &avoid).name, "n0");
        assert_eq!(fresh_variable("m", "Nat", &avoid).name, "m");
    }

    #[test]
    fn substitution_normalization_idempotent() {
        let mut s = Substitution::new();
        s.insert(Variable::new("a", "Nat"), Term::var("b", "Nat"));
        s.insert(Variable::new("b", "Nat"), Term::int(3, "Nat"));
        let n = s.normalized().unwrap();
        assert_eq!(n.get(&Variable::new("a", "Nat")), Some(&Term::int(3, "Nat")));
    }
}
