//! Validity and satisfiability checking for structureless side conditions.
//!
//! The pipeline is: normalization (negation normal form, existential
//! stripping, disjunctive splitting) → a builtin decision procedure for
//! linear integer arithmetic (with equality substitution, constructor
//! decomposition, `abs` case splits, abstraction of uninterpreted numeric
//! subterms, and linearization of polynomial products) → an optional
//! external SMT-LIB solver → `Unknown`.
//!
//! Soundness discipline: `Unsat`/`Valid` answers come only from
//! over-approximating reasoning (dropping or weakening constraints never
//! happens on that path), and every `Sat`/`Invalid` witness is re-evaluated
//! against the original formula before being reported.

pub mod lia;
pub mod poly;
pub mod smtlib;

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;

use crate::pattern::{fol_holds, to_fol, Pattern};
use crate::solver::lia::{decide, Linearizer};
use crate::solver::poly::{LinAtom, Poly};
use crate::term::{
    builtin_ops, evaluate_ground, free_vars as term_free_vars, sort_of, BuiltinSort,
    GroundValuation, Signature, Substitution, Term, Variable,
};

/// Result of a backend query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverVerdict {
    Valid,
    Invalid(GroundValuation),
    Sat(GroundValuation),
    Unsat,
    Unknown(String),
}

impl SolverVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, SolverVerdict::Valid)
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolverVerdict::Unsat)
    }
}

/// Configuration for the external solver subprocess.
#[derive(Debug, Clone)]
pub struct ExternalConfig {
    /// Executable plus arguments, whitespace-separated.
    pub command: String,
    pub timeout: std::time::Duration,
}

/// A constraint backend handle.
#[derive(Debug, Clone, Default)]
pub struct Backend {
    pub external: Option<ExternalConfig>,
}

/// Cap on disjuncts produced by distribution.
const MAX_CONJUNCTS: usize = 512;
/// Recursion budget for nested case splits and quantifier instantiation.
const MAX_DEPTH: u32 = 6;

impl Backend {
    pub fn builtin_only() -> Backend {
        Backend { external: None }
    }

    pub fn with_external(command: &str, timeout: std::time::Duration) -> Backend {
        Backend {
            external: Some(ExternalConfig {
                command: command.to_string(),
                timeout,
            }),
        }
    }

    /// Satisfiability of the existential closure of a structureless pattern.
    pub fn check_sat(&self, f: &Pattern, sig: &Signature) -> SolverVerdict {
        let f = to_fol(f, sig.cfg_sort());
        match self.builtin_sat(&f, sig) {
            InternalResult::Unsat => SolverVerdict::Unsat,
            InternalResult::Sat(w) => match verify_witness(&w, &f, sig) {
                Some(true) => SolverVerdict::Sat(w),
                _ => self.external_sat(&f, sig, "builtin witness unverifiable"),
            },
            InternalResult::Unknown(r) => self.external_sat(&f, sig, &r),
        }
    }

    /// Validity of the universal closure of a structureless pattern.
    pub fn check_valid(&self, f: &Pattern, sig: &Signature) -> SolverVerdict {
        match self.check_sat(&Pattern::not(f.clone()), sig) {
            SolverVerdict::Unsat => SolverVerdict::Valid,
            SolverVerdict::Sat(w) => SolverVerdict::Invalid(w),
            SolverVerdict::Unknown(r) => SolverVerdict::Unknown(r),
            other => other,
        }
    }

    /// Validity of `hyp → concl`.
    pub fn implies(&self, hyp: &Pattern, concl: &Pattern, sig: &Signature) -> SolverVerdict {
        // Syntactic subsumption: `A → … ∨ ∃x̄.A ∨ …` needs no search. The
        // prover's Step midpoints contain each successor verbatim, and
        // negating the full disjunction splits far beyond the DNF budget.
        let mut disjuncts = vec![concl];
        let mut i = 0;
        while i < disjuncts.len() {
            if let Pattern::Or(a, b) = disjuncts[i] {
                disjuncts[i] = a;
                disjuncts.push(b);
            } else {
                i += 1;
            }
        }
        for d in disjuncts {
            let mut d = d;
            while let Pattern::Exists(_, inner) = d {
                d = inner;
            }
            if d == hyp {
                return SolverVerdict::Valid;
            }
        }
        self.check_valid(
            &Pattern::or(Pattern::not(hyp.clone()), concl.clone()),
            sig,
        )
    }

    fn external_sat(&self, f: &Pattern, sig: &Signature, builtin_reason: &str) -> SolverVerdict {
        let Some(cfg) = &self.external else {
            return SolverVerdict::Unknown(builtin_reason.to_string());
        };
        match smtlib::solve_external(cfg, f, sig) {
            SolverVerdict::Sat(w) => match verify_witness(&w, f, sig) {
                Some(true) => SolverVerdict::Sat(w),
                _ => SolverVerdict::Unknown("external model unverifiable".to_string()),
            },
            other => other,
        }
    }

    fn builtin_sat(&self, f: &Pattern, sig: &Signature) -> InternalResult {
        sat_search(f, sig, MAX_DEPTH)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum InternalResult {
    Sat(GroundValuation),
    Unsat,
    Unknown(String),
}

/// Re-evaluates a candidate witness against the original formula, completing
/// missing free variables with defaults. `None` when evaluation fails.
fn verify_witness(w: &GroundValuation, f: &Pattern, sig: &Signature) -> Option<bool> {
    let mut rho = w.clone();
    for v in f.free_vars() {
        if rho.get(&v).is_none() {
            rho.bind(v.clone(), default_ground_term(&v.sort, sig, 4)?);
        }
    }
    fol_holds(&rho, f, sig).ok()
}

/// A canonical ground inhabitant of a sort, used to complete partial
/// witnesses.
pub fn default_ground_term(sort: &str, sig: &Signature, depth: u32) -> Option<Term> {
    match sig.builtin_of(sort) {
        Some(BuiltinSort::Int) | Some(BuiltinSort::Nat) => Some(Term::int(0, sort)),
        Some(BuiltinSort::Bool) => Some(Term::boolean(false, sort)),
        None => {
            if depth == 0 {
                return None;
            }
            // Prefer nullary constructors, then shallow constructor terms.
            let mut candidates: Vec<_> = sig
                .symbols()
                .iter()
                .filter(|s| s.result_sort == sort && !s.interpreted)
                .collect();
            candidates.sort_by_key(|s| s.arg_sorts.len());
            for sym in candidates {
                let args: Option<Vec<Term>> = sym
                    .arg_sorts
                    .iter()
                    .map(|a| default_ground_term(a, sig, depth - 1))
                    .collect();
                if let Some(args) = args {
                    return Some(Term::app(&sym.name, args));
                }
            }
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Negation normal form
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum CmpOp {
    Eq,
    Ne,
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    fn negate(&self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
        }
    }

    /// The comparison seen from the other side: `c ⋈ v` as `v ⋈′ c`.
    fn flip(&self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Gt => CmpOp::Lt,
        }
    }

    fn of_symbol(name: &str) -> Option<CmpOp> {
        match name {
            "=" => Some(CmpOp::Eq),
            "<=" => Some(CmpOp::Le),
            "<" => Some(CmpOp::Lt),
            ">=" => Some(CmpOp::Ge),
            ">" => Some(CmpOp::Gt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lit {
    /// Numeric comparison (both sides of Int/Nat sort).
    Cmp { op: CmpOp, lhs: Term, rhs: Term },
    /// Equality between non-numeric terms.
    TermEq {
        lhs: Term,
        rhs: Term,
        positive: bool,
    },
    /// Any other Bool-sorted atom.
    Opaque { term: Term, positive: bool },
}

#[derive(Debug, Clone)]
enum Nf {
    Lit(Lit),
    And(Vec<Nf>),
    Or(Vec<Nf>),
    /// A universal obligation carried to the conjunct level for heuristic
    /// instantiation. The stored body is in positive orientation (the node
    /// means `∀vars. body`).
    Forall(Vec<Variable>, Pattern),
}

fn nf_true() -> Nf {
    Nf::And(Vec::new())
}

fn nf_false() -> Nf {
    Nf::Or(Vec::new())
}

fn nnf(
    p: &Pattern,
    positive: bool,
    avoid: &mut BTreeSet<Variable>,
    sig: &Signature,
) -> Nf {
    match p {
        Pattern::Basic(_) => {
            unreachable!("backend input is structureless (hole-translated)")
        }
        Pattern::Pred(t) => nnf_atom(t, positive, sig),
        Pattern::Eq(a, b) => nnf_eq(a, b, positive, sig),
        Pattern::And(x, y) => {
            let l = nnf(x, positive, avoid, sig);
            let r = nnf(y, positive, avoid, sig);
            if positive {
                Nf::And(vec![l, r])
            } else {
                Nf::Or(vec![l, r])
            }
        }
        Pattern::Or(x, y) => {
            let l = nnf(x, positive, avoid, sig);
            let r = nnf(y, positive, avoid, sig);
            if positive {
                Nf::Or(vec![l, r])
            } else {
                Nf::And(vec![l, r])
            }
        }
        Pattern::Not(x) => nnf(x, !positive, avoid, sig),
        Pattern::Exists(v, body) => {
            if positive {
                // Strip, renaming the bound variable apart.
                let fresh = crate::term::fresh_variable(&v.name, &v.sort, avoid);
                avoid.insert(fresh.clone());
                let renamed = body.rename_free(v, &fresh);
                let mut out = nnf(&renamed, true, avoid, sig);
                // Nat-sorted bound variables carry the implicit ≥ 0.
                if sig.builtin_of(&fresh.sort) == Some(BuiltinSort::Nat) {
                    out = Nf::And(vec![
                        out,
                        Nf::Lit(Lit::Cmp {
                            op: CmpOp::Ge,
                            lhs: Term::Var(fresh),
                            rhs: Term::int(0, &v.sort),
                        }),
                    ]);
                }
                out
            } else {
                // Rename the universal apart: conjunct-level substitutions
                // are applied under the binder and must not capture. The
                // body keeps its inner quantifiers as-is, so those are
                // renamed apart too.
                let fresh = crate::term::fresh_variable(&v.name, &v.sort, avoid);
                avoid.insert(fresh.clone());
                let renamed = body.rename_free(v, &fresh).rename_bound_apart(avoid);
                Nf::Forall(vec![fresh], Pattern::not(renamed))
            }
        }
        Pattern::Forall(v, body) => {
            if positive {
                let fresh = crate::term::fresh_variable(&v.name, &v.sort, avoid);
                avoid.insert(fresh.clone());
                let renamed = body.rename_free(v, &fresh).rename_bound_apart(avoid);
                Nf::Forall(vec![fresh], renamed)
            } else {
                // ¬∀v.b = ∃v.¬b
                let neg = Pattern::exists(v.clone(), Pattern::not((**body).clone()));
                nnf(&neg, true, avoid, sig)
            }
        }
    }
}

fn is_numeric_sort(sort: &str, sig: &Signature) -> bool {
    sig.builtin_of(sort).map_or(false, BuiltinSort::is_numeric)
}

fn nnf_atom(t: &Term, positive: bool, sig: &Signature) -> Nf {
    match t {
        Term::Bool { value, .. } => {
            if *value == positive {
                nf_true()
            } else {
                nf_false()
            }
        }
        Term::App { symbol, args } if symbol == builtin_ops::NOT && args.len() == 1 => {
            nnf_atom(&args[0], !positive, sig)
        }
        Term::App { symbol, args } if args.len() == 2 => {
            let numeric = sort_of(&args[0], sig)
                .map(|s| is_numeric_sort(&s, sig))
                .unwrap_or(false);
            match CmpOp::of_symbol(symbol) {
                Some(op) if numeric => {
                    let op = if positive { op } else { op.negate() };
                    Nf::Lit(Lit::Cmp {
                        op,
                        lhs: args[0].clone(),
                        rhs: args[1].clone(),
                    })
                }
                Some(op) if symbol == "=" => {
                    // Equality predicate over a non-numeric sort.
                    let _ = op;
                    Nf::Lit(Lit::TermEq {
                        lhs: args[0].clone(),
                        rhs: args[1].clone(),
                        positive,
                    })
                }
                _ => Nf::Lit(Lit::Opaque {
                    term: t.clone(),
                    positive,
                }),
            }
        }
        _ => Nf::Lit(Lit::Opaque {
            term: t.clone(),
            positive,
        }),
    }
}

fn nnf_eq(a: &Term, b: &Term, positive: bool, sig: &Signature) -> Nf {
    let numeric = sort_of(a, sig)
        .map(|s| is_numeric_sort(&s, sig))
        .unwrap_or(false);
    if numeric {
        return Nf::Lit(Lit::Cmp {
            op: if positive { CmpOp::Eq } else { CmpOp::Ne },
            lhs: a.clone(),
            rhs: b.clone(),
        });
    }
    let boolean = sort_of(a, sig)
        .map(|s| sig.builtin_of(&s) == Some(BuiltinSort::Bool))
        .unwrap_or(false);
    if boolean {
        // b = true / b = false collapse to the predicate itself; a general
        // Bool equality expands to a biconditional.
        if let Some(v) = b.as_bool() {
            return nnf_atom(a, positive == v, sig);
        }
        if let Some(v) = a.as_bool() {
            return nnf_atom(b, positive == v, sig);
        }
        let pa = nnf_atom(a, true, sig);
        let na = nnf_atom(a, false, sig);
        let pb = nnf_atom(b, true, sig);
        let nb = nnf_atom(b, false, sig);
        return if positive {
            Nf::Or(vec![Nf::And(vec![pa, pb]), Nf::And(vec![na, nb])])
        } else {
            Nf::Or(vec![
                Nf::And(vec![pa.clone(), nb.clone()]),
                Nf::And(vec![na, pb]),
            ])
        };
    }
    Nf::Lit(Lit::TermEq {
        lhs: a.clone(),
        rhs: b.clone(),
        positive,
    })
}

// ---------------------------------------------------------------------------
// Disjunctive splitting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
struct Conjunct {
    lits: Vec<Lit>,
    foralls: Vec<(Vec<Variable>, Pattern)>,
}

fn dnf(nf: &Nf) -> Option<Vec<Conjunct>> {
    let out = match nf {
        Nf::Lit(l) => vec![Conjunct {
            lits: vec![l.clone()],
            foralls: Vec::new(),
        }],
        Nf::Forall(vs, body) => vec![Conjunct {
            lits: Vec::new(),
            foralls: vec![(vs.clone(), body.clone())],
        }],
        Nf::Or(parts) => {
            let mut out = Vec::new();
            for p in parts {
                out.extend(dnf(p)?);
                if out.len() > MAX_CONJUNCTS {
                    return None;
                }
            }
            out
        }
        Nf::And(parts) => {
            let mut out = vec![Conjunct::default()];
            for p in parts {
                let sub = dnf(p)?;
                let mut next = Vec::new();
                for c in &out {
                    for s in &sub {
                        let mut merged = c.clone();
                        merged.lits.extend(s.lits.iter().cloned());
                        merged.foralls.extend(s.foralls.iter().cloned());
                        next.push(merged);
                    }
                }
                if next.len() > MAX_CONJUNCTS {
                    return None;
                }
                out = next;
            }
            out
        }
    };
    Some(out)
}

// ---------------------------------------------------------------------------
// Conjunct decision
// ---------------------------------------------------------------------------

fn sat_search(f: &Pattern, sig: &Signature, depth: u32) -> InternalResult {
    if depth == 0 {
        return InternalResult::Unknown("recursion budget exhausted".to_string());
    }
    // Implicit Nat bounds for free variables.
    let free = f.free_vars();
    let f_aug = Pattern::and(
        f.clone(),
        crate::pattern::nat_bounds(free.iter().cloned(), sig),
    );
    let mut avoid = f_aug.all_vars();
    let nf = nnf(&f_aug, true, &mut avoid, sig);
    let Some(conjuncts) = dnf(&nf) else {
        return InternalResult::Unknown("disjunctive splitting blow-up".to_string());
    };
    let mut unknown: Option<String> = None;
    for cj in &conjuncts {
        match conjunct_sat(cj, sig, depth) {
            InternalResult::Sat(w) => return InternalResult::Sat(w),
            InternalResult::Unsat => {}
            InternalResult::Unknown(r) => unknown = Some(r),
        }
    }
    match unknown {
        None => InternalResult::Unsat,
        Some(r) => InternalResult::Unknown(r),
    }
}

fn conjunct_sat(cj: &Conjunct, sig: &Signature, depth: u32) -> InternalResult {
    // 1. abs elimination: case-split the first abs application found.
    if let Some(arg) = cj.lits.iter().find_map(find_abs) {
        if depth == 0 {
            return InternalResult::Unknown("abs split budget exhausted".to_string());
        }
        let int_sort = sort_of(&arg, sig).unwrap_or_else(|_| "Int".to_string());
        let neg_arg = Term::app("-", vec![Term::int(0, &int_sort), arg.clone()]);
        let mut nonneg = cj.clone();
        replace_abs(&mut nonneg, &arg, &arg);
        nonneg.lits.push(Lit::Cmp {
            op: CmpOp::Ge,
            lhs: arg.clone(),
            rhs: Term::int(0, &int_sort),
        });
        let mut negcase = cj.clone();
        replace_abs(&mut negcase, &arg, &neg_arg);
        negcase.lits.push(Lit::Cmp {
            op: CmpOp::Lt,
            lhs: arg.clone(),
            rhs: Term::int(0, &int_sort),
        });
        return or_results(
            conjunct_sat(&nonneg, sig, depth - 1),
            |_| conjunct_sat(&negcase, sig, depth - 1),
        );
    }
    // 2. Disequality split: a ≠ b over numerics becomes a < b ∨ a > b.
    if let Some(idx) = cj
        .lits
        .iter()
        .position(|l| matches!(l, Lit::Cmp { op: CmpOp::Ne, .. }))
    {
        if depth == 0 {
            return InternalResult::Unknown("split budget exhausted".to_string());
        }
        let Lit::Cmp { lhs, rhs, .. } = cj.lits[idx].clone() else {
            unreachable!()
        };
        let mut less = cj.clone();
        less.lits[idx] = Lit::Cmp {
            op: CmpOp::Lt,
            lhs: lhs.clone(),
            rhs: rhs.clone(),
        };
        let mut greater = cj.clone();
        greater.lits[idx] = Lit::Cmp {
            op: CmpOp::Gt,
            lhs,
            rhs,
        };
        return or_results(conjunct_sat(&less, sig, depth - 1), |_| {
            conjunct_sat(&greater, sig, depth - 1)
        });
    }
    decide_flat_conjunct(cj, sig, depth)
}

fn or_results(
    first: InternalResult,
    second: impl FnOnce(&InternalResult) -> InternalResult,
) -> InternalResult {
    match first {
        InternalResult::Sat(w) => InternalResult::Sat(w),
        other => match second(&other) {
            InternalResult::Sat(w) => InternalResult::Sat(w),
            InternalResult::Unsat => match other {
                InternalResult::Unsat => InternalResult::Unsat,
                InternalResult::Unknown(r) => InternalResult::Unknown(r),
                InternalResult::Sat(_) => unreachable!(),
            },
            InternalResult::Unknown(r) => InternalResult::Unknown(r),
        },
    }
}

fn find_abs(l: &Lit) -> Option<Term> {
    fn in_term(t: &Term) -> Option<Term> {
        match t {
            Term::App { symbol, args } if symbol == builtin_ops::ABS && args.len() == 1 => {
                // innermost first
                in_term(&args[0]).or_else(|| Some(args[0].clone()))
            }
            Term::App { args, .. } => args.iter().find_map(in_term),
            _ => None,
        }
    }
    match l {
        Lit::Cmp { lhs, rhs, .. } => in_term(lhs).or_else(|| in_term(rhs)),
        Lit::TermEq { lhs, rhs, .. } => in_term(lhs).or_else(|| in_term(rhs)),
        Lit::Opaque { term, .. } => in_term(term),
    }
}

/// Replaces `abs(arg)` by `replacement` in every literal.
fn replace_abs(cj: &mut Conjunct, arg: &Term, replacement: &Term) {
    fn in_term(t: &Term, arg: &Term, rep: &Term) -> Term {
        match t {
            Term::App { symbol, args }
                if symbol == builtin_ops::ABS && args.len() == 1 && &args[0] == arg =>
            {
                rep.clone()
            }
            Term::App { symbol, args } => Term::App {
                symbol: symbol.clone(),
                args: args.iter().map(|a| in_term(a, arg, rep)).collect(),
            },
            _ => t.clone(),
        }
    }
    for l in &mut cj.lits {
        match l {
            Lit::Cmp { lhs, rhs, .. } | Lit::TermEq { lhs, rhs, .. } => {
                *lhs = in_term(lhs, arg, replacement);
                *rhs = in_term(rhs, arg, replacement);
            }
            Lit::Opaque { term, .. } => *term = in_term(term, arg, replacement),
        }
    }
}

fn decide_flat_conjunct(cj: &Conjunct, sig: &Signature, depth: u32) -> InternalResult {
    let mut lits = cj.lits.clone();
    let mut foralls = cj.foralls.clone();
    // Ordered eliminations for witness reconstruction.
    let mut bindings: Vec<(Variable, Term)> = Vec::new();

    // Simplification fixpoint: ground folding, constructor decomposition,
    // equality substitution, recognizer evaluation.
    let mut changed = true;
    let mut guard = 0;
    while changed {
        changed = false;
        guard += 1;
        if guard > 200 {
            return InternalResult::Unknown("simplification did not converge".to_string());
        }
        let mut next: Vec<Lit> = Vec::new();
        let mut pending_sub: Option<(Variable, Term)> = None;
        for (i, l) in lits.iter().enumerate() {
            match simplify_lit(l, sig) {
                LitStep::True => {
                    changed = true;
                }
                LitStep::False => return InternalResult::Unsat,
                LitStep::Keep(l2) => {
                    if l2 != *l {
                        changed = true;
                    }
                    next.push(l2);
                }
                LitStep::Replace(ls) => {
                    changed = true;
                    next.extend(ls);
                }
                LitStep::Substitute(v, t) => {
                    changed = true;
                    pending_sub = Some((v, t));
                    // keep the remaining literals untouched; substitution is
                    // applied below
                    next.extend(lits[i + 1..].iter().cloned());
                    break;
                }
            }
        }
        lits = next;
        if let Some((v, t)) = pending_sub {
            let sub = Substitution::singleton(v.clone(), t.clone());
            for l in &mut lits {
                apply_sub_lit(l, &sub);
            }
            for (_, body) in &mut foralls {
                *body = body.apply_substitution(&sub);
            }
            for (_, img) in &mut bindings {
                *img = sub.apply(img);
            }
            bindings.push((v, t));
        }
        // Bound pinning: matching lower and upper bounds fix a variable to
        // a constant, which unblocks structural simplification.
        if !changed {
            if let Some((v, c)) = pin_equal_bounds(&lits, sig) {
                let t = Term::int(c, &v.sort);
                let sub = Substitution::singleton(v.clone(), t.clone());
                for l in &mut lits {
                    apply_sub_lit(l, &sub);
                }
                for (_, body) in &mut foralls {
                    *body = body.apply_substitution(&sub);
                }
                for (_, img) in &mut bindings {
                    *img = sub.apply(img);
                }
                bindings.push((v, t));
                changed = true;
            }
        }
        // Term pinning: an interpreted term equated to a constant is
        // replaced everywhere (the equality itself then folds to true).
        if !changed {
            if let Some((t, c)) = pin_equal_term(&lits) {
                for l in &mut lits {
                    replace_term_lit(l, &t, &c);
                }
                for (_, body) in &mut foralls {
                    *body = replace_term_pattern(body, &t, &c);
                }
                for (_, img) in &mut bindings {
                    *img = replace_term(img, &t, &c);
                }
                changed = true;
            }
        }
    }

    // Disequalities reintroduced by constructor decomposition go back
    // through the split phase.
    if lits
        .iter()
        .any(|l| matches!(l, Lit::Cmp { op: CmpOp::Ne, .. }))
    {
        if depth == 0 {
            return InternalResult::Unknown("split budget exhausted".to_string());
        }
        let again = Conjunct {
            lits,
            foralls,
        };
        return match conjunct_sat(&again, sig, depth - 1) {
            InternalResult::Sat(w) => InternalResult::Sat(reconstruct(w, &bindings, sig)),
            other => other,
        };
    }

    // Opaque complementary pairs.
    for (i, a) in lits.iter().enumerate() {
        if let Lit::Opaque { term, positive } = a {
            for b in &lits[i + 1..] {
                if let Lit::Opaque {
                    term: t2,
                    positive: p2,
                } = b
                {
                    if term == t2 && positive != p2 {
                        return InternalResult::Unsat;
                    }
                }
            }
        }
        if let Lit::TermEq { lhs, rhs, positive } = a {
            for b in &lits[i + 1..] {
                if let Lit::TermEq {
                    lhs: l2,
                    rhs: r2,
                    positive: p2,
                } = b
                {
                    let same = (lhs == l2 && rhs == r2) || (lhs == r2 && rhs == l2);
                    if same && positive != p2 {
                        return InternalResult::Unsat;
                    }
                }
            }
        }
    }

    // Universal obligations: instantiate heuristically, then re-run the
    // strengthened problem. Dropping a universal keeps Unsat sound; found
    // instances only strengthen, which also keeps Unsat sound.
    if !foralls.is_empty() {
        let mut equalities = conjunct_equalities(&lits);
        // Equalities consumed by substitution still anchor instantiation.
        for (v, t) in &bindings {
            equalities.push((Term::Var(v.clone()), t.clone()));
        }
        let mut instances: Vec<Pattern> = Vec::new();
        for (vars, body) in &foralls {
            for inst in instantiate_forall(vars, body, &equalities) {
                instances.push(inst);
            }
        }
        if !instances.is_empty() {
            let mut base = lits_to_pattern(&lits);
            // Re-assert consumed bindings: inner instantiation rounds need
            // the same anchors this round had.
            for (v, t) in &bindings {
                base = Pattern::and(base, Pattern::Eq(Term::Var(v.clone()), t.clone()));
            }
            let combined = Pattern::and(base, Pattern::conj(instances));
            // The recursive search no longer carries the universal: a Sat
            // candidate is only a candidate (verified by the caller).
            return match sat_search(&combined, sig, depth - 1) {
                InternalResult::Unsat => InternalResult::Unsat,
                InternalResult::Sat(w) => {
                    InternalResult::Sat(reconstruct(w, &bindings, sig))
                }
                InternalResult::Unknown(r) => InternalResult::Unknown(r),
            };
        }
        // No instances found: decide without the universal; a Sat candidate
        // must survive the caller's verification against the full formula.
    }

    // Numeric core.
    let mut abstraction: BTreeMap<Term, Variable> = BTreeMap::new();
    let mut atoms: Vec<LinAtom> = Vec::new();
    let mut has_opaque = false;
    for l in &lits {
        match l {
            Lit::Cmp { op, lhs, rhs } => {
                let (Some(pl), Some(pr)) = (
                    term_to_poly(lhs, sig, &mut abstraction),
                    term_to_poly(rhs, sig, &mut abstraction),
                ) else {
                    has_opaque = true;
                    continue;
                };
                let p = pl.sub(&pr).cleared();
                match op {
                    CmpOp::Eq => atoms.push(LinAtom::eq(p)),
                    CmpOp::Ge => atoms.push(LinAtom::ge(p)),
                    CmpOp::Gt => atoms.push(LinAtom::ge(p.sub(&Poly::from_int(1)))),
                    CmpOp::Le => atoms.push(LinAtom::ge(p.neg())),
                    CmpOp::Lt => {
                        atoms.push(LinAtom::ge(p.neg().sub(&Poly::from_int(1))))
                    }
                    CmpOp::Ne => unreachable!("split earlier"),
                }
            }
            Lit::TermEq { .. } | Lit::Opaque { .. } => has_opaque = true,
        }
    }
    // Nat nonnegativity for every variable (original or abstraction) of Nat
    // sort appearing in the atoms.
    let mut nonneg: BTreeSet<Variable> = BTreeSet::new();
    for a in &atoms {
        for v in a.poly.variables() {
            if sig.builtin_of(&v.sort) == Some(BuiltinSort::Nat) {
                nonneg.insert(v.clone());
            }
        }
    }
    for v in &nonneg {
        atoms.push(LinAtom::ge(Poly::var(v.clone())));
    }
    // Linearize products.
    let mut linz = Linearizer::new();
    let mut lin_atoms: Vec<LinAtom> = atoms
        .iter()
        .map(|a| LinAtom {
            poly: linz.linearize(&a.poly),
            rel: a.rel,
        })
        .collect();
    lin_atoms.extend(linz.axioms(&nonneg));

    match decide(&lin_atoms) {
        lia::LiaResult::Unsat => InternalResult::Unsat,
        lia::LiaResult::Unknown(r) => InternalResult::Unknown(r),
        lia::LiaResult::Sat(env) => {
            if has_opaque || !foralls.is_empty() || !abstraction.is_empty() || !linz.is_empty()
            {
                // Candidate only; the caller verifies. Synthetic variables
                // are dropped from the reported valuation.
            }
            let mut w = GroundValuation::new();
            for (v, val) in &env {
                if v.name.starts_with("·") {
                    continue;
                }
                let val = if sig.builtin_of(&v.sort) == Some(BuiltinSort::Nat) && *val < 0 {
                    0
                } else {
                    *val
                };
                w.bind(v.clone(), Term::int(clamp_i64(val), &v.sort));
            }
            // Bool variables appearing as opaque literals.
            for l in &lits {
                if let Lit::Opaque {
                    term: Term::Var(v),
                    positive,
                } = l
                {
                    if w.get(v).is_none() {
                        w.bind(v.clone(), Term::boolean(*positive, &v.sort));
                    }
                }
            }
            InternalResult::Sat(reconstruct(w, &bindings, sig))
        }
    }
}

fn clamp_i64(v: i128) -> i64 {
    v.clamp(i64::MIN as i128, i64::MAX as i128) as i64
}

/// Restores variables eliminated by equality substitution: evaluated in
/// reverse elimination order so later bindings are available.
fn reconstruct(
    mut w: GroundValuation,
    bindings: &[(Variable, Term)],
    sig: &Signature,
) -> GroundValuation {
    for (v, t) in bindings.iter().rev() {
        if w.get(v).is_some() {
            continue;
        }
        let mut grounded = t.clone();
        // Substitute already-known values, default the rest.
        for fv in term_free_vars(t) {
            let value = w
                .get(&fv)
                .cloned()
                .or_else(|| default_ground_term(&fv.sort, sig, 4));
            if let Some(value) = value {
                grounded = Substitution::singleton(fv, value).apply(&grounded);
            }
        }
        if let Ok(gv) = evaluate_ground(&grounded, sig) {
            w.bind(v.clone(), gv);
        }
    }
    w
}

enum LitStep {
    True,
    False,
    Keep(Lit),
    Replace(Vec<Lit>),
    Substitute(Variable, Term),
}

fn simplify_lit(l: &Lit, sig: &Signature) -> LitStep {
    // Ground literals evaluate outright.
    let ground_value = |t: &Term| -> Option<Term> {
        if t.is_ground() {
            evaluate_ground(t, sig).ok()
        } else {
            None
        }
    };
    match l {
        Lit::Cmp { op, lhs, rhs } => {
            let lhs = partial_eval(lhs, sig);
            let rhs = partial_eval(rhs, sig);
            if let (Some(a), Some(b)) = (
                ground_value(&lhs).and_then(|t| t.as_int()),
                ground_value(&rhs).and_then(|t| t.as_int()),
            ) {
                let holds = match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    CmpOp::Le => a <= b,
                    CmpOp::Lt => a < b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Gt => a > b,
                };
                return if holds { LitStep::True } else { LitStep::False };
            }
            // Equality substitution: v = t with v not in t.
            if *op == CmpOp::Eq {
                for (a, b) in [(&lhs, &rhs), (&rhs, &lhs)] {
                    if let Term::Var(v) = a {
                        if !term_free_vars(b).contains(v) {
                            return LitStep::Substitute(v.clone(), (*b).clone());
                        }
                    }
                }
            }
            LitStep::Keep(Lit::Cmp {
                op: op.clone(),
                lhs,
                rhs,
            })
        }
        Lit::TermEq { lhs, rhs, positive } => {
            let lhs = partial_eval(lhs, sig);
            let rhs = partial_eval(rhs, sig);
            if lhs == rhs {
                return if *positive { LitStep::True } else { LitStep::False };
            }
            let free_head = |t: &Term| -> Option<(String, Vec<Term>)> {
                if let Term::App { symbol, args } = t {
                    let interpreted = sig
                        .symbols_named(symbol)
                        .any(|s| s.interpreted);
                    if !interpreted {
                        return Some((symbol.clone(), args.clone()));
                    }
                }
                None
            };
            match (free_head(&lhs), free_head(&rhs)) {
                (Some((f, fa)), Some((g, ga))) => {
                    if f != g || fa.len() != ga.len() {
                        return if *positive { LitStep::False } else { LitStep::True };
                    }
                    if *positive {
                        // decompose into argument equalities
                        let mut out = Vec::new();
                        for (x, y) in fa.iter().zip(&ga) {
                            out.push(eq_lit(x, y, true, sig));
                        }
                        return LitStep::Replace(out);
                    }
                    // Negative same-constructor: when exactly one argument
                    // pair differs the disequality localizes there; more
                    // than one would need a disjunctive split.
                    let diffs: Vec<(&Term, &Term)> =
                        fa.iter().zip(&ga).filter(|(x, y)| *x != *y).collect();
                    match diffs.len() {
                        0 => return LitStep::False,
                        1 => {
                            return LitStep::Replace(vec![eq_lit(
                                diffs[0].0, diffs[0].1, false, sig,
                            )])
                        }
                        _ => {}
                    }
                }
                _ => {}
            }
            if *positive {
                for (a, b) in [(&lhs, &rhs), (&rhs, &lhs)] {
                    if let Term::Var(v) = a {
                        if term_free_vars(b).contains(v) {
                            // occurs in a constructor context: no finite
                            // solution
                            if free_head(b).is_some() {
                                return LitStep::False;
                            }
                        } else {
                            return LitStep::Substitute(v.clone(), (*b).clone());
                        }
                    }
                }
            }
            LitStep::Keep(Lit::TermEq {
                lhs,
                rhs,
                positive: *positive,
            })
        }
        Lit::Opaque { term, positive } => {
            let term = partial_eval(term, sig);
            if let Some(v) = ground_value(&term).and_then(|t| t.as_bool()) {
                return if v == *positive { LitStep::True } else { LitStep::False };
            }
            // Structural recognizers decide on constructor heads.
            if let Term::App { symbol, args } = &term {
                if args.len() == 1 {
                    let builtin = match symbol.as_str() {
                        builtin_ops::IS_INT => Some(BuiltinSort::Int),
                        builtin_ops::IS_BOOL => Some(BuiltinSort::Bool),
                        _ => None,
                    };
                    if let Some(b) = builtin {
                        if let Term::App { .. } = &args[0] {
                            let holds = crate::term::is_injection_of(&args[0], b, sig);
                            return if holds == *positive {
                                LitStep::True
                            } else {
                                LitStep::False
                            };
                        }
                    }
                }
            }
            LitStep::Keep(Lit::Opaque {
                term,
                positive: *positive,
            })
        }
    }
}

fn eq_lit(a: &Term, b: &Term, positive: bool, sig: &Signature) -> Lit {
    let numeric = sort_of(a, sig)
        .map(|s| is_numeric_sort(&s, sig))
        .unwrap_or(false);
    if numeric {
        Lit::Cmp {
            op: if positive { CmpOp::Eq } else { CmpOp::Ne },
            lhs: a.clone(),
            rhs: b.clone(),
        }
    } else {
        Lit::TermEq {
            lhs: a.clone(),
            rhs: b.clone(),
            positive,
        }
    }
}

/// Evaluates ground subterms in place (constant folding).
fn partial_eval(t: &Term, sig: &Signature) -> Term {
    if t.is_ground() {
        if let Ok(v) = evaluate_ground(t, sig) {
            return v;
        }
    }
    match t {
        Term::App { symbol, args } => {
            let args: Vec<Term> = args.iter().map(|a| partial_eval(a, sig)).collect();
            // lookup on a partially symbolic environment still reduces when
            // the key is syntactically decided
            if symbol == builtin_ops::LOOKUP && args.len() == 2 {
                if let Some(r) = symbolic_lookup(&args[0], &args[1]) {
                    return r;
                }
            }
            Term::App {
                symbol: symbol.clone(),
                args,
            }
        }
        _ => t.clone(),
    }
}

/// `lookup(k, update(k', v, env))`: strips entries with a key syntactically
/// different from `k` only when both keys are ground constructor terms;
/// returns the value on an exact syntactic key hit.
fn symbolic_lookup(key: &Term, env: &Term) -> Option<Term> {
    let mut env = env;
    let mut stripped = false;
    loop {
        match env {
            Term::App { args, .. } if args.len() == 3 => {
                if &args[0] == key {
                    return Some(args[1].clone());
                }
                if args[0].is_ground() && key.is_ground() {
                    env = &args[2];
                    stripped = true;
                } else {
                    break;
                }
            }
            _ => break,
        }
    }
    // A symbolic tail: keep the lookup, minus the entries ruled out.
    if stripped {
        Some(Term::app(
            builtin_ops::LOOKUP,
            vec![key.clone(), env.clone()],
        ))
    } else {
        None
    }
}

fn apply_sub_lit(l: &mut Lit, sub: &Substitution) {
    match l {
        Lit::Cmp { lhs, rhs, .. } | Lit::TermEq { lhs, rhs, .. } => {
            *lhs = sub.apply(lhs);
            *rhs = sub.apply(rhs);
        }
        Lit::Opaque { term, .. } => *term = sub.apply(term),
    }
}

fn lits_to_pattern(lits: &[Lit]) -> Pattern {
    Pattern::conj(lits.iter().map(|l| match l {
        Lit::Cmp { op, lhs, rhs } => {
            let sym = match op {
                CmpOp::Eq => "=",
                CmpOp::Le => "<=",
                CmpOp::Lt => "<",
                CmpOp::Ge => ">=",
                CmpOp::Gt => ">",
                CmpOp::Ne => {
                    return Pattern::not(Pattern::Eq(lhs.clone(), rhs.clone()));
                }
            };
            Pattern::Pred(Term::app(sym, vec![lhs.clone(), rhs.clone()]))
        }
        Lit::TermEq { lhs, rhs, positive } => {
            let eq = Pattern::Eq(lhs.clone(), rhs.clone());
            if *positive {
                eq
            } else {
                Pattern::not(eq)
            }
        }
        Lit::Opaque { term, positive } => {
            let p = Pattern::Pred(term.clone());
            if *positive {
                p
            } else {
                Pattern::not(p)
            }
        }
    }))
}

/// Finds a variable whose comparison literals against integer constants pin
/// it to a single value (greatest lower bound equals least upper bound).
/// Nat-sorted variables carry an implicit lower bound of zero.
fn pin_equal_bounds(lits: &[Lit], sig: &Signature) -> Option<(Variable, i64)> {
    let mut lo: BTreeMap<Variable, i64> = BTreeMap::new();
    let mut hi: BTreeMap<Variable, i64> = BTreeMap::new();
    let mut seen: Vec<Variable> = Vec::new();
    for l in lits {
        let Lit::Cmp { op, lhs, rhs } = l else { continue };
        let (v, c, op) = match (lhs, rhs) {
            (Term::Var(v), t) => match t.as_int() {
                Some(c) => (v, c, op.clone()),
                None => continue,
            },
            (t, Term::Var(v)) => match t.as_int() {
                Some(c) => (v, c, op.flip()),
                None => continue,
            },
            _ => continue,
        };
        if !seen.contains(v) {
            seen.push(v.clone());
            if sig.builtin_of(&v.sort) == Some(BuiltinSort::Nat) {
                lo.insert(v.clone(), 0);
            }
        }
        let (bound, upper) = match op {
            CmpOp::Ge => (c, false),
            CmpOp::Gt => (c.checked_add(1)?, false),
            CmpOp::Le => (c, true),
            CmpOp::Lt => (c.checked_sub(1)?, true),
            CmpOp::Eq | CmpOp::Ne => continue,
        };
        if upper {
            hi.entry(v.clone())
                .and_modify(|b| *b = (*b).min(bound))
                .or_insert(bound);
        } else {
            lo.entry(v.clone())
                .and_modify(|b| *b = (*b).max(bound))
                .or_insert(bound);
        }
    }
    for v in &seen {
        if let (Some(l), Some(h)) = (lo.get(v), hi.get(v)) {
            if l == h {
                return Some((v.clone(), *l));
            }
        }
    }
    None
}

/// An equality literal pinning a compound term to an integer constant, e.g.
/// `lookup(m, env) = 0`. Substituting the term everywhere links occurrences
/// buried inside nonlinear contexts that the polynomial abstraction would
/// otherwise treat as unrelated.
fn pin_equal_term(lits: &[Lit]) -> Option<(Term, Term)> {
    for l in lits {
        let Lit::Cmp {
            op: CmpOp::Eq,
            lhs,
            rhs,
        } = l
        else {
            continue;
        };
        for (t, c) in [(lhs, rhs), (rhs, lhs)] {
            if matches!(t, Term::App { .. }) && matches!(c, Term::Int { .. }) {
                return Some((t.clone(), c.clone()));
            }
        }
    }
    None
}

/// Replaces every occurrence of `from` (as a subterm) by `to`.
fn replace_term(t: &Term, from: &Term, to: &Term) -> Term {
    if t == from {
        return to.clone();
    }
    match t {
        Term::App { symbol, args } => Term::App {
            symbol: symbol.clone(),
            args: args.iter().map(|a| replace_term(a, from, to)).collect(),
        },
        _ => t.clone(),
    }
}

fn replace_term_lit(l: &mut Lit, from: &Term, to: &Term) {
    match l {
        Lit::Cmp { lhs, rhs, .. } => {
            *lhs = replace_term(lhs, from, to);
            *rhs = replace_term(rhs, from, to);
        }
        Lit::TermEq { lhs, rhs, .. } => {
            *lhs = replace_term(lhs, from, to);
            *rhs = replace_term(rhs, from, to);
        }
        Lit::Opaque { term, .. } => *term = replace_term(term, from, to),
    }
}

/// Term replacement under the connectives. Bound variables cannot capture:
/// quantified variables are renamed apart from all free variables before
/// the conjunct stage.
fn replace_term_pattern(p: &Pattern, from: &Term, to: &Term) -> Pattern {
    match p {
        Pattern::Basic(t) => Pattern::Basic(replace_term(t, from, to)),
        Pattern::Pred(t) => Pattern::Pred(replace_term(t, from, to)),
        Pattern::Eq(a, b) => {
            Pattern::Eq(replace_term(a, from, to), replace_term(b, from, to))
        }
        Pattern::And(a, b) => Pattern::And(
            Box::new(replace_term_pattern(a, from, to)),
            Box::new(replace_term_pattern(b, from, to)),
        ),
        Pattern::Or(a, b) => Pattern::Or(
            Box::new(replace_term_pattern(a, from, to)),
            Box::new(replace_term_pattern(b, from, to)),
        ),
        Pattern::Not(a) => Pattern::Not(Box::new(replace_term_pattern(a, from, to))),
        Pattern::Exists(v, a) => {
            Pattern::Exists(v.clone(), Box::new(replace_term_pattern(a, from, to)))
        }
        Pattern::Forall(v, a) => {
            Pattern::Forall(v.clone(), Box::new(replace_term_pattern(a, from, to)))
        }
    }
}

/// Equality pairs available for quantifier instantiation.
fn conjunct_equalities(lits: &[Lit]) -> Vec<(Term, Term)> {
    let mut out = Vec::new();
    for l in lits {
        match l {
            Lit::Cmp {
                op: CmpOp::Eq,
                lhs,
                rhs,
            } => out.push((lhs.clone(), rhs.clone())),
            Lit::TermEq {
                lhs,
                rhs,
                positive: true,
            } => out.push((lhs.clone(), rhs.clone())),
            _ => {}
        }
    }
    out
}

/// Heuristic instantiation of `∀vars.body`: matches equality atoms inside
/// the body against the conjunct's equalities, treating only `vars` as
/// bindable, and returns the resulting instances of `body`.
fn instantiate_forall(
    vars: &[Variable],
    body: &Pattern,
    equalities: &[(Term, Term)],
) -> Vec<Pattern> {
    let bindable: BTreeSet<Variable> = vars.iter().cloned().collect();
    let mut body_eqs: Vec<(Term, Term)> = Vec::new();
    collect_pattern_equalities(body, &mut body_eqs);
    let mut subs: Vec<Substitution> = Vec::new();
    // A body equality with one decided side instantiates itself (e.g.
    // `k = 5` after substitution pinned the other side).
    for (ba, bb) in &body_eqs {
        for (ta, tb) in [(ba, bb), (bb, ba)] {
            let mut sub = Substitution::new();
            if term_free_vars(tb).is_disjoint(&bindable)
                && match_bindable(ta, tb, &bindable, &mut sub)
                && !sub.is_empty()
            {
                subs.push(sub);
            }
        }
    }
    for (ba, bb) in &body_eqs {
        for (ca, cb) in equalities {
            for (ta, tb) in [(ba, bb), (bb, ba)] {
                let mut sub = Substitution::new();
                if match_bindable(ta, ca, &bindable, &mut sub)
                    && match_bindable(tb, cb, &bindable, &mut sub)
                    && !sub.is_empty()
                {
                    subs.push(sub);
                }
            }
        }
    }
    // Lenient fallback: when no exact match exists, collect bindings from
    // the positions that do agree structurally. Any instance of a universal
    // keeps unsatisfiability sound, so a heuristic guess costs nothing.
    if subs.is_empty() {
        for (ba, bb) in &body_eqs {
            for (ca, cb) in equalities {
                for (ta, tb) in [(ba, bb), (bb, ba)] {
                    let mut sub = Substitution::new();
                    lenient_match(ta, ca, &bindable, &mut sub);
                    lenient_match(tb, cb, &bindable, &mut sub);
                    if !sub.is_empty() {
                        subs.push(sub);
                    }
                }
            }
        }
    }
    subs.sort_by_key(|s| format!("{s:?}"));
    subs.dedup();
    subs.truncate(8);
    subs.iter().map(|s| body.apply_substitution(s)).collect()
}

/// Best-effort matching: binds template variables wherever the surrounding
/// structure agrees, ignoring positions that do not.
fn lenient_match(
    template: &Term,
    concrete: &Term,
    bindable: &BTreeSet<Variable>,
    sub: &mut Substitution,
) {
    match (template, concrete) {
        (Term::Var(v), _) if bindable.contains(v) => {
            if sub.get(v).is_none() {
                sub.insert(v.clone(), concrete.clone());
            }
        }
        (
            Term::App { symbol: f, args: fa },
            Term::App {
                symbol: g,
                args: ga,
            },
        ) if f == g && fa.len() == ga.len() => {
            for (t, c) in fa.iter().zip(ga) {
                lenient_match(t, c, bindable, sub);
            }
        }
        _ => {}
    }
}

fn collect_pattern_equalities(p: &Pattern, out: &mut Vec<(Term, Term)>) {
    match p {
        Pattern::Eq(a, b) => out.push((a.clone(), b.clone())),
        Pattern::Pred(Term::App { symbol, args }) if symbol == "=" && args.len() == 2 => {
            out.push((args[0].clone(), args[1].clone()))
        }
        Pattern::Pred(_) | Pattern::Basic(_) => {}
        Pattern::And(a, b) | Pattern::Or(a, b) => {
            collect_pattern_equalities(a, out);
            collect_pattern_equalities(b, out);
        }
        Pattern::Not(a) => collect_pattern_equalities(a, out),
        Pattern::Exists(_, a) | Pattern::Forall(_, a) => collect_pattern_equalities(a, out),
    }
}

/// One-sided matching: variables in `bindable` may be bound; every other
/// position must agree syntactically.
fn match_bindable(
    template: &Term,
    concrete: &Term,
    bindable: &BTreeSet<Variable>,
    sub: &mut Substitution,
) -> bool {
    match template {
        Term::Var(v) if bindable.contains(v) => match sub.get(v) {
            Some(prev) => prev == concrete,
            None => {
                sub.insert(v.clone(), concrete.clone());
                true
            }
        },
        Term::App { symbol, args } => match concrete {
            Term::App {
                symbol: s2,
                args: a2,
            } if symbol == s2 && args.len() == a2.len() => args
                .iter()
                .zip(a2)
                .all(|(t, c)| match_bindable(t, c, bindable, sub)),
            _ => false,
        },
        _ => template == concrete,
    }
}

/// Converts a numeric term to a polynomial. Uninterpreted numeric subterms
/// (environment lookups, free function applications) are abstracted by
/// shared fresh variables, which keeps unsatisfiability sound and defers
/// satisfiability to witness verification.
fn term_to_poly(
    t: &Term,
    sig: &Signature,
    abstraction: &mut BTreeMap<Term, Variable>,
) -> Option<Poly> {
    match t {
        Term::Var(v) => Some(Poly::var(v.clone())),
        Term::Int { value, .. } => Some(Poly::from_int(*value as i128)),
        Term::Bool { .. } => None,
        Term::App { symbol, args } if args.len() == 2 => {
            let is_arith = matches!(
                symbol.as_str(),
                builtin_ops::ADD | builtin_ops::SUB | builtin_ops::MUL | builtin_ops::DIV
            );
            if !is_arith {
                return abstract_term(t, sig, abstraction);
            }
            let a = term_to_poly(&args[0], sig, abstraction)?;
            let b = term_to_poly(&args[1], sig, abstraction)?;
            match symbol.as_str() {
                builtin_ops::ADD => Some(a.add(&b)),
                builtin_ops::SUB => Some(a.sub(&b)),
                builtin_ops::MUL => Some(a.mul(&b)),
                builtin_ops::DIV => {
                    // Exact division only: the divisor must be a nonzero
                    // constant that provably divides the numerator for every
                    // integer assignment. Otherwise the quotient is
                    // abstracted as an opaque integer.
                    let c = b.as_constant()?;
                    if c != Ratio::from_integer(0)
                        && c.is_integer()
                        && a.always_divisible_by(c.to_integer())
                    {
                        Some(a.scale(Ratio::from_integer(1) / c))
                    } else {
                        abstract_term(t, sig, abstraction)
                    }
                }
                _ => unreachable!(),
            }
        }
        Term::App { .. } => abstract_term(t, sig, abstraction),
    }
}

fn abstract_term(
    t: &Term,
    sig: &Signature,
    abstraction: &mut BTreeMap<Term, Variable>,
) -> Option<Poly> {
    let sort = sort_of(t, sig).ok()?;
    if !is_numeric_sort(&sort, sig) {
        return None;
    }
    if let Some(v) = abstraction.get(t) {
        return Some(Poly::var(v.clone()));
    }
    let v = Variable::new(&format!("·opq{}", abstraction.len()), &sort);
    abstraction.insert(t.clone(), v.clone());
    Some(Poly::var(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::BuiltinSort;

    fn sig() -> Signature {
        let mut s = Signature::new();
        s.add_sort("Bool", Some(BuiltinSort::Bool)).unwrap();
        s.add_sort("Int", Some(BuiltinSort::Int)).unwrap();
        s.add_sort("Nat", Some(BuiltinSort::Nat)).unwrap();
        s.add_sort("Cfg", None).unwrap();
        s.add_symbol("cfg", &["Nat", "Nat"], "Cfg", false).unwrap();
        s.set_cfg_sort("Cfg").unwrap();
        s
    }

    fn pred(op: &str, a: Term, b: Term) -> Pattern {
        Pattern::Pred(Term::app(op, vec![a, b]))
    }

    fn nvar(n: &str) -> Term {
        Term::var(n, "Nat")
    }

    fn ivar(n: &str) -> Term {
        Term::var(n, "Int")
    }

    fn nat(v: i64) -> Term {
        Term::int(v, "Nat")
    }

    #[test]
    fn valid_consequence_examples() {
        let b = Backend::builtin_only();
        let s = sig();
        // (n′−1 ≥ 0 ∧ n′ > 0) → n′−1 ≥ 0
        let hyp = Pattern::and(
            pred(">=", Term::app("-", vec![nvar("np"), nat(1)]), nat(0)),
            pred(">", nvar("np"), nat(0)),
        );
        let concl = pred(">=", Term::app("-", vec![nvar("np"), nat(1)]), nat(0));
        assert_eq!(b.implies(&hyp, &concl, &s), SolverVerdict::Valid);

        // n′ ≥ 0 → (n′ > 0 ∨ n′ = 0)
        let hyp = pred(">=", nvar("np"), nat(0));
        let concl = Pattern::or(
            pred(">", nvar("np"), nat(0)),
            Pattern::Eq(nvar("np"), nat(0)),
        );
        assert_eq!(b.implies(&hyp, &concl, &s), SolverVerdict::Valid);

        // integer reasoning: n′ > 0 → n′ − 1 ≥ 0
        let hyp = pred(">", nvar("np"), nat(0));
        let concl = pred(">=", Term::app("-", vec![nvar("np"), nat(1)]), nat(0));
        assert_eq!(b.implies(&hyp, &concl, &s), SolverVerdict::Valid);
    }

    #[test]
    fn invalid_with_verified_witness() {
        let b = Backend::builtin_only();
        let s = sig();
        // x > 0 → x > 1 is invalid, witness x = 1
        let hyp = pred(">", ivar("x"), Term::int(0, "Int"));
        let concl = pred(">", ivar("x"), Term::int(1, "Int"));
        match b.implies(&hyp, &concl, &s) {
            SolverVerdict::Invalid(w) => {
                let x = w.get(&Variable::new("x", "Int")).unwrap();
                assert_eq!(x.as_int(), Some(1));
            }
            other => panic!("expected Invalid, got {other:?}"),
        }
    }

    #[test]
    fn sat_unsat_examples() {
        let b = Backend::builtin_only();
        let s = sig();
        // i > 0 ∧ i = 0 → Unsat
        let f = Pattern::and(
            pred(">", nvar("i"), nat(0)),
            Pattern::Eq(nvar("i"), nat(0)),
        );
        assert_eq!(b.check_sat(&f, &s), SolverVerdict::Unsat);
        // n ≥ 1 ∧ n − 1 = 0 → Sat(n = 1)
        let f = Pattern::and(
            pred(">=", nvar("n"), nat(1)),
            Pattern::Eq(Term::app("-", vec![nvar("n"), nat(1)]), nat(0)),
        );
        match b.check_sat(&f, &s) {
            SolverVerdict::Sat(w) => {
                assert_eq!(w.get(&Variable::new("n", "Nat")).unwrap().as_int(), Some(1));
            }
            other => panic!("expected Sat, got {other:?}"),
        }
    }

    #[test]
    fn false_implies_anything() {
        let b = Backend::builtin_only();
        let s = sig();
        let f = Pattern::falsity();
        let anything = pred(">", nvar("q"), nat(7));
        assert_eq!(b.implies(&f, &anything, &s), SolverVerdict::Valid);
    }

    #[test]
    fn sum_identity_closed_form() {
        // SUM(x,y) = y(y+1)/2 − (x−1)x/2.
        // SUM(1,n) = n(n+1)/2: instantiating x=1 zeroes the second term.
        let b = Backend::builtin_only();
        let s = sig();
        let n = nvar("n");
        let half_num = |t: Term, t1: Term| {
            Term::app(
                "/",
                vec![Term::app("*", vec![t, t1]), nat(2)],
            )
        };
        // SUM(1,n) with x = 1: n(n+1)/2 − 0·1/2
        let sum_1n = Term::app(
            "-",
            vec![
                half_num(
                    n.clone(),
                    Term::app("+", vec![n.clone(), nat(1)]),
                ),
                half_num(Term::app("-", vec![nat(1), nat(1)]), nat(1)),
            ],
        );
        let closed = half_num(n.clone(), Term::app("+", vec![n.clone(), nat(1)]));
        let goal = Pattern::Eq(sum_1n, closed);
        assert_eq!(b.check_valid(&goal, &s), SolverVerdict::Valid);
    }

    #[test]
    fn sum_step_identity() {
        // SUM(n′+1, n) + n′ = SUM(n′, n) for n′ ≥ 1 — the invariant step.
        // SUM(x,y) = y(y+1)/2 − (x−1)x/2
        let b = Backend::builtin_only();
        let s = sig();
        let np = nvar("np");
        let n = nvar("n");
        let sum = |x: Term, y: Term| {
            let y1 = Term::app("+", vec![y.clone(), nat(1)]);
            let xm1 = Term::app("-", vec![x.clone(), nat(1)]);
            Term::app(
                "-",
                vec![
                    Term::app("/", vec![Term::app("*", vec![y, y1]), nat(2)]),
                    Term::app("/", vec![Term::app("*", vec![xm1, x]), nat(2)]),
                ],
            )
        };
        let lhs = Term::app(
            "+",
            vec![sum(Term::app("+", vec![np.clone(), nat(1)]), n.clone()), np.clone()],
        );
        let rhs = sum(np.clone(), n.clone());
        let hyp = pred(">=", np.clone(), nat(1));
        let goal = Pattern::Eq(lhs, rhs);
        assert_eq!(b.implies(&hyp, &goal, &s), SolverVerdict::Valid);
    }

    #[test]
    fn abs_case_split() {
        let b = Backend::builtin_only();
        let s = sig();
        // |x| ≥ 0 is valid
        let f = pred(
            ">=",
            Term::app("abs", vec![ivar("x")]),
            Term::int(0, "Int"),
        );
        assert_eq!(b.check_valid(&f, &s), SolverVerdict::Valid);
        // |x| ≥ x is valid
        let f = pred(">=", Term::app("abs", vec![ivar("x")]), ivar("x"));
        assert_eq!(b.check_valid(&f, &s), SolverVerdict::Valid);
        // |x| = x is invalid with a negative witness
        let f = Pattern::Eq(Term::app("abs", vec![ivar("x")]), ivar("x"));
        match b.check_valid(&f, &s) {
            SolverVerdict::Invalid(w) => {
                assert!(w.get(&Variable::new("x", "Int")).unwrap().as_int().unwrap() < 0);
            }
            other => panic!("expected Invalid, got {other:?}"),
        }
    }

    #[test]
    fn nonlinear_delegation_or_unknown() {
        let b = Backend::builtin_only();
        let s = sig();
        // z·z = 2 has no integer solution but sits outside the builtin
        // fragment once z·z is opaque; any sound answer (Unsat via bounded
        // branching or Unknown) is acceptable — never Sat.
        let f = Pattern::Eq(
            Term::app("*", vec![ivar("z"), ivar("z")]),
            Term::int(2, "Int"),
        );
        match b.check_sat(&f, &s) {
            SolverVerdict::Sat(w) => panic!("unsound Sat: {w:?}"),
            _ => {}
        }
    }

    #[test]
    fn exists_strip_and_nat_bound() {
        let b = Backend::builtin_only();
        let s = sig();
        // ∃k:Nat. k < 0 → Unsat (implicit k ≥ 0)
        let f = Pattern::exists(
            Variable::new("k", "Nat"),
            pred("<", nvar("k"), nat(0)),
        );
        assert_eq!(b.check_sat(&f, &s), SolverVerdict::Unsat);
        // ∃k:Nat. k = 3 → Sat
        let f = Pattern::exists(
            Variable::new("k", "Nat"),
            Pattern::Eq(nvar("k"), nat(3)),
        );
        assert!(matches!(b.check_sat(&f, &s), SolverVerdict::Sat(_)));
    }

    #[test]
    fn forall_from_negated_exists() {
        let b = Backend::builtin_only();
        let s = sig();
        // Validity of: (x = 5) → ∃k. (k = x ∧ k ≥ 0). Negation yields a ∀
        // that instantiation must handle.
        let hyp = Pattern::Eq(ivar("x"), Term::int(5, "Int"));
        let concl = Pattern::exists(
            Variable::new("k", "Int"),
            Pattern::and(
                Pattern::Eq(ivar("k"), ivar("x")),
                pred(">=", ivar("k"), Term::int(0, "Int")),
            ),
        );
        assert_eq!(b.implies(&hyp, &concl, &s), SolverVerdict::Valid);
    }

    #[test]
    fn constructor_equality_decomposition() {
        let b = Backend::builtin_only();
        let s = sig();
        // cfg(a, 1) = cfg(0, b) decomposes to a = 0 ∧ 1 = b
        let f = Pattern::Eq(
            Term::app("cfg", vec![nvar("a"), nat(1)]),
            Term::app("cfg", vec![nat(0), nvar("b")]),
        );
        match b.check_sat(&f, &s) {
            SolverVerdict::Sat(w) => {
                assert_eq!(w.get(&Variable::new("a", "Nat")).unwrap().as_int(), Some(0));
                assert_eq!(w.get(&Variable::new("b", "Nat")).unwrap().as_int(), Some(1));
            }
            other => panic!("expected Sat, got {other:?}"),
        }
        // cfg(0,0) = cfg(1,0) is Unsat
        let f = Pattern::Eq(
            Term::app("cfg", vec![nat(0), nat(0)]),
            Term::app("cfg", vec![nat(1), nat(0)]),
        );
        assert_eq!(b.check_sat(&f, &s), SolverVerdict::Unsat);
    }
}
