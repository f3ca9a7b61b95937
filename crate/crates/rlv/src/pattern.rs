//! Matching-logic patterns: first-order formulas extended with basic
//! patterns (configuration-sorted terms used as atoms).
//!
//! A ground configuration `γ` together with a valuation `ρ` satisfies a basic
//! pattern `π` when `γ` equals the evaluation of `ρ(π)`; the remaining
//! connectives behave as in first-order logic. Patterns without basic
//! patterns ("structureless") are pure constraints and can be shipped to the
//! constraint backend. The hole-translation replaces each basic pattern `π`
//! with the equality `□ = π` against a distinguished configuration variable,
//! turning any pattern into an ordinary first-order formula.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::term::{
    free_vars as term_free_vars, match_term, sort_of, BuiltinSort,
    GroundValuation, Signature, Substitution, Term, TermError, Variable,
};

/// Name of the distinguished configuration variable introduced by
/// [`to_fol`]. Reserved: user input may not declare it.
pub const HOLE: &str = "□";

/// Bound for the enumerating quantifier fallback over numeric sorts.
pub const QUANT_SEARCH_BOUND: i64 = 64;

/// A matching-logic pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    /// A configuration-sorted term used as an atom.
    Basic(Term),
    /// A Bool-sorted term used as an atomic predicate (comparisons,
    /// recognizers, boolean literals).
    Pred(Term),
    /// Equality between two same-sorted terms.
    Eq(Term, Term),
    And(Box<Pattern>, Box<Pattern>),
    Or(Box<Pattern>, Box<Pattern>),
    Not(Box<Pattern>),
    Exists(Variable, Box<Pattern>),
    Forall(Variable, Box<Pattern>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("quantifier over sort `{0}` cannot be decided by enumeration")]
    NonEnumerableQuantifier(String),
    #[error("pattern outside the supported fragment: {0}")]
    UnsupportedFragment(String),
    #[error(transparent)]
    Term(#[from] TermError),
}

impl Pattern {
    pub fn truth() -> Pattern {
        Pattern::Pred(Term::boolean(true, "Bool"))
    }

    pub fn falsity() -> Pattern {
        Pattern::Pred(Term::boolean(false, "Bool"))
    }

    pub fn is_truth(&self) -> bool {
        matches!(self, Pattern::Pred(t) if t.as_bool() == Some(true))
    }

    pub fn and(p: Pattern, q: Pattern) -> Pattern {
        if p.is_truth() {
            q
        } else if q.is_truth() {
            p
        } else {
            Pattern::And(Box::new(p), Box::new(q))
        }
    }

    pub fn or(p: Pattern, q: Pattern) -> Pattern {
        Pattern::Or(Box::new(p), Box::new(q))
    }

    pub fn not(p: Pattern) -> Pattern {
        Pattern::Not(Box::new(p))
    }

    pub fn exists(v: Variable, p: Pattern) -> Pattern {
        Pattern::Exists(v, Box::new(p))
    }

    pub fn forall(v: Variable, p: Pattern) -> Pattern {
        Pattern::Forall(v, Box::new(p))
    }

    /// Conjunction of a list, `true` when empty.
    pub fn conj(ps: impl IntoIterator<Item = Pattern>) -> Pattern {
        ps.into_iter().fold(Pattern::truth(), Pattern::and)
    }

    /// Disjunction of a list, `false` when empty.
    pub fn disj(ps: impl IntoIterator<Item = Pattern>) -> Pattern {
        let mut it = ps.into_iter();
        match it.next() {
            None => Pattern::falsity(),
            Some(first) => it.fold(first, Pattern::or),
        }
    }

    /// True iff the pattern contains no basic pattern.
    pub fn is_structureless(&self) -> bool {
        match self {
            Pattern::Basic(_) => false,
            Pattern::Pred(_) | Pattern::Eq(_, _) => true,
            Pattern::And(p, q) | Pattern::Or(p, q) => {
                p.is_structureless() && q.is_structureless()
            }
            Pattern::Not(p) => p.is_structureless(),
            Pattern::Exists(_, p) | Pattern::Forall(_, p) => p.is_structureless(),
        }
    }

    /// Free variables (quantifiers bind).
    pub fn free_vars(&self) -> BTreeSet<Variable> {
        match self {
            Pattern::Basic(t) | Pattern::Pred(t) => term_free_vars(t),
            Pattern::Eq(a, b) => {
                let mut s = term_free_vars(a);
                s.extend(term_free_vars(b));
                s
            }
            Pattern::And(p, q) | Pattern::Or(p, q) => {
                let mut s = p.free_vars();
                s.extend(q.free_vars());
                s
            }
            Pattern::Not(p) => p.free_vars(),
            Pattern::Exists(v, p) | Pattern::Forall(v, p) => {
                let mut s = p.free_vars();
                s.remove(v);
                s
            }
        }
    }

    /// All variables, free and bound.
    pub fn all_vars(&self) -> BTreeSet<Variable> {
        match self {
            Pattern::Basic(t) | Pattern::Pred(t) => term_free_vars(t),
            Pattern::Eq(a, b) => {
                let mut s = term_free_vars(a);
                s.extend(term_free_vars(b));
                s
            }
            Pattern::And(p, q) | Pattern::Or(p, q) => {
                let mut s = p.all_vars();
                s.extend(q.all_vars());
                s
            }
            Pattern::Not(p) => p.all_vars(),
            Pattern::Exists(v, p) | Pattern::Forall(v, p) => {
                let mut s = p.all_vars();
                s.insert(v.clone());
                s
            }
        }
    }

    /// Capture-avoiding application is not needed here: callers guarantee the
    /// substitution's domain and images avoid bound variables (rule variables
    /// are renamed apart before unification). Quantified variables are simply
    /// skipped.
    pub fn apply_substitution(&self, sub: &Substitution) -> Pattern {
        match self {
            Pattern::Basic(t) => Pattern::Basic(sub.apply(t)),
            Pattern::Pred(t) => Pattern::Pred(sub.apply(t)),
            Pattern::Eq(a, b) => Pattern::Eq(sub.apply(a), sub.apply(b)),
            Pattern::And(p, q) => Pattern::And(
                Box::new(p.apply_substitution(sub)),
                Box::new(q.apply_substitution(sub)),
            ),
            Pattern::Or(p, q) => Pattern::Or(
                Box::new(p.apply_substitution(sub)),
                Box::new(q.apply_substitution(sub)),
            ),
            Pattern::Not(p) => Pattern::Not(Box::new(p.apply_substitution(sub))),
            Pattern::Exists(v, p) => {
                if sub.get(v).is_some() {
                    // Shadowed: drop the binding inside the scope.
                    let mut inner = Substitution::new();
                    for (k, t) in sub.iter() {
                        if k != v {
                            inner.insert(k.clone(), t.clone());
                        }
                    }
                    Pattern::Exists(v.clone(), Box::new(p.apply_substitution(&inner)))
                } else {
                    Pattern::Exists(v.clone(), Box::new(p.apply_substitution(sub)))
                }
            }
            Pattern::Forall(v, p) => {
                if sub.get(v).is_some() {
                    let mut inner = Substitution::new();
                    for (k, t) in sub.iter() {
                        if k != v {
                            inner.insert(k.clone(), t.clone());
                        }
                    }
                    Pattern::Forall(v.clone(), Box::new(p.apply_substitution(&inner)))
                } else {
                    Pattern::Forall(v.clone(), Box::new(p.apply_substitution(sub)))
                }
            }
        }
    }

    /// Renames a free variable everywhere it occurs free.
    pub fn rename_free(&self, from: &Variable, to: &Variable) -> Pattern {
        self.apply_substitution(&Substitution::singleton(
            from.clone(),
            Term::Var(to.clone()),
        ))
    }

    /// Renames every bound variable apart from `avoid` (and from each
    /// other), extending `avoid` with the names chosen. After this, no
    /// binder in the pattern shadows a variable in `avoid`, so
    /// substitutions whose images only mention `avoid` variables cannot
    /// capture.
    pub fn rename_bound_apart(&self, avoid: &mut BTreeSet<Variable>) -> Pattern {
        match self {
            Pattern::Basic(_) | Pattern::Pred(_) | Pattern::Eq(_, _) => self.clone(),
            Pattern::And(p, q) => Pattern::And(
                Box::new(p.rename_bound_apart(avoid)),
                Box::new(q.rename_bound_apart(avoid)),
            ),
            Pattern::Or(p, q) => Pattern::Or(
                Box::new(p.rename_bound_apart(avoid)),
                Box::new(q.rename_bound_apart(avoid)),
            ),
            Pattern::Not(p) => Pattern::Not(Box::new(p.rename_bound_apart(avoid))),
            Pattern::Exists(v, p) | Pattern::Forall(v, p) => {
                let fresh = crate::term::fresh_variable(&v.name, &v.sort, avoid);
                avoid.insert(fresh.clone());
                let body = p.rename_free(v, &fresh).rename_bound_apart(avoid);
                match self {
                    Pattern::Exists(_, _) => Pattern::Exists(fresh, Box::new(body)),
                    _ => Pattern::Forall(fresh, Box::new(body)),
                }
            }
        }
    }
}

/// A pattern in the prover's working shape: one configuration term, a
/// structureless constraint, and a prefix of existentials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstrainedPattern {
    pub structure: Term,
    pub constraint: Pattern,
    pub existentials: Vec<Variable>,
}

impl ConstrainedPattern {
    pub fn new(structure: Term, constraint: Pattern) -> ConstrainedPattern {
        ConstrainedPattern {
            structure,
            constraint,
            existentials: Vec::new(),
        }
    }

    /// The pattern this constrained form denotes:
    /// `∃ existentials . (structure ∧ constraint)`.
    pub fn to_pattern(&self) -> Pattern {
        let mut body = Pattern::and(
            Pattern::Basic(self.structure.clone()),
            self.constraint.clone(),
        );
        for v in self.existentials.iter().rev() {
            body = Pattern::exists(v.clone(), body);
        }
        body
    }

    pub fn free_vars(&self) -> BTreeSet<Variable> {
        self.to_pattern().free_vars()
    }

    pub fn apply_substitution(&self, sub: &Substitution) -> ConstrainedPattern {
        // Existentials are assumed disjoint from the substitution domain.
        debug_assert!(self.existentials.iter().all(|v| sub.get(v).is_none()));
        ConstrainedPattern {
            structure: sub.apply(&self.structure),
            constraint: self.constraint.apply_substitution(sub),
            existentials: self.existentials.clone(),
        }
    }

    /// Renames the existential prefix away from `avoid`, returning the
    /// renamed pattern.
    pub fn rename_existentials_apart(&self, avoid: &BTreeSet<Variable>) -> ConstrainedPattern {
        let mut avoid = avoid.clone();
        avoid.extend(self.free_vars());
        let mut out = self.clone();
        for i in 0..out.existentials.len() {
            let v = out.existentials[i].clone();
            if avoid.contains(&v) {
                let fresh =
                    crate::term::fresh_variable(&v.name, &v.sort, &avoid);
                out.structure = Substitution::singleton(v.clone(), Term::Var(fresh.clone()))
                    .apply(&out.structure);
                out.constraint = out.constraint.rename_free(&v, &fresh);
                out.existentials[i] = fresh.clone();
                avoid.insert(fresh);
            } else {
                avoid.insert(v);
            }
        }
        out
    }
}

/// The hole-translation: replaces each basic pattern `π` with `□ = π`, where
/// `□` is a fresh configuration-sorted variable. The result is structureless.
pub fn to_fol(p: &Pattern, cfg_sort: &str) -> Pattern {
    match p {
        Pattern::Basic(t) => Pattern::Eq(Term::var(HOLE, cfg_sort), t.clone()),
        Pattern::Pred(_) | Pattern::Eq(_, _) => p.clone(),
        Pattern::And(a, b) => Pattern::And(
            Box::new(to_fol(a, cfg_sort)),
            Box::new(to_fol(b, cfg_sort)),
        ),
        Pattern::Or(a, b) => Pattern::Or(
            Box::new(to_fol(a, cfg_sort)),
            Box::new(to_fol(b, cfg_sort)),
        ),
        Pattern::Not(a) => Pattern::Not(Box::new(to_fol(a, cfg_sort))),
        Pattern::Exists(v, a) => Pattern::Exists(v.clone(), Box::new(to_fol(a, cfg_sort))),
        Pattern::Forall(v, a) => Pattern::Forall(v.clone(), Box::new(to_fol(a, cfg_sort))),
    }
}

/// Ground satisfaction `(γ, ρ) ⊨ φ`.
///
/// Quantifiers are decided by, in order: a witness extracted by matching a
/// basic pattern (or a `□ = π` equality) in the body against the relevant
/// configuration; expansion for Bool; bounded search over
/// `[-QUANT_SEARCH_BOUND, QUANT_SEARCH_BOUND]` for numeric sorts. Quantifiers
/// over other sorts fail with `NonEnumerableQuantifier`.
pub fn satisfies(
    gamma: &Term,
    rho: &GroundValuation,
    phi: &Pattern,
    sig: &Signature,
) -> Result<bool, PatternError> {
    match phi {
        Pattern::Basic(t) => {
            let inst = rho.eval(t, sig)?;
            Ok(&inst == gamma)
        }
        Pattern::Pred(t) => {
            let v = rho.eval(t, sig)?;
            Ok(v.as_bool() == Some(true))
        }
        Pattern::Eq(a, b) => Ok(rho.eval(a, sig)? == rho.eval(b, sig)?),
        Pattern::And(p, q) => {
            Ok(satisfies(gamma, rho, p, sig)? && satisfies(gamma, rho, q, sig)?)
        }
        Pattern::Or(p, q) => {
            Ok(satisfies(gamma, rho, p, sig)? || satisfies(gamma, rho, q, sig)?)
        }
        Pattern::Not(p) => Ok(!satisfies(gamma, rho, p, sig)?),
        Pattern::Exists(v, body) => decide_exists(gamma, rho, v, body, sig),
        Pattern::Forall(v, body) => {
            // Clause 7: ∀X.φ ≡ ¬∃X.¬φ.
            let neg = Pattern::exists(v.clone(), Pattern::not((**body).clone()));
            Ok(!satisfies(gamma, rho, &neg, sig)?)
        }
    }
}

fn decide_exists(
    gamma: &Term,
    rho: &GroundValuation,
    v: &Variable,
    body: &Pattern,
    sig: &Signature,
) -> Result<bool, PatternError> {
    // 1. Witness by matching: basic patterns (or □-equalities) in positive
    //    position must equal γ (or the valuation of □), so matching them
    //    against that configuration can pin the witness.
    for candidate in witness_candidates(gamma, rho, v, body, sig) {
        let r = rho.clone().with(v.clone(), candidate);
        if satisfies(gamma, &r, body, sig)? {
            return Ok(true);
        }
    }
    match sig.builtin_of(&v.sort) {
        Some(BuiltinSort::Bool) => {
            for val in [false, true] {
                let r = rho.clone().with(v.clone(), Term::boolean(val, &v.sort));
                if satisfies(gamma, &r, body, sig)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Some(BuiltinSort::Int) | Some(BuiltinSort::Nat) => {
            let lo = if sig.builtin_of(&v.sort) == Some(BuiltinSort::Nat) {
                0
            } else {
                -QUANT_SEARCH_BOUND
            };
            for val in lo..=QUANT_SEARCH_BOUND {
                let r = rho.clone().with(v.clone(), Term::int(val, &v.sort));
                if satisfies(gamma, &r, body, sig)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        None => {
            // Finite uninterpreted sorts: enumerate nullary constructors.
            let constants: Vec<Term> = sig
                .symbols()
                .iter()
                .filter(|s| s.arg_sorts.is_empty() && s.result_sort == v.sort && !s.interpreted)
                .map(|s| Term::constant(&s.name))
                .collect();
            if constants.is_empty() {
                return Err(PatternError::NonEnumerableQuantifier(v.sort.clone()));
            }
            for c in constants {
                let r = rho.clone().with(v.clone(), c);
                if satisfies(gamma, &r, body, sig)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// Candidate witnesses for `∃v.body` obtained by matching basic patterns in
/// `body` (and `□ = π` equalities) against the configuration they must equal.
fn witness_candidates(
    gamma: &Term,
    rho: &GroundValuation,
    v: &Variable,
    body: &Pattern,
    sig: &Signature,
) -> Vec<Term> {
    let mut out = Vec::new();
    collect_witnesses(gamma, rho, v, body, sig, &mut out);
    out.sort();
    out.dedup();
    out
}

fn collect_witnesses(
    gamma: &Term,
    rho: &GroundValuation,
    v: &Variable,
    body: &Pattern,
    sig: &Signature,
    out: &mut Vec<Term>,
) {
    let try_match = |pi: &Term, subject: &Term, out: &mut Vec<Term>| {
        // Ground every variable except v, then match against the subject.
        let mut partial = Substitution::new();
        for fv in term_free_vars(pi) {
            if &fv != v {
                if let Some(t) = rho.get(&fv) {
                    partial.insert(fv.clone(), t.clone());
                }
            }
        }
        let templ = partial.apply(pi);
        if let Some(sub) = match_term(&templ, subject) {
            if let Some(w) = sub.get(v) {
                if w.is_ground() {
                    out.push(w.clone());
                }
            }
        }
    };
    match body {
        Pattern::Basic(pi) => try_match(pi, gamma, out),
        Pattern::Eq(a, b) => {
            // An equality pins v when the other side evaluates.
            for (lhs, rhs) in [(a, b), (b, a)] {
                if term_free_vars(lhs).contains(v) {
                    if let Ok(subject) = rho.eval(rhs, sig) {
                        try_match(lhs, &subject, out);
                    }
                }
            }
        }
        Pattern::Pred(_) => {}
        Pattern::And(p, q) | Pattern::Or(p, q) => {
            collect_witnesses(gamma, rho, v, p, sig, out);
            collect_witnesses(gamma, rho, v, q, sig, out);
        }
        Pattern::Not(p) => collect_witnesses(gamma, rho, v, p, sig, out),
        Pattern::Exists(w, p) | Pattern::Forall(w, p) => {
            if w != v {
                collect_witnesses(gamma, rho, v, p, sig, out);
            }
        }
    }
}

/// First-order evaluation of a structureless pattern (the hole-translation
/// image): `ρ` must bind `□` when it occurs. Implemented as [`satisfies`]
/// with a dummy configuration — structureless patterns never inspect it, and
/// witness extraction for `∃` still works through the `□ = π` equalities.
pub fn fol_holds(
    rho: &GroundValuation,
    phi: &Pattern,
    sig: &Signature,
) -> Result<bool, PatternError> {
    debug_assert!(phi.is_structureless());
    let dummy = Term::boolean(false, "Bool");
    satisfies(&dummy, rho, phi, sig)
}

/// Decomposes a pattern into a disjunction of constrained patterns.
///
/// The supported fragment: disjunctions of `∃x̃.(π ∧ c)` where `π` is the
/// unique basic pattern of the disjunct and `c` is structureless.
pub fn normalize(phi: &Pattern) -> Result<Vec<ConstrainedPattern>, PatternError> {
    let mut out = Vec::new();
    normalize_into(phi, &mut Vec::new(), &mut out)?;
    Ok(out)
}

fn normalize_into(
    phi: &Pattern,
    existentials: &mut Vec<Variable>,
    out: &mut Vec<ConstrainedPattern>,
) -> Result<(), PatternError> {
    match phi {
        Pattern::Or(p, q) if existentials.is_empty() => {
            normalize_into(p, existentials, out)?;
            normalize_into(q, existentials, out)
        }
        Pattern::Exists(v, p) => {
            existentials.push(v.clone());
            let r = normalize_into(p, existentials, out);
            existentials.pop();
            r
        }
        _ => {
            let (structure, constraint) = split_conjunct(phi)?;
            out.push(ConstrainedPattern {
                structure,
                constraint,
                existentials: existentials.clone(),
            });
            Ok(())
        }
    }
}

/// Splits a conjunction into its unique basic pattern and the rest.
fn split_conjunct(phi: &Pattern) -> Result<(Term, Pattern), PatternError> {
    let mut basic: Option<Term> = None;
    let mut constraints: Vec<Pattern> = Vec::new();
    collect_conjuncts(phi, &mut basic, &mut constraints)?;
    match basic {
        Some(t) => Ok((t, Pattern::conj(constraints))),
        None => Err(PatternError::UnsupportedFragment(
            "no basic pattern in disjunct".to_string(),
        )),
    }
}

fn collect_conjuncts(
    phi: &Pattern,
    basic: &mut Option<Term>,
    constraints: &mut Vec<Pattern>,
) -> Result<(), PatternError> {
    match phi {
        Pattern::And(p, q) => {
            collect_conjuncts(p, basic, constraints)?;
            collect_conjuncts(q, basic, constraints)
        }
        Pattern::Basic(t) => {
            if basic.is_some() {
                return Err(PatternError::UnsupportedFragment(
                    "conjoined basic patterns".to_string(),
                ));
            }
            *basic = Some(t.clone());
            Ok(())
        }
        other if other.is_structureless() => {
            constraints.push(other.clone());
            Ok(())
        }
        _ => Err(PatternError::UnsupportedFragment(
            "basic pattern under a non-conjunctive connective".to_string(),
        )),
    }
}

/// Implicit nonnegativity constraints for the Nat-sorted variables among
/// `vars`: a conjunction of `v ≥ 0` atoms.
pub fn nat_bounds(vars: impl IntoIterator<Item = Variable>, sig: &Signature) -> Pattern {
    let mut parts = Vec::new();
    for v in vars {
        if sig.builtin_of(&v.sort) == Some(BuiltinSort::Nat) {
            parts.push(Pattern::Pred(Term::app(
                ">=",
                vec![Term::Var(v.clone()), Term::int(0, &v.sort)],
            )));
        }
    }
    Pattern::conj(parts)
}

/// Checks that a pattern is well-sorted: every contained term sorts, equality
/// sides agree up to numeric compatibility, predicates are Bool-sorted.
pub fn well_sorted(phi: &Pattern, sig: &Signature) -> Result<(), PatternError> {
    match phi {
        Pattern::Basic(t) => {
            sort_of(t, sig)?;
            Ok(())
        }
        Pattern::Pred(t) => {
            let s = sort_of(t, sig)?;
            if sig.builtin_of(&s) != Some(BuiltinSort::Bool) {
                return Err(PatternError::UnsupportedFragment(format!(
                    "predicate atom of non-Bool sort `{s}`"
                )));
            }
            Ok(())
        }
        Pattern::Eq(a, b) => {
            let sa = sort_of(a, sig)?;
            let sb = sort_of(b, sig)?;
            let numeric = |s: &str| sig.builtin_of(s).map_or(false, BuiltinSort::is_numeric);
            if sa != sb && !(numeric(&sa) && numeric(&sb)) {
                return Err(PatternError::UnsupportedFragment(format!(
                    "equality between sorts `{sa}` and `{sb}`"
                )));
            }
            Ok(())
        }
        Pattern::And(p, q) | Pattern::Or(p, q) => {
            well_sorted(p, sig)?;
            well_sorted(q, sig)
        }
        Pattern::Not(p) => well_sorted(p, sig),
        Pattern::Exists(v, p) | Pattern::Forall(v, p) => {
            if !sig.has_sort(&v.sort) {
                return Err(PatternError::Term(TermError::IllSorted(format!(
                    "quantified variable `{}` has undeclared sort `{}`",
                    v.name, v.sort
                ))));
            }
            well_sorted(p, sig)
        }
    }
}
