//! Symbolic stepping: the "derivative" of a constrained pattern under the
//! rules of a reachability system, together with the coverage information
//! needed by the Step rule.

use std::collections::BTreeSet;

use crate::pattern::{ConstrainedPattern, Pattern};
use crate::solver::Backend;
use crate::system::{ReachabilityRule, ReachabilitySystem};
use crate::term::{fresh_variable, unify, Substitution, Term, Variable};

/// The result of one symbolic step.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// One successor per rule whose lhs unifies with the source structure
    /// and whose combined constraint is satisfiable. Successor constraints
    /// include the source constraint, the instantiated rule guard, and the
    /// residual equalities of the unifier. Variables of the successor not
    /// free in the source are leftover rule variables pinned by residual
    /// equalities.
    pub successors: Vec<ConstrainedPattern>,
    /// The instantiated guards of the applicable rules, each with leftover
    /// rule variables existentially closed. Their disjunction describes
    /// exactly when some rule fires from the source.
    pub guards: Vec<Pattern>,
    /// Whether the guard disjunction covers the source constraint, i.e.
    /// `constraint ∧ ¬(⋁ guards)` is unsatisfiable. This is the coverage
    /// premise of the Step rule.
    pub covered: bool,
}

impl StepResult {
    /// The disjunction of the applicable guards (falsity when none apply).
    pub fn guard_disjunction(&self) -> Pattern {
        Pattern::disj(self.guards.iter().cloned())
    }
}

/// Computes all one-step successors of `cp` under the rules of `sys`.
///
/// Each rule is renamed apart from `cp`, its lhs structure unified with
/// `cp.structure`, and the combined constraint checked for satisfiability;
/// unsatisfiable combinations are dropped. Existentials of `cp` are treated
/// as free (the caller re-quantifies as needed).
pub fn symbolic_step(
    cp: &ConstrainedPattern,
    sys: &ReachabilitySystem,
    backend: &Backend,
) -> StepResult {
    let sig = &sys.signature;
    let mut source_vars: BTreeSet<Variable> = cp.free_vars();
    source_vars.extend(cp.existentials.iter().cloned());

    let mut successors = Vec::new();
    let mut guards = Vec::new();
    for rule in &sys.rules {
        let (rlhs, rrhs) = rename_rule_apart(rule, &source_vars);
        let Some(u) = unify(&cp.structure, &rlhs.structure, sig) else {
            continue;
        };
        // Unification may orient variable-variable pairs towards the rule's
        // side; flip those bindings back so results stay in source variables.
        let flip = reorient(&u.subst, &source_vars);
        // Residual equalities that merely pin a leftover rule variable to a
        // source-side term are eliminated by substitution; the rest stay as
        // equality constraints.
        let residuals: Vec<(Term, Term)> = u
            .residual
            .iter()
            .map(|(a, b)| (flip.apply(a), flip.apply(b)))
            .collect();
        let (elim, kept) = eliminate_pinned(residuals, &source_vars);
        let apply_t = |t: &Term| elim.apply(&flip.apply(&u.subst.apply(t)));
        let apply_p = |p: &Pattern| {
            p.apply_substitution(&u.subst)
                .apply_substitution(&flip)
                .apply_substitution(&elim)
        };

        let residual = Pattern::conj(kept.into_iter().map(|(a, b)| Pattern::Eq(a, b)));
        let guard = Pattern::and(residual, apply_p(&rlhs.constraint));
        let source_constraint = apply_p(&cp.constraint);
        let combined = Pattern::and(source_constraint, guard.clone());
        if backend.check_sat(&combined, sig).is_unsat() {
            continue;
        }
        // Any leftover rule variables still free in the guard are
        // existentially closed for the coverage check.
        let mut closed = guard;
        for v in closed
            .free_vars()
            .into_iter()
            .filter(|v| !source_vars.contains(v))
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
        {
            closed = Pattern::exists(v, closed);
        }
        guards.push(closed);
        successors.push(ConstrainedPattern::new(
            apply_t(&rrhs.structure),
            Pattern::and(combined, apply_p(&rrhs.constraint)),
        ));
    }

    let uncovered = Pattern::and(
        cp.constraint.clone(),
        Pattern::not(Pattern::disj(guards.iter().cloned())),
    );
    let covered = backend.check_sat(&uncovered, sig).is_unsat();
    StepResult {
        successors,
        guards,
        covered,
    }
}

/// Renames the variables of a rule apart from `avoid`.
fn rename_rule_apart(
    rule: &ReachabilityRule,
    avoid: &BTreeSet<Variable>,
) -> (ConstrainedPattern, ConstrainedPattern) {
    let mut rule_vars: BTreeSet<Variable> = rule.lhs.free_vars();
    rule_vars.extend(rule.rhs.free_vars());
    let mut avoid = avoid.clone();
    avoid.extend(rule_vars.iter().cloned());
    let mut sub = Substitution::new();
    for v in &rule_vars {
        if avoid.contains(v) && sub.get(v).is_none() {
            let fresh = fresh_variable(&v.name, &v.sort, &avoid);
            avoid.insert(fresh.clone());
            sub.insert(v.clone(), Term::Var(fresh));
        }
    }
    (
        rule.lhs.apply_substitution(&sub),
        rule.rhs.apply_substitution(&sub),
    )
}

/// Splits residual equalities into a substitution for leftover rule
/// variables (one side is such a variable and the other side avoids it) and
/// the equalities that must remain as constraints.
fn eliminate_pinned(
    residuals: Vec<(Term, Term)>,
    source_vars: &BTreeSet<Variable>,
) -> (Substitution, Vec<(Term, Term)>) {
    let mut elim = Substitution::new();
    let mut kept = Vec::new();
    for (a, b) in residuals {
        let a = elim.apply(&a);
        let b = elim.apply(&b);
        let pinned = |v: &Variable, other: &Term| {
            !source_vars.contains(v)
                && elim.get(v).is_none()
                && !crate::term::free_vars(other).contains(v)
        };
        match (&a, &b) {
            (Term::Var(v), other) if pinned(v, other) => {
                elim.insert(v.clone(), other.clone());
            }
            (other, Term::Var(v)) if pinned(v, other) => {
                elim.insert(v.clone(), other.clone());
            }
            _ => kept.push((a, b)),
        }
    }
    // Late bindings may appear inside earlier images and kept equalities.
    let elim = {
        let mut closed = Substitution::new();
        for (v, t) in elim.iter() {
            closed.insert(v.clone(), elim.apply(t));
        }
        closed
    };
    let kept = kept
        .into_iter()
        .map(|(a, b)| (elim.apply(&a), elim.apply(&b)))
        .filter(|(a, b)| a != b)
        .collect();
    (elim, kept)
}

/// For every binding `x ↦ y` where `x` is a source variable and `y` a fresh
/// rule variable, produces the inverse renaming `y ↦ x`.
fn reorient(sub: &Substitution, source_vars: &BTreeSet<Variable>) -> Substitution {
    let mut flip = Substitution::new();
    for (x, img) in sub.iter() {
        if source_vars.contains(x) {
            if let Term::Var(y) = img {
                if !source_vars.contains(y) {
                    flip.insert(y.clone(), Term::Var(x.clone()));
                }
            }
        }
    }
    flip
}
