//! Reachability systems as executable transition systems.
//!
//! A reachability rule `lhs ∧ guard ⇒ rhs` rewrites any ground configuration
//! matching `lhs` whose guard evaluates to true. The rule set induces a
//! transition relation; this module provides concrete execution, full-branch
//! exploration, and brute-force oracles for partial and total correctness
//! over families of ground instances.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::pattern::{satisfies, ConstrainedPattern, Pattern, PatternError};
use crate::term::{
    evaluate_ground, match_term, GroundValuation, Signature, Term, TermError,
};

/// A one-path reachability rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityRule {
    pub label: String,
    pub lhs: ConstrainedPattern,
    pub rhs: ConstrainedPattern,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilitySystem {
    pub signature: Signature,
    pub rules: Vec<ReachabilityRule>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("rule `{rule}` binds no value for right-hand variable `{var}`")]
    RhsVariableUnbound { rule: String, var: String },
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// Status of a finite execution prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecStatus {
    /// The last configuration has no successors.
    Complete,
    /// The step budget ran out.
    Truncated(usize),
    /// The configuration at the given index reappeared.
    CycleDetected(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    pub trace: Vec<Term>,
    pub status: ExecStatus,
}

/// Oracle verdicts for correctness claims over ground instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleVerdict {
    Holds,
    /// A refuting execution: the trace, and whether it ended in a cycle.
    CounterexampleTrace { trace: Vec<Term>, cyclic: bool },
    Inconclusive(String),
}

/// Outcome of the syntactic weak well-definedness check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WellDefinedness {
    Pass,
    Warn(String),
}

impl ReachabilitySystem {
    /// All successors of a ground configuration.
    pub fn successors(&self, gamma: &Term) -> Result<Vec<Term>, ExecError> {
        let mut out = Vec::new();
        for rule in &self.rules {
            if let Some(next) = self.apply_rule(rule, gamma)? {
                if !out.contains(&next) {
                    out.push(next);
                }
            }
        }
        Ok(out)
    }

    fn apply_rule(&self, rule: &ReachabilityRule, gamma: &Term) -> Result<Option<Term>, ExecError> {
        let Some(sub) = match_term(&rule.lhs.structure, gamma) else {
            return Ok(None);
        };
        // Concrete execution requires every rhs variable to be bound.
        for v in crate::term::free_vars(&rule.rhs.structure) {
            if sub.get(&v).is_none() {
                return Err(ExecError::RhsVariableUnbound {
                    rule: rule.label.clone(),
                    var: v.name,
                });
            }
        }
        // Evaluate the guard under the match.
        let rho = substitution_to_valuation(&sub);
        match satisfies(gamma, &rho, &rule.lhs.constraint, &self.signature) {
            Ok(true) => {}
            Ok(false) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let next = evaluate_ground(&sub.apply(&rule.rhs.structure), &self.signature)?;
        Ok(Some(next))
    }

    /// Follows the first successor (rule-declaration order) up to the budget.
    pub fn execute(
        &self,
        gamma0: &Term,
        max_steps: usize,
        detect_cycles: bool,
    ) -> Result<ExecutionResult, ExecError> {
        let mut trace = vec![evaluate_ground(gamma0, &self.signature)?];
        let mut seen: BTreeSet<Term> = trace.iter().cloned().collect();
        for _ in 0..max_steps {
            let cur = trace.last().unwrap();
            let succs = self.successors(cur)?;
            let Some(next) = succs.into_iter().next() else {
                return Ok(ExecutionResult {
                    trace,
                    status: ExecStatus::Complete,
                });
            };
            if detect_cycles && seen.contains(&next) {
                let index = trace.iter().position(|t| t == &next).unwrap();
                trace.push(next);
                return Ok(ExecutionResult {
                    trace,
                    status: ExecStatus::CycleDetected(index),
                });
            }
            seen.insert(next.clone());
            trace.push(next);
        }
        // Budget exhausted; check whether we happen to be complete.
        let status = if self.successors(trace.last().unwrap())?.is_empty() {
            ExecStatus::Complete
        } else {
            ExecStatus::Truncated(max_steps)
        };
        Ok(ExecutionResult { trace, status })
    }

    /// Brute-force partial-correctness oracle: for every instance, every
    /// complete path from the instantiated left-hand side must pass through
    /// a configuration satisfying `target`. Diverging paths are vacuously
    /// fine; truncated paths with no hit make the verdict inconclusive.
    pub fn oracle_partial(
        &self,
        claim: &ConstrainedPattern,
        target: &Pattern,
        instances: &[GroundValuation],
        budget: usize,
    ) -> Result<OracleVerdict, ExecError> {
        self.oracle(claim, target, instances, budget, false)
    }

    /// Total-correctness oracle: additionally, a cycle reached without a
    /// prior hit refutes the claim.
    pub fn oracle_total(
        &self,
        claim: &ConstrainedPattern,
        target: &Pattern,
        instances: &[GroundValuation],
        budget: usize,
    ) -> Result<OracleVerdict, ExecError> {
        self.oracle(claim, target, instances, budget, true)
    }

    fn oracle(
        &self,
        claim: &ConstrainedPattern,
        target: &Pattern,
        instances: &[GroundValuation],
        budget: usize,
        total: bool,
    ) -> Result<OracleVerdict, ExecError> {
        let mut inconclusive: Option<String> = None;
        for rho in instances {
            let gamma0 = evaluate_ground(&rho.apply(&claim.structure)?, &self.signature)?;
            match satisfies(&gamma0, rho, &claim.constraint, &self.signature) {
                Ok(true) => {}
                Ok(false) => continue, // instance outside the precondition
                Err(e) => return Err(e.into()),
            }
            match self.explore(&gamma0, rho, target, budget, total)? {
                OracleVerdict::Holds => {}
                OracleVerdict::CounterexampleTrace { trace, cyclic } => {
                    return Ok(OracleVerdict::CounterexampleTrace { trace, cyclic })
                }
                OracleVerdict::Inconclusive(r) => inconclusive = Some(r),
            }
        }
        Ok(match inconclusive {
            None => OracleVerdict::Holds,
            Some(r) => OracleVerdict::Inconclusive(r),
        })
    }

    /// Depth-first exploration of all maximal paths from `gamma0`. A path
    /// stops at its first configuration satisfying `target`.
    fn explore(
        &self,
        gamma0: &Term,
        rho: &GroundValuation,
        target: &Pattern,
        budget: usize,
        total: bool,
    ) -> Result<OracleVerdict, ExecError> {
        struct Frame {
            gamma: Term,
        }
        let mut path: Vec<Frame> = Vec::new();
        let mut inconclusive: Option<String> = None;
        // Explicit stack of (configuration, path length when pushed).
        let mut stack: Vec<(Term, usize)> = vec![(gamma0.clone(), 0)];
        while let Some((gamma, depth)) = stack.pop() {
            path.truncate(depth);
            if satisfies(&gamma, rho, target, &self.signature)? {
                continue; // this path hit the target
            }
            // Cycle: the configuration already occurs on the current path.
            if path.iter().any(|f| f.gamma == gamma) {
                if total {
                    let mut trace: Vec<Term> = path.iter().map(|f| f.gamma.clone()).collect();
                    trace.push(gamma);
                    return Ok(OracleVerdict::CounterexampleTrace { trace, cyclic: true });
                }
                continue; // diverging path: vacuous for partial correctness
            }
            if depth >= budget {
                inconclusive = Some(format!("budget of {budget} steps exhausted"));
                continue;
            }
            let succs = self.successors(&gamma)?;
            if succs.is_empty() {
                // Complete path without a hit refutes the claim.
                let mut trace: Vec<Term> = path.iter().map(|f| f.gamma.clone()).collect();
                trace.push(gamma);
                return Ok(OracleVerdict::CounterexampleTrace { trace, cyclic: false });
            }
            path.push(Frame { gamma });
            for s in succs.into_iter().rev() {
                stack.push((s, depth + 1));
            }
        }
        Ok(match inconclusive {
            None => OracleVerdict::Holds,
            Some(r) => OracleVerdict::Inconclusive(r),
        })
    }
}

/// Sufficient syntactic check for weak well-definedness: the rule's
/// right-hand side must be realizable for every left-hand match.
pub fn check_weak_well_definedness(rule: &ReachabilityRule) -> WellDefinedness {
    if !rule.rhs.constraint.is_truth() && !rule.rhs.constraint.is_structureless() {
        return WellDefinedness::Warn(format!(
            "rule `{}` has a structured right-hand constraint",
            rule.label
        ));
    }
    if !rule.rhs.constraint.is_truth() {
        return WellDefinedness::Warn(format!(
            "rule `{}` has a nontrivial right-hand constraint",
            rule.label
        ));
    }
    let lhs_vars = rule.lhs.free_vars();
    for v in crate::term::free_vars(&rule.rhs.structure) {
        if !lhs_vars.contains(&v) {
            return WellDefinedness::Warn(format!(
                "rule `{}` introduces fresh right-hand variable `{}`",
                rule.label, v.name
            ));
        }
    }
    WellDefinedness::Pass
}

fn substitution_to_valuation(sub: &crate::term::Substitution) -> GroundValuation {
    let mut rho = GroundValuation::new();
    for (v, t) in sub.iter() {
        if t.is_ground() {
            rho.bind(v.clone(), t.clone());
        }
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::counter::counter_system;
    use crate::term::Variable;

    fn cfg(s: i64, i: i64) -> Term {
        Term::app("cfg", vec![Term::int(s, "Nat"), Term::int(i, "Nat")])
    }

    #[test]
    fn successors_counter() {
        let sys = counter_system();
        assert_eq!(sys.successors(&cfg(0, 2)).unwrap(), vec![cfg(2, 1)]);
        assert_eq!(sys.successors(&cfg(3, 0)).unwrap(), Vec::<Term>::new());
    }

    #[test]
    fn execute_counter_trace() {
        let sys = counter_system();
        let r = sys.execute(&cfg(0, 3), 10, false).unwrap();
        assert_eq!(r.status, ExecStatus::Complete);
        assert_eq!(r.trace, vec![cfg(0, 3), cfg(3, 2), cfg(5, 1), cfg(6, 0)]);
    }

    #[test]
    fn counter_closed_form() {
        // [0,n] completes in exactly n steps at [n(n+1)/2, 0]
        let sys = counter_system();
        for n in 0..=50 {
            let r = sys.execute(&cfg(0, n), 100, false).unwrap();
            assert_eq!(r.status, ExecStatus::Complete);
            assert_eq!(r.trace.len(), (n + 1) as usize);
            assert_eq!(r.trace.last().unwrap(), &cfg(n * (n + 1) / 2, 0));
        }
    }

    #[test]
    fn truncation_status() {
        let sys = counter_system();
        let r = sys.execute(&cfg(0, 10), 3, false).unwrap();
        assert_eq!(r.status, ExecStatus::Truncated(3));
        assert_eq!(r.trace.len(), 4);
    }

    #[test]
    fn oracle_reflexive_target_holds() {
        let sys = counter_system();
        let claim = ConstrainedPattern::new(
            Term::app("cfg", vec![Term::int(0, "Nat"), Term::var("n", "Nat")]),
            Pattern::truth(),
        );
        // φ′ = φ: the very first configuration matches
        let target = Pattern::Basic(Term::app(
            "cfg",
            vec![Term::int(0, "Nat"), Term::var("n", "Nat")],
        ));
        let instances: Vec<GroundValuation> = (0..5)
            .map(|n| GroundValuation::new().with(Variable::new("n", "Nat"), Term::int(n, "Nat")))
            .collect();
        assert_eq!(
            sys.oracle_partial(&claim, &target, &instances, 100).unwrap(),
            OracleVerdict::Holds
        );
    }

    #[test]
    fn oracle_total_counter_goal() {
        // [0,n] must reach [n(n+1)/2, 0] on every execution.
        let sys = counter_system();
        let claim = ConstrainedPattern::new(
            Term::app("cfg", vec![Term::int(0, "Nat"), Term::var("n", "Nat")]),
            Pattern::truth(),
        );
        let target = Pattern::Basic(Term::app(
            "cfg",
            vec![
                Term::app(
                    "/",
                    vec![
                        Term::app(
                            "*",
                            vec![
                                Term::var("n", "Nat"),
                                Term::app("+", vec![Term::var("n", "Nat"), Term::int(1, "Nat")]),
                            ],
                        ),
                        Term::int(2, "Nat"),
                    ],
                ),
                Term::int(0, "Nat"),
            ],
        ));
        let instances: Vec<GroundValuation> = (0..=10)
            .map(|n| GroundValuation::new().with(Variable::new("n", "Nat"), Term::int(n, "Nat")))
            .collect();
        assert_eq!(
            sys.oracle_total(&claim, &target, &instances, 100).unwrap(),
            OracleVerdict::Holds
        );
    }

    #[test]
    fn oracle_detects_complete_path_miss() {
        let sys = counter_system();
        let claim = ConstrainedPattern::new(
            Term::app("cfg", vec![Term::int(0, "Nat"), Term::var("n", "Nat")]),
            Pattern::truth(),
        );
        // unreachable target
        let target = Pattern::Basic(cfg(999, 999));
        let instances =
            vec![GroundValuation::new().with(Variable::new("n", "Nat"), Term::int(2, "Nat"))];
        match sys.oracle_partial(&claim, &target, &instances, 100).unwrap() {
            OracleVerdict::CounterexampleTrace { trace, cyclic } => {
                assert!(!cyclic);
                assert_eq!(trace.last().unwrap(), &cfg(3, 0));
            }
            other => panic!("expected counterexample, got {other:?}"),
        }
    }

    #[test]
    fn cycle_refutes_total_but_not_partial() {
        // A one-state loop: cfg(0,1) ⇒ cfg(0,1) via rule [s,i] ∧ i>0 ⇒ [s,i].
        let mut sys = counter_system();
        sys.rules[0].rhs = ConstrainedPattern::new(
            Term::app("cfg", vec![Term::var("s", "Nat"), Term::var("i", "Nat")]),
            Pattern::truth(),
        );
        let claim = ConstrainedPattern::new(cfg(0, 1), Pattern::truth());
        let target = Pattern::Basic(cfg(999, 999));
        let inst = vec![GroundValuation::new()];
        assert_eq!(
            sys.oracle_partial(&claim, &target, &inst, 100).unwrap(),
            OracleVerdict::Holds
        );
        match sys.oracle_total(&claim, &target, &inst, 100).unwrap() {
            OracleVerdict::CounterexampleTrace { cyclic, .. } => assert!(cyclic),
            other => panic!("expected cyclic counterexample, got {other:?}"),
        }
        // execute with cycle detection reports the loop
        let r = sys.execute(&cfg(0, 1), 50, true).unwrap();
        assert_eq!(r.status, ExecStatus::CycleDetected(0));
    }

    #[test]
    fn well_definedness_checks() {
        let sys = counter_system();
        assert_eq!(
            check_weak_well_definedness(&sys.rules[0]),
            WellDefinedness::Pass
        );
        let mut bad = sys.rules[0].clone();
        bad.rhs.structure = Term::app(
            "cfg",
            vec![Term::var("fresh", "Nat"), Term::int(0, "Nat")],
        );
        assert!(matches!(
            check_weak_well_definedness(&bad),
            WellDefinedness::Warn(_)
        ));
    }

    #[test]
    fn rhs_unbound_variable_rejected() {
        let mut sys = counter_system();
        sys.rules[0].rhs.structure = Term::app(
            "cfg",
            vec![Term::var("w", "Nat"), Term::int(0, "Nat")],
        );
        assert!(matches!(
            sys.successors(&cfg(0, 1)),
            Err(ExecError::RhsVariableUnbound { .. })
        ));
    }
}
