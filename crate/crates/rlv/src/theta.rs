//! Reduction from total to partial correctness by variant pairing.
//!
//! The transformation extends a signature with a distinguished sort of
//! configuration/variant pairs, rewrites every basic pattern `π` to the pair
//! `(π, n)`, and turns each semantics rule into one that strictly decreases
//! the variant. In the transformed system every execution from `(γ, k)` has
//! length at most `k`, so a partial-correctness proof of the paired goal
//! certifies total correctness of the original.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::pattern::{ConstrainedPattern, Pattern};
use crate::system::{ReachabilityRule, ReachabilitySystem};
use crate::term::{
    fresh_variable, BuiltinSort, Signature, SignatureError, Term, Variable,
};

/// Name of the pairing constructor added to the signature.
pub const PAIR: &str = "pair";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ThetaError {
    #[error("name collision: `{0}` already declared (is this theory already transformed?)")]
    NameCollision(String),
    #[error(transparent)]
    Signature(#[from] SignatureError),
}

/// A signature extended with the variant machinery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedSignature {
    pub sig: Signature,
    /// The Nat sort carrying variants (reused if the base already had one).
    pub nat_sort: String,
    /// The new configuration sort of pairs.
    pub cfg_prime: String,
    /// The original configuration sort.
    pub cfg_base: String,
}

impl ExtendedSignature {
    /// Builds the pair `(γ, n)`.
    pub fn pair(&self, gamma: Term, n: Term) -> Term {
        Term::app(PAIR, vec![gamma, n])
    }
}

/// Extends a signature with the variant sort, the pair configuration sort
/// and its constructor, and `abs` (available once both Int and Nat exist).
pub fn ext_signature(sig: &Signature) -> Result<ExtendedSignature, ThetaError> {
    let cfg_base = sig.cfg_sort().to_string();
    let cfg_prime = format!("{cfg_base}'");
    if sig.has_sort(&cfg_prime) {
        return Err(ThetaError::NameCollision(cfg_prime));
    }
    if sig.has_symbol_named(PAIR) {
        return Err(ThetaError::NameCollision(PAIR.to_string()));
    }
    let mut out = sig.clone();
    let nat_sort = match sig.sort_name_of_builtin(BuiltinSort::Nat) {
        Some(n) => n,
        None => {
            if sig.has_sort("Nat") {
                return Err(ThetaError::NameCollision("Nat".to_string()));
            }
            out.add_sort("Nat", Some(BuiltinSort::Nat))?;
            "Nat".to_string()
        }
    };
    out.add_sort(&cfg_prime, None)?;
    out.add_symbol(PAIR, &[&cfg_base, &nat_sort], &cfg_prime, false)?;
    out.set_cfg_sort(&cfg_prime)?;
    Ok(ExtendedSignature {
        sig: out,
        nat_sort,
        cfg_prime,
        cfg_base,
    })
}

/// The pattern map: structureless patterns are unchanged, each basic pattern
/// `π` becomes the pair `(π, n)`, and all connectives are homomorphic.
pub fn ext_pattern(phi: &Pattern, n: &Term) -> Pattern {
    if phi.is_structureless() {
        return phi.clone();
    }
    match phi {
        Pattern::Basic(t) => Pattern::Basic(Term::app(PAIR, vec![t.clone(), n.clone()])),
        Pattern::Pred(_) | Pattern::Eq(_, _) => phi.clone(),
        Pattern::And(a, b) => Pattern::And(
            Box::new(ext_pattern(a, n)),
            Box::new(ext_pattern(b, n)),
        ),
        Pattern::Or(a, b) => Pattern::Or(
            Box::new(ext_pattern(a, n)),
            Box::new(ext_pattern(b, n)),
        ),
        Pattern::Not(a) => Pattern::Not(Box::new(ext_pattern(a, n))),
        Pattern::Exists(v, a) => Pattern::Exists(v.clone(), Box::new(ext_pattern(a, n))),
        Pattern::Forall(v, a) => Pattern::Forall(v.clone(), Box::new(ext_pattern(a, n))),
    }
}

fn ext_constrained(cp: &ConstrainedPattern, n: &Term) -> ConstrainedPattern {
    ConstrainedPattern {
        structure: Term::app(PAIR, vec![cp.structure.clone(), n.clone()]),
        constraint: cp.constraint.clone(),
        existentials: cp.existentials.clone(),
    }
}

/// The rule map: a fresh Nat variable `n` is paired onto both sides, the
/// left-hand side gains the guard `n ≥ 1`, and the right-hand side carries
/// `n − 1`. The guard makes `(γ, 0)` stuck without partial functions.
pub fn ext_rule(rule: &ReachabilityRule, ext: &ExtendedSignature) -> ReachabilityRule {
    let mut avoid: BTreeSet<Variable> = rule.lhs.free_vars();
    avoid.extend(rule.rhs.free_vars());
    avoid.extend(rule.lhs.constraint.all_vars());
    avoid.extend(rule.rhs.constraint.all_vars());
    let n = fresh_variable("n", &ext.nat_sort, &avoid);
    let n_term = Term::Var(n.clone());
    let mut lhs = ext_constrained(&rule.lhs, &n_term);
    lhs.constraint = Pattern::and(
        lhs.constraint,
        Pattern::Pred(Term::app(
            ">=",
            vec![n_term.clone(), Term::int(1, &ext.nat_sort)],
        )),
    );
    let n_minus_1 = Term::app("-", vec![n_term, Term::int(1, &ext.nat_sort)]);
    let rhs = ext_constrained(&rule.rhs, &n_minus_1);
    ReachabilityRule {
        label: format!("{}.theta", rule.label),
        lhs,
        rhs,
    }
}

/// The system map: extend the signature and transform each rule.
pub fn ext_system(sys: &ReachabilitySystem) -> Result<(ReachabilitySystem, ExtendedSignature), ThetaError> {
    let ext = ext_signature(&sys.signature)?;
    let rules = sys.rules.iter().map(|r| ext_rule(r, &ext)).collect();
    Ok((
        ReachabilitySystem {
            signature: ext.sig.clone(),
            rules,
        },
        ext,
    ))
}

/// A total-correctness goal over the base signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TotalGoal {
    pub name: String,
    pub lhs: ConstrainedPattern,
    pub rhs: Pattern,
    /// The variant bound `s`, a Nat-valued term over the lhs variables.
    pub bound: Term,
}

/// The paired partial-correctness claim certifying the total goal:
/// `ext(lhs, bound) ⇒∀ ∃M. ext(rhs, M)`.
pub fn make_total_goal(
    goal: &TotalGoal,
    ext: &ExtendedSignature,
) -> (ConstrainedPattern, Pattern) {
    let lhs = ext_constrained(&goal.lhs, &goal.bound);
    let mut avoid: BTreeSet<Variable> = goal.lhs.free_vars();
    avoid.extend(goal.rhs.all_vars());
    avoid.extend(crate::term::free_vars(&goal.bound));
    let m = fresh_variable("M", &ext.nat_sort, &avoid);
    let rhs = Pattern::exists(
        m.clone(),
        ext_pattern(&goal.rhs, &Term::Var(m)),
    );
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::ExecStatus;
    use crate::term::GroundValuation;

    fn counter_system() -> ReachabilitySystem {
        let mut sig = Signature::new();
        sig.add_sort("Bool", Some(BuiltinSort::Bool)).unwrap();
        sig.add_sort("Nat", Some(BuiltinSort::Nat)).unwrap();
        sig.add_sort("Cfg", None).unwrap();
        sig.add_symbol("cfg", &["Nat", "Nat"], "Cfg", false).unwrap();
        sig.set_cfg_sort("Cfg").unwrap();
        let s = Term::var("s", "Nat");
        let i = Term::var("i", "Nat");
        ReachabilitySystem {
            signature: sig,
            rules: vec![ReachabilityRule {
                label: "count".to_string(),
                lhs: ConstrainedPattern::new(
                    Term::app("cfg", vec![s.clone(), i.clone()]),
                    Pattern::Pred(Term::app(">", vec![i.clone(), Term::int(0, "Nat")])),
                ),
                rhs: ConstrainedPattern::new(
                    Term::app(
                        "cfg",
                        vec![
                            Term::app("+", vec![s.clone(), i.clone()]),
                            Term::app("-", vec![i, Term::int(1, "Nat")]),
                        ],
                    ),
                    Pattern::truth(),
                ),
            }],
        }
    }

    #[test]
    fn ext_signature_reuses_nat_and_rejects_reapplication() {
        let sys = counter_system();
        let ext = ext_signature(&sys.signature).unwrap();
        assert_eq!(ext.nat_sort, "Nat");
        assert_eq!(ext.cfg_prime, "Cfg'");
        assert_eq!(ext.sig.cfg_sort(), "Cfg'");
        assert!(ext.sig.has_symbol_named(PAIR));
        // applying twice collides
        assert!(matches!(
            ext_signature(&ext.sig),
            Err(ThetaError::NameCollision(_))
        ));
    }

    #[test]
    fn ext_pattern_clauses() {
        let n = Term::var("n", "Nat");
        // structureless unchanged
        let c = Pattern::Pred(Term::app(
            ">=",
            vec![Term::var("z", "Nat"), Term::int(0, "Nat")],
        ));
        assert_eq!(ext_pattern(&c, &n), c);
        // basic wrapped
        let pi = Term::app("cfg", vec![Term::int(0, "Nat"), Term::var("i", "Nat")]);
        assert_eq!(
            ext_pattern(&Pattern::Basic(pi.clone()), &n),
            Pattern::Basic(Term::app(PAIR, vec![pi.clone(), n.clone()]))
        );
        // π ∧ c → (π, n) ∧ c
        let conj = Pattern::and(Pattern::Basic(pi.clone()), c.clone());
        let out = ext_pattern(&conj, &n);
        assert_eq!(
            out,
            Pattern::and(
                Pattern::Basic(Term::app(PAIR, vec![pi.clone(), n.clone()])),
                c.clone()
            )
        );
        // ∃e homomorphism
        let ex = Pattern::exists(Variable::new("e", "Nat"), conj);
        let out = ext_pattern(&ex, &n);
        assert!(matches!(out, Pattern::Exists(_, _)));
        // structure count preserved
        assert!(!out.is_structureless());
    }

    #[test]
    fn ext_rule_counter() {
        let sys = counter_system();
        let ext = ext_signature(&sys.signature).unwrap();
        let r = ext_rule(&sys.rules[0], &ext);
        assert_eq!(r.label, "count.theta");
        // lhs structure is pair(cfg(s,i), n)
        match &r.lhs.structure {
            Term::App { symbol, args } => {
                assert_eq!(symbol, PAIR);
                assert_eq!(args[1], Term::var("n", "Nat"));
            }
            other => panic!("unexpected lhs {other:?}"),
        }
        // guard contains n ≥ 1
        let guard_str = format!("{:?}", r.lhs.constraint);
        assert!(guard_str.contains(">="));
        // rhs variant is n − 1
        match &r.rhs.structure {
            Term::App { args, .. } => {
                assert_eq!(
                    args[1],
                    Term::app("-", vec![Term::var("n", "Nat"), Term::int(1, "Nat")])
                );
            }
            other => panic!("unexpected rhs {other:?}"),
        }
    }

    #[test]
    fn ext_rule_freshness() {
        // a rule already using `n` gets `n0`
        let mut sys = counter_system();
        sys.rules[0].lhs.structure =
            Term::app("cfg", vec![Term::var("n", "Nat"), Term::var("i", "Nat")]);
        sys.rules[0].rhs.structure =
            Term::app("cfg", vec![Term::var("n", "Nat"), Term::var("i", "Nat")]);
        let ext = ext_signature(&sys.signature).unwrap();
        let r = ext_rule(&sys.rules[0], &ext);
        match &r.lhs.structure {
            Term::App { args, .. } => assert_eq!(args[1], Term::var("n0", "Nat")),
            other => panic!("unexpected lhs {other:?}"),
        }
    }

    #[test]
    fn step_simulation_and_length_bound() {
        let sys = counter_system();
        let (ext_sys, ext) = ext_system(&sys).unwrap();
        assert_eq!(ext_sys.rules.len(), 1);
        for n in 0..10i64 {
            for k in 0..12i64 {
                let gamma = Term::app("cfg", vec![Term::int(0, "Nat"), Term::int(n, "Nat")]);
                let paired = ext.pair(gamma.clone(), Term::int(k, "Nat"));
                let base_succs = sys.successors(&gamma).unwrap();
                let ext_succs = ext_sys.successors(&paired).unwrap();
                if k == 0 {
                    assert!(ext_succs.is_empty());
                } else {
                    let expect: Vec<Term> = base_succs
                        .iter()
                        .map(|g| ext.pair(g.clone(), Term::int(k - 1, "Nat")))
                        .collect();
                    assert_eq!(ext_succs, expect);
                }
                // length bound: executions from (γ, k) stop within k steps
                let r = ext_sys.execute(&paired, 1000, false).unwrap();
                assert!(r.trace.len() <= (k as usize) + 1);
                assert_eq!(r.status, ExecStatus::Complete);
            }
        }
    }

    #[test]
    fn make_total_goal_counter() {
        let sys = counter_system();
        let ext = ext_signature(&sys.signature).unwrap();
        let n = Term::var("n", "Nat");
        let goal = TotalGoal {
            name: "counter-total".to_string(),
            lhs: ConstrainedPattern::new(
                Term::app("cfg", vec![Term::int(0, "Nat"), n.clone()]),
                Pattern::truth(),
            ),
            rhs: Pattern::exists(
                Variable::new("m", "Nat"),
                Pattern::Basic(Term::app(
                    "cfg",
                    vec![Term::var("m", "Nat"), Term::int(0, "Nat")],
                )),
            ),
            bound: n.clone(),
        };
        let (lhs, rhs) = make_total_goal(&goal, &ext);
        // lhs is ([0, n], n)
        assert_eq!(
            lhs.structure,
            Term::app(
                PAIR,
                vec![Term::app("cfg", vec![Term::int(0, "Nat"), n.clone()]), n.clone()]
            )
        );
        // rhs is ∃M.∃m.(([m, 0], M))
        match &rhs {
            Pattern::Exists(mv, body) => {
                assert_eq!(mv.name, "M");
                match &**body {
                    Pattern::Exists(_, inner) => match &**inner {
                        Pattern::Basic(t) => {
                            let Term::App { symbol, args } = t else {
                                panic!()
                            };
                            assert_eq!(symbol, PAIR);
                            assert_eq!(args[1], Term::var("M", "Nat"));
                        }
                        other => panic!("unexpected inner {other:?}"),
                    },
                    other => panic!("unexpected body {other:?}"),
                }
            }
            other => panic!("expected ∃M, got {other:?}"),
        }
        // sanity: the paired claim holds semantically on small instances
        let (ext_sys, _) = ext_system(&sys).unwrap();
        let instances: Vec<GroundValuation> = (0..=6)
            .map(|v| {
                GroundValuation::new().with(Variable::new("n", "Nat"), Term::int(v, "Nat"))
            })
            .collect();
        let verdict = ext_sys
            .oracle_partial(&lhs, &rhs, &instances, 100)
            .unwrap();
        assert_eq!(verdict, crate::system::OracleVerdict::Holds);
    }
}
