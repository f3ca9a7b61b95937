//! The counter language: configurations `cfg(s, i)` over naturals with the
//! single rule `cfg(s, i) ∧ i > 0 ⇒ cfg(s + i, i − 1)`, plus its bundled
//! correctness goals. Starting from `cfg(0, n)` the system terminates in
//! exactly `n` steps at `cfg(n(n+1)/2, 0)`, which makes it the smallest
//! interesting exercise for both the prover and the variant-pairing
//! transformation.

use crate::pattern::{normalize, ConstrainedPattern, Pattern};
use crate::system::{ReachabilityRule, ReachabilitySystem};
use crate::term::{BuiltinSort, Signature, Term, Variable};
use crate::theta::{ExtendedSignature, TotalGoal};

pub fn counter_signature() -> Signature {
    let mut sig = Signature::new();
    sig.add_sort("Bool", Some(BuiltinSort::Bool)).unwrap();
    sig.add_sort("Nat", Some(BuiltinSort::Nat)).unwrap();
    sig.add_sort("Cfg", None).unwrap();
    sig.add_symbol("cfg", &["Nat", "Nat"], "Cfg", false).unwrap();
    sig.set_cfg_sort("Cfg").unwrap();
    sig
}

pub fn counter_system() -> ReachabilitySystem {
    let s = Term::var("s", "Nat");
    let i = Term::var("i", "Nat");
    let rule = ReachabilityRule {
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
    };
    ReachabilitySystem {
        signature: counter_signature(),
        rules: vec![rule],
    }
}

/// `x + (x+1) + ... + y` in closed form: `y(y+1)/2 − (x−1)x/2`.
pub fn sum_range(x: &Term, y: &Term) -> Term {
    let half = |t: &Term, u: &Term| {
        Term::app(
            "/",
            vec![Term::app("*", vec![t.clone(), u.clone()]), Term::int(2, "Nat")],
        )
    };
    let y1 = Term::app("+", vec![y.clone(), Term::int(1, "Nat")]);
    let x1 = Term::app("-", vec![x.clone(), Term::int(1, "Nat")]);
    Term::app("-", vec![half(y, &y1), half(&x1, x)])
}

/// The bundled total-correctness goal: `cfg(0, n)` always reaches
/// `cfg(n(n+1)/2, 0)`, within a variant budget of `n` steps.
pub fn counter_total_goal() -> TotalGoal {
    let n = Term::var("n", "Nat");
    let one = Term::int(1, "Nat");
    let closed_form = Term::app(
        "/",
        vec![
            Term::app("*", vec![n.clone(), Term::app("+", vec![n.clone(), one])]),
            Term::int(2, "Nat"),
        ],
    );
    TotalGoal {
        name: "counter-total".to_string(),
        lhs: ConstrainedPattern::new(
            Term::app("cfg", vec![Term::int(0, "Nat"), n.clone()]),
            Pattern::truth(),
        ),
        rhs: Pattern::Basic(Term::app("cfg", vec![closed_form, Term::int(0, "Nat")])),
        bound: n,
    }
}

/// The loop invariant `φ_L`: after `n − n'` steps the configuration is
/// `(cfg(n'+1 + ... + n, n'), n')` for some remaining count `n' ≥ 0`.
pub fn phi_l(ext: &ExtendedSignature) -> Pattern {
    let n = Term::var("n", "Nat");
    let np = Term::var("n'", "Nat");
    let partial = sum_range(&Term::app("+", vec![np.clone(), Term::int(1, "Nat")]), &n);
    Pattern::and(
        Pattern::Basic(ext.pair(Term::app("cfg", vec![partial, np.clone()]), np.clone())),
        Pattern::Pred(Term::app(">=", vec![np, Term::int(0, "Nat")])),
    )
}

/// The target `φ_R = ∃m (cfg(1 + ... + n, 0), m)`.
pub fn phi_r(ext: &ExtendedSignature) -> Pattern {
    let n = Term::var("n", "Nat");
    let total = sum_range(&Term::int(1, "Nat"), &n);
    Pattern::exists(
        Variable::new("m", "Nat"),
        Pattern::Basic(ext.pair(
            Term::app("cfg", vec![total, Term::int(0, "Nat")]),
            Term::var("m", "Nat"),
        )),
    )
}

/// The circularity used by the bundled proof: `∃n' φ_L ⇒ φ_R`.
pub fn counter_circularity(ext: &ExtendedSignature) -> (ConstrainedPattern, Pattern) {
    let lhs = Pattern::exists(Variable::new("n'", "Nat"), phi_l(ext));
    let mut cps = normalize(&lhs).expect("circularity lhs normalizes");
    assert_eq!(cps.len(), 1, "circularity lhs must be a single basic pattern");
    (cps.remove(0), phi_r(ext))
}

/// The bundled golden derivation of `([0, n], n) ⇒∀ ∃m ([SUM(1,n), 0], m)`
/// over the transformed counter system, written out rule by rule: a
/// transitivity into the registered circularity, an abstraction of `n'`, a
/// case split on loop exit versus re-entry, one symbolic step, and a closing
/// axiom application. Exactly 14 nodes.
pub fn counter_golden_proof(
    ext_sys: &ReachabilitySystem,
    ext: &ExtendedSignature,
    backend: &crate::solver::Backend,
) -> crate::prover::ProofTree {
    use crate::prover::{symbolic_step, Claim, Payload, ProofTree, RuleName, Sequent};

    let n = Term::var("n", "Nat");
    let goal_lhs = Pattern::Basic(ext.pair(
        Term::app("cfg", vec![Term::int(0, "Nat"), n.clone()]),
        n,
    ));
    let phi_c = Pattern::exists(Variable::new("n'", "Nat"), phi_l(ext));
    let phi_r = phi_r(ext);
    let circ = Claim::new(phi_c.clone(), phi_r.clone());

    let guard = Pattern::Pred(Term::app(
        ">",
        vec![Term::var("n'", "Nat"), Term::int(0, "Nat")],
    ));
    let body = Pattern::and(phi_l(ext), guard.clone());
    let exit = Pattern::and(phi_l(ext), Pattern::not(guard));
    let split = Pattern::Or(Box::new(body.clone()), Box::new(exit.clone()));

    // The successor of one loop iteration, as the Step rule computes it.
    let cp = normalize(&body).expect("loop body normalizes").remove(0);
    let step = symbolic_step(&cp, ext_sys, backend);
    assert_eq!(step.successors.len(), 1, "the counter loop has one successor");
    let succ = &step.successors[0];
    let phi_s = Pattern::and(
        Pattern::Basic(succ.structure.clone()),
        succ.constraint.clone(),
    );

    // Contexts: the root has no axioms and no circularities; registering the
    // circularity makes it available as an axiom after the step.
    let seq = |claim: Claim| Sequent::new(Vec::new(), Vec::new(), claim);
    let seq_c = |claim: Claim| Sequent::new(Vec::new(), vec![circ.clone()], claim);
    let seq_a = |claim: Claim| Sequent::new(vec![circ.clone()], Vec::new(), claim);

    // Loop branch: step to φ_S, then apply the circularity as an axiom.
    let axiom = ProofTree::leaf(RuleName::Axiom, seq_a(circ.clone()));
    let close = ProofTree::node(
        RuleName::Consequence,
        seq_a(Claim::new(phi_s.clone(), phi_r.clone())),
        Payload::Consequence {
            phi1p: phi_c.clone(),
            phi2p: phi_r.clone(),
        },
        vec![axiom],
    );
    let step_node = ProofTree::leaf(
        RuleName::Step,
        seq_c(Claim::new(body.clone(), phi_s.clone())),
    );
    let loop_branch = ProofTree::node(
        RuleName::Transitivity,
        seq_c(Claim::new(body, phi_r.clone())),
        Payload::Transitivity { mid: phi_s },
        vec![step_node, close],
    );

    // Exit branch: n' = 0 makes φ_L the target itself.
    let refl_r = ProofTree::leaf(
        RuleName::Reflexivity,
        seq_c(Claim::new(phi_r.clone(), phi_r.clone())),
    );
    let exit_branch = ProofTree::node(
        RuleName::Consequence,
        seq_c(Claim::new(exit, phi_r.clone())),
        Payload::Consequence {
            phi1p: phi_r.clone(),
            phi2p: phi_r.clone(),
        },
        vec![refl_r],
    );

    let cases = ProofTree::node(
        RuleName::CaseAnalysis,
        seq_c(Claim::new(split.clone(), phi_r.clone())),
        Payload::None,
        vec![loop_branch, exit_branch],
    );
    let split_node = ProofTree::node(
        RuleName::Consequence,
        seq_c(Claim::new(phi_l(ext), phi_r.clone())),
        Payload::Consequence {
            phi1p: split,
            phi2p: phi_r.clone(),
        },
        vec![cases],
    );
    let abs = ProofTree::node(
        RuleName::Abstraction,
        seq_c(circ.clone()),
        Payload::Abstraction {
            vars: vec![Variable::new("n'", "Nat")],
        },
        vec![split_node],
    );
    let registered = ProofTree::node(
        RuleName::Circularity,
        seq(circ.clone()),
        Payload::None,
        vec![abs],
    );

    // Entry: the initial configuration satisfies ∃n' φ_L at n' = n.
    let refl_c = ProofTree::leaf(
        RuleName::Reflexivity,
        seq(Claim::new(phi_c.clone(), phi_c.clone())),
    );
    let entry = ProofTree::node(
        RuleName::Consequence,
        seq(Claim::new(goal_lhs.clone(), phi_c.clone())),
        Payload::Consequence {
            phi1p: phi_c.clone(),
            phi2p: phi_c.clone(),
        },
        vec![refl_c],
    );
    let main = ProofTree::node(
        RuleName::Transitivity,
        seq(Claim::new(goal_lhs.clone(), phi_r.clone())),
        Payload::Transitivity { mid: phi_c },
        vec![entry, registered],
    );
    // An explicit weakening at the root.
    ProofTree::node(
        RuleName::Consequence,
        seq(Claim::new(goal_lhs.clone(), phi_r.clone())),
        Payload::Consequence {
            phi1p: goal_lhs,
            phi2p: phi_r,
        },
        vec![main],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::GroundValuation;
    use crate::theta::{ext_system, make_total_goal};

    fn cfg(s: i64, i: i64) -> Term {
        Term::app("cfg", vec![Term::int(s, "Nat"), Term::int(i, "Nat")])
    }

    #[test]
    fn counter_runs_to_closed_form() {
        let sys = counter_system();
        let r = sys.execute(&cfg(0, 4), 100, false).unwrap();
        assert_eq!(r.trace.last().unwrap(), &cfg(10, 0));
    }

    #[test]
    fn sum_range_normalizes() {
        // sum_range(1, n) at n = 5 evaluates to 15; sum_range(n+1, n) to 0.
        let sig = counter_signature();
        let n = Variable::new("n", "Nat");
        let rho = GroundValuation::new().with(n.clone(), Term::int(5, "Nat"));
        let total = sum_range(&Term::int(1, "Nat"), &Term::Var(n.clone()));
        assert_eq!(rho.eval(&total, &sig).unwrap(), Term::int(15, "Nat"));
        let none = sum_range(
            &Term::app("+", vec![Term::Var(n.clone()), Term::int(1, "Nat")]),
            &Term::Var(n),
        );
        assert_eq!(rho.eval(&none, &sig).unwrap(), Term::int(0, "Nat"));
    }

    #[test]
    fn circularity_is_well_formed_over_extension() {
        let (ext_sys, ext) = ext_system(&counter_system()).unwrap();
        let (lhs, rhs) = counter_circularity(&ext);
        assert!(crate::pattern::well_sorted(&lhs.to_pattern(), &ext_sys.signature).is_ok());
        assert!(crate::pattern::well_sorted(&rhs, &ext_sys.signature).is_ok());
        assert_eq!(lhs.existentials.len(), 1);
    }

    #[test]
    fn total_goal_matches_executions() {
        let sys = counter_system();
        let goal = counter_total_goal();
        let instances: Vec<GroundValuation> = (0..=20)
            .map(|v| {
                GroundValuation::new().with(Variable::new("n", "Nat"), Term::int(v, "Nat"))
            })
            .collect();
        assert_eq!(
            sys.oracle_total(&goal.lhs, &goal.rhs, &instances, 100).unwrap(),
            crate::system::OracleVerdict::Holds
        );
    }

    #[test]
    fn golden_proof_checks_and_round_trips() {
        let (ext_sys, ext) = ext_system(&counter_system()).unwrap();
        let backend = crate::solver::Backend::builtin_only();
        let tree = counter_golden_proof(&ext_sys, &ext, &backend);
        assert_eq!(tree.size(), 14);
        crate::prover::check_proof(&ext_sys, &backend, &tree).unwrap();
        let printed =
            crate::syntax::print_proof("counter-derivation", &tree).unwrap();
        let parsed = crate::syntax::parse_proof(&printed, &ext_sys.signature).unwrap();
        assert_eq!(parsed.tree, tree);
    }

    #[test]
    fn paired_goal_builds() {
        let (_, ext) = ext_system(&counter_system()).unwrap();
        let goal = counter_total_goal();
        let (lhs, rhs) = make_total_goal(&goal, &ext);
        assert!(matches!(rhs, Pattern::Exists(_, _)));
        assert_eq!(crate::term::sort_of(&lhs.structure, &ext.sig).unwrap(), ext.cfg_prime);
    }
}
