use super::*;
use crate::lang::counter::{counter_circularity, counter_system, counter_total_goal};
use crate::lang::imp::{imp_system, sum_circularity, sum_total_goal, sum_total_goal_unguarded};
use crate::pattern::{normalize, ConstrainedPattern, Pattern};
use crate::solver::Backend;
use crate::term::Term;
use crate::theta::{ext_system, make_total_goal};

fn counter_goal_sequent() -> (crate::system::ReachabilitySystem, Sequent) {
    let (ext_sys, ext) = ext_system(&counter_system()).unwrap();
    let goal = counter_total_goal();
    let (lhs, rhs) = make_total_goal(&goal, &ext);
    let (circ_lhs, circ_rhs) = counter_circularity(&ext);
    let sequent = Sequent::new(
        Vec::new(),
        vec![Claim::new(circ_lhs.to_pattern(), circ_rhs)],
        Claim::new(lhs.to_pattern(), rhs),
    );
    (ext_sys, sequent)
}

#[test]
fn reflexivity_node_checks() {
    let sys = counter_system();
    let backend = Backend::builtin_only();
    let phi = Pattern::Basic(Term::app(
        "cfg",
        vec![Term::var("s", "Nat"), Term::var("i", "Nat")],
    ));
    let node = ProofTree::leaf(
        RuleName::Reflexivity,
        Sequent::new(Vec::new(), Vec::new(), Claim::new(phi.clone(), phi)),
    );
    assert!(check_node(&sys, &backend, &node).is_ok());
    assert!(check_proof(&sys, &backend, &node).is_ok());
}

#[test]
fn transitivity_with_nonempty_circularities_rejected() {
    let sys = counter_system();
    let backend = Backend::builtin_only();
    let phi = Pattern::Basic(Term::app(
        "cfg",
        vec![Term::var("s", "Nat"), Term::var("i", "Nat")],
    ));
    let circ = Claim::new(phi.clone(), phi.clone());
    let refl = |circs: Vec<Claim>| {
        ProofTree::leaf(
            RuleName::Reflexivity,
            Sequent::new(Vec::new(), circs, Claim::new(phi.clone(), phi.clone())),
        )
    };
    let bad = ProofTree::node(
        RuleName::Transitivity,
        Sequent::new(Vec::new(), vec![circ.clone()], Claim::new(phi.clone(), phi.clone())),
        Payload::Transitivity { mid: phi.clone() },
        // The second premise illegally keeps the circularity set.
        vec![refl(vec![circ.clone()]), refl(vec![circ.clone()])],
    );
    let err = check_node(&sys, &backend, &bad).unwrap_err();
    assert!(err.contains("second premise"), "{err}");
}

#[test]
fn symbolic_step_on_loop_body() {
    let (ext_sys, ext) = ext_system(&counter_system()).unwrap();
    let (circ_lhs, _) = counter_circularity(&ext);
    // φ_L with the extra guard n′ > 0: the single rule applies and covers.
    let cp = ConstrainedPattern::new(
        circ_lhs.structure.clone(),
        Pattern::and(
            circ_lhs.constraint.clone(),
            Pattern::Pred(Term::app(
                ">",
                vec![Term::var("n'", "Nat"), Term::int(0, "Nat")],
            )),
        ),
    );
    let backend = Backend::builtin_only();
    let result = symbolic_step(&cp, &ext_sys, &backend);
    assert_eq!(result.successors.len(), 1);
    assert!(result.covered, "guards should cover n' > 0");
    // The successor keeps only source variables: the pinned rule variables
    // were eliminated by substitution.
    let succ = &result.successors[0];
    for v in succ.free_vars() {
        assert!(
            v.name == "n" || v.name == "n'",
            "unexpected leftover variable {}",
            v.name
        );
    }
}

#[test]
fn symbolic_step_with_unsatisfiable_guard() {
    let (ext_sys, ext) = ext_system(&counter_system()).unwrap();
    // ([x, 0], k) ∧ k ≥ 1: the rule guard i > 0 is unsatisfiable at i = 0.
    let cp = ConstrainedPattern::new(
        ext.pair(
            Term::app("cfg", vec![Term::var("x", "Nat"), Term::int(0, "Nat")]),
            Term::var("k", "Nat"),
        ),
        Pattern::Pred(Term::app(
            ">=",
            vec![Term::var("k", "Nat"), Term::int(1, "Nat")],
        )),
    );
    let backend = Backend::builtin_only();
    let result = symbolic_step(&cp, &ext_sys, &backend);
    assert!(result.successors.is_empty());
    assert!(!result.covered);
}

#[test]
fn renaming_equality_of_claims() {
    let phi = |s: &str, i: &str| {
        Pattern::Basic(Term::app(
            "cfg",
            vec![Term::var(s, "Nat"), Term::var(i, "Nat")],
        ))
    };
    let a = Claim::new(phi("s", "i"), phi("i", "s"));
    let b = Claim::new(phi("x", "y"), phi("y", "x"));
    let c = Claim::new(phi("x", "y"), phi("x", "y"));
    assert!(renaming_equal(&a, &b));
    assert!(!renaming_equal(&a, &c));
}

#[test]
fn counter_side_conditions_discharge() {
    let (ext_sys, ext) = ext_system(&counter_system()).unwrap();
    let sig = &ext_sys.signature;
    let backend = Backend::builtin_only();
    let goal = counter_total_goal();
    let (goal_lhs, goal_rhs) = make_total_goal(&goal, &ext);
    let (circ_lhs, circ_rhs) = counter_circularity(&ext);

    // Registration: the paired initial configuration satisfies ∃n′ φ_L.
    let v = backend.implies(&goal_lhs.to_pattern(), &circ_lhs.to_pattern(), sig);
    assert!(v.is_valid(), "registration lhs: {v:?}");
    // Registration: φ_R entails the goal's rhs (bound-variable renaming).
    let v = backend.implies(&circ_rhs, &goal_rhs, sig);
    assert!(v.is_valid(), "registration rhs: {v:?}");

    // Axiom application after one step: the stepped loop body re-enters
    // ∃n′ φ_L.
    let cp = ConstrainedPattern::new(
        circ_lhs.structure.clone(),
        Pattern::and(
            circ_lhs.constraint.clone(),
            Pattern::Pred(Term::app(
                ">",
                vec![Term::var("n'", "Nat"), Term::int(0, "Nat")],
            )),
        ),
    );
    let result = symbolic_step(&cp, &ext_sys, &backend);
    let succ = &result.successors[0];
    let stepped = Pattern::and(
        Pattern::Basic(succ.structure.clone()),
        succ.constraint.clone(),
    );
    let v = backend.implies(&stepped, &circ_lhs.to_pattern(), sig);
    assert!(v.is_valid(), "axiom lhs: {v:?}");

    // Exit: φ_L with no rule applicable means n′ = 0, which is φ_R.
    let exit = Pattern::and(
        Pattern::and(
            Pattern::Basic(circ_lhs.structure.clone()),
            circ_lhs.constraint.clone(),
        ),
        Pattern::not(Pattern::Pred(Term::app(
            ">",
            vec![Term::var("n'", "Nat"), Term::int(0, "Nat")],
        ))),
    );
    let v = backend.implies(&exit, &circ_rhs, sig);
    assert!(v.is_valid(), "exit: {v:?}");
}

#[test]
fn proves_counter_total_goal() {
    let (ext_sys, sequent) = counter_goal_sequent();
    let backend = Backend::builtin_only();
    let result = prove(&ext_sys, &backend, &sequent, &ProverConfig::default());
    let tree = match result {
        ProveResult::Proved(tree) => tree,
        ProveResult::Unknown(frontier) => {
            panic!("expected a proof, frontier: {frontier:#?}")
        }
    };
    assert!(check_proof(&ext_sys, &backend, &tree).is_ok());
    // The derivation has the expected overall shape: a transitivity into a
    // registered circularity, with a case split, an abstraction, a step,
    // and a closing axiom application.
    let mut rules = std::collections::BTreeMap::new();
    fn count(t: &ProofTree, into: &mut std::collections::BTreeMap<&'static str, usize>) {
        *into.entry(t.rule.as_str()).or_insert(0) += 1;
        for p in &t.premises {
            count(p, into);
        }
    }
    count(&tree, &mut rules);
    assert_eq!(tree.rule, RuleName::Transitivity);
    for rule in [
        "Step",
        "Axiom",
        "Transitivity",
        "CaseAnalysis",
        "Circularity",
        "Abstraction",
        "Reflexivity",
        "Consequence",
    ] {
        assert!(rules.contains_key(rule), "missing {rule} in {rules:?}");
    }
}

#[test]
fn prove_without_circularity_stays_unknown() {
    let (ext_sys, mut sequent) = counter_goal_sequent();
    sequent.circularities.clear();
    let backend = Backend::builtin_only();
    let config = ProverConfig {
        max_depth: 8,
        max_branches: 200,
        ..ProverConfig::default()
    };
    match prove(&ext_sys, &backend, &sequent, &config) {
        ProveResult::Unknown(frontier) => assert!(!frontier.is_empty()),
        ProveResult::Proved(_) => panic!("the unbounded loop cannot be proved by stepping"),
    }
}

fn sum_goal_sequent(goal: &crate::theta::TotalGoal) -> (crate::system::ReachabilitySystem, Sequent) {
    let (ext_sys, ext) = ext_system(&imp_system()).unwrap();
    let (lhs, rhs) = make_total_goal(goal, &ext);
    let (circ_lhs, circ_rhs) = sum_circularity(&ext);
    let sequent = Sequent::new(
        Vec::new(),
        vec![Claim::new(circ_lhs.to_pattern(), circ_rhs)],
        Claim::new(lhs.to_pattern(), rhs),
    );
    (ext_sys, sequent)
}

#[test]
fn proves_sum_total_goal() {
    let (ext_sys, sequent) = sum_goal_sequent(&sum_total_goal());
    let backend = Backend::builtin_only();
    let result = prove(&ext_sys, &backend, &sequent, &ProverConfig::default());
    let tree = match result {
        ProveResult::Proved(tree) => tree,
        ProveResult::Unknown(frontier) => {
            panic!("expected a proof, frontier: {frontier:#?}")
        }
    };
    assert!(check_proof(&ext_sys, &backend, &tree).is_ok());
}

#[test]
fn sum_without_precondition_stays_unknown() {
    // Without `z ≥ 0` the loop may diverge: the circularity cannot be
    // registered (its `k ≥ 0` is not implied) and stepping alone cannot
    // close an unbounded loop.
    let (ext_sys, sequent) = sum_goal_sequent(&sum_total_goal_unguarded());
    let backend = Backend::builtin_only();
    let config = ProverConfig {
        max_depth: 40,
        max_branches: 400,
        ..ProverConfig::default()
    };
    match prove(&ext_sys, &backend, &sequent, &config) {
        ProveResult::Unknown(frontier) => assert!(!frontier.is_empty()),
        ProveResult::Proved(_) => panic!("the unguarded goal must not be provable"),
    }
}

#[test]
fn step_node_checks_on_guarded_claim() {
    // The claim φ_L ∧ n′ > 0 ⇒ (successor disjunction) is a valid Step.
    let (ext_sys, ext) = ext_system(&counter_system()).unwrap();
    let (circ_lhs, _) = counter_circularity(&ext);
    let lhs = Pattern::and(
        Pattern::and(
            Pattern::Basic(circ_lhs.structure.clone()),
            circ_lhs.constraint.clone(),
        ),
        Pattern::Pred(Term::app(
            ">",
            vec![Term::var("n'", "Nat"), Term::int(0, "Nat")],
        )),
    );
    let backend = Backend::builtin_only();
    let cp = normalize(&lhs).unwrap().remove(0);
    let result = symbolic_step(&cp, &ext_sys, &backend);
    let succ = &result.successors[0];
    let rhs = Pattern::and(
        Pattern::Basic(succ.structure.clone()),
        succ.constraint.clone(),
    );
    let node = ProofTree::leaf(
        RuleName::Step,
        Sequent::new(Vec::new(), Vec::new(), Claim::new(lhs, rhs)),
    );
    assert!(check_node(&ext_sys, &backend, &node).is_ok());
}

