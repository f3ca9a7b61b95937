//! The shipped theory/goal/proof files stay in sync with the compiled-in
//! definitions: regenerating each bundle reproduces it byte for byte, and
//! loading it back yields the in-memory objects.

use rlv::lang::counter::{
    counter_circularity, counter_golden_proof, counter_system, counter_total_goal,
};
use rlv::lang::imp::{imp_system, sum_circularity, sum_total_goal, sum_total_goal_unguarded};
use rlv::pattern::Pattern;
use rlv::solver::Backend;
use rlv::syntax::goal::{parse_goal, print_goal, Circularity, GoalFile, GoalKind, InstanceClause};
use rlv::syntax::theory::derive_vars;
use rlv::syntax::{parse_proof, parse_theory, print_proof, print_theory};
use rlv::term::Variable;
use rlv::theta::{ext_system, TotalGoal};

const COUNTER_TH: &str = include_str!("../bundles/counter.th");
const COUNTER_EXT_TH: &str = include_str!("../bundles/counter-ext.th");
const IMP_TH: &str = include_str!("../bundles/imp.th");
const COUNTER_TOTAL_GOAL: &str = include_str!("../bundles/counter-total.goal");
const SUM_TOTAL_GOAL: &str = include_str!("../bundles/sum-total.goal");
const SUM_UNGUARDED_GOAL: &str = include_str!("../bundles/sum-total-unguarded.goal");
const COUNTER_PROOF: &str = include_str!("../bundles/counter-derivation.proof");

fn total_goal_file(
    goal: &TotalGoal,
    vars: &[(&str, &str)],
    circ: Pattern,
    instances: Vec<InstanceClause>,
) -> GoalFile {
    GoalFile {
        name: goal.name.clone(),
        kind: GoalKind::Total,
        vars: vars
            .iter()
            .map(|(n, s)| (n.to_string(), s.to_string()))
            .collect(),
        lhs: goal.lhs.to_pattern(),
        rhs: goal.rhs.clone(),
        bound: Some(goal.bound.clone()),
        circularities: vec![Circularity {
            lhs: circ,
            rhs: None,
        }],
        instance_clauses: instances,
        templates: vec![],
    }
}

#[test]
fn theories_match_and_load() {
    let counter = counter_system();
    let vars = derive_vars(&counter).unwrap();
    assert_eq!(print_theory("counter", &counter, &vars), COUNTER_TH);
    assert_eq!(parse_theory(COUNTER_TH).unwrap().system, counter);

    let (ext_counter, _) = ext_system(&counter).unwrap();
    let vars = derive_vars(&ext_counter).unwrap();
    assert_eq!(
        print_theory("counter-ext", &ext_counter, &vars),
        COUNTER_EXT_TH
    );
    // Re-loading the transformation's output yields the in-memory extension.
    assert_eq!(parse_theory(COUNTER_EXT_TH).unwrap().system, ext_counter);

    let imp = imp_system();
    let vars = derive_vars(&imp).unwrap();
    assert_eq!(print_theory("imp", &imp, &vars), IMP_TH);
    assert_eq!(parse_theory(IMP_TH).unwrap().system, imp);
}

#[test]
fn counter_goal_matches_and_loads() {
    let counter = counter_system();
    let (_, ext) = ext_system(&counter).unwrap();
    let goal = counter_total_goal();
    let (circ_lhs, _) = counter_circularity(&ext);
    let gf = total_goal_file(
        &goal,
        &[("n", "Nat")],
        circ_lhs.to_pattern(),
        vec![InstanceClause::Range {
            var: Variable::new("n", "Nat"),
            lo: 0,
            hi: 25,
        }],
    );
    assert_eq!(print_goal(&gf), COUNTER_TOTAL_GOAL);
    let parsed = parse_goal(COUNTER_TOTAL_GOAL, &counter.signature).unwrap();
    assert_eq!(parsed, gf);
}

#[test]
fn sum_goals_match_and_load() {
    let imp = imp_system();
    let (_, ext) = ext_system(&imp).unwrap();
    let (circ_lhs, _) = sum_circularity(&ext);

    let gf = total_goal_file(
        &sum_total_goal(),
        &[("z", "Int")],
        circ_lhs.to_pattern(),
        vec![InstanceClause::Range {
            var: Variable::new("z", "Int"),
            lo: 0,
            hi: 10,
        }],
    );
    assert_eq!(print_goal(&gf), SUM_TOTAL_GOAL);
    assert_eq!(parse_goal(SUM_TOTAL_GOAL, &imp.signature).unwrap(), gf);

    let gf = total_goal_file(
        &sum_total_goal_unguarded(),
        &[("z", "Int")],
        circ_lhs.to_pattern(),
        vec![],
    );
    assert_eq!(print_goal(&gf), SUM_UNGUARDED_GOAL);
    assert_eq!(parse_goal(SUM_UNGUARDED_GOAL, &imp.signature).unwrap(), gf);
}

#[test]
fn golden_proof_matches_and_loads() {
    let (ext_sys, ext) = ext_system(&counter_system()).unwrap();
    let backend = Backend::builtin_only();
    let tree = counter_golden_proof(&ext_sys, &ext, &backend);
    assert_eq!(
        print_proof("counter-derivation", &tree).unwrap(),
        COUNTER_PROOF
    );
    let parsed = parse_proof(COUNTER_PROOF, &ext_sys.signature).unwrap();
    assert_eq!(parsed.tree, tree);
}
