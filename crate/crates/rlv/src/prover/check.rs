//! Rule-by-rule validation of derivation trees.

use crate::pattern::{normalize, Pattern};
use crate::solver::Backend;
use crate::system::ReachabilitySystem;

use super::step::symbolic_step;
use super::{renaming_equal, same_claims, Claim, Payload, ProofTree, RuleName};

/// Validates a single node against its named rule. Premise subtrees are
/// inspected only through their conclusions; use [`check_proof`] for whole
/// trees.
pub fn check_node(
    sys: &ReachabilitySystem,
    backend: &Backend,
    node: &ProofTree,
) -> Result<(), String> {
    let sig = &sys.signature;
    let concl = &node.conclusion;
    let claim = &concl.claim;
    let arity_err = |want: usize| {
        Err(format!(
            "{} expects {} premise(s), found {}",
            node.rule.as_str(),
            want,
            node.premises.len()
        ))
    };
    match node.rule {
        RuleName::Reflexivity => {
            if !node.premises.is_empty() {
                return arity_err(0);
            }
            if claim.lhs != claim.rhs {
                return Err("Reflexivity requires syntactically equal sides".to_string());
            }
            Ok(())
        }
        RuleName::Axiom => {
            if !node.premises.is_empty() {
                return arity_err(0);
            }
            if concl.axioms.iter().any(|a| renaming_equal(a, claim)) {
                Ok(())
            } else {
                Err("Axiom: claim is not an axiom up to variable renaming".to_string())
            }
        }
        RuleName::Transitivity => {
            if node.premises.len() != 2 {
                return arity_err(2);
            }
            let Payload::Transitivity { mid } = &node.payload else {
                return Err("Transitivity requires an intermediate pattern payload".to_string());
            };
            let p1 = &node.premises[0].conclusion;
            let p2 = &node.premises[1].conclusion;
            if p1.claim != Claim::new(claim.lhs.clone(), mid.clone()) {
                return Err("Transitivity: first premise must prove lhs ⇒ mid".to_string());
            }
            if !same_claims(&p1.axioms, &concl.axioms)
                || !same_claims(&p1.circularities, &concl.circularities)
            {
                return Err("Transitivity: first premise must keep the context".to_string());
            }
            if p2.claim != Claim::new(mid.clone(), claim.rhs.clone()) {
                return Err("Transitivity: second premise must prove mid ⇒ rhs".to_string());
            }
            let mut merged = concl.axioms.clone();
            for c in &concl.circularities {
                if !merged.contains(c) {
                    merged.push(c.clone());
                }
            }
            if !same_claims(&p2.axioms, &merged) {
                return Err(
                    "Transitivity: second premise must take A ∪ C as axioms".to_string()
                );
            }
            if !p2.circularities.is_empty() {
                return Err(
                    "Transitivity: second premise must have empty circularities".to_string()
                );
            }
            Ok(())
        }
        RuleName::CaseAnalysis => {
            if node.premises.len() != 2 {
                return arity_err(2);
            }
            let Pattern::Or(d1, d2) = &claim.lhs else {
                return Err("CaseAnalysis: conclusion lhs must be a disjunction".to_string());
            };
            for (premise, disjunct) in node.premises.iter().zip([d1.as_ref(), d2.as_ref()]) {
                let p = &premise.conclusion;
                if p.claim != Claim::new(disjunct.clone(), claim.rhs.clone()) {
                    return Err("CaseAnalysis: premise must prove its disjunct ⇒ rhs".to_string());
                }
                if !same_claims(&p.axioms, &concl.axioms)
                    || !same_claims(&p.circularities, &concl.circularities)
                {
                    return Err("CaseAnalysis: premise must keep the context".to_string());
                }
            }
            Ok(())
        }
        RuleName::Circularity => {
            if node.premises.len() != 1 {
                return arity_err(1);
            }
            let p = &node.premises[0].conclusion;
            if p.claim != *claim {
                return Err("Circularity: premise must prove the same claim".to_string());
            }
            if !same_claims(&p.axioms, &concl.axioms) {
                return Err("Circularity: premise must keep the axioms".to_string());
            }
            let mut extended = concl.circularities.clone();
            if !extended.contains(claim) {
                extended.push(claim.clone());
            }
            if !same_claims(&p.circularities, &extended) {
                return Err(
                    "Circularity: premise must register the claim as a circularity".to_string()
                );
            }
            Ok(())
        }
        RuleName::Abstraction => {
            if node.premises.len() != 1 {
                return arity_err(1);
            }
            let Payload::Abstraction { vars } = &node.payload else {
                return Err("Abstraction requires a variable payload".to_string());
            };
            let rhs_free = claim.rhs.free_vars();
            if let Some(v) = vars.iter().find(|v| rhs_free.contains(v)) {
                return Err(format!(
                    "Abstraction: variable {} occurs free in the rhs",
                    v.name
                ));
            }
            // The conclusion lhs must be ∃ vars . (premise lhs).
            let p = &node.premises[0].conclusion;
            let mut expected = p.claim.lhs.clone();
            for v in vars.iter().rev() {
                expected = Pattern::exists(v.clone(), expected);
            }
            if claim.lhs != expected {
                return Err(
                    "Abstraction: conclusion lhs must quantify the payload variables over the \
                     premise lhs"
                        .to_string(),
                );
            }
            if p.claim.rhs != claim.rhs {
                return Err("Abstraction: premise must keep the rhs".to_string());
            }
            if !same_claims(&p.axioms, &concl.axioms)
                || !same_claims(&p.circularities, &concl.circularities)
            {
                return Err("Abstraction: premise must keep the context".to_string());
            }
            Ok(())
        }
        RuleName::Consequence => {
            if node.premises.len() != 1 {
                return arity_err(1);
            }
            let Payload::Consequence { phi1p, phi2p } = &node.payload else {
                return Err("Consequence requires an implication payload".to_string());
            };
            let p = &node.premises[0].conclusion;
            if p.claim != Claim::new(phi1p.clone(), phi2p.clone()) {
                return Err("Consequence: premise must prove the payload claim".to_string());
            }
            if !same_claims(&p.axioms, &concl.axioms)
                || !same_claims(&p.circularities, &concl.circularities)
            {
                return Err("Consequence: premise must keep the context".to_string());
            }
            if !backend.implies(&claim.lhs, phi1p, sig).is_valid() {
                return Err("Consequence: undischarged side condition ⊨ φ₁ → φ₁′".to_string());
            }
            if !backend.implies(phi2p, &claim.rhs, sig).is_valid() {
                return Err("Consequence: undischarged side condition ⊨ φ₂′ → φ₂".to_string());
            }
            Ok(())
        }
        RuleName::Step => {
            if !node.premises.is_empty() {
                return arity_err(0);
            }
            let cps = normalize(&claim.lhs)
                .map_err(|e| format!("Step: lhs outside the prover fragment: {e}"))?;
            for cp in &cps {
                let result = symbolic_step(cp, sys, backend);
                if !result.covered {
                    return Err(
                        "Step: undischarged side condition: rule guards do not cover the lhs"
                            .to_string(),
                    );
                }
                for succ in &result.successors {
                    let succ_pat =
                        Pattern::and(Pattern::Basic(succ.structure.clone()), succ.constraint.clone());
                    if !backend.implies(&succ_pat, &claim.rhs, sig).is_valid() {
                        return Err(
                            "Step: undischarged successor implication".to_string()
                        );
                    }
                }
            }
            Ok(())
        }
    }
}

/// Recursively validates every node of the tree. On failure, reports the
/// preorder path (child indices from the root) of the first failing node
/// together with the reason.
pub fn check_proof(
    sys: &ReachabilitySystem,
    backend: &Backend,
    tree: &ProofTree,
) -> Result<(), (Vec<usize>, String)> {
    let mut path = Vec::new();
    check_rec(sys, backend, tree, &mut path)
}

fn check_rec(
    sys: &ReachabilitySystem,
    backend: &Backend,
    tree: &ProofTree,
    path: &mut Vec<usize>,
) -> Result<(), (Vec<usize>, String)> {
    check_node(sys, backend, tree).map_err(|reason| (path.clone(), reason))?;
    for (i, premise) in tree.premises.iter().enumerate() {
        path.push(i);
        check_rec(sys, backend, premise, path)?;
        path.pop();
    }
    Ok(())
}
