//! The reachability-logic proof system: derivation trees over sequents
//! `S, A ⊢_C φ ⇒ φ′`, a rule-by-rule checker for explicit trees, and an
//! automatic prover that searches for derivations with symbolic stepping
//! and user-supplied circularities.
//!
//! The eight derivation rules are Step, Axiom, Transitivity, CaseAnalysis,
//! Circularity, Abstraction, Reflexivity, and Consequence. Semantic side
//! conditions (implications between constrained patterns) are discharged
//! through the constraint backend on the hole-translations of the patterns
//! involved.

mod check;
mod search;
mod step;
#[cfg(test)]
mod tests;

pub use check::{check_node, check_proof};
pub use search::{prove, ProveResult, ProverConfig};
pub use step::{symbolic_step, StepResult};

use std::collections::BTreeMap;

use crate::pattern::Pattern;
use crate::term::{Term, Variable};

/// An all-path reachability claim `lhs ⇒ rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub lhs: Pattern,
    pub rhs: Pattern,
}

impl Claim {
    pub fn new(lhs: Pattern, rhs: Pattern) -> Claim {
        Claim { lhs, rhs }
    }
}

/// A judgment `S, A ⊢_C lhs ⇒ rhs`. The system `S` is implicit: it is
/// supplied to the checking and proving entry points, since every node of a
/// derivation refers to the same one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequent {
    /// The axioms `A`: claims that may be applied directly.
    pub axioms: Vec<Claim>,
    /// The circularities `C`: claims registered but not yet unlocked by a
    /// step of the system.
    pub circularities: Vec<Claim>,
    pub claim: Claim,
}

impl Sequent {
    pub fn new(axioms: Vec<Claim>, circularities: Vec<Claim>, claim: Claim) -> Sequent {
        Sequent {
            axioms,
            circularities,
            claim,
        }
    }
}

/// The derivation rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleName {
    Step,
    Axiom,
    Transitivity,
    CaseAnalysis,
    Circularity,
    Abstraction,
    Reflexivity,
    Consequence,
}

impl RuleName {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleName::Step => "Step",
            RuleName::Axiom => "Axiom",
            RuleName::Transitivity => "Transitivity",
            RuleName::CaseAnalysis => "CaseAnalysis",
            RuleName::Circularity => "Circularity",
            RuleName::Abstraction => "Abstraction",
            RuleName::Reflexivity => "Reflexivity",
            RuleName::Consequence => "Consequence",
        }
    }

    pub fn from_str(s: &str) -> Option<RuleName> {
        Some(match s {
            "Step" => RuleName::Step,
            "Axiom" => RuleName::Axiom,
            "Transitivity" => RuleName::Transitivity,
            "CaseAnalysis" => RuleName::CaseAnalysis,
            "Circularity" => RuleName::Circularity,
            "Abstraction" => RuleName::Abstraction,
            "Reflexivity" => RuleName::Reflexivity,
            "Consequence" => RuleName::Consequence,
            _ => return None,
        })
    }
}

/// Rule-specific data attached to a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    None,
    /// The intermediate pattern of a Transitivity node.
    Transitivity { mid: Pattern },
    /// The strengthened/weakened sides of a Consequence node: the premise
    /// proves `phi1p ⇒ phi2p` while the conclusion claims `φ₁ ⇒ φ₂`, subject
    /// to `⊨ φ₁ → phi1p` and `⊨ phi2p → φ₂`.
    Consequence { phi1p: Pattern, phi2p: Pattern },
    /// The variables abstracted away from the conclusion's lhs.
    Abstraction { vars: Vec<Variable> },
}

/// A derivation tree: a rule instance with its conclusion sequent, payload,
/// and premise subtrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofTree {
    pub rule: RuleName,
    pub conclusion: Sequent,
    pub payload: Payload,
    pub premises: Vec<ProofTree>,
}

impl ProofTree {
    pub fn leaf(rule: RuleName, conclusion: Sequent) -> ProofTree {
        ProofTree {
            rule,
            conclusion,
            payload: Payload::None,
            premises: Vec::new(),
        }
    }

    pub fn node(
        rule: RuleName,
        conclusion: Sequent,
        payload: Payload,
        premises: Vec<ProofTree>,
    ) -> ProofTree {
        ProofTree {
            rule,
            conclusion,
            payload,
            premises,
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(ProofTree::size).sum::<usize>()
    }
}

// ---------------------------------------------------------------------------
// Equality of claims up to variable renaming
// ---------------------------------------------------------------------------

/// Whether two claims are equal up to a consistent bijective renaming of
/// variables, applied across both sides.
pub fn renaming_equal(a: &Claim, b: &Claim) -> bool {
    let mut fwd = BTreeMap::new();
    let mut bwd = BTreeMap::new();
    pat_req(&a.lhs, &b.lhs, &mut fwd, &mut bwd)
        && pat_req(&a.rhs, &b.rhs, &mut fwd, &mut bwd)
}

/// Whether two patterns are equal up to a bijective variable renaming.
pub fn pattern_renaming_equal(a: &Pattern, b: &Pattern) -> bool {
    let mut fwd = BTreeMap::new();
    let mut bwd = BTreeMap::new();
    pat_req(a, b, &mut fwd, &mut bwd)
}

fn var_req(
    a: &Variable,
    b: &Variable,
    fwd: &mut BTreeMap<Variable, Variable>,
    bwd: &mut BTreeMap<Variable, Variable>,
) -> bool {
    if a.sort != b.sort {
        return false;
    }
    match (fwd.get(a), bwd.get(b)) {
        (Some(x), Some(y)) => x == b && y == a,
        (None, None) => {
            fwd.insert(a.clone(), b.clone());
            bwd.insert(b.clone(), a.clone());
            true
        }
        _ => false,
    }
}

fn term_req(
    a: &Term,
    b: &Term,
    fwd: &mut BTreeMap<Variable, Variable>,
    bwd: &mut BTreeMap<Variable, Variable>,
) -> bool {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => var_req(x, y, fwd, bwd),
        (Term::App { symbol: f, args: fa }, Term::App { symbol: g, args: ga }) => {
            f == g
                && fa.len() == ga.len()
                && fa.iter().zip(ga).all(|(x, y)| term_req(x, y, fwd, bwd))
        }
        _ => a == b,
    }
}

fn pat_req(
    a: &Pattern,
    b: &Pattern,
    fwd: &mut BTreeMap<Variable, Variable>,
    bwd: &mut BTreeMap<Variable, Variable>,
) -> bool {
    match (a, b) {
        (Pattern::Basic(s), Pattern::Basic(t)) | (Pattern::Pred(s), Pattern::Pred(t)) => {
            term_req(s, t, fwd, bwd)
        }
        (Pattern::Eq(s1, s2), Pattern::Eq(t1, t2)) => {
            term_req(s1, t1, fwd, bwd) && term_req(s2, t2, fwd, bwd)
        }
        (Pattern::And(p1, p2), Pattern::And(q1, q2))
        | (Pattern::Or(p1, p2), Pattern::Or(q1, q2)) => {
            pat_req(p1, q1, fwd, bwd) && pat_req(p2, q2, fwd, bwd)
        }
        (Pattern::Not(p), Pattern::Not(q)) => pat_req(p, q, fwd, bwd),
        (Pattern::Exists(x, p), Pattern::Exists(y, q))
        | (Pattern::Forall(x, p), Pattern::Forall(y, q)) => {
            var_req(x, y, fwd, bwd) && pat_req(p, q, fwd, bwd)
        }
        _ => false,
    }
}

/// Set equality of claim lists (syntactic, order-insensitive).
pub(crate) fn same_claims(a: &[Claim], b: &[Claim]) -> bool {
    a.iter().all(|c| b.contains(c)) && b.iter().all(|c| a.contains(c))
}
