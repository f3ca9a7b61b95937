//! A language-parametric program verifier.
//!
//! Operational semantics are given as reachability systems: sets of rewrite
//! rules between constrained configuration patterns. On top of them this
//! crate provides
//!
//! - a concrete interpreter and brute-force correctness oracles,
//! - a proof checker and an automatic prover for all-path reachability
//!   claims (partial correctness with circularities),
//! - a variant-pairing transformation that reduces total correctness to
//!   partial correctness, and
//! - a command-line front end (`rlv`) with textual theory/goal/proof
//!   formats.
//!
//! See the `guide` module for a book-style walkthrough.

pub mod lang;
pub mod pattern;
pub mod prover;
pub mod solver;
pub mod syntax;
pub mod system;
pub mod theta;
pub mod term;
pub mod cli;
