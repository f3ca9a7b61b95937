//! Textual formats: the shared lexer, the term/pattern grammar, the
//! pretty-printer, and the theory/goal file formats.

pub mod goal;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod proof;
pub mod theory;

pub use lexer::ParseError;
pub use parser::{parse_pattern, parse_term, VarEnv};
pub use printer::{pattern_to_string, term_to_string};
pub use proof::{parse_proof, print_proof, ProofFile};
pub use theory::{parse_theory, print_theory, TheoryFile};
