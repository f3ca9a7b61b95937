//! Bundled language definitions: the counter system and IMP, together with
//! their correctness goals.

pub mod counter;
pub mod imp;

pub use counter::{counter_system, counter_total_goal};
pub use imp::{imp_system, initial_config, parse_imp, pretty_imp};
