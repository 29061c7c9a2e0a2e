//! Checks that a stored structure answers like a plain set would, plus the
//! combinatorial facts the layout relies on.

pub mod certify;
pub mod counterexample;
pub mod lemmas;
pub mod taxonomy;
pub mod validate;

pub use certify::{certify, certify_with, Fault, InstanceSource, VerifyReport};
pub use validate::{refute_all, validate_assignment, Violation};

/// Membership by linear scan. Deliberately naive.
pub fn oracle_membership(set: &[u64], e: u64) -> bool {
    set.contains(&e)
}
