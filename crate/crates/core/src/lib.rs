//! Adaptive two-probe static membership for sets of at most five
//! elements, in `O(m^{10/11})` bits.
//!
//! A query reads one direction bit from table T, then one bit from either
//! the per-line table T0 or the per-point table T1. Blocks of `y` elements
//! are laid out on the integral points of an `x`-sided cube, one copy per
//! superblock, and superblock `n` groups its points along lines of
//! direction `(n, 1, n²)`.

pub mod cli;
pub mod geometry;
pub mod layout;
pub mod scheme;
pub mod tables;
pub mod verifier;

pub use layout::{Layout, Params, SlotDirectory, SpaceModel};
pub use scheme::{store, BlockRef, Side, Solution, StoredSet};
pub use tables::Tables;
