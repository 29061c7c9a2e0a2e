//! Feasibility checking that shares no code with the solver.
//!
//! Instead of comparing line ids pairwise, this walks each T0 element
//! block's line point by point, simulating where every block on it would be
//! sent, and looks for collisions in explicit occupancy maps.

use crate::layout::Params;
use crate::scheme::Side;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

/// Why a side assignment cannot be written without a wrong answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// Two element blocks claim the same T0 slot.
    SharedSlot { first: u64, second: u64 },
    /// Two element blocks claim the same T1 point.
    SharedPoint { first: u64, second: u64 },
    /// An empty block on `t0_block`'s line is pushed to T1, where
    /// `t1_block` already stores its bits.
    TrappedEmpty {
        t0_block: u64,
        t1_block: u64,
        empty_block: u64,
    },
}

fn coords(params: &Params, block: u64) -> (u64, [i64; 3]) {
    let per = params.x.pow(3);
    let local = block % per;
    let x = params.x;
    let p = [
        (local % x) as i64,
        ((local / x) % x) as i64,
        (local / (x * x)) as i64,
    ];
    (block / per, p)
}

fn block_of(params: &Params, superblock: u64, p: [i64; 3]) -> u64 {
    let x = params.x as i64;
    superblock * params.x.pow(3) + (p[0] + x * (p[1] + x * p[2])) as u64
}

fn point_key(params: &Params, p: [i64; 3]) -> u64 {
    block_of(params, 0, p)
}

/// Every other block of the same superblock reachable from `block` by
/// whole steps along `(n, 1, n²)` inside the cube, `n = superblock + 1`.
fn line_mates(params: &Params, block: u64) -> Vec<u64> {
    let (s, p) = coords(params, block);
    let n = (s + 1) as i64;
    let step = [n, 1, n * n];
    let side = params.x as i64;
    let inside = |q: [i64; 3]| q.iter().all(|&c| (0..side).contains(&c));
    let mut out = Vec::new();
    for dir in [1i64, -1] {
        let mut q = p;
        loop {
            for i in 0..3 {
                q[i] += dir * step[i];
            }
            if !inside(q) {
                break;
            }
            out.push(block_of(params, s, q));
        }
    }
    out
}

/// Check a side for each element block against the storage rules.
/// Returns the first violation found, scanning blocks in increasing order.
pub fn validate_assignment(params: &Params, sides: &BTreeMap<u64, Side>) -> Result<(), Violation> {
    let mut t1_at: HashMap<u64, u64> = HashMap::new();
    for (&block, _) in sides.iter().filter(|(_, &s)| s == Side::T1) {
        let key = point_key(params, coords(params, block).1);
        if let Some(&first) = t1_at.get(&key) {
            return Err(Violation::SharedPoint {
                first,
                second: block,
            });
        }
        t1_at.insert(key, block);
    }
    for (&block, _) in sides.iter().filter(|(_, &s)| s == Side::T0) {
        for mate in line_mates(params, block) {
            match sides.get(&mate) {
                Some(Side::T0) => {
                    let (first, second) = (block.min(mate), block.max(mate));
                    return Err(Violation::SharedSlot { first, second });
                }
                Some(Side::T1) => {}
                None => {
                    let key = point_key(params, coords(params, mate).1);
                    if let Some(&t1_block) = t1_at.get(&key) {
                        return Err(Violation::TrappedEmpty {
                            t0_block: block,
                            t1_block,
                            empty_block: mate,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// One line of a refutation: the side choice tried and what it breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefutationStep {
    /// Bit `i` set sends the `i`-th block (in increasing order) to T0.
    pub t0_mask: u64,
    pub violation: Violation,
}

/// Enumerate all `2^k` side choices. `Ok` carries one violation per choice
/// (the set is unstorable); `Err` carries the first mask that works.
pub fn refute_all(params: &Params, blocks: &[u64]) -> Result<Vec<RefutationStep>, u64> {
    let mut sorted = blocks.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let k = sorted.len();
    assert!(k < 32, "brute-force refutation is limited to small sets");
    let mut steps = Vec::with_capacity(1 << k);
    for mask in 0..(1u64 << k) {
        let sides: BTreeMap<u64, Side> = sorted
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                (
                    b,
                    if mask >> i & 1 == 1 {
                        Side::T0
                    } else {
                        Side::T1
                    },
                )
            })
            .collect();
        match validate_assignment(params, &sides) {
            Ok(()) => return Err(mask),
            Err(violation) => steps.push(RefutationStep {
                t0_mask: mask,
                violation,
            }),
        }
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Params;
    use crate::scheme::{solve_assignment, BlockRef, Solution};
    use proptest::prelude::*;

    fn sides(pairs: &[(u64, Side)]) -> BTreeMap<u64, Side> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn detects_each_rule() {
        // x=8, y=2: superblock 0 holds blocks 0..512, family (1,1,1).
        let p = Params::choose(2048, None).unwrap();
        let on_diag = |s: u64, t: u64| s * 512 + t * (1 + 8 + 64);
        assert_eq!(
            validate_assignment(
                &p,
                &sides(&[(on_diag(0, 0), Side::T0), (on_diag(0, 3), Side::T0)])
            ),
            Err(Violation::SharedSlot {
                first: 0,
                second: on_diag(0, 3)
            })
        );
        assert_eq!(
            validate_assignment(&p, &sides(&[(5, Side::T1), (517, Side::T1)])),
            Err(Violation::SharedPoint {
                first: 5,
                second: 517
            })
        );
        // Block 0 in T0 pushes the empty diagonal block at (1,1,1) to T1,
        // where superblock 1's block at (1,1,1) already sits.
        assert_eq!(
            validate_assignment(&p, &sides(&[(0, Side::T0), (512 + 73, Side::T1)])),
            Err(Violation::TrappedEmpty {
                t0_block: 0,
                t1_block: 585,
                empty_block: 73
            })
        );
        assert!(validate_assignment(&p, &sides(&[(0, Side::T0), (512, Side::T1)])).is_ok());
        assert!(validate_assignment(&p, &sides(&[])).is_ok());
    }

    #[test]
    fn line_mates_walk_both_ways() {
        let p = Params::choose(2048, None).unwrap();
        let mut mates = line_mates(&p, 2 * 73);
        mates.sort_unstable();
        assert_eq!(mates, vec![0, 73, 219, 292, 365, 438, 511]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn solver_output_passes_independent_check(
            raw in proptest::collection::btree_set(0u64..512, 0..=6),
        ) {
            let p = Params::choose(1024, Some((4, 2))).unwrap();
            let blocks: Vec<_> = raw.iter().map(|&b| BlockRef::new(&p, b).unwrap()).collect();
            let ids: Vec<u64> = raw.iter().copied().collect();
            match solve_assignment(&blocks).unwrap() {
                Solution::Feasible(s) => prop_assert!(validate_assignment(&p, &s).is_ok()),
                Solution::Infeasible => prop_assert!(refute_all(&p, &ids).is_ok()),
            }
            // Both agree on feasibility.
            prop_assert_eq!(
                solve_assignment(&blocks).unwrap().is_feasible(),
                refute_all(&p, &ids).is_err()
            );
        }
    }
}
