//! Executable checks of the geometric and counting facts behind the layout.

use crate::geometry::{self, CubePoint};
use crate::layout::{Layout, Params, SpaceModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeSet, HashSet};
use std::fmt;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Distinct values of `a − n·b` over an `x × x` grid.
pub fn brute_layer_lines(n: u64, side: u64) -> u64 {
    let (n, side) = (n as i64, side as i64);
    let distinct: HashSet<i64> = (0..side)
        .flat_map(|a| (0..side).map(move |b| a - n * b))
        .collect();
    distinct.len() as u64
}

/// Closed-form layer line count against brute force on `n ∈ [1,10]`,
/// `x ∈ [1,40]`.
pub fn layer_line_count() -> CheckResult {
    let mut matches = 0;
    let mut mismatches = Vec::new();
    for n in 1..=10u64 {
        for side in 1..=40u64 {
            let formula = geometry::count_layer_lines(n, side).expect("n ≥ 1");
            let brute = brute_layer_lines(n, side);
            if formula == brute {
                matches += 1;
            } else {
                mismatches.push((n, side, formula, brute));
            }
        }
    }
    let mut detail = format!("{matches}/400 exact");
    if let Some(&(n, side, f, b)) = mismatches.first() {
        let all_past_side = mismatches.iter().all(|&(n, s, _, _)| n > s);
        detail.push_str(&format!(
            "; {} mismatches, first n={n} x={side} (formula {f}, brute {b}); \
             all with n > x: {all_past_side}",
            mismatches.len()
        ));
    }
    CheckResult {
        name: "layer line count",
        passed: mismatches.is_empty(),
        detail,
    }
}

/// Rank of an integer 3×3 matrix by fraction-free elimination.
fn rank3(mut m: [[i128; 3]; 3]) -> usize {
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..3 {
        let Some(pivot) = (rank..3).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, pivot);
        for r in (rank + 1)..3 {
            for c in (col + 1)..3 {
                m[r][c] = (m[rank][col] * m[r][c] - m[r][col] * m[rank][c]) / prev;
            }
            m[r][col] = 0;
        }
        prev = m[rank][col];
        rank += 1;
    }
    rank
}

fn direction(n: u64) -> [i128; 3] {
    let n = n as i128;
    [n, 1, n * n]
}

/// Certificates for every triple from `1..=30`, plus an elimination rank
/// check on `samples` random triples.
pub fn coplanarity(samples: usize, seed: u64) -> CheckResult {
    let mut triples = Vec::new();
    for a in 1..=30u64 {
        for b in (a + 1)..=30 {
            for c in (b + 1)..=30 {
                triples.push((a, b, c));
            }
        }
    }
    let zero: Vec<_> = triples
        .iter()
        .filter(|&&(a, b, c)| geometry::coplanarity_certificate(a, b, c).expect("distinct") == 0)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut low_rank = 0;
    for _ in 0..samples {
        let (a, b, c) = triples[rng.random_range(0..triples.len())];
        if rank3([direction(a), direction(b), direction(c)]) != 3 {
            low_rank += 1;
        }
    }
    CheckResult {
        name: "coplanarity",
        passed: triples.len() == 4060 && zero.is_empty() && low_rank == 0,
        detail: format!(
            "{} triples, {} zero certificates; {samples} sampled, {low_rank} below rank 3",
            triples.len(),
            zero.len()
        ),
    }
}

/// Each family's lines cover every cube point exactly once, for `n ≤ 6`
/// and `x ≤ 8`.
pub fn partition() -> CheckResult {
    let mut failures = Vec::new();
    for side in 1..=8u64 {
        let cube: BTreeSet<CubePoint> = (0..side.pow(3))
            .map(|i| CubePoint::from_index(i, side))
            .collect();
        for n in 1..=6u64 {
            let mut covered = BTreeSet::new();
            let mut repeats = 0usize;
            for line in geometry::enumerate_lines(n, side).expect("n ≥ 1") {
                for p in geometry::points_on_line(n, side, line).expect("n ≥ 1") {
                    if !covered.insert(p) {
                        repeats += 1;
                    }
                }
            }
            if covered != cube || repeats > 0 {
                failures.push((n, side));
            }
        }
    }
    CheckResult {
        name: "line partition",
        passed: failures.is_empty(),
        detail: format!(
            "48 (n, x) pairs, {} failures {:?}",
            failures.len(),
            failures
        ),
    }
}

/// Lines per family stay within `6n²x²`.
pub fn line_count_bound() -> CheckResult {
    let mut worst = 0.0f64;
    let mut over = 0;
    for side in 1..=12u64 {
        for n in 1..=8u64 {
            let len = geometry::enumerate_lines(n, side).expect("n ≥ 1").len() as u64;
            let bound = 6 * n * n * side * side;
            worst = worst.max(len as f64 / bound as f64);
            over += (len > bound) as usize;
        }
    }
    CheckResult {
        name: "line count bound",
        passed: over == 0,
        detail: format!("largest lines/(6n²x²) = {worst:.4}"),
    }
}

pub const SPACE_GRID: [u64; 4] = [1 << 11, 1 << 15, 1 << 19, 1 << 22];

/// Space models at default parameters.
pub fn space_grid(grid: &[u64]) -> Vec<SpaceModel> {
    grid.iter()
        .map(|&m| Layout::new(Params::choose(m, None).expect("m ≥ 1")).space_report())
        .collect()
}

/// `total / m^{10/11}` may not grow by more than 25% across the grid.
pub fn space_bound(models: &[SpaceModel]) -> CheckResult {
    let first = models.first().expect("nonempty grid").ratio;
    let last = models.last().expect("nonempty grid").ratio;
    let constant = models.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let ratios: Vec<String> = models.iter().map(|s| format!("{:.4}", s.ratio)).collect();
    CheckResult {
        name: "space bound",
        passed: last <= 1.25 * first,
        detail: format!(
            "ratios [{}], fitted constant {constant:.4}, growth {:+.1}%",
            ratios.join(", "),
            (last / first - 1.0) * 100.0
        ),
    }
}

/// Line count against `c·m³/(x⁷y³)`, with `c` fitted at the first model.
pub fn line_shape(models: &[SpaceModel]) -> CheckResult {
    let c_fit = models.first().expect("nonempty grid").c_lines;
    let mut over = Vec::new();
    let mut parts = Vec::new();
    for s in models {
        parts.push(format!("m={} c={:.4}", s.m, s.c_lines));
        if s.c_lines > c_fit {
            over.push(s.m);
        }
    }
    CheckResult {
        name: "line count shape",
        passed: over.is_empty(),
        detail: format!(
            "c_fit {c_fit:.4}; {}; exceeded at {:?}",
            parts.join(", "),
            over
        ),
    }
}

/// Every check above, for reporting.
pub fn lemma_suite() -> Vec<CheckResult> {
    let models = space_grid(&SPACE_GRID);
    vec![
        partition(),
        layer_line_count(),
        coplanarity(100, 0),
        line_count_bound(),
        space_bound(&models),
        line_shape(&models),
    ]
}
