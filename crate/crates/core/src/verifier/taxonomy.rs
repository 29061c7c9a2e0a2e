//! Instance shapes mirroring the storage case analysis.
//!
//! A shape records how the element blocks spread over superblocks, how
//! each superblock's blocks fall on its lines, how many cross-superblock
//! pairs share a cube point, and how many blocks sit on another
//! superblock's line through an element block. Generators build random
//! realizations and keep only those whose recomputed shape matches.

use crate::geometry;
use crate::layout::Params;
use crate::scheme::BlockRef;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupShape {
    /// Blocks per line of this superblock, descending.
    pub lines: Vec<u8>,
}

impl GroupShape {
    pub fn size(&self) -> u8 {
        self.lines.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TaxonomyDescriptor {
    /// One entry per occupied superblock, sorted descending by size, then
    /// by line pattern.
    pub groups: Vec<GroupShape>,
    /// Pairs of element blocks from different superblocks on one point.
    pub coincidences: u8,
    /// Ordered pairs `(a, b)` from different superblocks with `b`'s point
    /// on `a`'s line but not equal to `a`'s point.
    pub line_hits: u8,
}

impl TaxonomyDescriptor {
    pub fn size(&self) -> u8 {
        self.groups.iter().map(GroupShape::size).sum()
    }

    /// Shape of a set of distinct element blocks.
    pub fn of_blocks(blocks: &[BlockRef]) -> Self {
        let mut by_superblock: BTreeMap<u64, BTreeMap<geometry::LineId, u8>> = BTreeMap::new();
        for b in blocks {
            *by_superblock
                .entry(b.superblock)
                .or_default()
                .entry(b.line)
                .or_default() += 1;
        }
        let mut groups: Vec<GroupShape> = by_superblock
            .values()
            .map(|lines| {
                let mut l: Vec<u8> = lines.values().copied().collect();
                l.sort_unstable_by(|a, b| b.cmp(a));
                GroupShape { lines: l }
            })
            .collect();
        groups.sort_by(|a, b| b.size().cmp(&a.size()).then_with(|| b.lines.cmp(&a.lines)));

        let mut coincidences = 0u8;
        let mut line_hits = 0u8;
        for (i, a) in blocks.iter().enumerate() {
            for (j, b) in blocks.iter().enumerate() {
                if i == j || a.superblock == b.superblock {
                    continue;
                }
                if i < j && a.point == b.point {
                    coincidences += 1;
                }
                if a.point != b.point
                    && geometry::line_id(a.slope, b.point).expect("slope ≥ 1") == a.line
                {
                    line_hits += 1;
                }
            }
        }
        Self {
            groups,
            coincidences,
            line_hits,
        }
    }
}

impl fmt::Display for TaxonomyDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .groups
            .iter()
            .map(|g| {
                let l: Vec<String> = g.lines.iter().map(u8::to_string).collect();
                format!("{}[{}]", g.size(), l.join(","))
            })
            .collect();
        write!(
            f,
            "{} coincide={} on-line={}",
            parts.join("+"),
            self.coincidences,
            self.line_hits
        )
    }
}

fn partitions(n: u8, max: u8) -> Vec<Vec<u8>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in (1..=n.min(max)).rev() {
        for mut rest in partitions(n - first, first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// All shapes for sets of `size` distinct blocks, with up to
/// `max_coincidences` coincidences and `max_hits` line hits.
pub fn all_descriptors(size: u8, max_coincidences: u8, max_hits: u8) -> Vec<TaxonomyDescriptor> {
    let mut out = BTreeSet::new();
    for split in partitions(size, size) {
        // Per-group line patterns; multisets of groups are canonicalized by
        // sorting inside the descriptor.
        let mut combos: Vec<Vec<GroupShape>> = vec![vec![]];
        for &g in &split {
            let shapes = partitions(g, g);
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    shapes.iter().map(move |s| {
                        let mut c = c.clone();
                        c.push(GroupShape { lines: s.clone() });
                        c
                    })
                })
                .collect();
        }
        let cross = split.len() > 1;
        for mut groups in combos {
            groups.sort_by(|a, b| b.size().cmp(&a.size()).then_with(|| b.lines.cmp(&a.lines)));
            let (mc, mh) = if cross {
                (max_coincidences, max_hits)
            } else {
                (0, 0)
            };
            for coincidences in 0..=mc {
                for line_hits in 0..=mh {
                    out.insert(TaxonomyDescriptor {
                        groups: groups.clone(),
                        coincidences,
                        line_hits,
                    });
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Result of trying to realize one descriptor.
#[derive(Debug, Clone)]
pub enum Realization {
    /// Element sets (one element per block) matching the descriptor.
    Found(Vec<Vec<u64>>),
    Skipped(String),
}

/// Structural reasons a descriptor cannot be realized under `params`.
fn impossible(params: &Params, d: &TaxonomyDescriptor, longest: &[u64]) -> Option<String> {
    if d.groups.len() as u64 > params.num_superblocks {
        return Some(format!(
            "needs {} superblocks, layout has {}",
            d.groups.len(),
            params.num_superblocks
        ));
    }
    let mut capable: Vec<u64> = longest.to_vec();
    capable.sort_unstable_by(|a, b| b.cmp(a));
    let mut needs: Vec<u64> = d.groups.iter().map(|g| g.lines[0] as u64).collect();
    needs.sort_unstable_by(|a, b| b.cmp(a));
    // Pair the i-th most demanding group with the i-th longest family.
    for (need, have) in needs.iter().zip(&capable) {
        if need > have {
            return Some(format!(
                "a line with {need} blocks needs a family whose lines reach that length; \
                 best remaining family reaches {have}"
            ));
        }
    }
    None
}

fn build_attempt(
    params: &Params,
    d: &TaxonomyDescriptor,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<BlockRef>> {
    let superblocks: Vec<u64> =
        rand::seq::index::sample(rng, params.num_superblocks as usize, d.groups.len())
            .into_iter()
            .map(|s| s as u64)
            .collect();
    let mut placed: Vec<BlockRef> = Vec::new();
    let cube = params.x.pow(3);
    let want_relations = d.coincidences + d.line_hits > 0;
    for (g, &s) in d.groups.iter().zip(&superblocks) {
        let n = s + 1;
        let mut used_lines = BTreeSet::new();
        for &count in &g.lines {
            let random_point = |rng: &mut ChaCha8Rng| {
                geometry::CubePoint::from_index(rng.random_range(0..cube), params.x)
            };
            // An anchor point, and whether it must be one of the chosen points.
            let (anchor, pinned) = if want_relations && !placed.is_empty() && rng.random_bool(0.6) {
                let other = *placed.choose(rng)?;
                match rng.random_range(0..3) {
                    0 => (other.point, true),
                    1 => {
                        let on =
                            geometry::points_on_line(other.slope, params.x, other.line).ok()?;
                        (*on.choose(rng)?, true)
                    }
                    _ => (other.point, false),
                }
            } else {
                (random_point(rng), true)
            };
            let line = geometry::line_id(n, anchor).ok()?;
            if !used_lines.insert(line) {
                return None;
            }
            let pts = geometry::points_on_line(n, params.x, line).ok()?;
            if (pts.len() as u8) < count {
                return None;
            }
            let mut chosen: Vec<geometry::CubePoint> = Vec::with_capacity(count as usize);
            if pinned {
                chosen.push(anchor);
            }
            let rest: Vec<_> = pts
                .iter()
                .copied()
                .filter(|p| !chosen.contains(p))
                .collect();
            let missing = count as usize - chosen.len().min(count as usize);
            chosen.extend(rest.choose_multiple(rng, missing).copied());
            chosen.truncate(count as usize);
            for p in &chosen {
                placed.push(BlockRef::new(params, params.block_at(s, *p)).ok()?);
            }
        }
    }
    Some(placed)
}

/// Try to realize `d` up to `attempts` times, returning at most `want`
/// distinct element sets. Elements get random in-block offsets.
pub fn realize(
    params: &Params,
    d: &TaxonomyDescriptor,
    seed: u64,
    want: usize,
    attempts: usize,
) -> Realization {
    let longest: Vec<u64> = (1..=params.num_superblocks.min(64))
        .map(|n| longest_line(n, params.x))
        .collect();
    if let Some(reason) = impossible(params, d, &longest) {
        return Realization::Skipped(reason);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: BTreeSet<Vec<u64>> = BTreeSet::new();
    for _ in 0..attempts {
        if found.len() >= want {
            break;
        }
        let Some(blocks) = build_attempt(params, d, &mut rng) else {
            continue;
        };
        if &TaxonomyDescriptor::of_blocks(&blocks) != d {
            continue;
        }
        let mut elements: Vec<u64> = blocks
            .iter()
            .map(|b| b.global_block * params.y + rng.random_range(0..params.y))
            .filter(|&e| e < params.m_requested)
            .collect();
        if elements.len() != blocks.len() {
            continue;
        }
        elements.sort_unstable();
        found.insert(elements);
    }
    if found.is_empty() {
        Realization::Skipped(format!("no realization within {attempts} attempts"))
    } else {
        Realization::Found(found.into_iter().collect())
    }
}

fn longest_line(n: u64, side: u64) -> u64 {
    // The line through the origin corner is the longest of its family.
    geometry::points_on_line(n, side, geometry::LineId { c: 0, k: 0 })
        .map(|p| p.len() as u64)
        .unwrap_or(0)
}

/// One emitted taxonomy instance.
#[derive(Debug, Clone, Serialize)]
pub struct TaxonomyInstance {
    pub descriptor: TaxonomyDescriptor,
    pub elements: Vec<u64>,
}

/// Outcome of a full sweep: instances plus skipped descriptors.
#[derive(Debug, Clone, Default)]
pub struct TaxonomySweep {
    pub instances: Vec<TaxonomyInstance>,
    pub skipped: Vec<(TaxonomyDescriptor, String)>,
    pub realized: usize,
}

/// Every descriptor for sets of 3, 4 and 5 blocks with at most two
/// coincidences and eight line hits, realized up to
/// `per_descriptor` times each.
pub fn generate_taxonomy_instances(
    params: &Params,
    seed: u64,
    per_descriptor: usize,
) -> TaxonomySweep {
    let mut sweep = TaxonomySweep::default();
    let mut index = 0u64;
    for size in 3..=5u8 {
        for d in all_descriptors(size, 2, 8) {
            let s = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            index += 1;
            match realize(params, &d, s, per_descriptor, 3000) {
                Realization::Found(sets) => {
                    sweep.realized += 1;
                    sweep
                        .instances
                        .extend(sets.into_iter().map(|elements| TaxonomyInstance {
                            descriptor: d.clone(),
                            elements,
                        }));
                }
                Realization::Skipped(reason) => sweep.skipped.push((d, reason)),
            }
        }
    }
    sweep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks_of(params: &Params, elements: &[u64]) -> Vec<BlockRef> {
        elements
            .iter()
            .map(|&e| BlockRef::new(params, e / params.y).unwrap())
            .collect()
    }

    #[test]
    fn partition_counts() {
        assert_eq!(partitions(5, 5).len(), 7);
        assert_eq!(partitions(4, 4).len(), 5);
        assert_eq!(partitions(3, 3), vec![vec![3], vec![2, 1], vec![1, 1, 1]]);
    }

    #[test]
    fn single_superblock_has_no_cross_relations() {
        let ds = all_descriptors(5, 2, 8);
        assert!(ds
            .iter()
            .filter(|d| d.groups.len() == 1)
            .all(|d| d.coincidences == 0 && d.line_hits == 0));
        assert_eq!(ds.iter().filter(|d| d.groups.len() == 1).count(), 7);
    }

    #[test]
    fn five_on_one_line() {
        let p = Params::choose(2048, None).unwrap();
        let d = TaxonomyDescriptor {
            groups: vec![GroupShape { lines: vec![5] }],
            coincidences: 0,
            line_hits: 0,
        };
        let Realization::Found(sets) = realize(&p, &d, 1, 3, 3000) else {
            panic!("x=8 has lines of length 8");
        };
        for s in sets {
            let blocks = blocks_of(&p, &s);
            assert_eq!(s.len(), 5);
            assert!(blocks
                .iter()
                .all(|b| b.line == blocks[0].line && b.superblock == blocks[0].superblock));
        }
    }

    #[test]
    fn three_two_with_two_coincidences() {
        let p = Params::choose(2048, None).unwrap();
        let d = TaxonomyDescriptor {
            groups: vec![
                GroupShape { lines: vec![3] },
                GroupShape { lines: vec![1, 1] },
            ],
            coincidences: 2,
            // Each block of the 3-line sees the two coincident blocks, except
            // the one sharing its own point.
            line_hits: 4,
        };
        let Realization::Found(sets) = realize(&p, &d, 7, 2, 5000) else {
            panic!("pattern is realizable at x=8");
        };
        for s in sets {
            assert_eq!(TaxonomyDescriptor::of_blocks(&blocks_of(&p, &s)), d);
        }
    }

    #[test]
    fn unrealizable_at_small_side_is_skipped() {
        let p = Params::choose(64, Some((2, 2))).unwrap();
        let d = TaxonomyDescriptor {
            groups: vec![GroupShape { lines: vec![3] }],
            coincidences: 0,
            line_hits: 0,
        };
        match realize(&p, &d, 0, 1, 100) {
            Realization::Skipped(reason) => assert!(reason.contains("line with 3 blocks")),
            Realization::Found(_) => panic!("lines of a side-2 cube hold at most 2 points"),
        }
    }

    #[test]
    fn sweep_emits_only_matching_sets() {
        let p = Params::choose(1024, Some((4, 2))).unwrap();
        let sweep = generate_taxonomy_instances(&p, 3, 2);
        assert!(sweep.realized > 0);
        for inst in &sweep.instances {
            assert!(inst.elements.len() <= 5);
            assert_eq!(
                TaxonomyDescriptor::of_blocks(&blocks_of(&p, &inst.elements)),
                inst.descriptor
            );
        }
    }
}
