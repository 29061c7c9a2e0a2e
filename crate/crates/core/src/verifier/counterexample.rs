//! Search for small element sets that no side assignment can store.
//!
//! Constraints between element blocks are pairwise, so a set is storable
//! exactly when each connected piece of its relation graph is. The search
//! therefore only looks at connected block sets, enumerating them once each
//! from pivots in a seeded order. Enumeration gets three quarters of the
//! budget; if it does not finish, the rest goes to random connected growth.

use super::validate::{refute_all, RefutationStep};
use crate::geometry;
use crate::layout::{Layout, Params};
use crate::scheme::{self, BlockRef, ElementSides, Side, Solution};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

/// An unstorable set with its refutation and a deliberately broken structure.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub elements: Vec<u64>,
    pub blocks: Vec<u64>,
    /// One violated rule per side choice, covering all `2^k` choices.
    pub transcript: Vec<RefutationStep>,
    /// Side choice whose forced structure gives the fewest wrong answers.
    pub least_bad_mask: u64,
    /// Elements the forced structure answers wrongly.
    pub wrong_answers: Vec<u64>,
    /// The forced structure, serialized with its audit trailer.
    #[serde(skip)]
    pub structure: Vec<u8>,
}

#[derive(Debug, Clone, Serialize)]
pub enum SearchOutcome {
    Found(Box<Witness>),
    /// `exhausted` means every connected set of the requested size was
    /// examined, so none exists.
    NotFound {
        examined: u64,
        exhausted: bool,
    },
}

/// Blocks related to `a` in a way that constrains their sides.
fn related(a: &BlockRef, b: &BlockRef) -> bool {
    if a.global_block == b.global_block {
        return false;
    }
    if a.superblock == b.superblock {
        return a.line == b.line;
    }
    let on = |s: &BlockRef, t: &BlockRef| {
        geometry::line_id(s.slope, t.point).expect("slope ≥ 1") == s.line
    };
    a.point == b.point || on(a, b) || on(b, a)
}

/// Relation graph over blocks that hold at least one real element,
/// with neighbours computed on demand.
struct Graph<'a> {
    params: &'a Params,
    usable: u64,
    cache: HashMap<u64, Vec<u64>>,
}

impl<'a> Graph<'a> {
    fn new(params: &'a Params) -> Self {
        let usable = params.m_requested.div_ceil(params.y);
        Self {
            params,
            usable,
            cache: HashMap::new(),
        }
    }

    fn block(&self, b: u64) -> BlockRef {
        BlockRef::new(self.params, b).expect("block in range")
    }

    fn neighbours(&mut self, v: u64) -> &[u64] {
        if !self.cache.contains_key(&v) {
            let list = self.compute(v);
            self.cache.insert(v, list);
        }
        &self.cache[&v]
    }

    fn compute(&self, v: u64) -> Vec<u64> {
        let p = self.params;
        let a = self.block(v);
        let mut out = BTreeSet::new();
        let line_points = |n: u64, line| geometry::points_on_line(n, p.x, line).expect("slope ≥ 1");
        // Mates on a's own line.
        let own = line_points(a.slope, a.line);
        for s in 0..p.num_superblocks {
            let n = s + 1;
            if s == a.superblock {
                out.extend(own.iter().map(|&q| p.block_at(s, q)));
                continue;
            }
            // Same point, a's line reaching into s, and s's line through a.
            out.insert(p.block_at(s, a.point));
            out.extend(own.iter().map(|&q| p.block_at(s, q)));
            let theirs = geometry::line_id(n, a.point).expect("slope ≥ 1");
            out.extend(line_points(n, theirs).into_iter().map(|q| p.block_at(s, q)));
        }
        out.into_iter()
            .filter(|&b| b != v && b < self.usable && related(&a, &self.block(b)))
            .collect()
    }
}

/// One element per block, at staggered offsets so that blocks sharing a
/// point or slot do not store the same bit.
fn elements_of(params: &Params, blocks: &[u64]) -> Vec<u64> {
    blocks
        .iter()
        .enumerate()
        .map(|(i, b)| b * params.y + i as u64 % params.y)
        .filter(|&e| e < params.m_requested)
        .collect()
}

fn is_infeasible(graph: &Graph, blocks: &[u64]) -> bool {
    let refs: Vec<BlockRef> = blocks.iter().map(|&b| graph.block(b)).collect();
    !scheme::solve_assignment(&refs)
        .expect("distinct blocks")
        .is_feasible()
}

struct Enumerator<'g, 'p> {
    graph: &'g mut Graph<'p>,
    size: usize,
    budget: u64,
    examined: u64,
    hit: Option<Vec<u64>>,
}

impl Enumerator<'_, '_> {
    fn out_of_budget(&self) -> bool {
        self.hit.is_some() || self.examined >= self.budget
    }

    /// Connected sets containing `pivot` whose other members all exceed it.
    fn enumerate_pivot(&mut self, pivot: u64) -> bool {
        let ext: Vec<u64> = self
            .graph
            .neighbours(pivot)
            .iter()
            .copied()
            .filter(|&u| u > pivot)
            .collect();
        let mut sub = vec![pivot];
        self.extend(&mut sub, ext, pivot)
    }

    /// Returns false when stopped early.
    fn extend(&mut self, sub: &mut Vec<u64>, mut ext: Vec<u64>, pivot: u64) -> bool {
        if sub.len() == self.size {
            self.examined += 1;
            if is_infeasible(self.graph, sub) {
                let mut found = sub.clone();
                found.sort_unstable();
                self.hit = Some(found);
            }
            return !self.out_of_budget();
        }
        let mut near: BTreeSet<u64> = sub.iter().copied().collect();
        for &u in sub.iter() {
            near.extend(self.graph.neighbours(u).iter().copied());
        }
        while let Some(w) = ext.pop() {
            if self.out_of_budget() {
                return false;
            }
            let mut next = ext.clone();
            let fresh: Vec<u64> = self
                .graph
                .neighbours(w)
                .iter()
                .copied()
                .filter(|&u| u > pivot && !near.contains(&u) && !next.contains(&u))
                .collect();
            next.extend(fresh);
            sub.push(w);
            let going = self.extend(sub, next, pivot);
            sub.pop();
            if !going {
                return false;
            }
        }
        true
    }
}

/// Grow one random connected set of `size` blocks.
fn random_connected(graph: &mut Graph, size: usize, rng: &mut ChaCha8Rng) -> Option<Vec<u64>> {
    let start = rand::Rng::random_range(rng, 0..graph.usable);
    let mut set = vec![start];
    let mut frontier: BTreeSet<u64> = graph.neighbours(start).iter().copied().collect();
    while set.len() < size {
        let options: Vec<u64> = frontier.iter().copied().collect();
        let next = *options.choose(rng)?;
        frontier.remove(&next);
        set.push(next);
        for &u in graph.neighbours(next) {
            if !set.contains(&u) {
                frontier.insert(u);
            }
        }
    }
    set.sort_unstable();
    Some(set)
}

/// Build the witness for an unstorable block set, cross-checking against
/// the independent validator.
fn witness(layout: &Arc<Layout>, blocks: Vec<u64>) -> Witness {
    let params = &layout.params;
    let transcript = match refute_all(params, &blocks) {
        Ok(t) => t,
        Err(mask) => panic!(
            "solver and validator disagree on blocks {blocks:?}: validator accepts mask {mask:#b}"
        ),
    };
    let elements = elements_of(params, &blocks);
    let mut best: Option<(u64, Vec<u64>, Vec<u8>)> = None;
    for mask in 0..(1u64 << blocks.len()) {
        let sides: ElementSides = blocks
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
        let forced = scheme::store_forced(layout, &elements, &sides).expect("forced write");
        let wrong: Vec<u64> = (0..params.m_requested)
            .filter(|&e| forced.query(e).expect("in range") != elements.contains(&e))
            .collect();
        if best.as_ref().is_none_or(|(_, w, _)| wrong.len() < w.len()) {
            best = Some((mask, wrong, forced.to_bytes()));
        }
    }
    let (least_bad_mask, wrong_answers, structure) = best.expect("at least one mask");
    Witness {
        elements,
        blocks,
        transcript,
        least_bad_mask,
        wrong_answers,
        structure,
    }
}

/// Look for an unstorable set of `size` blocks, examining at most `budget`
/// candidate sets.
pub fn find_counterexample(
    layout: &Arc<Layout>,
    size: usize,
    budget: u64,
    seed: u64,
) -> SearchOutcome {
    assert!(
        (1..=20).contains(&size),
        "set size must be between 1 and 20"
    );
    let params = &layout.params;
    let mut graph = Graph::new(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pivots: Vec<u64> = (0..graph.usable).collect();
    pivots.shuffle(&mut rng);
    let mut en = Enumerator {
        graph: &mut graph,
        size,
        budget: budget - budget / 4,
        examined: 0,
        hit: None,
    };
    let mut exhausted = true;
    for &v in &pivots {
        if !en.enumerate_pivot(v) {
            exhausted = false;
            break;
        }
    }
    let mut examined = en.examined;
    if let Some(blocks) = en.hit.take() {
        return SearchOutcome::Found(Box::new(witness(layout, blocks)));
    }
    if exhausted {
        return SearchOutcome::NotFound {
            examined,
            exhausted: true,
        };
    }

    // Enumeration was cut short; spend what is left on random growth.
    let mut misses = 0u64;
    while examined < budget {
        let Some(set) = random_connected(&mut graph, size, &mut rng) else {
            misses += 1;
            if misses > 1000 {
                break;
            }
            continue;
        };
        examined += 1;
        if is_infeasible(&graph, &set) {
            return SearchOutcome::Found(Box::new(witness(layout, set)));
        }
    }
    SearchOutcome::NotFound {
        examined,
        exhausted: false,
    }
}

/// Solve a single explicit set with both checkers; `Some` when unstorable.
pub fn check_set(
    layout: &Arc<Layout>,
    elements: &[u64],
) -> Result<Option<Witness>, scheme::SchemeError> {
    let params = &layout.params;
    let mut blocks = Vec::new();
    for &e in elements {
        blocks.push(scheme::address(params, e)?.0);
    }
    blocks.sort_unstable();
    blocks.dedup();
    Ok(match scheme::solve_assignment(&blocks)? {
        Solution::Feasible(_) => None,
        Solution::Infeasible => {
            let ids: Vec<u64> = blocks.iter().map(|b| b.global_block).collect();
            Some(witness(layout, ids))
        }
    })
}
