//! Store-then-query certification against the linear-scan oracle.

use super::oracle_membership;
use super::taxonomy::{self, TaxonomyDescriptor};
use crate::layout::Layout;
use crate::scheme::{self, SchemeError};
use crate::tables::probes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Where a tested set came from; enough to regenerate it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Origin {
    Exhaustive,
    Taxonomy { descriptor: String },
    Random { seed: u64, index: u64 },
    Explicit { index: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct Instance {
    pub origin: Origin,
    pub elements: Vec<u64>,
}

/// Sets to certify.
#[derive(Debug, Clone)]
pub enum InstanceSource {
    /// Every subset of the universe with at most `max_size` elements.
    Exhaustive {
        max_size: usize,
    },
    /// The full taxonomy sweep, `per_descriptor` sets per realizable shape.
    Taxonomy {
        seed: u64,
        per_descriptor: usize,
    },
    /// `count` uniform random sets with sizes in `sizes`.
    Random {
        seed: u64,
        count: u64,
        sizes: (usize, usize),
    },
    Explicit(Vec<Vec<u64>>),
}

/// Deliberate corruption applied after storing, to check that the
/// certifier notices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Flip the direction bit of the first stored element's block.
    FlipElementDirection,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub origin: Origin,
    pub elements: Vec<u64>,
    pub kind: FailureKind,
    /// Hex dump of the serialized structure, when one was built.
    pub structure: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub enum FailureKind {
    /// Queries that disagreed with the oracle (first few).
    WrongAnswers {
        elements: Vec<u64>,
        total: u64,
    },
    /// Queries that did not use exactly two probes (first few).
    ProbeCount {
        elements: Vec<u64>,
        total: u64,
    },
    /// The solver found no storable assignment.
    Infeasible {
        message: String,
    },
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub instances: u64,
    pub queries: u64,
    pub failures: Vec<Failure>,
    /// Probes per query → number of queries.
    pub probe_histogram: BTreeMap<u64, u64>,
    /// Sets the solver reported unstorable, by size.
    pub infeasible_by_size: BTreeMap<usize, u64>,
    pub skipped_descriptors: Vec<String>,
    pub runtime: Duration,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn merge(mut self, other: Self) -> Self {
        self.instances += other.instances;
        self.queries += other.queries;
        self.failures.extend(other.failures);
        for (k, v) in other.probe_histogram {
            *self.probe_histogram.entry(k).or_default() += v;
        }
        for (k, v) in other.infeasible_by_size {
            *self.infeasible_by_size.entry(k).or_default() += v;
        }
        self.skipped_descriptors.extend(other.skipped_descriptors);
        self
    }

    /// Share of queries that used exactly two probes.
    pub fn two_probe_fraction(&self) -> f64 {
        if self.queries == 0 {
            return 1.0;
        }
        *self.probe_histogram.get(&2).unwrap_or(&0) as f64 / self.queries as f64
    }

    /// One JSON record per line: a summary, then each failure.
    pub fn to_records(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            record: &'static str,
            instances: u64,
            queries: u64,
            failures: usize,
            probe_histogram: &'a BTreeMap<u64, u64>,
            infeasible_by_size: &'a BTreeMap<usize, u64>,
            skipped_descriptors: usize,
            runtime_ms: u128,
            passed: bool,
        }
        let mut out = serde_json::to_string(&Summary {
            record: "summary",
            instances: self.instances,
            queries: self.queries,
            failures: self.failures.len(),
            probe_histogram: &self.probe_histogram,
            infeasible_by_size: &self.infeasible_by_size,
            skipped_descriptors: self.skipped_descriptors.len(),
            runtime_ms: self.runtime.as_millis(),
            passed: self.passed(),
        })
        .expect("summary serializes");
        out.push('\n');
        for f in &self.failures {
            out.push_str(&serde_json::to_string(f).expect("failure serializes"));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instances  {}", self.instances)?;
        writeln!(f, "queries    {}", self.queries)?;
        let hist: Vec<String> = self
            .probe_histogram
            .iter()
            .map(|(p, n)| format!("{p} probes: {n}"))
            .collect();
        writeln!(f, "probes     {}", hist.join(", "))?;
        if !self.infeasible_by_size.is_empty() {
            writeln!(f, "infeasible {:?}", self.infeasible_by_size)?;
        }
        if !self.skipped_descriptors.is_empty() {
            writeln!(f, "skipped    {} shapes", self.skipped_descriptors.len())?;
        }
        writeln!(f, "runtime    {:.2?}", self.runtime)?;
        for fail in self.failures.iter().take(10) {
            writeln!(
                f,
                "FAIL {:?} {:?}: {:?}",
                fail.origin, fail.elements, fail.kind
            )?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

const SAMPLE: usize = 8;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Store one set and query the whole padded universe.
fn check_instance(layout: &Arc<Layout>, inst: &Instance, fault: Fault) -> VerifyReport {
    let mut report = VerifyReport {
        instances: 1,
        ..Default::default()
    };
    let mut stored = match scheme::store(layout, &inst.elements) {
        Ok(s) => s,
        Err(e) => {
            let kind = match &e {
                SchemeError::ContractViolation { .. } => {
                    let mut distinct = inst.elements.clone();
                    distinct.sort_unstable();
                    distinct.dedup();
                    *report.infeasible_by_size.entry(distinct.len()).or_default() += 1;
                    FailureKind::Infeasible {
                        message: e.to_string(),
                    }
                }
                _ => FailureKind::Error {
                    message: e.to_string(),
                },
            };
            report.failures.push(Failure {
                origin: inst.origin.clone(),
                elements: inst.elements.clone(),
                kind,
                structure: None,
            });
            return report;
        }
    };
    if fault == Fault::FlipElementDirection {
        if let Some(&e) = inst.elements.first() {
            stored.inject_direction_fault(e / layout.params.y);
        }
    }

    let mut wrong = Vec::new();
    let mut wrong_total = 0u64;
    let mut off_probe = Vec::new();
    let mut off_total = 0u64;
    for e in 0..layout.params.m_padded {
        let before = probes::current();
        let got = stored.query_padded(e);
        let used = probes::current() - before;
        *report.probe_histogram.entry(used).or_default() += 1;
        if probes::enabled() && used != 2 {
            off_total += 1;
            if off_probe.len() < SAMPLE {
                off_probe.push(e);
            }
        }
        let expected = e < layout.params.m_requested && oracle_membership(&inst.elements, e);
        if got.ok() != Some(expected) {
            wrong_total += 1;
            if wrong.len() < SAMPLE {
                wrong.push(e);
            }
        }
    }
    report.queries = layout.params.m_padded;

    let dump = || Some(hex(&stored.to_bytes()));
    if wrong_total > 0 {
        report.failures.push(Failure {
            origin: inst.origin.clone(),
            elements: inst.elements.clone(),
            kind: FailureKind::WrongAnswers {
                elements: wrong,
                total: wrong_total,
            },
            structure: dump(),
        });
    }
    if off_total > 0 {
        report.failures.push(Failure {
            origin: inst.origin.clone(),
            elements: inst.elements.clone(),
            kind: FailureKind::ProbeCount {
                elements: off_probe,
                total: off_total,
            },
            structure: dump(),
        });
    }
    report
}

/// The `index`-th random set of a seeded stream; reproducible on its own.
pub fn random_instance(m: u64, seed: u64, index: u64, sizes: (usize, usize)) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let want = rng.random_range(sizes.0..=sizes.1).min(m as usize);
    let mut set: Vec<u64> = Vec::with_capacity(want);
    while set.len() < want {
        let e = rng.random_range(0..m);
        if !set.contains(&e) {
            set.push(e);
        }
    }
    set.sort_unstable();
    set
}

/// Subsets of `[0, m)` with at most `max_size` elements whose smallest
/// element is `leader`; the empty set is attached to leader 0.
fn subsets_led_by(m: u64, leader: u64, max_size: usize) -> Vec<Vec<u64>> {
    fn grow(m: u64, cur: &mut Vec<u64>, max: usize, out: &mut Vec<Vec<u64>>) {
        out.push(cur.clone());
        if cur.len() == max {
            return;
        }
        let next = cur.last().map_or(0, |&l| l + 1);
        for e in next..m {
            cur.push(e);
            grow(m, cur, max, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if leader == 0 {
        out.push(Vec::new());
    }
    if max_size > 0 {
        let mut cur = vec![leader];
        grow(m, &mut cur, max_size, &mut out);
    }
    out
}

/// Certify every instance from `source`, in parallel, with an optional
/// injected fault. Failure order is deterministic.
pub fn certify_with(layout: &Arc<Layout>, source: &InstanceSource, fault: Fault) -> VerifyReport {
    let start = Instant::now();
    let m = layout.params.m_requested;
    let run = |insts: Vec<Instance>| -> VerifyReport {
        insts
            .par_iter()
            .map(|i| check_instance(layout, i, fault))
            .reduce(VerifyReport::default, VerifyReport::merge)
    };
    let mut report = match source {
        InstanceSource::Exhaustive { max_size } => (0..m)
            .into_par_iter()
            .map(|leader| {
                subsets_led_by(m, leader, *max_size)
                    .into_iter()
                    .map(|elements| {
                        check_instance(
                            layout,
                            &Instance {
                                origin: Origin::Exhaustive,
                                elements,
                            },
                            fault,
                        )
                    })
                    .fold(VerifyReport::default(), VerifyReport::merge)
            })
            .reduce(VerifyReport::default, VerifyReport::merge),
        InstanceSource::Taxonomy {
            seed,
            per_descriptor,
        } => {
            let sweep =
                taxonomy::generate_taxonomy_instances(&layout.params, *seed, *per_descriptor);
            let insts = sweep
                .instances
                .into_iter()
                .map(|t| Instance {
                    origin: Origin::Taxonomy {
                        descriptor: t.descriptor.to_string(),
                    },
                    elements: t.elements,
                })
                .collect();
            let mut r = run(insts);
            r.skipped_descriptors = sweep
                .skipped
                .iter()
                .map(|(d, why): &(TaxonomyDescriptor, String)| format!("{d}: {why}"))
                .collect();
            r
        }
        InstanceSource::Random { seed, count, sizes } => run((0..*count)
            .map(|index| Instance {
                origin: Origin::Random { seed: *seed, index },
                elements: random_instance(m, *seed, index, *sizes),
            })
            .collect()),
        InstanceSource::Explicit(sets) => run(sets
            .iter()
            .enumerate()
            .map(|(i, s)| Instance {
                origin: Origin::Explicit { index: i as u64 },
                elements: s.clone(),
            })
            .collect()),
    };
    report.runtime = start.elapsed();
    report
}

pub fn certify(layout: &Arc<Layout>, source: &InstanceSource) -> VerifyReport {
    certify_with(layout, source, Fault::None)
}
