//! Acceptance criteria, one line each. Runs without the test harness so
//! the lines always print; exits non-zero if any criterion fails.

use bitprobe::layout::{Layout, Params};
use bitprobe::scheme::{self, StoredSet};
use bitprobe::tables::probes;
use bitprobe::verifier::counterexample::{find_counterexample, SearchOutcome};
use bitprobe::verifier::{certify, lemmas, refute_all, InstanceSource, VerifyReport};
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn small_layout() -> Arc<Layout> {
    Arc::new(Layout::new(Params::choose(1024, Some((4, 2))).unwrap()))
}

/// The store-and-query runs shared by several criteria.
struct Suite {
    exhaustive: VerifyReport,
    taxonomy: VerifyReport,
    random: VerifyReport,
}

impl Suite {
    fn run() -> Self {
        let l = small_layout();
        Suite {
            exhaustive: certify(&l, &InstanceSource::Exhaustive { max_size: 2 }),
            taxonomy: certify(
                &l,
                &InstanceSource::Taxonomy {
                    seed: 2024,
                    per_descriptor: 5,
                },
            ),
            random: certify(
                &l,
                &InstanceSource::Random {
                    seed: 7,
                    count: 10_000,
                    sizes: (3, 5),
                },
            ),
        }
    }

    fn reports(&self) -> [(&'static str, &VerifyReport); 3] {
        [
            ("exhaustive", &self.exhaustive),
            ("taxonomy", &self.taxonomy),
            ("random", &self.random),
        ]
    }
}

fn correctness(s: &Suite) -> Outcome {
    let parts: Vec<String> = s
        .reports()
        .iter()
        .map(|(name, r)| {
            format!(
                "{name}: {} sets, {} queries, {} failures",
                r.instances,
                r.queries,
                r.failures.len()
            )
        })
        .collect();
    let mut detail = parts.join("; ");
    detail.push_str(&format!(
        "; {} shapes skipped as unrealizable",
        s.taxonomy.skipped_descriptors.len()
    ));
    let expected_exhaustive = 1 + 1024 + 1024 * 1023 / 2;
    outcome(
        s.reports().iter().all(|(_, r)| r.passed())
            && s.exhaustive.instances == expected_exhaustive,
        detail,
    )
}

fn two_probes(s: &Suite) -> Outcome {
    if !probes::enabled() {
        return outcome(false, "probe accounting is compiled out");
    }
    let mut total = 0u64;
    let mut two = 0u64;
    let mut hist = std::collections::BTreeMap::new();
    for (_, r) in s.reports() {
        total += r.queries;
        two += r.probe_histogram.get(&2).copied().unwrap_or(0);
        for (k, v) in &r.probe_histogram {
            *hist.entry(*k).or_insert(0u64) += v;
        }
    }
    outcome(
        total > 0 && two == total,
        format!("{two}/{total} queries used exactly 2 probes; histogram {hist:?}"),
    )
}

fn from_check(c: lemmas::CheckResult) -> Outcome {
    outcome(c.passed, c.detail)
}

fn counterexample(s: &Suite) -> Outcome {
    let l = small_layout();
    let started = Instant::now();
    let search = find_counterexample(&l, 6, 1_000_000, 0);
    let mut detail = match &search {
        SearchOutcome::Found(w) => {
            let confirmed = refute_all(&l.params, &w.blocks).is_ok();
            format!(
                "witness {:?}, independent refutation {}",
                w.elements,
                if confirmed { "confirms" } else { "REJECTS" }
            )
        }
        SearchOutcome::NotFound {
            examined,
            exhausted,
        } => format!(
            "no size-6 witness at m=1024 x=4 y=2 in {examined} sets{}",
            if *exhausted { " (exhausted)" } else { "" }
        ),
    };
    let found = match &search {
        SearchOutcome::Found(w) => refute_all(&l.params, &w.blocks).is_ok(),
        SearchOutcome::NotFound { .. } => {
            // Settle the question beyond the budget.
            if let SearchOutcome::NotFound {
                examined,
                exhausted: true,
            } = find_counterexample(&l, 6, u64::MAX, 0)
            {
                detail.push_str(&format!(
                    "; unbounded enumeration covers all {examined} connected 6-sets, none unstorable"
                ));
            }
            false
        }
    };
    let infeasible5: u64 = s
        .reports()
        .iter()
        .map(|(_, r)| r.infeasible_by_size.get(&5).copied().unwrap_or(0))
        .sum();
    detail.push_str(&format!(
        "; size-5 sets reported unstorable in the correctness suite: {infeasible5}; {:.1?}",
        started.elapsed()
    ));
    outcome(found && infeasible5 == 0, detail)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let elements = dir.path().join("set.txt");
    std::fs::write(&elements, "3\n600\n601\n900\n1023\n").unwrap();
    let build = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_bitprobe"))
            .args(["build", "--m", "1024", "--x", "4", "--y", "2", "--elements"])
            .arg(&elements)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let a = build("a.bin");
    let b = build("b.bin");
    let reread = StoredSet::from_bytes(&a).unwrap().to_bytes();
    let l = small_layout();
    let direct = scheme::store(&l, &[3, 600, 601, 900, 1023]).unwrap();
    let round = StoredSet::from_bytes(&direct.to_bytes()).unwrap();
    let same = a == b && a == reread && round == direct && a == direct.to_bytes();
    outcome(
        same,
        format!(
            "two builds {} ({} bytes), re-encoding {}, library round trip {}",
            if a == b { "identical" } else { "differ" },
            a.len(),
            if a == reread { "bit-exact" } else { "differs" },
            if round == direct { "equal" } else { "differs" }
        ),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let started = Instant::now();
    let suite = Suite::run();
    let models = lemmas::space_grid(&lemmas::SPACE_GRID);
    let criteria: Vec<Criterion> = vec![
        ("correctness", Box::new(|| correctness(&suite))),
        ("exactly two probes", Box::new(|| two_probes(&suite))),
        (
            "layer line count",
            Box::new(|| from_check(lemmas::layer_line_count())),
        ),
        (
            "no three coplanar directions",
            Box::new(|| from_check(lemmas::coplanarity(100, 0))),
        ),
        (
            "line families partition the cube",
            Box::new(|| from_check(lemmas::partition())),
        ),
        (
            "space bound",
            Box::new(|| from_check(lemmas::space_bound(&models))),
        ),
        (
            "line count shape",
            Box::new(|| from_check(lemmas::line_shape(&models))),
        ),
        (
            "six-element counterexample",
            Box::new(|| counterexample(&suite)),
        ),
        ("determinism and round trip", Box::new(determinism)),
    ];
    let mut failed = 0;
    let count = criteria.len();
    for (name, f) in criteria {
        let o = guarded(f);
        failed += !o.passed as usize;
        println!(
            "{} {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.1?})",
        count - failed,
        started.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
