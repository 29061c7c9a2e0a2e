//! Command-line front end.
//!
//! Exit codes: 0 success, 1 search found nothing, 2 user error, 3 the
//! scheme broke its own contract.

use crate::layout::{Layout, LayoutError, Params, SpaceModel};
use crate::scheme::{self, SchemeError, StoredSet};
use crate::verifier::counterexample::{self, SearchOutcome};
use crate::verifier::lemmas;
use crate::verifier::{certify, InstanceSource, VerifyReport};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_FOUND: i32 = 1;
pub const EXIT_USER: i32 = 2;
pub const EXIT_CONTRACT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "bitprobe",
    version,
    about = "Two-probe membership for sets of at most five elements"
)]
pub struct Cli {
    /// Extra diagnostics on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Records,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exhaustive,
    Taxonomy,
    Random,
}

#[derive(Debug, Args)]
pub struct Universe {
    /// Universe size.
    #[arg(long)]
    pub m: u64,
    /// Cube side; requires --y.
    #[arg(long, requires = "y")]
    pub x: Option<u64>,
    /// Block size; requires --x.
    #[arg(long, requires = "x")]
    pub y: Option<u64>,
}

impl Universe {
    fn layout(&self) -> Result<Arc<Layout>, LayoutError> {
        let overrides = self.x.zip(self.y);
        Ok(Arc::new(Layout::new(Params::choose(self.m, overrides)?)))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Store the elements of a file and write the structure.
    Build {
        #[command(flatten)]
        universe: Universe,
        /// Newline-separated decimal elements.
        #[arg(long)]
        elements: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        report_format: ReportFormat,
    },
    /// Answer one membership query from a structure file.
    Query {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        element: u64,
    },
    /// Store and query many sets, comparing against a linear scan.
    Verify {
        #[command(flatten)]
        universe: Universe,
        #[arg(long, value_enum, default_value = "random")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random sets to try, or sets per shape in taxonomy mode.
        #[arg(long, default_value_t = 10_000)]
        count: u64,
        /// Largest set size in exhaustive mode.
        #[arg(long, default_value_t = 2)]
        max_size: usize,
        #[arg(long, value_enum, default_value = "text")]
        report_format: ReportFormat,
    },
    /// Bit counts at default or given parameters.
    SpaceReport {
        /// Universe sizes; defaults to 2^11, 2^15, 2^19, 2^22.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        m: Vec<u64>,
        #[arg(long, requires = "y")]
        x: Option<u64>,
        #[arg(long, requires = "x")]
        y: Option<u64>,
        #[arg(long, value_enum, default_value = "text")]
        report_format: ReportFormat,
    },
    /// Search for a set the scheme cannot store.
    Counterexample {
        #[command(flatten)]
        universe: Universe,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Blocks in the searched sets.
        #[arg(long, default_value_t = 6)]
        size: usize,
        /// Where to write the witness structure.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        report_format: ReportFormat,
    },
    /// Geometric and counting checks.
    Lemmas {
        #[arg(long, value_enum, default_value = "text")]
        report_format: ReportFormat,
    },
}

/// A failed command: exit code and message.
struct Exit(i32, String);

fn user<E: std::fmt::Display>(e: E) -> Exit {
    Exit(EXIT_USER, e.to_string())
}

fn scheme_exit(e: SchemeError) -> Exit {
    match e {
        SchemeError::ContractViolation { .. } => {
            Exit(EXIT_CONTRACT, format!("contract violation: {e}"))
        }
        other => user(other),
    }
}

/// Parse newline-separated decimal elements; blank lines are ignored.
pub fn parse_elements(text: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let e = t
            .parse::<u64>()
            .map_err(|_| format!("line {}: {t:?} is not a decimal element", i + 1))?;
        out.push(e);
    }
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Exit> {
    fs::write(path, bytes).map_err(|e| user(format!("cannot write {}: {e}", path.display())))
}

fn print_space(
    out: &mut dyn Write,
    models: &[SpaceModel],
    format: ReportFormat,
) -> std::io::Result<()> {
    match format {
        ReportFormat::Text => {
            writeln!(out, "{}", SpaceModel::text_header())?;
            for s in models {
                writeln!(out, "{}", s.to_text_row())?;
            }
        }
        ReportFormat::Records => {
            for s in models {
                writeln!(out, "{}", s.to_record())?;
            }
        }
    }
    Ok(())
}

fn print_verify(
    out: &mut dyn Write,
    r: &VerifyReport,
    format: ReportFormat,
) -> std::io::Result<()> {
    match format {
        ReportFormat::Text => writeln!(out, "{r}"),
        ReportFormat::Records => write!(out, "{}", r.to_records()),
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Exit> {
    let io = |e: std::io::Error| Exit(EXIT_USER, format!("output error: {e}"));
    match cli.command {
        Command::Build {
            universe,
            elements,
            out: path,
            report_format,
        } => {
            let layout = universe.layout().map_err(user)?;
            let text = fs::read_to_string(&elements)
                .map_err(|e| user(format!("cannot read {}: {e}", elements.display())))?;
            let set = parse_elements(&text).map_err(user)?;
            let stored = scheme::store(&layout, &set).map_err(scheme_exit)?;
            write_file(&path, &stored.to_bytes())?;
            print_space(out, &[layout.space_report()], report_format).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Query { structure, element } => {
            let bytes = fs::read(&structure)
                .map_err(|e| user(format!("cannot read {}: {e}", structure.display())))?;
            let stored = StoredSet::from_bytes(&bytes).map_err(user)?;
            let answer = stored.query(element).map_err(user)?;
            writeln!(out, "{answer}").map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            universe,
            mode,
            seed,
            count,
            max_size,
            report_format,
        } => {
            let layout = universe.layout().map_err(user)?;
            let source = match mode {
                Mode::Exhaustive => InstanceSource::Exhaustive { max_size },
                Mode::Taxonomy => InstanceSource::Taxonomy {
                    seed,
                    per_descriptor: count as usize,
                },
                Mode::Random => InstanceSource::Random {
                    seed,
                    count,
                    sizes: (3, 5),
                },
            };
            let report = certify(&layout, &source);
            print_verify(out, &report, report_format).map_err(io)?;
            if cli.verbose > 0 {
                for s in &report.skipped_descriptors {
                    writeln!(err, "skipped {s}").map_err(io)?;
                }
            }
            Ok(if report.passed() {
                EXIT_OK
            } else {
                EXIT_CONTRACT
            })
        }
        Command::SpaceReport {
            m,
            x,
            y,
            report_format,
        } => {
            let grid = if m.is_empty() {
                lemmas::SPACE_GRID.to_vec()
            } else {
                m
            };
            let mut models = Vec::new();
            for m in grid {
                let params = Params::choose(m, x.zip(y)).map_err(user)?;
                models.push(Layout::new(params).space_report());
            }
            print_space(out, &models, report_format).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Counterexample {
            universe,
            budget,
            seed,
            size,
            out: path,
            report_format,
        } => {
            if !(1..=20).contains(&size) {
                return Err(user("--size must be between 1 and 20"));
            }
            let layout = universe.layout().map_err(user)?;
            match counterexample::find_counterexample(&layout, size, budget, seed) {
                SearchOutcome::Found(w) => {
                    if let Some(p) = &path {
                        write_file(p, &w.structure)?;
                    }
                    match report_format {
                        ReportFormat::Text => {
                            writeln!(out, "FOUND elements {:?} blocks {:?}", w.elements, w.blocks)
                                .map_err(io)?;
                            writeln!(
                                out,
                                "all {} assignments violate a rule; least wrong answers: {} (mask {:#b})",
                                w.transcript.len(),
                                w.wrong_answers.len(),
                                w.least_bad_mask
                            )
                            .map_err(io)?;
                            if cli.verbose > 0 {
                                for step in &w.transcript {
                                    writeln!(out, "  {:#08b} {:?}", step.t0_mask, step.violation)
                                        .map_err(io)?;
                                }
                            }
                        }
                        ReportFormat::Records => {
                            let rec = serde_json::json!({ "record": "witness", "witness": &*w });
                            writeln!(out, "{rec}").map_err(io)?;
                        }
                    }
                    Ok(EXIT_OK)
                }
                SearchOutcome::NotFound {
                    examined,
                    exhausted,
                } => {
                    match report_format {
                        ReportFormat::Text => writeln!(
                            out,
                            "NOT FOUND after {examined} sets{}",
                            if exhausted {
                                " (search space exhausted)"
                            } else {
                                ""
                            }
                        ),
                        ReportFormat::Records => writeln!(
                            out,
                            "{}",
                            serde_json::json!({
                                "record": "not_found",
                                "examined": examined,
                                "exhausted": exhausted,
                            })
                        ),
                    }
                    .map_err(io)?;
                    Ok(EXIT_NOT_FOUND)
                }
            }
        }
        Command::Lemmas { report_format } => {
            let checks = lemmas::lemma_suite();
            for c in &checks {
                match report_format {
                    ReportFormat::Text => writeln!(out, "{c}"),
                    ReportFormat::Records => writeln!(
                        out,
                        "{}",
                        serde_json::to_string(c).expect("check serializes")
                    ),
                }
                .map_err(io)?;
            }
            Ok(if checks.iter().all(|c| c.passed) {
                EXIT_OK
            } else {
                EXIT_NOT_FOUND
            })
        }
    }
}

/// Run with explicit arguments and streams; returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(Exit(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
