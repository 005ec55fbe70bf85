//! Command-line front end: file-based audits, boosting, post-processing,
//! and the separation suite, with deterministic JSON output.
//!
//! Exit codes: 0 on success, 1 on check failure (a failing separation row,
//! boosting that did not converge, or a learned hypothesis missing its
//! regret target), 2 on invalid input (unreadable or unparsable files, bad
//! knobs). Identical inputs and flags produce byte-identical outputs: maps
//! are ordered, ties are broken deterministically, and floats are printed
//! at 17 significant digits.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::boost::{bucketize, mcboost, swap_agnostic_learn_with, BoostConfig, BoostTrace, SwapLearnOptions};
use crate::distributions::{DiscreteJoint, Predictor};
use crate::error::{Error, Result};
use crate::hypotheses::HypothesisClass;
use crate::jsonio::to_json_string;
use crate::losses::{parse_loss_arg, LossSpec};
use crate::separations::{human_table, verify_separations_seeded};

/// Top-level argument parser.
#[derive(Debug, Parser)]
#[command(
    name = "swapcal",
    version,
    about = "Exact calibration audits, multicalibration boosting, and loss post-processing on finite distributions"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Audit a predictor against a hypothesis class and emit the report.
    Audit(AuditArgs),
    /// Boost a multicalibrated predictor from scratch; with --loss, continue
    /// into swap-agnostic learning for that loss.
    Boost(BoostArgs),
    /// Emit optimal-action tables over a predictor's value image.
    Postprocess(PostprocessArgs),
    /// Re-verify the separation constants and the dominance hierarchy.
    Separations(SeparationsArgs),
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Distribution JSON file.
    #[arg(long)]
    dist: PathBuf,
    /// Predictor JSON file.
    #[arg(long)]
    pred: PathBuf,
    /// Hypothesis-class JSON file.
    #[arg(long)]
    class: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoostArgs {
    /// Distribution JSON file.
    #[arg(long)]
    dist: PathBuf,
    /// Hypothesis-class JSON file (must be closure-completed and bounded).
    #[arg(long)]
    class: PathBuf,
    /// Target swap multicalibration error — or target regret with --loss.
    #[arg(long)]
    alpha: f64,
    /// Prediction lattice step; its reciprocal must be an integer.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Swap-agnostic learning: compose this loss's optimal action over the
    /// boosted predictor and verify its regret against the combination grid.
    #[arg(long)]
    loss: Option<String>,
    /// Competitor combination budget (l1) for --loss verification.
    #[arg(long)]
    budget: Option<f64>,
    /// Write the predictor here (trace goes to `<out>.trace.jsonl`);
    /// defaults to stdout with the trace on stderr.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PostprocessArgs {
    /// Predictor JSON file.
    #[arg(long)]
    pred: PathBuf,
    /// Loss to tabulate, repeatable. Compact specs (`squared`,
    /// `half_squared`, `p_power:4`, `logistic:10`, `glm:square`,
    /// `glm:logistic:12`) or an inline JSON descriptor.
    #[arg(long, required = true)]
    loss: Vec<String>,
    /// Coarsen the predictor onto the `{delta, 2 delta, ..., 1}` lattice
    /// before tabulating.
    #[arg(long)]
    delta: Option<f64>,
    /// Write the tables here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SeparationsArgs {
    /// Base seed for the random dominance spot-checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random spot-check instances.
    #[arg(long, default_value_t = 100)]
    instances: usize,
    /// Write the JSON report here instead of stdout (the human-readable
    /// table always goes to stderr).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse arguments, honor `SWAPCAL_THREADS`, dispatch, and map errors to the
/// exit-code contract.
pub fn run() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            best_effort_stderr(&format!("error: {e}\n"));
            ExitCode::from(classify(&e))
        }
    }
}

/// 1 for failed checks, 2 for invalid inputs.
fn classify(e: &Error) -> u8 {
    match e {
        Error::DidNotConverge { .. } | Error::RegretAboveTarget { .. } => 1,
        _ => 2,
    }
}

fn init_thread_pool() {
    let Ok(raw) = std::env::var("SWAPCAL_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n >= 1 => {
            // "Already initialized" is fine: embedders and test harnesses may
            // have built a pool first.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        _ => best_effort_stderr(&format!(
            "warning: ignoring SWAPCAL_THREADS={raw:?} (expected a positive integer)\n"
        )),
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Audit(a) => run_audit(a),
        Command::Boost(a) => run_boost(a),
        Command::Postprocess(a) => run_postprocess(a),
        Command::Separations(a) => run_separations(a),
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Write `payload` (newline-terminated) to `out`, or print it to stdout.
///
/// A consumer that closes the pipe early (`swapcal audit ... | head`) is not
/// an error: the process exits quietly with success instead of panicking on
/// the broken pipe, as Rust's print macros would.
fn emit(out: Option<&Path>, payload: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{payload}\n")).map_err(|e| Error::io(p.display().to_string(), e)),
        None => {
            let mut stdout = io::stdout().lock();
            match writeln!(stdout, "{payload}").and_then(|()| stdout.flush()) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => std::process::exit(0),
                r => r.map_err(|e| Error::io("stdout", e)),
            }
        }
    }
}

/// Diagnostics must never panic or mask the planned exit code, so stderr
/// writes are best-effort: a closed or failing stderr is ignored.
fn best_effort_stderr(buf: &str) {
    let _ = io::stderr().lock().write_all(buf.as_bytes());
}

fn run_audit(a: AuditArgs) -> Result<ExitCode> {
    let dist = DiscreteJoint::from_json_str(&read_file(&a.dist)?)?;
    let pred = Predictor::from_json_str(&read_file(&a.pred)?)?;
    let class = HypothesisClass::from_json_str(&read_file(&a.class)?)?;
    let report = crate::audit::audit(&dist, &pred, &class)?;
    emit(a.out.as_deref(), &to_json_string(&report))?;
    Ok(ExitCode::SUCCESS)
}

/// `<out>.trace.jsonl`, next to the predictor output.
fn trace_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".trace.jsonl");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct TraceSummary {
    converged: bool,
    iterations: usize,
    final_smce: f64,
}

/// One JSON line per accepted update, then a summary line. Written next to
/// `out` when given, to stderr otherwise.
fn write_trace(out: Option<&Path>, trace: &BoostTrace) -> Result<()> {
    let mut buf = String::new();
    for rec in &trace.iterations {
        buf.push_str(&to_json_string(rec));
        buf.push('\n');
    }
    buf.push_str(&to_json_string(&TraceSummary {
        converged: trace.converged,
        iterations: trace.iterations.len(),
        final_smce: trace.final_smce,
    }));
    buf.push('\n');
    match out {
        Some(p) => {
            let path = trace_path(p);
            fs::write(&path, buf).map_err(|e| Error::io(path.display().to_string(), e))
        }
        None => {
            best_effort_stderr(&buf);
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct PredictorOut<'a> {
    values: &'a BTreeMap<String, f64>,
    grid_step: f64,
}

#[derive(Serialize)]
struct HypothesisOut<'a> {
    name: &'a str,
    table: &'a BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct LearnOutput<'a> {
    /// Calibration target the boost ran with.
    alpha: f64,
    budget: f64,
    verify_step: f64,
    verified_regret: f64,
    hypothesis: HypothesisOut<'a>,
    predictor: PredictorOut<'a>,
}

fn run_boost(a: BoostArgs) -> Result<ExitCode> {
    let dist = DiscreteJoint::from_json_str(&read_file(&a.dist)?)?;
    let class = HypothesisClass::from_json_str(&read_file(&a.class)?)?;
    let out = a.out.as_deref();

    if let Some(spec) = &a.loss {
        let loss = parse_loss_arg(spec)?;
        let options = SwapLearnOptions {
            budget: a.budget.unwrap_or(1.0),
            grid_step: a.grid_step,
            ..SwapLearnOptions::default()
        };
        return match swap_agnostic_learn_with(&dist, &class, &loss, a.alpha, &options) {
            Ok(outcome) => {
                write_trace(out, &outcome.trace)?;
                let payload = to_json_string(&LearnOutput {
                    alpha: outcome.alpha,
                    budget: outcome.budget,
                    verify_step: outcome.verify_step,
                    verified_regret: outcome.verified_regret,
                    hypothesis: HypothesisOut {
                        name: outcome.hypothesis.name(),
                        table: outcome.hypothesis.table(),
                    },
                    predictor: PredictorOut {
                        values: outcome.predictor.values(),
                        grid_step: outcome.predictor.grid_step(),
                    },
                });
                emit(out, &payload)?;
                Ok(ExitCode::SUCCESS)
            }
            Err(Error::DidNotConverge {
                iterations,
                final_smce,
                trace,
            }) => {
                write_trace(out, &trace)?;
                best_effort_stderr(&format!(
                    "error: boosting did not converge after {iterations} iterations \
                     (final smce {final_smce})\n"
                ));
                Ok(ExitCode::from(1))
            }
            Err(e) => Err(e),
        };
    }

    if a.budget.is_some() {
        return Err(Error::InvalidConfig(
            "--budget only applies together with --loss".into(),
        ));
    }
    let mut config = BoostConfig::new(a.alpha)?;
    config.grid_step = a.grid_step;
    match mcboost(&dist, &class, &config) {
        Ok((pred, trace)) => {
            write_trace(out, &trace)?;
            emit(out, &pred.to_json_string())?;
            Ok(ExitCode::SUCCESS)
        }
        Err(Error::DidNotConverge {
            iterations,
            final_smce,
            trace,
        }) => {
            write_trace(out, &trace)?;
            best_effort_stderr(&format!(
                "error: boosting did not converge after {iterations} iterations \
                 (final smce {final_smce})\n"
            ));
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e),
    }
}

#[derive(Serialize)]
struct ActionRow {
    v: f64,
    action: f64,
}

#[derive(Serialize)]
struct LossTable {
    loss: String,
    actions: Vec<ActionRow>,
}

#[derive(Serialize)]
struct PostprocessOutput<'a> {
    predictor: PredictorOut<'a>,
    tables: Vec<LossTable>,
}

fn run_postprocess(a: PostprocessArgs) -> Result<ExitCode> {
    let parsed = Predictor::from_json_str(&read_file(&a.pred)?)?;
    let pred = match a.delta {
        Some(d) => bucketize(&parsed, d)?,
        None => parsed,
    };
    let losses: Vec<LossSpec> = a
        .loss
        .iter()
        .map(|s| parse_loss_arg(s))
        .collect::<Result<_>>()?;

    // Distinct prediction values, ascending.
    let mut image: Vec<f64> = pred.values().values().copied().collect();
    image.sort_by(f64::total_cmp);
    image.dedup();

    let tables = losses
        .iter()
        .map(|loss| LossTable {
            loss: loss.name().to_string(),
            actions: image
                .iter()
                .map(|&v| ActionRow {
                    v,
                    action: loss.optimal_action(v),
                })
                .collect(),
        })
        .collect();
    let payload = to_json_string(&PostprocessOutput {
        predictor: PredictorOut {
            values: pred.values(),
            grid_step: pred.grid_step(),
        },
        tables,
    });
    emit(a.out.as_deref(), &payload)?;
    Ok(ExitCode::SUCCESS)
}

fn run_separations(a: SeparationsArgs) -> Result<ExitCode> {
    let report = verify_separations_seeded(a.seed, a.instances)?;
    best_effort_stderr(&human_table(&report));
    emit(a.out.as_deref(), &to_json_string(&report))?;
    Ok(if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
