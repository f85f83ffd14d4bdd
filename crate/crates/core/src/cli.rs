//! The `rscatter` command line: `generate`, `estimate`, `stress`, `tune`.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure. On
//! exit 3 a JSON document with whatever diagnostics the failure carried is
//! still written to the output.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::breakdown::{self, ContaminationSpec, Pattern};
use crate::dataset::Dataset;
use crate::datagen::{self, Distribution, GeneratorSpec, ShapeSpec};
use crate::error::{Error, Result};
use crate::estimators::{self, EstimatorConfig, EstimatorKind, SolverControls, ZeroNormPolicy};
use crate::json::{to_pretty_string, EstimateOutput};
use crate::location::CenterSpec;
use crate::tuning::{self, TuneSpec};
use crate::weights::WeightSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rscatter", version, about = "Penalized and hybrid M-estimators of scatter")]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw an elliptical sample and write it as CSV.
    Generate {
        #[arg(long, default_value = "gaussian")]
        dist: String,
        #[arg(long)]
        shape: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit one estimator to a CSV dataset.
    Estimate {
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Contaminate a dataset over a magnitude ladder and report the bias.
    Stress {
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long)]
        pattern: String,
        #[arg(long, default_value = "1")]
        m_grid: String,
        #[arg(long, default_value = "1e2..1e12")]
        ladder: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Choose eta or gamma by K-fold cross-validation.
    Tune {
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    #[arg(long)]
    input: PathBuf,
    /// sscm, gen-sscm, m, pen-trace, pen-kl, hybrid-trace or hybrid-kl.
    #[arg(long)]
    estimator: String,
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value = "spatial")]
    center: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// drop or error.
    #[arg(long, default_value = "drop")]
    zero_norm: String,
}

/// Fully resolved run configuration, embedded in every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub settings: Value,
}

struct Failure {
    error: Error,
    config: Option<RunConfig>,
    output: Option<PathBuf>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            error,
            config: None,
            output: None,
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn tuning_flag(kind: &str, eta: Option<f64>, gamma: Option<f64>, required: bool) -> Result<Option<f64>> {
    let (wanted, other, value, stray) = match kind {
        "pen-trace" | "hybrid-trace" => ("eta", "gamma", eta, gamma),
        "pen-kl" | "hybrid-kl" => ("gamma", "eta", gamma, eta),
        _ => {
            if eta.is_some() || gamma.is_some() {
                return Err(usage(format!("estimator {kind} takes neither --eta nor --gamma")));
            }
            return Ok(None);
        }
    };
    if stray.is_some() {
        return Err(usage(format!("estimator {kind} takes --{wanted}, not --{other}")));
    }
    if required && value.is_none() {
        return Err(usage(format!("estimator {kind} requires --{wanted}")));
    }
    Ok(value)
}

fn parse_kind(name: &str, tuning: Option<f64>) -> Result<EstimatorKind> {
    let t = tuning.unwrap_or(f64::NAN);
    let kind = match name {
        "sscm" => EstimatorKind::Sscm,
        "gen-sscm" => EstimatorKind::GenSscm,
        "m" => EstimatorKind::MPlain,
        "pen-trace" => EstimatorKind::PenTrace { eta: t },
        "pen-kl" => EstimatorKind::PenKl { gamma: t },
        "hybrid-trace" => EstimatorKind::HybridTrace { eta: t },
        "hybrid-kl" => EstimatorKind::HybridKl { gamma: t },
        other => return Err(usage(format!("unknown estimator {other:?}"))),
    };
    Ok(kind)
}

fn zero_norm_policy(s: &str) -> Result<ZeroNormPolicy> {
    match s {
        "drop" => Ok(ZeroNormPolicy::Drop),
        "error" => Ok(ZeroNormPolicy::Error),
        other => Err(usage(format!("zero-norm policy must be drop or error, got {other:?}"))),
    }
}

/// `(config, settings)` from the shared estimator flags. `tuned` overrides
/// `--eta`/`--gamma`, which then become optional.
fn build_config(a: &EstimatorArgs, tuned: Option<f64>) -> Result<(EstimatorConfig, Value)> {
    let tuning = tuning_flag(&a.estimator, a.eta, a.gamma, tuned.is_none())?;
    let kind = parse_kind(&a.estimator, tuned.or(tuning))?;
    let weight = a.weight.as_deref().map(str::parse::<WeightSpec>).transpose()?;
    let center: CenterSpec = a.center.parse()?;
    let config = EstimatorConfig {
        kind,
        weight,
        center,
        solver: SolverControls {
            init: None,
            max_iter: a.max_iter,
            tol: a.tol,
        },
        zero_norm_policy: zero_norm_policy(&a.zero_norm)?,
    };
    config.validate()?;
    let settings = json!({
        "input": a.input,
        "estimator": config.kind,
        "weight": config.weight.as_ref().map(ToString::to_string),
        "center": config.center.to_string(),
        "tol": config.solver.tol,
        "max_iter": config.solver.max_iter,
        "zero_norm": config.zero_norm_policy,
    });
    Ok((config, settings))
}

fn read_input(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(usage(format!("input file {} does not exist", path.display())));
    }
    Dataset::read_csv(path)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn with_context<T>(r: Result<T>, config: &RunConfig, output: &Option<PathBuf>) -> std::result::Result<T, Failure> {
    r.map_err(|error| Failure {
        error,
        config: Some(config.clone()),
        output: output.clone(),
    })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| Error::Parse(format!("bad {what} entry {t:?}")))
        })
        .collect()
}

fn execute(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Generate {
            dist,
            shape,
            n,
            seed,
            output,
        } => {
            let distribution: Distribution = dist.parse()?;
            let shape_spec: ShapeSpec = shape.parse()?;
            let shape = shape_spec.resolve()?;
            if n == 0 {
                return Err(usage("n must be >= 1").into());
            }
            let data = datagen::sample(&GeneratorSpec {
                distribution,
                shape,
                n,
                seed,
            })?;
            emit(output.as_deref(), &data.to_csv())?;
        }
        Command::Estimate { est, output } => {
            let (config, settings) = build_config(&est, None)?;
            let data = read_input(&est.input)?;
            let run = RunConfig {
                command: "estimate".into(),
                settings,
            };
            let fit = with_context(estimators::estimate(&data, &config), &run, &output)?;
            let doc = EstimateOutput::from_estimate(&fit, serde_json::to_value(&run).map_err(Error::from)?);
            emit(output.as_deref(), &to_pretty_string(&doc)?)?;
        }
        Command::Stress {
            est,
            pattern,
            m_grid,
            ladder,
            seed,
            output,
        } => {
            let (config, mut settings) = build_config(&est, None)?;
            let pattern: Pattern = pattern.parse()?;
            let m_grid: Vec<usize> = parse_list(&m_grid, "m-grid")?;
            let spec = ContaminationSpec {
                pattern,
                m: 1,
                magnitude_ladder: breakdown::parse_ladder(&ladder)?,
            };
            spec.validate()?;
            let data = read_input(&est.input)?;
            settings["pattern"] = json!(spec.pattern.to_string());
            settings["m_grid"] = json!(m_grid);
            settings["ladder"] = json!(spec.magnitude_ladder);
            settings["seed"] = json!(seed);
            let run = RunConfig {
                command: "stress".into(),
                settings,
            };
            let bracket = with_context(
                breakdown::breakdown_estimate(&data, &config, &spec, &m_grid, seed),
                &run,
                &output,
            )?;
            let doc = json!({ "config": run, "bracket": bracket });
            emit(output.as_deref(), &to_pretty_string(&doc)?)?;
        }
        Command::Tune {
            est,
            grid,
            folds,
            seed,
            output,
        } => {
            let grid: Vec<f64> = parse_list(&grid, "grid")?;
            let first = *grid.first().ok_or_else(|| usage("grid is empty"))?;
            let (config, mut settings) = build_config(&est, Some(first))?;
            let spec = TuneSpec {
                grid,
                folds,
                score: tuning::Score::GaussianNll,
                seed,
            };
            let data = read_input(&est.input)?;
            settings["estimator"] = json!(config.kind.name());
            settings["grid"] = json!(spec.grid);
            settings["folds"] = json!(folds);
            settings["score"] = json!(spec.score);
            settings["seed"] = json!(seed);
            let run = RunConfig {
                command: "tune".into(),
                settings,
            };
            let report = with_context(tuning::cross_validate(&data, &config, &spec), &run, &output)?;
            let doc = json!({ "config": run, "report": report });
            emit(output.as_deref(), &to_pretty_string(&doc)?)?;
        }
    }
    Ok(())
}

/// Machine-readable details carried by a numerical failure.
fn diagnostics(e: &Error) -> Value {
    match e {
        Error::NonConvergence { iterations, gap, last } => {
            json!({ "iterations": iterations, "final_gap": gap, "last_iterate": last })
        }
        Error::LikelyNonexistent {
            iterations,
            largest,
            condition,
        } => json!({ "iterations": iterations, "largest_eigenvalue": largest, "condition": condition }),
        Error::MedianNonConvergence {
            iterations,
            residual,
            last,
        } => json!({ "iterations": iterations, "residual": residual, "last_iterate": last }),
        Error::NotPositiveDefinite { min_eigenvalue } => json!({ "min_eigenvalue": min_eigenvalue }),
        Error::NonSpanning { rank, q } => json!({ "rank": rank, "q": q }),
        Error::ZeroNormObservation { row } => json!({ "row": row }),
        _ => Value::Null,
    }
}

fn report_failure(f: Failure) -> i32 {
    eprintln!("rscatter: {}", f.error);
    if !f.error.is_numerical() {
        return EXIT_USAGE;
    }
    let doc = json!({
        "status": "failed",
        "error": f.error.to_string(),
        "diagnostics": diagnostics(&f.error),
        "config": f.config,
    });
    match to_pretty_string(&doc).and_then(|t| emit(f.output.as_deref(), &t)) {
        Ok(()) => {}
        Err(e) => eprintln!("rscatter: could not write diagnostics: {e}"),
    }
    EXIT_NUMERICAL
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("RSCATTER_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("RSCATTER_THREADS must be a positive integer, got {v:?}")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    if let Err(e) = init_threads() {
        eprintln!("rscatter: {e}");
        return EXIT_USAGE;
    }
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => report_failure(f),
    }
}
