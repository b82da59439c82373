//! `inar`: stationary marginals, moments, sample paths, transition laws and
//! the validation suite from the command line.

mod format;
mod model;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use inar_core::marginal::{marginal_moments, marginal_pmf};
use inar_core::pmf::DiscretePmf;
use inar_core::presets::presets;
use inar_core::process::{k_step_conditional, simulate, Init};
use inar_core::validation::{run_suite, Suite};
use inar_core::{InarError, StationaryModel};
use serde::Serialize;

use crate::format::{fmt_sig, round_sig};
use crate::model::ModelArgs;

const EXIT_VALIDATION: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "inar",
    version,
    about = "Stationary INAR(1) count models under binomial thinning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary marginal pmf as a "k,probability" table.
    Pmf {
        #[command(flatten)]
        model: ModelArgs,
        /// Last k to print; defaults to the whole computed support.
        #[arg(long)]
        max_k: Option<usize>,
        /// Bound on the neglected tail mass, at most 1e-6.
        #[arg(long, default_value = "1e-10")]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Mean, variance, dispersion index and moment sequences as JSON.
    Moments {
        #[command(flatten)]
        model: ModelArgs,
        /// Highest order of the moment sequences.
        #[arg(long, default_value_t = 4)]
        orders: usize,
    },
    /// Sample path as a "t,x" table.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Path length.
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// "stationary" or "fixed:<n>".
        #[arg(long, default_value = "stationary")]
        init: String,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Law of X_{t+k} given X_t = l as a "k,probability" table.
    Transition {
        #[command(flatten)]
        model: ModelArgs,
        /// Current state l.
        #[arg(long)]
        from: u64,
        /// Number of steps k.
        #[arg(long, default_value_t = 1)]
        steps: u32,
        /// Last k to print.
        #[arg(long)]
        max_k: Option<usize>,
        /// Bound on the neglected tail mass, at most 1e-6.
        #[arg(long, default_value = "1e-10")]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run the oracle and identity checks; one JSON report per line.
    Validate {
        /// all, functional-eq, oracles, lemma2 or monte-carlo.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Base tolerance t; individual checks scale it. At most 1e-6.
        #[arg(long, default_value = "1e-8")]
        tol: f64,
    },
    /// List the named example models.
    Presets,
}

enum Failure {
    Usage(String),
    Validation,
}

impl From<InarError> for Failure {
    fn from(e: InarError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(EXIT_VALIDATION),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match command {
        Command::Pmf {
            model,
            max_k,
            tol,
            format,
        } => {
            let model = model.resolve()?;
            let dist = marginal_pmf(&model, tol)?;
            let extra = serde_json::json!({
                "model": model,
                "method": dist.method,
                "product_depth": dist.product_depth,
            });
            write_table(&mut out, &dist.pmf, max_k, format, extra)?;
        }
        Command::Moments { model, orders } => {
            let model = model.resolve()?;
            let report = marginal_moments(&model, orders)?;
            let rounded = |v: &[f64]| v.iter().map(|&x| round_sig(x)).collect::<Vec<_>>();
            let json = MomentsOut {
                model,
                mean: round_sig(report.mean),
                variance: round_sig(report.variance),
                dispersion_index: round_sig(report.dispersion_index),
                moments: rounded(&report.moments),
                factorial_moments: rounded(&report.factorial_moments),
                cumulants: rounded(&report.cumulants),
                factorial_cumulants: rounded(&report.factorial_cumulants),
            };
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&json).expect("json")
            )?;
        }
        Command::Simulate {
            model,
            steps,
            seed,
            init,
            out: path,
        } => {
            let model = model.resolve()?;
            let init: Init = init.parse()?;
            let sample = simulate(&model, steps, seed, init)?;
            match path {
                Some(path) => {
                    let file = File::create(&path).map_err(|e| {
                        Failure::Usage(format!("cannot write {}: {e}", path.display()))
                    })?;
                    let mut w = BufWriter::new(file);
                    write_path(&mut w, &sample.values)?;
                    w.flush()?;
                }
                None => write_path(&mut out, &sample.values)?,
            }
        }
        Command::Transition {
            model,
            from,
            steps,
            max_k,
            tol,
            format,
        } => {
            let model = model.resolve()?;
            let law = k_step_conditional(&model, from, steps, tol)?;
            let extra = serde_json::json!({ "model": model, "from": from, "steps": steps });
            write_table(&mut out, &law, max_k, format, extra)?;
        }
        Command::Validate { suite, tol } => {
            let suite: Suite = suite.parse()?;
            if !(tol.is_finite() && tol > 0.0 && tol <= 1e-6) {
                return Err(Failure::Usage(format!(
                    "--tol must lie in (0, 1e-6], got {tol}"
                )));
            }
            let reports = run_suite(suite, tol);
            for r in &reports {
                writeln!(out, "{}", r.to_json_line())?;
            }
            out.flush()?;
            let failed = reports.iter().filter(|r| !r.passed).count();
            eprintln!("{} checks, {failed} failed", reports.len());
            if failed > 0 {
                return Err(Failure::Validation);
            }
        }
        Command::Presets => {
            for p in presets() {
                writeln!(
                    out,
                    "{:<20} {}  {}",
                    p.name,
                    p.description,
                    p.model.to_json()
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MomentsOut {
    model: StationaryModel,
    mean: f64,
    variance: f64,
    dispersion_index: f64,
    moments: Vec<f64>,
    factorial_moments: Vec<f64>,
    cumulants: Vec<f64>,
    factorial_cumulants: Vec<f64>,
}

#[derive(Serialize)]
struct Table<'a> {
    #[serde(flatten)]
    extra: serde_json::Value,
    tail_bound: f64,
    probabilities: &'a [f64],
}

fn write_table<W: Write>(
    out: &mut W,
    pmf: &DiscretePmf,
    max_k: Option<usize>,
    format: Format,
    extra: serde_json::Value,
) -> Result<(), Failure> {
    let probs = pmf.probs();
    let end = max_k.map_or(probs.len(), |k| (k + 1).min(probs.len()));
    match format {
        Format::Csv => {
            writeln!(out, "k,probability")?;
            for (k, p) in probs[..end].iter().enumerate() {
                writeln!(out, "{k},{}", fmt_sig(*p))?;
            }
        }
        Format::Json => {
            let rounded: Vec<f64> = probs[..end].iter().map(|&p| round_sig(p)).collect();
            let table = Table {
                extra,
                tail_bound: pmf.tail_bound(),
                probabilities: &rounded,
            };
            writeln!(out, "{}", serde_json::to_string(&table).expect("json"))?;
        }
    }
    Ok(())
}

fn write_path<W: Write>(out: &mut W, values: &[u64]) -> io::Result<()> {
    writeln!(out, "t,x")?;
    for (t, x) in values.iter().enumerate() {
        writeln!(out, "{},{x}", t + 1)?;
    }
    Ok(())
}
