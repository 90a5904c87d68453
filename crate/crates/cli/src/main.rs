use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use subexp_lasso::complexity::{empirical_width, exponential_width, gaussian_width, WidthEstimate};
use subexp_lasso::harness::config::ExperimentConfig;
use subexp_lasso::harness::emit::{self, Format};
use subexp_lasso::harness::experiment::{self, excess_certificate, run_error_curve, ExperimentResult};
use subexp_lasso::models::{generate_dataset, mismatch_report, Dataset, MismatchQuery};
use subexp_lasso::solver::{solve_lasso, solve_lifted};

const THREADS_ENV: &str = "SUBEXP_LASSO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "subexp-lasso", version, about = "Generalized Lasso experiments with sub-exponential inputs")]
struct Cli {
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Table)]
    format: OutFormat,
    /// Worker threads. SUBEXP_LASSO_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Jsonl,
    Table,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Jsonl => Format::Jsonl,
            OutFormat::Table => Format::Table,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one dataset from the config's model (always CSV: x1..xp,y).
    Sample {
        #[arg(long)]
        n: usize,
    },
    /// Solve on one dataset with the config's hypothesis set and solver.
    Solve {
        /// Dataset CSV; drawn from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Sample size when drawing.
        #[arg(long)]
        n: Option<usize>,
        /// Write the objective trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Monte-Carlo mismatch diagnostics at the config's target.
    Mismatch {
        #[arg(long, default_value_t = 100_000)]
        mc_budget: usize,
        /// Slice scale for the local mismatch; 0 uses the tangent cone.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 200)]
        dirs: usize,
    },
    /// Gaussian, exponential and empirical widths of the config's set.
    Complexity {
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        /// Sample size for the empirical width.
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
    /// Excess-risk certificate at scale t on one drawn dataset.
    Certificate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 500)]
        dirs: usize,
    },
    /// Run the full error curve.
    Experiment,
    /// Aggregates and decay slope of a results file.
    Report {
        /// Results file (CSV, or JSON lines with a .jsonl extension).
        #[arg(long)]
        results: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    configure_threads(cli.threads)?;
    run(&cli)
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?),
        Err(_) => flag,
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().context("--config is required for this subcommand")?;
    let mut cfg = ExperimentConfig::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn output(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes a single serializable value as one JSON line, a one-row CSV of its
/// scalar fields, or a key/value table.
fn emit_value<T: Serialize>(value: &T, format: Format, mut out: impl Write) -> Result<()> {
    let json = serde_json::to_value(value)?;
    let serde_json::Value::Object(map) = &json else { bail!("expected an object") };
    match format {
        Format::Jsonl => {
            serde_json::to_writer(&mut out, &json)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let scalars: Vec<(&String, String)> =
                map.iter().filter(|(_, v)| !v.is_array() && !v.is_object()).map(|(k, v)| (k, cell(v))).collect();
            writeln!(out, "{}", scalars.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>().join(","))?;
            writeln!(out, "{}", scalars.iter().map(|(_, v)| v.as_str()).collect::<Vec<_>>().join(","))?;
        }
        Format::Table => {
            let rows: Vec<Vec<String>> = map.iter().map(|(k, v)| vec![k.clone(), cell(v)]).collect();
            emit::write_table(&["field", "value"], &rows, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cell(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let format: Format = cli.format.into();
    match &cli.command {
        Command::Sample { n } => {
            let cfg = load_config(cli)?;
            let r = cfg.resolve()?;
            let data = generate_dataset(&r.model, &r.spec, *n, cfg.master_seed)?;
            emit::write_dataset(&data, output(cli)?)?;
        }
        Command::Solve { data, n, trace } => {
            let cfg = load_config(cli)?;
            let r = cfg.resolve()?;
            let mut dataset = match (data, n) {
                (Some(path), _) => read_dataset(path)?,
                (None, Some(n)) => generate_dataset(&r.model, &r.spec, *n, cfg.master_seed)?,
                (None, None) => bail!("solve needs --data or --n"),
            };
            let mut solver = cfg.solver.clone();
            solver.record_trace |= trace.is_some();
            let res = if r.model.lifted {
                dataset.lifted_side = Some(r.spec.dim);
                solve_lifted(&dataset, &r.set, &solver)?
            } else {
                solve_lasso(&dataset, &r.set, &solver)?
            };
            if let (Some(path), Some(tr)) = (trace, &res.objective_trace) {
                emit::write_trace(tr, BufWriter::new(File::create(path)?))?;
            }
            let error = res.estimate.iter().zip(&r.beta_nat).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            #[derive(Serialize)]
            struct SolveOut<'a> {
                n: usize,
                error: f64,
                #[serde(flatten)]
                result: &'a subexp_lasso::solver::SolveResult,
            }
            emit_value(&SolveOut { n: dataset.n(), error, result: &res }, format, output(cli)?)?;
        }
        Command::Mismatch { mc_budget, t, dirs } => {
            let cfg = load_config(cli)?;
            let r = cfg.resolve()?;
            let query = MismatchQuery {
                beta_nat: &r.beta_nat,
                set: t.map(|_| &r.set),
                t: *t,
                mc_budget: *mc_budget,
                n_dirs: *dirs,
                seed: cfg.master_seed,
            };
            let report = mismatch_report(&r.model, &r.spec, &query)?;
            emit_value(&report, format, output(cli)?)?;
        }
        Command::Complexity { trials, n } => {
            let cfg = load_config(cli)?;
            let r = cfg.resolve()?;
            let seed = cfg.master_seed;
            let widths = [
                gaussian_width(&r.set, *trials, seed)?,
                exponential_width(&r.set, *trials, seed)?,
                empirical_width(&r.set, &r.spec, *n, *trials, seed)?,
            ];
            write_widths(&widths, format, output(cli)?)?;
        }
        Command::Certificate { n, t, dirs } => {
            let cfg = load_config(cli)?;
            let r = cfg.resolve()?;
            if r.model.lifted {
                bail!("certificates are only available for vector models");
            }
            let data = generate_dataset(&r.model, &r.spec, *n, cfg.master_seed)?;
            let report = excess_certificate(&data, &r.set, &r.beta_nat, *t, *dirs, cfg.master_seed, &cfg.solver)?;
            emit_value(&report, format, output(cli)?)?;
        }
        Command::Experiment => {
            let cfg = load_config(cli)?;
            let result = run_error_curve(&cfg)?;
            let results_path = cli.out.clone().or_else(|| cfg.outputs.results.clone());
            match results_path {
                Some(p) => emit::write_records_path(&result.records, format, &p)?,
                None => emit::write_records(&result.records, format, io::stdout().lock())?,
            }
            if let Some(p) = &cfg.outputs.summary {
                emit::write_summary(&result, BufWriter::new(File::create(p)?))?;
            }
            if let Some(fit) = result.decay {
                eprintln!("decay slope {:.4} ± {:.4} over {} points", fit.slope, fit.std_error, fit.points);
            }
        }
        Command::Report { results } => {
            let records = emit::read_records_path(results).with_context(|| format!("reading {}", results.display()))?;
            let aggregates = experiment::aggregate(&records);
            let mut res = ExperimentResult {
                name: records.first().map(|r| r.experiment.clone()).unwrap_or_default(),
                config_hash: String::new(),
                master_seed: 0,
                records,
                aggregates,
                decay: None,
            };
            res.decay = experiment::fit_decay_rate(&res).ok();
            let mut out = output(cli)?;
            emit::write_aggregates(&res.aggregates, format, &mut out)?;
            match (res.decay, format) {
                (Some(fit), Format::Table) => writeln!(out, "slope {} stderr {} points {}", fit.slope, fit.std_error, fit.points)?,
                (Some(fit), _) => eprintln!("slope {} stderr {} points {}", fit.slope, fit.std_error, fit.points),
                (None, _) => eprintln!("too few positive medians for a slope"),
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(emit::read_dataset(file)?)
}

fn write_widths(widths: &[WidthEstimate], format: Format, mut out: impl Write) -> Result<()> {
    let kind = |w: &WidthEstimate| w.width_kind.to_string();
    match format {
        Format::Jsonl => {
            for w in widths {
                serde_json::to_writer(&mut out, w)?;
                writeln!(out)?;
            }
        }
        Format::Csv => {
            writeln!(out, "kind,mean,std_error,trials")?;
            for w in widths {
                writeln!(out, "{},{},{},{}", kind(w).replace(',', ";"), w.mean, w.std_error, w.trials)?;
            }
        }
        Format::Table => {
            let rows: Vec<Vec<String>> = widths
                .iter()
                .map(|w| vec![kind(w), format!("{:.6}", w.mean), format!("{:.6}", w.std_error), w.trials.to_string()])
                .collect();
            emit::write_table(&["kind", "mean", "std_error", "trials"], &rows, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}
