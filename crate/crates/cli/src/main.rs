//! `fpl`: run, sweep and re-verify Follow the Perturbed Leader experiments.
//!
//! Exit status is 0 when every applicable bound holds, 1 when one is
//! violated (or a stored verdict cannot be reproduced), 2 on errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fpl::bounds::{BoundVerdict, VerdictStatus};
use fpl::domain::ExpertClass;
use fpl::harness::{
    all_applicable_hold, read_trace, run_experiment, sweep, write_trace, Measurement, RunConfig, RunOutput, Summary,
    CONFIG_KEYS,
};
use fpl::perturbation::{mix_seed, stream_rng};
use fpl::probability::{selection_probabilities, selection_probabilities_mc, shifted_exp_max_estimate, WeightMethod};

#[derive(Parser)]
#[command(name = "fpl", version, about = "Follow the Perturbed Leader experiment runner", after_help = CONFIG_KEYS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Configuration file; every key is optional (see the key list below).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Perturbation seed, overriding `perturbation.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the trace and summary files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte-Carlo samples; for run and sweep this selects `measurement.kind = mc`.
    #[arg(long)]
    samples: Option<u64>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and check its bounds.
    #[command(after_help = CONFIG_KEYS)]
    Run(Common),
    /// Run the configuration once per seed and report envelope coverage.
    #[command(after_help = CONFIG_KEYS)]
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Number of seeds, starting at --seed (default 0).
        #[arg(long, default_value_t = 100)]
        runs: u64,
    },
    /// Recompute the verdicts of a stored run from its summary and trace.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Summary file [default: OUT/summary.json].
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Trace file [default: OUT/trace.csv].
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare exact and Monte-Carlo selection probabilities on random states.
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 20)]
        instances: u64,
    },
    /// Estimate E[max_i (q_i - k_i)] for exponential q.
    Lemma1 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Common complexity of all experts.
        #[arg(long, default_value_t = 0.0)]
        k: f64,
        /// Explicit complexities, comma separated; overrides --n and --k.
        #[arg(long, value_delimiter = ',')]
        complexities: Option<Vec<f64>>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config = config.with_seed(seed);
    }
    if let Some(samples) = common.samples {
        config.measurement = Measurement::MonteCarlo { samples };
        config.validate()?;
    }
    Ok(config)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn verdict_lines(verdicts: &[BoundVerdict]) {
    for v in verdicts {
        let status = match v.status {
            VerdictStatus::Holds => "holds",
            VerdictStatus::Violated => "VIOLATED",
            VerdictStatus::Inapplicable => "n/a",
        };
        match (v.measured, v.bound_value, v.slack) {
            (Some(m), Some(b), Some(s)) => {
                eprintln!("{:<15} {status:<9} measured {m:.6} bound {b:.6} slack {s:.6}", v.theorem.name())
            }
            _ => eprintln!(
                "{:<15} {status:<9} {}",
                v.theorem.name(),
                v.note.as_deref().unwrap_or_default()
            ),
        }
    }
}

fn cmd_run(common: &Common) -> Result<bool> {
    let config = load_config(common)?;
    let record = run_experiment(&config)?;
    let out = RunOutput::new(&config, record)?;
    if let Some(dir) = &common.out {
        out.write_to(dir)
            .with_context(|| format!("writing to {}", dir.display()))?;
    }
    match common.format {
        Format::Json => print_json(&out.summary)?,
        Format::Csv => write_trace(&out.record.steps, std::io::stdout().lock())?,
    }
    verdict_lines(&out.summary.verdicts);
    Ok(out.summary.all_hold)
}

fn cmd_sweep(common: &Common, runs: u64) -> Result<bool> {
    let config = load_config(common)?;
    let start = common.seed.unwrap_or(0);
    let seeds: Vec<u64> = (start..start + runs).collect();
    let report = sweep(&config, &seeds)?;
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    match common.format {
        Format::Json => print_json(&report)?,
        Format::Csv => {
            let mut w = std::io::stdout().lock();
            writeln!(w, "seed,actual_loss,expected_loss,min_loss,all_hold")?;
            for r in &report.runs {
                let ell = r.expected_loss.map_or_else(String::new, |x| x.to_string());
                writeln!(w, "{},{},{ell},{},{}", r.seed, r.actual_loss, r.min_loss, r.all_hold)?;
            }
        }
    }
    for f in &report.failures {
        eprintln!("seed {} failed: {}", f.seed, f.error);
    }
    eprintln!(
        "{} runs, mean u {:.4} (SE {:.4}), Chernoff exceedance {:?} (bound {:.4})",
        report.runs.len(),
        report.mean_actual_loss,
        report.se_actual_loss,
        report.chernoff_exceedance,
        report.chernoff_failure_bound
    );
    Ok(report.all_hold)
}

fn artifact(explicit: &Option<PathBuf>, out: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    match (explicit, out) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(dir)) => Ok(dir.join(name)),
        (None, None) => bail!("give --{} or --out", Path::new(name).file_stem().unwrap().to_string_lossy()),
    }
}

fn cmd_verify(common: &Common, summary: &Option<PathBuf>, trace: &Option<PathBuf>) -> Result<bool> {
    let summary_path = artifact(summary, &common.out, "summary.json")?;
    let stored = Summary::from_json(
        &std::fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?,
    )?;
    let trace_path = match trace {
        Some(p) => p.clone(),
        None => summary_path.with_file_name(&stored.config.output.trace),
    };
    let file = std::fs::File::open(&trace_path).with_context(|| format!("reading {}", trace_path.display()))?;
    let verdicts = stored.reverify(read_trace(file)?)?;
    let reproduced = verdicts == stored.verdicts;
    if !reproduced {
        eprintln!("stored verdicts differ from the recomputation");
    }
    match common.format {
        Format::Json => print_json(&serde_json::json!({
            "schema_version": fpl::harness::SCHEMA_VERSION,
            "config_hash": stored.config_hash,
            "reproduced": reproduced,
            "verdicts": verdicts,
        }))?,
        Format::Csv => {
            let mut w = std::io::stdout().lock();
            writeln!(w, "theorem,status,bound,measured,slack")?;
            for v in &verdicts {
                let f = |x: Option<f64>| x.map_or_else(String::new, |x| x.to_string());
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    v.theorem,
                    serde_json::to_value(v.status)?.as_str().unwrap_or_default(),
                    f(v.bound_value),
                    f(v.measured),
                    f(v.slack)
                )?;
            }
        }
    }
    verdict_lines(&verdicts);
    Ok(reproduced && all_applicable_hold(&verdicts))
}

#[derive(serde::Serialize)]
struct ProbeRow {
    instance: u64,
    exact: Vec<f64>,
    monte_carlo: Vec<f64>,
    total_variation: f64,
}

fn cmd_probe(common: &Common, n: usize, epsilon: f64, instances: u64) -> Result<bool> {
    use rand::Rng;
    let seed = common.seed.unwrap_or(0);
    let samples = common.samples.unwrap_or(1_000_000);
    let mut rows = Vec::new();
    for i in 0..instances {
        let mut rng = stream_rng(mix_seed(seed, 0x9a0be), i);
        let state: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..4.0 / epsilon)).collect();
        let exact = selection_probabilities(&state, epsilon, WeightMethod::Auto)?;
        let mc = selection_probabilities_mc(&state, epsilon, samples, mix_seed(seed, i))?;
        rows.push(ProbeRow {
            instance: i,
            total_variation: exact.total_variation(&mc),
            exact: exact.weights().to_vec(),
            monte_carlo: mc.weights().to_vec(),
        });
    }
    match common.format {
        Format::Json => print_json(&rows)?,
        Format::Csv => {
            let mut w = std::io::stdout().lock();
            writeln!(w, "instance,total_variation")?;
            for r in &rows {
                writeln!(w, "{},{}", r.instance, r.total_variation)?;
            }
        }
    }
    Ok(true)
}

fn cmd_lemma1(common: &Common, n: usize, k: f64, complexities: &Option<Vec<f64>>) -> Result<bool> {
    let class = ExpertClass::relaxed(complexities.clone().unwrap_or_else(|| vec![k; n]))?;
    let samples = common.samples.unwrap_or(1_000_000);
    let estimate = shifted_exp_max_estimate(&class, samples, common.seed.unwrap_or(0))?;
    let bound = 1.0 + class.weight_sum().ln();
    let holds = estimate.mean <= bound + 3.0 * estimate.std_error;
    match common.format {
        Format::Json => print_json(&serde_json::json!({
            "schema_version": fpl::harness::SCHEMA_VERSION,
            "weight_sum": class.weight_sum(),
            "estimate": estimate,
            "upper_bound": bound,
            "holds": holds,
        }))?,
        Format::Csv => println!(
            "mean,std_error,samples,upper_bound\n{},{},{},{bound}",
            estimate.mean, estimate.std_error, estimate.samples
        ),
    }
    Ok(holds)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => cmd_run(common),
        Command::Sweep { common, runs } => cmd_sweep(common, *runs),
        Command::Verify { common, summary, trace } => cmd_verify(common, summary, trace),
        Command::Probe {
            common,
            n,
            epsilon,
            instances,
        } => cmd_probe(common, *n, *epsilon, *instances),
        Command::Lemma1 {
            common,
            n,
            k,
            complexities,
        } => cmd_lemma1(common, *n, *k, complexities),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
