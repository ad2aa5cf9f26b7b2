use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::high_probability_envelope;
use crate::error::Result;

use super::config::RunConfig;
use super::report::{config_hash, RunOutput, SCHEMA_VERSION};
use super::run::run_experiment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// `u_{1:T}`.
    pub actual_loss: f64,
    /// `l_{1:T}`, when measured.
    pub expected_loss: Option<f64>,
    pub min_loss: f64,
    pub all_hold: bool,
    /// `u >= c l`.
    pub markov_exceeded: Option<bool>,
    /// `|u - l| >= sqrt(3 c l)`.
    pub chernoff_exceeded: Option<bool>,
    /// `l >= 3c`.
    pub chernoff_valid: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    /// Hash of the template with seed 0.
    pub template_hash: String,
    pub confidence: f64,
    pub runs: Vec<SeedOutcome>,
    pub failures: Vec<SeedFailure>,
    pub mean_actual_loss: f64,
    /// Standard error of the mean of `u_{1:T}`.
    pub se_actual_loss: f64,
    pub mean_expected_loss: Option<f64>,
    /// Fraction of runs with `u >= c l`; Markov allows `1/c`.
    pub markov_exceedance: Option<f64>,
    pub markov_failure_bound: f64,
    /// Fraction of runs with `|u - l| >= sqrt(3 c l)`; Chernoff allows `2 e^{-c}`.
    pub chernoff_exceedance: Option<f64>,
    pub chernoff_failure_bound: f64,
    /// Runs with `l < 3c`, where the Chernoff envelope is not claimed.
    pub chernoff_invalid_runs: usize,
    pub all_hold: bool,
}

fn outcome(seed: u64, out: &RunOutput, c: f64) -> Result<SeedOutcome> {
    let s = &out.summary;
    let env = s.expected_loss.map(|l| high_probability_envelope(l, c)).transpose()?;
    let u = s.actual_loss;
    Ok(SeedOutcome {
        seed,
        actual_loss: u,
        expected_loss: s.expected_loss,
        min_loss: s.min_loss,
        all_hold: s.all_hold,
        markov_exceeded: env.map(|e| u >= e.markov_threshold),
        chernoff_exceeded: env
            .zip(s.expected_loss)
            .map(|(e, l)| (u - l).abs() >= e.chernoff_halfwidth),
        chernoff_valid: env.map(|e| e.chernoff_valid),
    })
}

fn fraction(flags: impl Iterator<Item = Option<bool>>) -> Option<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for f in flags {
        let f = f?;
        total += 1;
        hits += usize::from(f);
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Runs `template` once per perturbation seed, in parallel. A failing seed is
/// reported and the others still run.
pub fn sweep(template: &RunConfig, seeds: &[u64]) -> Result<SweepReport> {
    let c = template.confidence;
    let results: Vec<(u64, std::result::Result<SeedOutcome, String>)> = seeds
        .par_iter()
        .map(|&seed| {
            let config = template.clone().with_seed(seed);
            let result = run_experiment(&config)
                .and_then(|record| RunOutput::new(&config, record))
                .and_then(|out| outcome(seed, &out, c))
                .map_err(|e| e.to_string());
            (seed, result)
        })
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(o) => runs.push(o),
            Err(error) => failures.push(SeedFailure { seed, error }),
        }
    }

    let m = runs.len() as f64;
    let mean = runs.iter().map(|r| r.actual_loss).sum::<f64>() / m;
    let var = if runs.len() > 1 {
        runs.iter().map(|r| (r.actual_loss - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let mean_expected = runs
        .iter()
        .map(|r| r.expected_loss)
        .sum::<Option<f64>>()
        .filter(|_| !runs.is_empty())
        .map(|s| s / m);

    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        template_hash: config_hash(&template.clone().with_seed(0))?,
        confidence: c,
        mean_actual_loss: mean,
        se_actual_loss: (var / m).sqrt(),
        mean_expected_loss: mean_expected,
        markov_exceedance: fraction(runs.iter().map(|r| r.markov_exceeded)),
        markov_failure_bound: (1.0 / c).min(1.0),
        chernoff_exceedance: fraction(runs.iter().map(|r| r.chernoff_exceeded)),
        chernoff_failure_bound: 2.0 * (-c).exp(),
        chernoff_invalid_runs: runs.iter().filter(|r| r.chernoff_valid == Some(false)).count(),
        all_hold: failures.is_empty() && runs.iter().all(|r| r.all_hold),
        runs,
        failures,
    })
}
