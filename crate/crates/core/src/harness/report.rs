//! Trace CSV and JSON summary.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{
    high_probability_envelope, lower_general_expected, verify, BoundVerdict, Envelope, VerdictStatus,
    HIERARCHY_B_NOTE,
};
use crate::error::{FplError, Result};

use super::config::RunConfig;
use super::record::{RunRecord, TraceRow};

pub const SCHEMA_VERSION: u32 = 1;

pub const TRACE_COLUMNS: [&str; 7] = ["t", "chosen", "u_t", "eps_t", "ell_t", "r_t", "smin_t"];

fn optional(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Writes the trace with a header row and LF line endings. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_trace<W: Write>(steps: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in steps {
        w.write_record([
            r.t.to_string(),
            r.chosen.to_string(),
            r.u_t.to_string(),
            r.eps_t.to_string(),
            optional(r.ell_t),
            optional(r.r_t),
            r.smin_t.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_to_string(steps: &[TraceRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_trace(steps, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is ASCII"))
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(TRACE_COLUMNS) {
        return Err(FplError::Format {
            row: 1,
            message: format!("expected header {}", TRACE_COLUMNS.join(",")),
        });
    }
    let mut steps = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record?;
        let bad = |col: &str| FplError::Format {
            row,
            message: format!("unparsable `{col}`"),
        };
        let float = |j: usize| record[j].parse::<f64>().map_err(|_| bad(TRACE_COLUMNS[j]));
        let maybe = |j: usize| {
            if record[j].is_empty() {
                Ok(None)
            } else {
                float(j).map(Some)
            }
        };
        steps.push(TraceRow {
            t: record[0].parse().map_err(|_| bad("t"))?,
            chosen: record[1].parse().map_err(|_| bad("chosen"))?,
            u_t: float(2)?,
            eps_t: float(3)?,
            ell_t: maybe(4)?,
            r_t: maybe(5)?,
            smin_t: float(6)?,
        });
    }
    Ok(steps)
}

/// SHA-256 of the canonical JSON form of the configuration.
pub fn config_hash(config: &RunConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config_hash: String,
    /// The full configuration, including the perturbation seed.
    pub config: RunConfig,
    pub horizon: u64,
    pub complexities: Vec<f64>,
    /// `u_{1:T}`.
    pub actual_loss: f64,
    /// `l_{1:T}`.
    pub expected_loss: Option<f64>,
    /// `r_{1:T}`.
    pub infeasible_loss: Option<f64>,
    /// `sum_t eps_t l_t`, the bound on `l_{1:T} - r_{1:T}`.
    pub rate_weighted_expected_loss: Option<f64>,
    /// `s_{1:T}^min`.
    pub min_loss: f64,
    pub best_expert: usize,
    /// `s_{1:T}^i`.
    pub expert_losses: Vec<f64>,
    /// `eps_T`, absent for Follow the Leader.
    pub final_epsilon: Option<f64>,
    pub verdicts: Vec<BoundVerdict>,
    pub all_hold: bool,
    /// Around `l_{1:T}` at `c = confidence`.
    pub envelope: Option<Envelope>,
    /// `s_min - (H_n - 1)/eps_T`, uniform classes only.
    pub lower_general_expected: Option<f64>,
    pub notes: Vec<String>,
}

pub fn all_applicable_hold(verdicts: &[BoundVerdict]) -> bool {
    verdicts.iter().all(|v| v.status != VerdictStatus::Violated)
}

impl Summary {
    pub fn new(config: &RunConfig, record: &RunRecord) -> Result<Self> {
        let verdicts = verify(record, &config.bounds)?;
        let expected_loss = record.expected_loss();
        let final_epsilon = record.final_epsilon().filter(|e| e.is_finite());
        let uniform = record
            .complexities
            .iter()
            .all(|k| (k - record.complexities[0]).abs() <= 1e-12);
        let min_loss = record.min_loss();
        let best_expert = record
            .expert_losses
            .iter()
            .position(|s| *s == min_loss)
            .unwrap_or(0);
        let mut notes = Vec::new();
        if record.algorithm == super::Algorithm::Hierarchy {
            notes.push(HIERARCHY_B_NOTE.to_string());
        }
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            config_hash: config_hash(config)?,
            config: config.clone(),
            horizon: record.horizon(),
            complexities: record.complexities.clone(),
            actual_loss: record.actual_loss(),
            expected_loss,
            infeasible_loss: record.infeasible_loss(),
            rate_weighted_expected_loss: record.rate_weighted_expected_loss(),
            min_loss,
            best_expert,
            expert_losses: record.expert_losses.clone(),
            final_epsilon,
            all_hold: all_applicable_hold(&verdicts),
            verdicts,
            envelope: expected_loss
                .map(|l| high_probability_envelope(l, config.confidence))
                .transpose()?,
            lower_general_expected: final_epsilon
                .filter(|_| uniform && record.algorithm.is_perturbed_leader())
                .map(|eps| lower_general_expected(min_loss, record.n(), eps)),
            notes,
        })
    }

    /// Rebuilds the run record from this summary and its trace.
    pub fn record(&self, steps: Vec<TraceRow>) -> Result<RunRecord> {
        if steps.len() as u64 != self.horizon {
            return Err(FplError::invalid(format!(
                "trace has {} rows, summary says {}",
                steps.len(),
                self.horizon
            )));
        }
        let measurement = if self.config.algorithm == super::Algorithm::Hierarchy {
            super::Measurement::None
        } else {
            self.config.measurement
        };
        Ok(RunRecord {
            algorithm: self.config.algorithm,
            schedule: self.config.schedule,
            complexities: self.complexities.clone(),
            perturbation: self.config.perturbation,
            measurement,
            steps,
            expert_losses: self.expert_losses.clone(),
        })
    }

    /// Verdicts recomputed from a persisted trace.
    pub fn reverify(&self, steps: Vec<TraceRow>) -> Result<Vec<BoundVerdict>> {
        verify(&self.record(steps)?, &self.config.bounds)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => Ok(serde_json::from_value(value)?),
            other => Err(FplError::Unsupported(format!(
                "summary schema version {other:?}, expected {SCHEMA_VERSION}"
            ))),
        }
    }
}

/// Trace and summary of one finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub summary: Summary,
}

impl RunOutput {
    pub fn new(config: &RunConfig, record: RunRecord) -> Result<Self> {
        let summary = Summary::new(config, &record)?;
        Ok(Self { record, summary })
    }

    /// Writes the trace and summary under `dir`, creating it if needed.
    pub fn write_to(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let out = &self.summary.config.output;
        let file = std::fs::File::create(dir.join(&out.trace))?;
        write_trace(&self.record.steps, std::io::BufWriter::new(file))?;
        std::fs::write(dir.join(&out.summary), self.summary.to_json()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<TraceRow> {
        vec![
            TraceRow {
                t: 1,
                chosen: 0,
                u_t: 0.0,
                eps_t: f64::INFINITY,
                ell_t: Some(0.1 + 0.2),
                r_t: None,
                smin_t: 0.0,
            },
            TraceRow {
                t: 2,
                chosen: 1,
                u_t: 1.0,
                eps_t: 1.0 / 3f64.sqrt(),
                ell_t: None,
                r_t: Some(1e-300),
                smin_t: 0.5,
            },
        ]
    }

    #[test]
    fn trace_round_trips_bit_exactly() {
        let text = trace_to_string(&rows()).unwrap();
        assert!(text.starts_with("t,chosen,u_t,eps_t,ell_t,r_t,smin_t\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_trace(text.as_bytes()).unwrap(), rows());
    }

    #[test]
    fn trace_reader_reports_rows() {
        let bad = "t,chosen,u_t,eps_t,ell_t,r_t,smin_t\n1,0,x,1,,,0\n";
        assert!(matches!(read_trace(bad.as_bytes()), Err(FplError::Format { row: 2, .. })));
        assert!(read_trace("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn hash_tracks_the_seed() {
        let c = RunConfig::default();
        assert_eq!(config_hash(&c).unwrap(), config_hash(&c.clone()).unwrap());
        assert_ne!(config_hash(&c).unwrap(), config_hash(&c.with_seed(1)).unwrap());
    }
}
