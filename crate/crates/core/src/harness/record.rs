use serde::{Deserialize, Serialize};

use crate::perturbation::PerturbationSource;
use crate::schedules::ScheduleSpec;

/// Which predictor a run drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Fpl,
    /// FPL with the infeasible leader evaluated alongside on the same `q`.
    IfplPaired,
    Fl,
    FlPenalized,
    Hierarchy,
    DeterministicMaster,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Fpl => "fpl",
            Algorithm::IfplPaired => "ifpl_paired",
            Algorithm::Fl => "fl",
            Algorithm::FlPenalized => "fl_penalized",
            Algorithm::Hierarchy => "hierarchy",
            Algorithm::DeterministicMaster => "deterministic_master",
        }
    }

    /// Whether the run plays a perturbed leader whose `l_t` the bounds talk about.
    pub fn is_perturbed_leader(&self) -> bool {
        matches!(
            self,
            Algorithm::Fpl | Algorithm::IfplPaired | Algorithm::DeterministicMaster
        )
    }
}

impl std::str::FromStr for Algorithm {
    type Err = crate::error::FplError;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        Ok(match s {
            "fpl" => Algorithm::Fpl,
            "ifpl_paired" | "ifpl" => Algorithm::IfplPaired,
            "fl" => Algorithm::Fl,
            "fl_penalized" => Algorithm::FlPenalized,
            "hierarchy" => Algorithm::Hierarchy,
            "deterministic_master" => Algorithm::DeterministicMaster,
            other => {
                return Err(crate::error::FplError::invalid(format!(
                    "unknown algorithm `{other}`"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Measurement {
    /// Exact selection probabilities (subset sum, or quadrature above 20 experts).
    Exact,
    MonteCarlo { samples: u64 },
    /// Realized losses only.
    None,
}

/// One row of the trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: u64,
    /// Zero-based expert index; for the deterministic master, the largest weight.
    pub chosen: usize,
    /// `u_t`.
    pub u_t: f64,
    /// `eps_t`; `inf` for Follow the Leader.
    pub eps_t: f64,
    /// `l_t`, when measured.
    pub ell_t: Option<f64>,
    /// `r_t`, paired runs only.
    pub r_t: Option<f64>,
    /// `min_i s_{1:t}^i` after the step.
    pub smin_t: f64,
}

/// Everything a bound verdict needs about a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub schedule: ScheduleSpec,
    pub complexities: Vec<f64>,
    pub perturbation: PerturbationSource,
    pub measurement: Measurement,
    pub steps: Vec<TraceRow>,
    /// `s_{1:T}^i`.
    pub expert_losses: Vec<f64>,
}

impl RunRecord {
    pub fn horizon(&self) -> u64 {
        self.steps.len() as u64
    }

    /// `u_{1:T}`.
    pub fn actual_loss(&self) -> f64 {
        self.steps.iter().map(|r| r.u_t).sum()
    }

    /// `l_{1:T}`, if every step was measured.
    pub fn expected_loss(&self) -> Option<f64> {
        self.steps.iter().map(|r| r.ell_t).sum()
    }

    /// `r_{1:T}`, if every step was paired.
    pub fn infeasible_loss(&self) -> Option<f64> {
        self.steps.iter().map(|r| r.r_t).sum()
    }

    /// `sum_t eps_t l_t`.
    pub fn rate_weighted_expected_loss(&self) -> Option<f64> {
        self.steps.iter().map(|r| r.ell_t.map(|e| e * r.eps_t)).sum()
    }

    pub fn min_loss(&self) -> f64 {
        self.expert_losses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn final_epsilon(&self) -> Option<f64> {
        self.steps.last().map(|r| r.eps_t)
    }

    pub fn n(&self) -> usize {
        self.complexities.len()
    }
}
