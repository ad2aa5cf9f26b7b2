//! Learning-rate rules `eps_t`, each a pure function of the run history.

use serde::{Deserialize, Serialize};

use crate::domain::{CumulativeState, ExpertClass};
use crate::error::{FplError, Result};
use crate::probability::WeightMethod;

/// Relative slack allowed when checking that rates never increase.
const MONOTONE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScheduleSpec {
    /// Constant `eps`.
    Static { epsilon: f64 },
    /// `1 / sqrt(t)`.
    InvSqrtT,
    /// `sqrt(K / 2t)`.
    SqrtKOver2t { k_bound: f64 },
    /// `sqrt(K / 2(l_{<t} + 1))` with the expected loss `l_{<t}` obtained by
    /// `estimator`. `K = 1` gives `1 / sqrt(2(l_{<t} + 1))`.
    SelfConfident { k_bound: f64, estimator: WeightMethod },
    /// `sqrt(K / 2(u_{<t} + 1))` with the realized loss `u_{<t}`.
    SelfConfidentActual { k_bound: f64 },
    /// `1 / min_i { k_i + sqrt(k_i^2 + 2 s_{<t}^i + 2) }`.
    AdaptiveSminGeneral,
    /// `sqrt(1/2) * min{1, sqrt(K / s_{<t}^min)}`.
    AdaptiveSminUniform { k_bound: f64 },
}

impl ScheduleSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleSpec::Static { .. } => "static",
            ScheduleSpec::InvSqrtT => "inv_sqrt_t",
            ScheduleSpec::SqrtKOver2t { .. } => "sqrt_k_over_2t",
            ScheduleSpec::SelfConfident { .. } => "self_confident",
            ScheduleSpec::SelfConfidentActual { .. } => "self_confident_actual",
            ScheduleSpec::AdaptiveSminGeneral => "adaptive_smin_general",
            ScheduleSpec::AdaptiveSminUniform { .. } => "adaptive_smin_uniform",
        }
    }

    pub fn k_bound(&self) -> Option<f64> {
        match self {
            ScheduleSpec::SqrtKOver2t { k_bound }
            | ScheduleSpec::SelfConfident { k_bound, .. }
            | ScheduleSpec::SelfConfidentActual { k_bound }
            | ScheduleSpec::AdaptiveSminUniform { k_bound } => Some(*k_bound),
            _ => None,
        }
    }

    /// Whether `eps_t` depends on the expected loss prefix.
    pub fn needs_expected_loss(&self) -> bool {
        matches!(self, ScheduleSpec::SelfConfident { .. })
    }

    /// Parameter checks, and `K >= max_i k_i` for rules carrying `K`.
    pub fn validate(&self, class: &ExpertClass) -> Result<()> {
        if let ScheduleSpec::Static { epsilon } = self {
            if !(epsilon.is_finite() && *epsilon > 0.0) {
                return Err(FplError::invalid(format!(
                    "static learning rate must be positive, got {epsilon}"
                )));
            }
        }
        if let Some(k) = self.k_bound() {
            if !(k.is_finite() && k > 0.0) {
                return Err(FplError::invalid(format!("K must be positive, got {k}")));
            }
            let max_k = class.max_complexity();
            if k + 1e-12 < max_k {
                return Err(FplError::invalid(format!(
                    "K = {k} is below the largest complexity {max_k}"
                )));
            }
        }
        Ok(())
    }
}

/// What a rule may look at when choosing `eps_t`.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleHistory<'a> {
    /// Current step, starting at 1.
    pub t: u64,
    /// `l_{<t}`; required by the self-confident rule only.
    pub expected_loss_prefix: Option<f64>,
    /// `u_{<t}`.
    pub actual_loss_prefix: f64,
    /// `s_{<t}`.
    pub cumulative: &'a CumulativeState,
}

pub fn next_epsilon(spec: &ScheduleSpec, history: &ScheduleHistory<'_>, class: &ExpertClass) -> Result<f64> {
    if history.t == 0 {
        return Err(FplError::invalid("steps are numbered from 1"));
    }
    let t = history.t as f64;
    let eps = match *spec {
        ScheduleSpec::Static { epsilon } => epsilon,
        ScheduleSpec::InvSqrtT => 1.0 / t.sqrt(),
        ScheduleSpec::SqrtKOver2t { k_bound } => (k_bound / (2.0 * t)).sqrt(),
        ScheduleSpec::SelfConfident { k_bound, .. } => {
            let ell = history.expected_loss_prefix.ok_or_else(|| {
                FplError::InvalidState("self-confident rate needs the expected loss so far".into())
            })?;
            (k_bound / (2.0 * (ell + 1.0))).sqrt()
        }
        ScheduleSpec::SelfConfidentActual { k_bound } => {
            (k_bound / (2.0 * (history.actual_loss_prefix + 1.0))).sqrt()
        }
        ScheduleSpec::AdaptiveSminGeneral => {
            let sums = history.cumulative.sums();
            let denom = class
                .complexities()
                .iter()
                .zip(&sums)
                .map(|(k, s)| k + (k * k + 2.0 * s + 2.0).sqrt())
                .fold(f64::INFINITY, f64::min);
            1.0 / denom
        }
        ScheduleSpec::AdaptiveSminUniform { k_bound } => {
            let smin = history.cumulative.min_loss();
            let ratio = if smin > 0.0 { (k_bound / smin).sqrt() } else { f64::INFINITY };
            std::f64::consts::FRAC_1_SQRT_2 * ratio.min(1.0)
        }
    };
    if !(eps.is_finite() && eps > 0.0) {
        return Err(FplError::InvalidState(format!(
            "{} produced learning rate {eps} at step {}",
            spec.name(),
            history.t
        )));
    }
    Ok(eps)
}

/// Wraps a rule and fails fast if it ever increases.
#[derive(Debug, Clone)]
pub struct ScheduleTracker {
    spec: ScheduleSpec,
    previous: Option<f64>,
}

impl ScheduleTracker {
    pub fn new(spec: ScheduleSpec) -> Self {
        Self { spec, previous: None }
    }

    pub fn spec(&self) -> &ScheduleSpec {
        &self.spec
    }

    pub fn previous(&self) -> Option<f64> {
        self.previous
    }

    pub fn next(&mut self, history: &ScheduleHistory<'_>, class: &ExpertClass) -> Result<f64> {
        let eps = next_epsilon(&self.spec, history, class)?;
        if let Some(prev) = self.previous {
            if eps > prev * (1.0 + MONOTONE_TOLERANCE) {
                return Err(FplError::NonMonotoneSchedule {
                    step: history.t,
                    previous: prev,
                    current: eps,
                });
            }
        }
        self.previous = Some(eps);
        Ok(eps)
    }
}
