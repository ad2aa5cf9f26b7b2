//! Deterministic prediction on the simplex: play `w_t` itself instead of a
//! sampled expert.

use serde::{Deserialize, Serialize};

use crate::domain::{Decision, LossVector};
use crate::error::{FplError, Result};
use crate::probability::{expected_step_loss, WeightMethod, WeightVector};

use super::Predictor;

/// Expert predictions `y_t^i` and the observation `x_t`, all in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteLossRound {
    predictions: Vec<f64>,
    observation: f64,
}

impl AbsoluteLossRound {
    pub fn new(predictions: Vec<f64>, observation: f64) -> Result<Self> {
        if predictions.iter().chain(std::iter::once(&observation)).any(|v| !(0.0..=1.0).contains(v)) {
            return Err(FplError::invalid("predictions and observation must lie in [0, 1]"));
        }
        Ok(Self {
            predictions,
            observation,
        })
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }

    pub fn observation(&self) -> f64 {
        self.observation
    }

    /// `s_t^i = |x_t - y_t^i|`.
    pub fn losses(&self) -> LossVector {
        LossVector::new(
            self.predictions
                .iter()
                .map(|y| (self.observation - y).abs())
                .collect(),
        )
        .expect("absolute differences of [0,1] values lie in [0,1]")
    }
}

/// `w_t` of the predictor at step `t`, as a simplex decision.
pub fn deterministic_master_decide(predictor: &mut Predictor, t: u64, method: WeightMethod) -> Result<WeightVector> {
    let w = predictor.weights(t, method)?;
    Decision::simplex(w.weights().to_vec()).map_err(|_| {
        FplError::InvalidState(format!(
            "selection probabilities at step {t} do not sum to one within 1e-9"
        ))
    })?;
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterLoss {
    /// `w_t . y_t`.
    pub prediction: f64,
    /// `|x_t - w_t . y_t|`.
    pub loss: f64,
    /// `l_t = sum_i w_t^i |x_t - y_t^i|`.
    pub expected_expert_loss: f64,
}

/// Loss of the deterministic master; fails if it exceeds `l_t` (convexity).
pub fn master_absolute_loss(weights: &WeightVector, round: &AbsoluteLossRound) -> Result<MasterLoss> {
    if weights.len() != round.predictions.len() {
        return Err(FplError::invalid("weights and predictions differ in length"));
    }
    let prediction: f64 = weights
        .weights()
        .iter()
        .zip(&round.predictions)
        .map(|(w, y)| w * y)
        .sum();
    let loss = (round.observation - prediction).abs();
    let ell = expected_step_loss(weights, &round.losses())?;
    if loss > ell + 1e-12 {
        return Err(FplError::InvalidState(format!(
            "master loss {loss} exceeds expected expert loss {ell}"
        )));
    }
    Ok(MasterLoss {
        prediction,
        loss,
        expected_expert_loss: ell,
    })
}
