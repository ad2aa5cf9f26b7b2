//! The leader-selection primitive `M`: the expert minimizing the perturbed,
//! complexity-penalized loss.

use crate::domain::{CumulativeState, ExpertClass, PerturbationVector};
use crate::error::{FplError, Result};

/// `argmin_i { s_i + (k_i - q_i) / epsilon }`, ties to the smallest index.
///
/// `epsilon = +inf` drops both penalty and perturbation (Follow the Leader on
/// `state` alone).
pub fn select_leader(state: &[f64], complexities: &[f64], q: &[f64], epsilon: f64) -> Result<usize> {
    let n = state.len();
    if n == 0 {
        return Err(FplError::invalid("cannot select a leader from an empty class"));
    }
    if complexities.len() != n || q.len() != n {
        return Err(FplError::invalid(format!(
            "length mismatch: state {n}, complexities {}, perturbation {}",
            complexities.len(),
            q.len()
        )));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(FplError::invalid(format!("learning rate must be positive, got {epsilon}")));
    }
    if state.iter().chain(complexities).chain(q).any(|x| x.is_nan()) {
        return Err(FplError::invalid("NaN in leader selection input"));
    }
    let inv = if epsilon.is_infinite() { 0.0 } else { 1.0 / epsilon };
    let mut best = 0;
    let mut best_value = f64::INFINITY;
    for i in 0..n {
        let v = state[i] + (complexities[i] - q[i]) * inv;
        if v < best_value {
            best = i;
            best_value = v;
        }
    }
    Ok(best)
}

/// [`select_leader`] on a cumulative state with an expert class.
pub fn select_leader_for(
    state: &CumulativeState,
    class: &ExpertClass,
    q: &PerturbationVector,
    epsilon: f64,
) -> Result<usize> {
    select_leader(&state.sums(), class.complexities(), q.values(), epsilon)
}

/// `s + k / epsilon`, the deterministic part of the perturbed objective.
pub fn penalized_state(state: &[f64], complexities: &[f64], epsilon: f64) -> Vec<f64> {
    let inv = if epsilon.is_infinite() { 0.0 } else { 1.0 / epsilon };
    state.iter().zip(complexities).map(|(s, k)| s + k * inv).collect()
}
