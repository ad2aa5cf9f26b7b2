//! Domain types shared by every predictor: the expert class with its
//! complexity penalties, per-step loss vectors, running loss sums and
//! the two decision spaces (single expert or a point on the simplex).

use serde::{Deserialize, Serialize};

use crate::error::{FplError, Result};

/// Tolerance on `sum_i exp(-k_i) <= 1` for classes used with the regret bounds.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// A finite (possibly truncated) class of experts, each carrying a complexity
/// penalty `k_i >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertClass {
    complexities: Vec<f64>,
    weight_sum: f64,
}

impl ExpertClass {
    /// Builds a class whose prior weights `exp(-k_i)` sum to at most one.
    pub fn new(complexities: Vec<f64>) -> Result<Self> {
        let class = Self::relaxed(complexities)?;
        if class.weight_sum > 1.0 + WEIGHT_SUM_TOLERANCE {
            return Err(FplError::invalid(format!(
                "sum of exp(-k) is {} > 1; use ExpertClass::relaxed for unnormalized classes",
                class.weight_sum
            )));
        }
        Ok(class)
    }

    /// Like [`ExpertClass::new`] but accepts any weight sum `u`.
    pub fn relaxed(complexities: Vec<f64>) -> Result<Self> {
        if complexities.is_empty() {
            return Err(FplError::invalid("expert class must contain at least one expert"));
        }
        if let Some((i, k)) = complexities
            .iter()
            .enumerate()
            .find(|(_, k)| !k.is_finite() || **k < 0.0)
        {
            return Err(FplError::invalid(format!(
                "complexity of expert {i} must be finite and non-negative, got {k}"
            )));
        }
        let weight_sum = complexities.iter().map(|k| (-k).exp()).sum();
        Ok(Self {
            complexities,
            weight_sum,
        })
    }

    /// `n` experts with `k_i = ln n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(FplError::invalid("expert class must contain at least one expert"));
        }
        Self::new(vec![(n as f64).ln(); n])
    }

    /// The first `n` experts of the countable class `k_i = 2 ln(i + 1)`
    /// (one-based `i`), i.e. prior weights `1 / (i + 1)^2`.
    pub fn inverse_square(n: usize) -> Result<Self> {
        Self::from_fn(n, |i| 2.0 * ((i + 2) as f64).ln())
    }

    /// Truncates a complexity generator (zero-based index) at `n` experts.
    pub fn from_fn(n: usize, generator: impl Fn(usize) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(FplError::invalid("expert class must contain at least one expert"));
        }
        Self::new((0..n).map(generator).collect())
    }

    pub fn len(&self) -> usize {
        self.complexities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.complexities.is_empty()
    }

    pub fn complexities(&self) -> &[f64] {
        &self.complexities
    }

    pub fn complexity(&self, i: usize) -> f64 {
        self.complexities[i]
    }

    /// `u = sum_i exp(-k_i)`.
    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    pub fn is_normalized(&self) -> bool {
        self.weight_sum <= 1.0 + WEIGHT_SUM_TOLERANCE
    }

    pub fn max_complexity(&self) -> f64 {
        self.complexities.iter().copied().fold(0.0, f64::max)
    }

    /// True when all complexities are equal.
    pub fn is_uniform(&self) -> bool {
        let k0 = self.complexities[0];
        self.complexities.iter().all(|k| (k - k0).abs() <= 1e-12)
    }
}

/// Losses `s_t` of all experts at one step, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(FplError::invalid(format!(
                "loss of expert {i} must lie in [0, 1], got {v}"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for LossVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Running loss sums `s_{1:t}` with compensated (Neumaier) accumulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeState {
    sums: Vec<f64>,
    compensation: Vec<f64>,
    step: u64,
    min_loss: f64,
}

impl CumulativeState {
    pub fn new(n: usize) -> Self {
        Self {
            sums: vec![0.0; n],
            compensation: vec![0.0; n],
            step: 0,
            min_loss: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    /// Number of loss vectors accumulated so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Compensated sums `s_{1:t}^i`.
    pub fn sums(&self) -> Vec<f64> {
        self.sums
            .iter()
            .zip(&self.compensation)
            .map(|(s, c)| s + c)
            .collect()
    }

    pub fn sum(&self, i: usize) -> f64 {
        self.sums[i] + self.compensation[i]
    }

    /// `min_i s_{1:t}^i`.
    pub fn min_loss(&self) -> f64 {
        self.min_loss
    }

    /// Lowest index attaining `min_loss`.
    pub fn best_expert(&self) -> usize {
        let mut best = 0;
        for i in 1..self.len() {
            if self.sum(i) < self.sum(best) {
                best = i;
            }
        }
        best
    }

    pub fn accumulate(&mut self, loss: &LossVector) -> Result<()> {
        if loss.len() != self.len() {
            return Err(FplError::invalid(format!(
                "loss vector has length {}, expected {}",
                loss.len(),
                self.len()
            )));
        }
        for ((sum, comp), &x) in self
            .sums
            .iter_mut()
            .zip(self.compensation.iter_mut())
            .zip(loss.values())
        {
            let t = *sum + x;
            if sum.abs() >= x.abs() {
                *comp += (*sum - t) + x;
            } else {
                *comp += (x - t) + *sum;
            }
            *sum = t;
        }
        self.step += 1;
        self.min_loss = (0..self.len())
            .map(|i| self.sum(i))
            .fold(f64::INFINITY, f64::min);
        Ok(())
    }
}

/// Non-negative perturbation `q`, one coordinate per expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationVector(Vec<f64>);

impl PerturbationVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(FplError::invalid("perturbations must be finite and non-negative"));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A decision in one of the two supported decision spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    /// Unit vector `e_i`.
    Expert(usize),
    /// Point on the probability simplex.
    Simplex(Vec<f64>),
}

impl Decision {
    pub fn simplex(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(FplError::invalid("simplex weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(FplError::invalid(format!(
                "simplex weights sum to {total}, expected 1"
            )));
        }
        Ok(Decision::Simplex(weights))
    }

    /// Linear loss `d . s_t`.
    pub fn loss(&self, loss: &LossVector) -> f64 {
        match self {
            Decision::Expert(i) => loss.get(*i),
            Decision::Simplex(w) => w.iter().zip(loss.values()).map(|(w, s)| w * s).sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_class_has_log_n_complexity() {
        let class = ExpertClass::uniform(4).unwrap();
        assert!(class.complexities().iter().all(|k| (k - 4f64.ln()).abs() < 1e-15));
        assert!((class.weight_sum() - 1.0).abs() < 1e-12);
        assert!(class.is_uniform());
    }

    #[test]
    fn inverse_square_class() {
        let class = ExpertClass::inverse_square(50).unwrap();
        // expert i = 3 (one-based) has k = 2 ln 4
        assert!((class.complexity(2) - 2.0 * 4f64.ln()).abs() < 1e-12);
        assert!(class.weight_sum() < std::f64::consts::PI.powi(2) / 6.0 - 1.0);
    }

    #[test]
    fn rejects_unnormalized_class_unless_relaxed() {
        assert!(ExpertClass::new(vec![0.0, 0.0]).is_err());
        let relaxed = ExpertClass::relaxed(vec![0.0; 10]).unwrap();
        assert!((relaxed.weight_sum() - 10.0).abs() < 1e-12);
        assert!(!relaxed.is_normalized());
        assert!(ExpertClass::relaxed(vec![]).is_err());
        assert!(ExpertClass::relaxed(vec![-0.1]).is_err());
        assert!(ExpertClass::uniform(0).is_err());
    }

    #[test]
    fn loss_vector_rejects_out_of_range() {
        assert!(LossVector::new(vec![0.0, 1.0, 0.5]).is_ok());
        assert!(LossVector::new(vec![1.0 + 1e-12]).is_err());
        assert!(LossVector::new(vec![-0.0001]).is_err());
        assert!(LossVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn zero_loss_only_advances_step() {
        let mut state = CumulativeState::new(3);
        state.accumulate(&LossVector::zeros(3)).unwrap();
        assert_eq!(state.step(), 1);
        assert_eq!(state.sums(), vec![0.0; 3]);
    }

    #[test]
    fn accumulates_three_steps() {
        let mut state = CumulativeState::new(2);
        for v in [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]] {
            state.accumulate(&LossVector::new(v.to_vec()).unwrap()).unwrap();
        }
        assert_eq!(state.sums(), vec![2.0, 1.0]);
        assert_eq!(state.min_loss(), 1.0);
        assert_eq!(state.best_expert(), 1);
        assert!(state.accumulate(&LossVector::zeros(3)).is_err());
    }

    #[test]
    fn simplex_decision_loss() {
        let d = Decision::simplex(vec![0.75, 0.25]).unwrap();
        let s = LossVector::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(d.loss(&s), 0.25);
        assert!(Decision::simplex(vec![0.5, 0.4]).is_err());
    }
}
