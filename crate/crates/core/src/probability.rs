//! Selection probabilities `w_t^i = P[I_t = i]` of the perturbed leader and
//! the expected step losses built from them.
//!
//! For a penalized state `s = s_{<t} + k / eps` and i.i.d. `q ~ Exp(1)`, the
//! probability that expert `i` minimizes `s^i - q^i / eps` is
//!
//! ```text
//! P[I = i] = sum_{M : i in M} (-1)^{|M|-1} / |M| * exp(-eps * sum_{j in M} (s^j - s_min))
//!          = exp(-eps d_i) * int_0^inf exp(-y) prod_{j != i} (1 - exp(-eps d_j - y)) dy
//! ```
//!
//! with `d_j = s^j - s_min`. The subset sum is evaluated exactly for small
//! classes, the integral by adaptive Simpson, and both can be checked against
//! plain sampling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{ExpertClass, LossVector};
use crate::error::{FplError, Result};
use crate::perturbation::{exponential_from_uniform, mix_seed, stream_rng};
use rand::Rng;

/// Largest class evaluated by subset enumeration (2^20 subsets).
pub const INCLUSION_EXCLUSION_MAX_EXPERTS: usize = 20;

/// Integration range in units of `1 / eps`: `exp(-y) < 1e-14` beyond it.
const QUADRATURE_CUTOFF: f64 = 14.0 * std::f64::consts::LN_10;
const QUADRATURE_REL_TOL: f64 = 1e-8;
const QUADRATURE_MAX_DEPTH: u32 = 40;

/// Fixed number of independent sampling streams; the sample budget is split
/// across them so results do not depend on the worker count.
const MC_STREAMS: u64 = 64;
const MC_TAG: u64 = 0x005e_1ec7;
const LEMMA_TAG: u64 = 0x1e_33a1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightMethod {
    /// Subset enumeration for `n <= 20`, quadrature above.
    Auto,
    InclusionExclusion,
    Quadrature,
    MonteCarlo { samples: u64, seed: u64 },
}

impl WeightMethod {
    pub fn is_exact(&self, n: usize) -> bool {
        match self {
            WeightMethod::Auto | WeightMethod::Quadrature => true,
            WeightMethod::InclusionExclusion => n <= INCLUSION_EXCLUSION_MAX_EXPERTS,
            WeightMethod::MonteCarlo { .. } => false,
        }
    }
}

/// Which estimator produced a [`WeightVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    InclusionExclusion,
    Quadrature,
    MonteCarlo { samples: u64 },
    /// A deterministic decision (Follow the Leader).
    PointMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    source: WeightSource,
    error_estimate: f64,
}

impl WeightVector {
    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        Self {
            weights,
            source: WeightSource::PointMass,
            error_estimate: 0.0,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn source(&self) -> WeightSource {
        self.source
    }

    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Normalization tolerance of the producing method.
    pub fn tolerance(&self) -> f64 {
        match self.source {
            WeightSource::InclusionExclusion | WeightSource::PointMass => 1e-9,
            WeightSource::Quadrature => 1e-6,
            WeightSource::MonteCarlo { samples } => 3.0 / (samples as f64).sqrt(),
        }
    }

    /// Lowest index of the largest weight.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > self.weights[best] {
                best = i;
            }
        }
        best
    }

    pub fn total_variation(&self, other: &WeightVector) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

fn validate_state(penalized: &[f64], epsilon: f64) -> Result<()> {
    if penalized.is_empty() {
        return Err(FplError::invalid("penalized state is empty"));
    }
    if penalized.iter().any(|s| !s.is_finite()) {
        return Err(FplError::invalid("penalized state must be finite"));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(FplError::invalid(format!(
            "learning rate must be positive and finite, got {epsilon}"
        )));
    }
    Ok(())
}

/// Scaled gaps `eps * (s^j - s_min)`.
fn scaled_gaps(penalized: &[f64], epsilon: f64) -> Vec<f64> {
    let min = penalized.iter().copied().fold(f64::INFINITY, f64::min);
    penalized.iter().map(|s| epsilon * (s - min)).collect()
}

pub fn selection_probabilities(penalized: &[f64], epsilon: f64, method: WeightMethod) -> Result<WeightVector> {
    validate_state(penalized, epsilon)?;
    match method {
        WeightMethod::Auto if penalized.len() <= INCLUSION_EXCLUSION_MAX_EXPERTS => {
            inclusion_exclusion(penalized, epsilon)
        }
        WeightMethod::Auto | WeightMethod::Quadrature => quadrature(penalized, epsilon),
        WeightMethod::InclusionExclusion => inclusion_exclusion(penalized, epsilon),
        WeightMethod::MonteCarlo { samples, seed } => {
            selection_probabilities_mc(penalized, epsilon, samples, seed)
        }
    }
}

/// Neumaier running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Exact probabilities by the alternating subset sum.
pub fn inclusion_exclusion(penalized: &[f64], epsilon: f64) -> Result<WeightVector> {
    validate_state(penalized, epsilon)?;
    let n = penalized.len();
    if n > INCLUSION_EXCLUSION_MAX_EXPERTS {
        return Err(FplError::Unsupported(format!(
            "inclusion-exclusion handles at most {INCLUSION_EXCLUSION_MAX_EXPERTS} experts, got {n}; \
             use quadrature or Monte Carlo"
        )));
    }
    let gaps = scaled_gaps(penalized, epsilon);
    let subsets = 1usize << n;
    let mut exponent = vec![0.0f64; subsets];
    for mask in 1..subsets {
        let low = mask.trailing_zeros() as usize;
        exponent[mask] = exponent[mask & (mask - 1)] + gaps[low];
    }
    // smallest terms first
    let mut order: Vec<usize> = (1..subsets).collect();
    order.sort_by(|a, b| exponent[*b].total_cmp(&exponent[*a]));

    let mut acc = vec![CompensatedSum::default(); n];
    for mask in order {
        let size = mask.count_ones();
        let magnitude = (-exponent[mask]).exp() / f64::from(size);
        let term = if size % 2 == 1 { magnitude } else { -magnitude };
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            acc[i].add(term);
            bits &= bits - 1;
        }
    }
    let weights: Vec<f64> = acc.into_iter().map(|a| a.value().clamp(0.0, 1.0)).collect();
    let error_estimate = (weights.iter().sum::<f64>() - 1.0).abs();
    Ok(WeightVector {
        weights,
        source: WeightSource::InclusionExclusion,
        error_estimate,
    })
}

/// Probabilities from the one-dimensional integral representation.
pub fn quadrature(penalized: &[f64], epsilon: f64) -> Result<WeightVector> {
    validate_state(penalized, epsilon)?;
    let gaps = scaled_gaps(penalized, epsilon);
    let factors: Vec<f64> = gaps.iter().map(|d| (-d).exp()).collect();
    let weights: Vec<f64> = (0..gaps.len())
        .map(|i| {
            let integrand = |y: f64| {
                let e = (-y).exp();
                factors
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .fold(e, |acc, (_, a)| acc * (1.0 - a * e))
            };
            (factors[i] * adaptive_simpson(integrand, 0.0, QUADRATURE_CUTOFF)).clamp(0.0, 1.0)
        })
        .collect();
    let error_estimate = (weights.iter().sum::<f64>() - 1.0).abs();
    Ok(WeightVector {
        weights,
        source: WeightSource::Quadrature,
        error_estimate,
    })
}

fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }

    // Seed the recursion on a fixed grid so narrow features near y = 0 are seen.
    const PANELS: usize = 32;
    let h = (b - a) / PANELS as f64;
    let coarse: Vec<(f64, f64, f64, f64, f64)> = (0..PANELS)
        .map(|p| {
            let (x0, x1) = (a + p as f64 * h, a + (p + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            (x0, x1, f0, fm, f1)
        })
        .collect();
    let estimate: f64 = coarse
        .iter()
        .map(|(x0, x1, f0, fm, f1)| simpson(*f0, *fm, *f1, x1 - x0))
        .sum();
    let tol = (QUADRATURE_REL_TOL * estimate.abs()).max(1e-300) / PANELS as f64;
    coarse
        .into_iter()
        .map(|(x0, x1, f0, fm, f1)| {
            let whole = simpson(f0, fm, f1, x1 - x0);
            refine(&f, x0, x1, f0, fm, f1, whole, tol, QUADRATURE_MAX_DEPTH)
        })
        .sum()
}

/// Empirical selection frequencies over fresh exponential draws.
pub fn selection_probabilities_mc(penalized: &[f64], epsilon: f64, samples: u64, seed: u64) -> Result<WeightVector> {
    validate_state(penalized, epsilon)?;
    if samples == 0 {
        return Err(FplError::invalid("Monte Carlo needs at least one sample"));
    }
    let n = penalized.len();
    let key = mix_seed(seed, MC_TAG);
    let counts: Vec<Vec<u64>> = (0..MC_STREAMS)
        .into_par_iter()
        .map(|stream| {
            let budget = samples / MC_STREAMS + u64::from(stream < samples % MC_STREAMS);
            let mut rng = stream_rng(key, stream);
            let mut counts = vec![0u64; n];
            for _ in 0..budget {
                let mut best = 0;
                let mut best_value = f64::INFINITY;
                for (i, s) in penalized.iter().enumerate() {
                    let v = s - exponential_from_uniform(rng.gen::<f64>()) / epsilon;
                    if v < best_value {
                        best = i;
                        best_value = v;
                    }
                }
                counts[best] += 1;
            }
            counts
        })
        .collect();
    let mut totals = vec![0u64; n];
    for c in counts {
        for (t, x) in totals.iter_mut().zip(c) {
            *t += x;
        }
    }
    Ok(WeightVector {
        weights: totals.into_iter().map(|c| c as f64 / samples as f64).collect(),
        source: WeightSource::MonteCarlo { samples },
        error_estimate: 3.0 / (samples as f64).sqrt(),
    })
}

/// `w . s_t`: the expected step loss `l_t` (or `r_t` for the infeasible leader).
pub fn expected_step_loss(weights: &WeightVector, loss: &LossVector) -> Result<f64> {
    if weights.len() != loss.len() {
        return Err(FplError::invalid(format!(
            "weight vector has length {}, loss vector {}",
            weights.len(),
            loss.len()
        )));
    }
    Ok(weights.weights().iter().zip(loss.values()).map(|(w, s)| w * s).sum())
}

/// Variance of the realized step loss `s_t^{I_t}` under `w`.
pub fn step_loss_variance(weights: &WeightVector, loss: &LossVector) -> f64 {
    let (m1, m2) = weights
        .weights()
        .iter()
        .zip(loss.values())
        .fold((0.0, 0.0), |(m1, m2), (w, s)| (m1 + w * s, m2 + w * s * s));
    (m2 - m1 * m1).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Monte-Carlo estimate of `E[max_i (q^i - k^i)]` for i.i.d. `q ~ Exp(1)`.
pub fn shifted_exp_max_estimate(class: &ExpertClass, samples: u64, seed: u64) -> Result<MeanEstimate> {
    if samples < 1000 {
        return Err(FplError::invalid("shifted maximum estimate needs at least 1000 samples"));
    }
    let k = class.complexities();
    let key = mix_seed(seed, LEMMA_TAG);
    let partials: Vec<(f64, f64)> = (0..MC_STREAMS)
        .into_par_iter()
        .map(|stream| {
            let budget = samples / MC_STREAMS + u64::from(stream < samples % MC_STREAMS);
            let mut rng = stream_rng(key, stream);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..budget {
                let m = k
                    .iter()
                    .map(|ki| exponential_from_uniform(rng.gen::<f64>()) - ki)
                    .fold(f64::NEG_INFINITY, f64::max);
                sum += m;
                sum_sq += m * m;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partials
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(MeanEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop, prop_assert, proptest, ProptestConfig, Strategy};

    /// P[trailing expert] for two experts: P[q2 - q1 >= eps * gap] = exp(-eps gap) / 2.
    fn two_expert_oracle(gap: f64, eps: f64) -> f64 {
        0.5 * (-eps * gap).exp()
    }

    #[test]
    fn symmetric_pair_is_half_half() {
        for eps in [0.01, 1.0, 7.5] {
            let w = inclusion_exclusion(&[3.0, 3.0], eps).unwrap();
            assert!((w.weights()[0] - 0.5).abs() < 1e-15);
            assert!((w.weights()[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn gap_ln_two_gives_three_quarters() {
        let w = inclusion_exclusion(&[0.0, 2f64.ln()], 1.0).unwrap();
        assert!((w.weights()[0] - 0.75).abs() < 1e-15);
        assert!((w.weights()[1] - 0.25).abs() < 1e-15);
        assert!((w.weights()[1] - two_expert_oracle(2f64.ln(), 1.0)).abs() < 1e-15);
        let q = quadrature(&[0.0, 2f64.ln()], 1.0).unwrap();
        assert!((q.weights()[1] - 0.25).abs() < 1e-8);
    }

    #[test]
    fn two_expert_closed_form_over_grid() {
        for gap in [0.0, 0.1, 0.5, 2.0, 10.0] {
            for eps in [0.05, 0.5, 2.0] {
                let w = inclusion_exclusion(&[1.0 + gap, 1.0], eps).unwrap();
                assert!((w.weights()[0] - two_expert_oracle(gap, eps)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_expert_is_certain() {
        assert_eq!(inclusion_exclusion(&[4.0], 0.3).unwrap().weights(), &[1.0]);
        assert_eq!(selection_probabilities_mc(&[4.0], 0.3, 17, 1).unwrap().weights(), &[1.0]);
        assert!((quadrature(&[4.0], 0.3).unwrap().weights()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inclusion_exclusion_rejects_large_classes() {
        let state = vec![0.0; 21];
        assert!(matches!(
            inclusion_exclusion(&state, 1.0),
            Err(FplError::Unsupported(_))
        ));
        // Auto falls back to quadrature
        let w = selection_probabilities(&state, 1.0, WeightMethod::Auto).unwrap();
        assert_eq!(w.source(), WeightSource::Quadrature);
        assert!(w.weights().iter().all(|x| (x - 1.0 / 21.0).abs() < 1e-7));
    }

    #[test]
    fn rejects_invalid_states() {
        assert!(inclusion_exclusion(&[], 1.0).is_err());
        assert!(inclusion_exclusion(&[0.0, f64::NAN], 1.0).is_err());
        assert!(quadrature(&[0.0, 1.0], 0.0).is_err());
        assert!(selection_probabilities_mc(&[0.0, 1.0], 1.0, 0, 1).is_err());
    }

    #[test]
    fn twenty_experts_normalize() {
        let state: Vec<f64> = (0..20).map(|i| 0.05 * i as f64).collect();
        let w = inclusion_exclusion(&state, 1.0).unwrap();
        assert!((w.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let q = quadrature(&state, 1.0).unwrap();
        assert!(w.total_variation(&q) < 1e-6);
    }

    #[test]
    fn monte_carlo_is_deterministic_per_seed() {
        let state = [0.2, 0.0, 0.7];
        let a = selection_probabilities_mc(&state, 1.3, 10_000, 5).unwrap();
        let b = selection_probabilities_mc(&state, 1.3, 10_000, 5).unwrap();
        assert_eq!(a, b);
        let exact = inclusion_exclusion(&state, 1.3).unwrap();
        assert!(a.total_variation(&exact) < 3.0 / 100.0);
    }

    #[test]
    fn expected_step_loss_examples() {
        let half = inclusion_exclusion(&[0.0, 0.0], 1.0).unwrap();
        let s = LossVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(expected_step_loss(&half, &s).unwrap(), 0.5);
        let w = inclusion_exclusion(&[0.0, 2f64.ln()], 1.0).unwrap();
        let s = LossVector::new(vec![0.0, 1.0]).unwrap();
        assert!((expected_step_loss(&w, &s).unwrap() - 0.25).abs() < 1e-15);
        let ones = LossVector::new(vec![1.0; 2]).unwrap();
        assert!((expected_step_loss(&w, &ones).unwrap() - 1.0).abs() < 1e-12);
        assert!(expected_step_loss(&w, &LossVector::zeros(3)).is_err());
    }

    #[test]
    fn shifted_max_single_exponential() {
        let class = ExpertClass::relaxed(vec![0.0]).unwrap();
        let est = shifted_exp_max_estimate(&class, 200_000, 3).unwrap();
        assert!((est.mean - 1.0).abs() <= 3.0 * est.std_error);
        assert!(shifted_exp_max_estimate(&class, 999, 3).is_err());
    }

    fn state_strategy(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..5.0, 2..=max_n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn normalization_and_agreement(state in state_strategy(6), eps in 0.05f64..3.0) {
            let ie = inclusion_exclusion(&state, eps).unwrap();
            let qd = quadrature(&state, eps).unwrap();
            prop_assert!((ie.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!((qd.weights().iter().sum::<f64>() - 1.0).abs() < 1e-6);
            for (a, b) in ie.weights().iter().zip(qd.weights()) {
                prop_assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }

        #[test]
        fn shift_invariance(state in state_strategy(6), eps in 0.05f64..3.0, c in -50.0f64..50.0) {
            let shifted: Vec<f64> = state.iter().map(|s| s + c).collect();
            let a = inclusion_exclusion(&state, eps).unwrap();
            let b = inclusion_exclusion(&shifted, eps).unwrap();
            for (x, y) in a.weights().iter().zip(b.weights()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn raising_one_state_moves_mass_away(
            state in state_strategy(6),
            eps in 0.1f64..2.0,
            bump in 0.05f64..1.0,
            which in 0usize..6,
        ) {
            let i = which % state.len();
            let mut raised = state.clone();
            raised[i] += bump;
            let a = inclusion_exclusion(&state, eps).unwrap();
            let b = inclusion_exclusion(&raised, eps).unwrap();
            prop_assert!(b.weights()[i] < a.weights()[i]);
            for j in (0..state.len()).filter(|j| *j != i) {
                prop_assert!(b.weights()[j] >= a.weights()[j] - 1e-12);
            }
        }

        #[test]
        fn feasible_within_exp_eps_of_infeasible(
            state in state_strategy(6),
            eps in 0.01f64..1.0,
            seed in any::<u64>(),
        ) {
            let n = state.len();
            let mut rng = stream_rng(seed, 0);
            let step: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let next: Vec<f64> = state.iter().zip(&step).map(|(s, x)| s + x).collect();
            let loss = LossVector::new(step).unwrap();
            let ell = expected_step_loss(&inclusion_exclusion(&state, eps).unwrap(), &loss).unwrap();
            let r = expected_step_loss(&inclusion_exclusion(&next, eps).unwrap(), &loss).unwrap();
            prop_assert!(ell <= eps.exp() * r + 1e-9);
            prop_assert!(ell <= (1.0 + eps + eps * eps) * r + 1e-9);
        }
    }
}
