//! Closed-form regret bounds, high-probability envelopes, and verdicts that
//! compare them with a finished run.

use serde::{Deserialize, Serialize};

use crate::error::{FplError, Result};
use crate::harness::{Algorithm, Measurement, RunRecord};
use crate::perturbation::PerturbationMode;
use crate::schedules::ScheduleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    StaticI,
    StaticIi,
    StaticIii,
    DynamicI,
    DynamicIi,
    SelfconfI,
    SelfconfIi,
    AdaptiveI,
    AdaptiveIi,
    HierarchyA,
    IfplCorollary,
    LowerUniform,
}

impl TheoremId {
    pub const ALL: [TheoremId; 12] = [
        TheoremId::StaticI,
        TheoremId::StaticIi,
        TheoremId::StaticIii,
        TheoremId::DynamicI,
        TheoremId::DynamicIi,
        TheoremId::SelfconfI,
        TheoremId::SelfconfIi,
        TheoremId::AdaptiveI,
        TheoremId::AdaptiveIi,
        TheoremId::HierarchyA,
        TheoremId::IfplCorollary,
        TheoremId::LowerUniform,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TheoremId::StaticI => "static_i",
            TheoremId::StaticIi => "static_ii",
            TheoremId::StaticIii => "static_iii",
            TheoremId::DynamicI => "dynamic_i",
            TheoremId::DynamicIi => "dynamic_ii",
            TheoremId::SelfconfI => "selfconf_i",
            TheoremId::SelfconfIi => "selfconf_ii",
            TheoremId::AdaptiveI => "adaptive_i",
            TheoremId::AdaptiveIi => "adaptive_ii",
            TheoremId::HierarchyA => "hierarchy_a",
            TheoremId::IfplCorollary => "ifpl_corollary",
            TheoremId::LowerUniform => "lower_uniform",
        }
    }

    pub fn is_lower_bound(&self) -> bool {
        matches!(self, TheoremId::LowerUniform)
    }
}

impl std::fmt::Display for TheoremId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TheoremId {
    type Err = FplError;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| FplError::invalid(format!("unknown theorem `{s}`")))
    }
}

/// Scalars a bound may need. Unused fields are ignored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// `L`, an upper bound on the expected loss (static rules).
    pub loss_bound: Option<f64>,
    /// `K >= max_i k_i`.
    pub k_bound: Option<f64>,
    /// `T`.
    pub horizon: Option<f64>,
    /// `k_i` of the compared expert.
    pub complexity: Option<f64>,
    /// `s_{1:T}^i` of the compared expert.
    pub expert_loss: Option<f64>,
    /// `s_{1:T}^min`.
    pub min_loss: Option<f64>,
    /// `eps_T`.
    pub final_epsilon: Option<f64>,
    /// Number of experts.
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRequest {
    pub theorem: TheoremId,
    #[serde(default)]
    pub params: BoundParams,
}

impl BoundRequest {
    pub fn new(theorem: TheoremId) -> Self {
        Self {
            theorem,
            params: BoundParams::default(),
        }
    }

    pub fn with_params(theorem: TheoremId, params: BoundParams) -> Self {
        Self { theorem, params }
    }
}

fn need<T>(value: Option<T>, name: &str, theorem: TheoremId) -> Result<T> {
    value.ok_or_else(|| FplError::invalid(format!("{theorem} needs parameter `{name}`")))
}

/// Whether `adaptive_ii`'s logarithm is clamped for this best loss.
pub fn adaptive_log_clamped(min_loss: f64) -> bool {
    min_loss <= 1.0
}

/// Right-hand side of the requested bound (a lower bound for `lower_uniform`).
pub fn bound_value(request: &BoundRequest) -> Result<f64> {
    let id = request.theorem;
    let p = &request.params;
    let s = || need(p.expert_loss, "expert_loss", id);
    let k = || need(p.complexity, "complexity", id);
    let big_k = || need(p.k_bound, "k_bound", id);
    let l = || need(p.loss_bound, "loss_bound", id);
    let t = || need(p.horizon, "horizon", id);
    let value = match id {
        TheoremId::StaticI => s()? + l()?.sqrt() * (k()? + 1.0),
        TheoremId::StaticIi => s()? + 2.0 * (l()? * big_k()?).sqrt(),
        TheoremId::StaticIii => {
            let k = k()?;
            s()? + 2.0 * (l()? * k).sqrt() + 3.0 * k
        }
        TheoremId::DynamicI => s()? + t()?.sqrt() * (k()? + 2.0),
        TheoremId::DynamicIi => s()? + 2.0 * (2.0 * t()? * big_k()?).sqrt(),
        TheoremId::SelfconfI => {
            let (s, k) = (s()?, k()?);
            s + (k + 1.0) * (2.0 * (s + 1.0)).sqrt() + 2.0 * (k + 1.0).powi(2)
        }
        TheoremId::SelfconfIi => {
            let (s, big_k) = (s()?, big_k()?);
            s + 2.0 * (2.0 * (s + 1.0) * big_k).sqrt() + 8.0 * big_k
        }
        TheoremId::AdaptiveI => {
            let (s, k) = (s()?, k()?);
            s + (k + 2.0) * (2.0 * s).sqrt() + 2.0 * (k + 2.0).powi(2)
        }
        TheoremId::AdaptiveIi => {
            let (smin, big_k) = (need(p.min_loss, "min_loss", id)?, big_k()?);
            smin + 2.0 * (2.0 * big_k * smin).sqrt() + 5.0 * big_k * smin.max(1.0).ln() + 3.0 * big_k + 6.0
        }
        TheoremId::HierarchyA => {
            let k = k()?;
            s()? + t()?.sqrt() * (2.0 * (2.0 * (k + 1.0)).sqrt() + 0.5 + 2.0 * (k + 1.0).ln() + 2.0)
        }
        TheoremId::IfplCorollary => s()? + k()? / need(p.final_epsilon, "final_epsilon", id)?,
        TheoremId::LowerUniform => {
            let n = need(p.n, "n", id)?;
            need(p.min_loss, "min_loss", id)? - (n as f64).ln() / need(p.final_epsilon, "final_epsilon", id)?
        }
    };
    if !value.is_finite() {
        return Err(FplError::invalid(format!("{id} evaluated to {value}")));
    }
    Ok(value)
}

/// Expectation of the general lower bound for uniform complexities:
/// `s_min - (H_n - 1) / eps_T`, where `H_n = E[max_i q_i]`. Reported only.
pub fn lower_general_expected(min_loss: f64, n: usize, final_epsilon: f64) -> f64 {
    let harmonic: f64 = (1..=n).map(|j| 1.0 / j as f64).sum();
    min_loss - (harmonic - 1.0) / final_epsilon
}

/// The second hierarchy bound has no explicit constants; it is described, not checked.
pub const HIERARCHY_B_NOTE: &str = "hierarchy_b: l~_{1:T} <= s_i + 2 sqrt(2 s_i k_i)(1 + O(ln k_i / sqrt k_i)) + O(k_i) \
     (self-confident meta rate) or O(k_i ln s_i) (best-loss meta rate); constants not explicit, no verdict";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// `c * l_{1:T}`; exceeded with probability at most `markov_failure`.
    pub markov_threshold: f64,
    pub markov_failure: f64,
    /// `sqrt(3 c l_{1:T})`; `|u - l|` exceeds it with probability at most `chernoff_failure`.
    pub chernoff_halfwidth: f64,
    pub chernoff_failure: f64,
    /// `l_{1:T} >= 3c`.
    pub chernoff_valid: bool,
}

/// Markov and Chernoff–Hoeffding envelopes around the expected total loss.
/// The Chernoff part assumes per-step randomization.
pub fn high_probability_envelope(expected: f64, c: f64) -> Result<Envelope> {
    if !(c.is_finite() && c > 0.0) {
        return Err(FplError::invalid(format!("confidence parameter must be positive, got {c}")));
    }
    if !(expected.is_finite() && expected >= 0.0) {
        return Err(FplError::invalid("expected loss must be non-negative"));
    }
    Ok(Envelope {
        markov_threshold: c * expected,
        markov_failure: (1.0 / c).min(1.0),
        chernoff_halfwidth: (3.0 * c * expected).sqrt(),
        chernoff_failure: 2.0 * (-c).exp(),
        chernoff_valid: expected >= 3.0 * c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Holds,
    Violated,
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundVerdict {
    pub theorem: TheoremId,
    pub status: VerdictStatus,
    pub bound_value: Option<f64>,
    pub measured: Option<f64>,
    /// `bound - measured` for upper bounds, `measured - bound` for the lower bound.
    pub slack: Option<f64>,
    /// Statistical cushion applied when `measured` is an estimate.
    pub margin: f64,
    /// Expert attaining the tightest bound.
    pub expert: Option<usize>,
    pub note: Option<String>,
}

impl BoundVerdict {
    fn inapplicable(theorem: TheoremId, note: impl Into<String>) -> Self {
        Self {
            theorem,
            status: VerdictStatus::Inapplicable,
            bound_value: None,
            measured: None,
            slack: None,
            margin: 0.0,
            expert: None,
            note: Some(note.into()),
        }
    }

    fn judged(theorem: TheoremId, bound: f64, measured: f64, margin: f64, expert: Option<usize>) -> Self {
        let slack = if theorem.is_lower_bound() {
            measured - bound
        } else {
            bound - measured
        };
        Self {
            theorem,
            status: if slack + margin >= 0.0 {
                VerdictStatus::Holds
            } else {
                VerdictStatus::Violated
            },
            bound_value: Some(bound),
            measured: Some(measured),
            slack: Some(slack),
            margin,
            expert,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn holds(&self) -> bool {
        self.status == VerdictStatus::Holds
    }
}

/// Smallest bound over all experts (the bound holds for every expert).
fn tightest(
    id: TheoremId,
    run: &RunRecord,
    base: BoundParams,
    eligible: impl Fn(usize) -> bool,
) -> Result<Option<(f64, usize)>> {
    let mut best: Option<(f64, usize)> = None;
    for i in (0..run.n()).filter(|i| eligible(*i)) {
        let params = BoundParams {
            complexity: Some(run.complexities[i]),
            expert_loss: Some(run.expert_losses[i]),
            ..base
        };
        let v = bound_value(&BoundRequest::with_params(id, params))?;
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, i));
        }
    }
    Ok(best)
}

/// Expected loss of the run and the margin to use with it.
fn measured_expected(run: &RunRecord) -> Option<(f64, f64)> {
    let ell = run.expected_loss()?;
    let margin = match run.measurement {
        // Each step's estimate has variance at most 1 / (4 samples).
        Measurement::MonteCarlo { samples } => 3.0 * (run.horizon() as f64).sqrt() / (2.0 * (samples as f64).sqrt()),
        _ => 0.0,
    };
    Some((ell, margin))
}

fn max_complexity(run: &RunRecord) -> f64 {
    run.complexities.iter().copied().fold(0.0, f64::max)
}

/// One verdict per request.
pub fn verify(run: &RunRecord, requests: &[BoundRequest]) -> Result<Vec<BoundVerdict>> {
    requests.iter().map(|r| verify_one(run, r)).collect()
}

fn verify_one(run: &RunRecord, request: &BoundRequest) -> Result<BoundVerdict> {
    let id = request.theorem;
    let overrides = request.params;
    if run.steps.is_empty() {
        return Ok(BoundVerdict::inapplicable(id, "empty run"));
    }
    let horizon = run.horizon() as f64;
    let final_eps = run.final_epsilon().expect("non-empty run");
    let kmax = max_complexity(run);

    if id == TheoremId::HierarchyA {
        if run.algorithm != Algorithm::Hierarchy {
            return Ok(BoundVerdict::inapplicable(id, "run is not hierarchical"));
        }
        let base = BoundParams {
            horizon: Some(horizon),
            ..overrides
        };
        let (bound, expert) = tightest(id, run, base, |_| true)?.expect("non-empty class");
        // Single realization: each step contributes variance at most 1/4
        // when steps are independent, and the total at most T^2/4 otherwise.
        let sd = match run.perturbation.mode {
            PerturbationMode::PerStep => horizon.sqrt() / 2.0,
            PerturbationMode::InitialOnly => horizon / 2.0,
        };
        return Ok(
            BoundVerdict::judged(id, bound, run.actual_loss(), 3.0 * sd, Some(expert))
                .with_note("measured is a single realized loss; margin is 3 standard deviations"),
        );
    }

    if !run.algorithm.is_perturbed_leader() {
        return Ok(BoundVerdict::inapplicable(
            id,
            format!("{} is not a perturbed leader", run.algorithm.name()),
        ));
    }

    if id == TheoremId::IfplCorollary {
        let Some(r) = run.infeasible_loss() else {
            return Ok(BoundVerdict::inapplicable(id, "run has no paired infeasible losses"));
        };
        let weight_sum: f64 = run.complexities.iter().map(|k| (-k).exp()).sum();
        if weight_sum > 1.0 + crate::domain::WEIGHT_SUM_TOLERANCE {
            return Ok(BoundVerdict::inapplicable(id, "sum of exp(-k) exceeds 1"));
        }
        let margin = measured_expected(run).map_or(0.0, |(_, m)| m);
        let base = BoundParams {
            final_epsilon: Some(final_eps),
            ..overrides
        };
        let (bound, expert) = tightest(id, run, base, |_| true)?.expect("non-empty class");
        return Ok(BoundVerdict::judged(id, bound, r, margin, Some(expert)));
    }

    let Some((ell, margin)) = measured_expected(run) else {
        return Ok(BoundVerdict::inapplicable(id, "expected loss was not measured"));
    };
    let schedule = run.schedule;
    let mismatch = || {
        Ok(BoundVerdict::inapplicable(
            id,
            format!("schedule {} does not match {id}", schedule.name()),
        ))
    };

    let verdict = match (id, schedule) {
        (TheoremId::StaticI, ScheduleSpec::Static { epsilon }) => {
            let l = 1.0 / (epsilon * epsilon);
            if l < ell {
                return Ok(BoundVerdict::inapplicable(id, format!("precondition L = {l} >= l_1:T = {ell} fails")));
            }
            let base = BoundParams {
                loss_bound: Some(l),
                ..overrides
            };
            let (b, i) = tightest(id, run, base, |_| true)?.expect("non-empty class");
            BoundVerdict::judged(id, b, ell, margin, Some(i))
        }
        (TheoremId::StaticIi, ScheduleSpec::Static { epsilon }) => {
            let big_k = overrides.k_bound.unwrap_or(kmax);
            if big_k < kmax || big_k <= 0.0 {
                return Ok(BoundVerdict::inapplicable(id, "K must be positive and at least max k_i"));
            }
            let l = big_k / (epsilon * epsilon);
            if l < ell {
                return Ok(BoundVerdict::inapplicable(id, format!("precondition L = {l} >= l_1:T = {ell} fails")));
            }
            let base = BoundParams {
                loss_bound: Some(l),
                k_bound: Some(big_k),
                ..overrides
            };
            let (b, i) = tightest(id, run, base, |_| true)?.expect("non-empty class");
            BoundVerdict::judged(id, b, ell, margin, Some(i))
        }
        (TheoremId::StaticIii, ScheduleSpec::Static { epsilon }) => {
            // eps = sqrt(k_i / L) fixes L_i = k_i / eps^2 per expert.
            let mut best: Option<(f64, usize)> = None;
            for i in 0..run.n() {
                let (k, s) = (run.complexities[i], run.expert_losses[i]);
                let l = k / (epsilon * epsilon);
                if k <= 0.0 || l < s.max(k) {
                    continue;
                }
                let v = bound_value(&BoundRequest::with_params(
                    id,
                    BoundParams {
                        loss_bound: Some(l),
                        complexity: Some(k),
                        expert_loss: Some(s),
                        ..overrides
                    },
                ))?;
                if best.is_none_or(|(b, _)| v < b) {
                    best = Some((v, i));
                }
            }
            match best {
                Some((b, i)) => BoundVerdict::judged(id, b, ell, margin, Some(i)),
                None => return Ok(BoundVerdict::inapplicable(id, "no expert satisfies L >= max(s_i, k_i)")),
            }
        }
        (TheoremId::DynamicI, ScheduleSpec::InvSqrtT) => {
            let base = BoundParams {
                horizon: Some(horizon),
                ..overrides
            };
            let (b, i) = tightest(id, run, base, |_| true)?.expect("non-empty class");
            BoundVerdict::judged(id, b, ell, margin, Some(i))
        }
        (TheoremId::DynamicIi, ScheduleSpec::SqrtKOver2t { k_bound })
        | (TheoremId::SelfconfIi, ScheduleSpec::SelfConfident { k_bound, .. }) => {
            if k_bound + 1e-12 < kmax {
                return Ok(BoundVerdict::inapplicable(id, "K is below max k_i"));
            }
            let base = BoundParams {
                horizon: Some(horizon),
                k_bound: Some(k_bound),
                ..overrides
            };
            let (b, i) = tightest(id, run, base, |_| true)?.expect("non-empty class");
            BoundVerdict::judged(id, b, ell, margin, Some(i))
        }
        (TheoremId::SelfconfI, ScheduleSpec::SelfConfident { k_bound, .. }) => {
            if (k_bound - 1.0).abs() > 1e-12 {
                return Ok(BoundVerdict::inapplicable(id, "selfconf_i needs K = 1"));
            }
            let (b, i) = tightest(id, run, overrides, |_| true)?.expect("non-empty class");
            BoundVerdict::judged(id, b, ell, margin, Some(i))
        }
        (TheoremId::AdaptiveI, ScheduleSpec::AdaptiveSminGeneral) => {
            let (b, i) = tightest(id, run, overrides, |_| true)?.expect("non-empty class");
            BoundVerdict::judged(id, b, ell, margin, Some(i))
        }
        (TheoremId::AdaptiveIi, ScheduleSpec::AdaptiveSminUniform { k_bound }) => {
            if k_bound + 1e-12 < kmax {
                return Ok(BoundVerdict::inapplicable(id, "K is below max k_i"));
            }
            let smin = run.min_loss();
            let b = bound_value(&BoundRequest::with_params(
                id,
                BoundParams {
                    min_loss: Some(smin),
                    k_bound: Some(k_bound),
                    ..overrides
                },
            ))?;
            let v = BoundVerdict::judged(id, b, ell, margin, None);
            if adaptive_log_clamped(smin) {
                v.with_note("s_min <= 1: ln(s_min) clamped at 0")
            } else {
                v
            }
        }
        (TheoremId::LowerUniform, _) => {
            let k0 = run.complexities[0];
            if run.complexities.iter().any(|k| (k - k0).abs() > 1e-12) {
                return Ok(BoundVerdict::inapplicable(id, "lower bound needs uniform complexities"));
            }
            if run.algorithm == Algorithm::DeterministicMaster || final_eps.is_infinite() {
                return Ok(BoundVerdict::inapplicable(id, "lower bound is stated for the randomized leader"));
            }
            let smin = run.min_loss();
            let b = bound_value(&BoundRequest::with_params(
                id,
                BoundParams {
                    min_loss: Some(smin),
                    n: Some(run.n()),
                    final_epsilon: Some(final_eps),
                    ..overrides
                },
            ))?;
            BoundVerdict::judged(id, b, ell, margin, None)
        }
        _ => return mismatch(),
    };
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::TraceRow;
    use crate::perturbation::PerturbationSource;
    use proptest::prelude::*;

    fn req(id: TheoremId, params: BoundParams) -> f64 {
        bound_value(&BoundRequest::with_params(id, params)).unwrap()
    }

    #[test]
    fn static_i_example() {
        let v = req(
            TheoremId::StaticI,
            BoundParams {
                expert_loss: Some(50.0),
                loss_bound: Some(100.0),
                complexity: Some(0.0),
                ..Default::default()
            },
        );
        assert_eq!(v, 60.0);
    }

    #[test]
    fn dynamic_ii_example() {
        let v = req(
            TheoremId::DynamicIi,
            BoundParams {
                expert_loss: Some(500.0),
                horizon: Some(1000.0),
                k_bound: Some(2f64.ln()),
                ..Default::default()
            },
        );
        assert!((v - 574.46).abs() < 1e-2, "{v}");
    }

    #[test]
    fn lower_uniform_example() {
        let v = req(
            TheoremId::LowerUniform,
            BoundParams {
                min_loss: Some(500.0),
                n: Some(2),
                final_epsilon: Some(0.0316),
                ..Default::default()
            },
        );
        assert!((v - 478.07).abs() < 1e-2, "{v}");
    }

    #[test]
    fn missing_parameter_is_an_error() {
        assert!(bound_value(&BoundRequest::new(TheoremId::DynamicI)).is_err());
    }

    #[test]
    fn adaptive_ii_clamps_log() {
        let at = |smin: f64| {
            req(
                TheoremId::AdaptiveIi,
                BoundParams {
                    min_loss: Some(smin),
                    k_bound: Some(1.0),
                    ..Default::default()
                },
            )
        };
        assert!(adaptive_log_clamped(0.5));
        assert!((at(0.0) - 9.0).abs() < 1e-12);
        assert!(at(1.0).is_finite());
    }

    #[test]
    fn envelope_examples() {
        let e = high_probability_envelope(300.0, 3.0).unwrap();
        assert!((e.chernoff_halfwidth - 2700f64.sqrt()).abs() < 1e-12);
        assert!((e.chernoff_failure - 0.0996).abs() < 1e-4);
        assert!(e.chernoff_valid);
        assert!(!high_probability_envelope(100.0, 50.0).unwrap().chernoff_valid);
        let m = high_probability_envelope(42.0, 1.0).unwrap();
        assert_eq!(m.markov_threshold, 42.0);
        assert_eq!(m.markov_failure, 1.0);
        assert!(high_probability_envelope(1.0, 0.0).is_err());
    }

    #[test]
    fn general_lower_bound_is_weaker_than_uniform_display() {
        // H_n - 1 <= ln n
        for n in 1..50 {
            let general = lower_general_expected(100.0, n, 0.1);
            assert!(general >= 100.0 - (n as f64).ln() / 0.1 - 1e-12);
        }
    }

    fn record(schedule: ScheduleSpec, algorithm: Algorithm) -> RunRecord {
        RunRecord {
            algorithm,
            schedule,
            complexities: vec![2f64.ln(); 2],
            perturbation: PerturbationSource::new(0, PerturbationMode::PerStep),
            measurement: Measurement::Exact,
            steps: vec![TraceRow {
                t: 1,
                chosen: 0,
                u_t: 0.0,
                eps_t: 0.1,
                ell_t: Some(0.5),
                r_t: None,
                smin_t: 0.0,
            }],
            expert_losses: vec![0.0, 1.0],
        }
    }

    #[test]
    fn schedule_mismatch_is_inapplicable() {
        let run = record(ScheduleSpec::Static { epsilon: 0.1 }, Algorithm::Fpl);
        let v = verify(&run, &[BoundRequest::new(TheoremId::SelfconfI)]).unwrap();
        assert_eq!(v[0].status, VerdictStatus::Inapplicable);
        let v = verify(&run, &[BoundRequest::new(TheoremId::StaticI)]).unwrap();
        assert_eq!(v[0].status, VerdictStatus::Holds);
        let v = verify(&run, &[BoundRequest::new(TheoremId::IfplCorollary)]).unwrap();
        assert_eq!(v[0].status, VerdictStatus::Inapplicable);
        let fl = record(ScheduleSpec::InvSqrtT, Algorithm::Fl);
        let v = verify(&fl, &[BoundRequest::new(TheoremId::DynamicI)]).unwrap();
        assert_eq!(v[0].status, VerdictStatus::Inapplicable);
    }

    #[test]
    fn theorem_names_round_trip() {
        for id in TheoremId::ALL {
            assert_eq!(id.name().parse::<TheoremId>().unwrap(), id);
        }
    }

    proptest! {
        #[test]
        fn monotone_in_loss_and_complexity(
            s in 1.0f64..1e4,
            k in 0.0f64..20.0,
            id_idx in 0usize..12,
        ) {
            let id = TheoremId::ALL[id_idx];
            let params = |s: f64, k: f64| BoundParams {
                loss_bound: Some(2e4),
                k_bound: Some(k.max(1e-3)),
                horizon: Some(1e4),
                complexity: Some(k),
                expert_loss: Some(s),
                min_loss: Some(s),
                final_epsilon: Some(0.05),
                n: Some(4),
            };
            let h = 1e-3;
            let base = req(id, params(s, k));
            prop_assert!(req(id, params(s + h, k)) >= base - 1e-9);
            prop_assert!(req(id, params(s, k + h)) >= base - 1e-9);
        }

        #[test]
        fn selfconf_i_is_below_its_square_root_form(s in 0.0f64..1e5, k in 0.0f64..30.0) {
            let b = req(TheoremId::SelfconfI, BoundParams {
                expert_loss: Some(s),
                complexity: Some(k),
                ..Default::default()
            });
            let square = ((s + 1.0).sqrt() + 2f64.sqrt() * (k + 1.0)).powi(2);
            prop_assert!(b + 1.0 <= square * (1.0 + 1e-12));
        }
    }
}
