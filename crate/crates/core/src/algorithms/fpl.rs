use serde::{Deserialize, Serialize};

use crate::domain::{CumulativeState, ExpertClass, LossVector, PerturbationVector};
use crate::error::{FplError, Result};
use crate::leader::{penalized_state, select_leader};
use crate::perturbation::{PerturbationMode, PerturbationSource};
use crate::probability::{expected_step_loss, selection_probabilities, WeightMethod, WeightVector};
use crate::schedules::{ScheduleHistory, ScheduleSpec, ScheduleTracker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// Follow the Perturbed Leader.
    Fpl,
    /// Infeasible FPL: leader on `s_{1:t}`, needs the current loss.
    Ifpl,
    /// Follow the Leader on `s_{<t}`.
    Fl,
    /// Follow the Leader on `s_{<t} + k`.
    FlPenalized,
}

impl PredictorKind {
    pub fn is_deterministic(&self) -> bool {
        matches!(self, PredictorKind::Fl | PredictorKind::FlPenalized)
    }
}

/// Per-step trace entry. `perturbation_stream` together with the source seed
/// reproduces `q` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub epsilon: f64,
    pub chosen: Option<usize>,
    pub infeasible_chosen: Option<usize>,
    pub perturbation_stream: u64,
}

#[derive(Debug, Clone)]
struct StepContext {
    t: u64,
    epsilon: f64,
    q: PerturbationVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Realized loss of the chosen expert, if a choice was made.
    pub actual: Option<f64>,
    /// `l_t`, when known.
    pub expected: Option<f64>,
}

/// A single predictor run over a fixed expert class.
#[derive(Debug, Clone)]
pub struct Predictor {
    kind: PredictorKind,
    class: ExpertClass,
    schedule: ScheduleTracker,
    perturbation: PerturbationSource,
    cumulative: CumulativeState,
    expected_loss_prefix: f64,
    actual_loss_prefix: f64,
    current: Option<StepContext>,
    trace: Vec<StepRecord>,
}

impl Predictor {
    pub fn new(
        kind: PredictorKind,
        class: ExpertClass,
        schedule: ScheduleSpec,
        perturbation: PerturbationSource,
    ) -> Result<Self> {
        if !kind.is_deterministic() {
            schedule.validate(&class)?;
        }
        let n = class.len();
        Ok(Self {
            kind,
            class,
            schedule: ScheduleTracker::new(schedule),
            perturbation,
            cumulative: CumulativeState::new(n),
            expected_loss_prefix: 0.0,
            actual_loss_prefix: 0.0,
            current: None,
            trace: Vec::new(),
        })
    }

    pub fn kind(&self) -> PredictorKind {
        self.kind
    }

    pub fn class(&self) -> &ExpertClass {
        &self.class
    }

    pub fn schedule(&self) -> &ScheduleSpec {
        self.schedule.spec()
    }

    pub fn perturbation(&self) -> &PerturbationSource {
        &self.perturbation
    }

    pub fn cumulative(&self) -> &CumulativeState {
        &self.cumulative
    }

    pub fn trace(&self) -> &[StepRecord] {
        &self.trace
    }

    /// `l_{<t}` accumulated so far (only maintained when known).
    pub fn expected_loss_prefix(&self) -> f64 {
        self.expected_loss_prefix
    }

    pub fn actual_loss_prefix(&self) -> f64 {
        self.actual_loss_prefix
    }

    /// Rate in use at the current step, once it has been prepared.
    pub fn current_epsilon(&self) -> Option<f64> {
        self.current.as_ref().map(|c| c.epsilon)
    }

    fn next_step(&self) -> u64 {
        self.cumulative.step() + 1
    }

    /// Fixes `eps_t` and `q` for step `t`; repeated calls reuse them.
    fn prepare(&mut self, t: u64) -> Result<()> {
        if t != self.next_step() {
            return Err(FplError::InvalidState(format!(
                "predictor expects step {}, asked for {t}",
                self.next_step()
            )));
        }
        if self.current.as_ref().is_some_and(|c| c.t == t) {
            return Ok(());
        }
        let n = self.class.len();
        let (epsilon, q) = if self.kind.is_deterministic() {
            (f64::INFINITY, PerturbationVector::zeros(n))
        } else {
            let history = ScheduleHistory {
                t,
                expected_loss_prefix: Some(self.expected_loss_prefix),
                actual_loss_prefix: self.actual_loss_prefix,
                cumulative: &self.cumulative,
            };
            let eps = self.schedule.next(&history, &self.class)?;
            (eps, self.perturbation.sample(n, t)?)
        };
        self.current = Some(StepContext { t, epsilon, q });
        self.trace.push(StepRecord {
            t,
            epsilon,
            chosen: None,
            infeasible_chosen: None,
            perturbation_stream: match self.perturbation.mode {
                PerturbationMode::InitialOnly => 0,
                PerturbationMode::PerStep => t,
            },
        });
        Ok(())
    }

    fn context(&self) -> &StepContext {
        self.current.as_ref().expect("prepared step")
    }

    fn leader_on(&self, state: &[f64]) -> Result<usize> {
        let ctx = self.context();
        match self.kind {
            PredictorKind::Fl => select_leader(state, &vec![0.0; state.len()], ctx.q.values(), f64::INFINITY),
            PredictorKind::FlPenalized => {
                let penalized = penalized_state(state, self.class.complexities(), 1.0);
                select_leader(&penalized, &vec![0.0; state.len()], ctx.q.values(), f64::INFINITY)
            }
            PredictorKind::Fpl | PredictorKind::Ifpl => {
                select_leader(state, self.class.complexities(), ctx.q.values(), ctx.epsilon)
            }
        }
    }

    /// Feasible decision at step `t` from `s_{<t}`.
    pub fn fpl_decide(&mut self, t: u64) -> Result<usize> {
        if self.kind == PredictorKind::Ifpl {
            return Err(FplError::InvalidState(
                "the infeasible predictor needs the current loss; use ifpl_decide".into(),
            ));
        }
        self.prepare(t)?;
        let chosen = self.leader_on(&self.cumulative.sums())?;
        self.trace.last_mut().expect("prepared").chosen = Some(chosen);
        Ok(chosen)
    }

    /// Infeasible decision at step `t` from `s_{<t} + s_t`, with the same
    /// `eps_t` and `q` as the feasible decision of this step.
    pub fn ifpl_decide(&mut self, t: u64, loss: &LossVector) -> Result<usize> {
        if self.kind.is_deterministic() {
            return Err(FplError::InvalidState(
                "infeasible decisions are defined for perturbed predictors only".into(),
            ));
        }
        self.check_len(loss)?;
        self.prepare(t)?;
        let state: Vec<f64> = self
            .cumulative
            .sums()
            .iter()
            .zip(loss.values())
            .map(|(s, x)| s + x)
            .collect();
        let chosen = self.leader_on(&state)?;
        self.trace.last_mut().expect("prepared").infeasible_chosen = Some(chosen);
        Ok(chosen)
    }

    fn check_len(&self, loss: &LossVector) -> Result<()> {
        if loss.len() != self.class.len() {
            return Err(FplError::invalid(format!(
                "loss vector has length {}, class has {} experts",
                loss.len(),
                self.class.len()
            )));
        }
        Ok(())
    }

    /// Selection probabilities `w_t` of the feasible decision at step `t`.
    pub fn weights(&mut self, t: u64, method: WeightMethod) -> Result<WeightVector> {
        self.prepare(t)?;
        let sums = self.cumulative.sums();
        self.weights_on(&sums, method)
    }

    /// Selection probabilities of the infeasible decision at step `t`.
    pub fn infeasible_weights(&mut self, t: u64, loss: &LossVector, method: WeightMethod) -> Result<WeightVector> {
        self.check_len(loss)?;
        self.prepare(t)?;
        let state: Vec<f64> = self
            .cumulative
            .sums()
            .iter()
            .zip(loss.values())
            .map(|(s, x)| s + x)
            .collect();
        self.weights_on(&state, method)
    }

    fn weights_on(&self, state: &[f64], method: WeightMethod) -> Result<WeightVector> {
        if self.kind.is_deterministic() {
            return Ok(WeightVector::point_mass(state.len(), self.leader_on(state)?));
        }
        let eps = self.context().epsilon;
        let penalized = penalized_state(state, self.class.complexities(), eps);
        selection_probabilities(&penalized, eps, method)
    }

    /// Receives `s_t`. `expected` is `l_t` if the caller already computed it;
    /// otherwise it is computed here when the schedule depends on it.
    pub fn observe(&mut self, loss: &LossVector, expected: Option<f64>) -> Result<Observation> {
        self.check_len(loss)?;
        let t = self.next_step();
        let chosen = self
            .trace
            .last()
            .filter(|r| r.t == t)
            .and_then(|r| r.chosen);
        let actual = chosen.map(|i| loss.get(i));
        let expected = match (expected, self.kind.is_deterministic()) {
            (Some(e), _) => Some(e),
            (None, true) => actual,
            (None, false) => match *self.schedule.spec() {
                ScheduleSpec::SelfConfident { estimator, .. } => {
                    let w = self.weights(t, estimator)?;
                    Some(expected_step_loss(&w, loss)?)
                }
                _ => None,
            },
        };
        if self.schedule.spec().needs_expected_loss() && !self.kind.is_deterministic() {
            let e = expected.ok_or_else(|| {
                FplError::InvalidState("self-confident schedule needs the expected step loss".into())
            })?;
            self.expected_loss_prefix += e;
        } else if let Some(e) = expected {
            self.expected_loss_prefix += e;
        }
        if let Some(u) = actual {
            self.actual_loss_prefix += u;
        }
        self.cumulative.accumulate(loss)?;
        self.current = None;
        Ok(Observation { actual, expected })
    }
}
