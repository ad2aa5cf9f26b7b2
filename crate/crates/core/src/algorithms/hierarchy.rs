//! Two-level hierarchy: one perturbed leader per complexity level `K`
//! (experts with `K - 1 < k_i <= K`, rate `sqrt(K / 2t)`), and a meta leader
//! over those levels with complexity `1/2 + 2 ln K` and rate `1 / sqrt(t)`.
//! Each level is charged the loss its own choice actually incurred.

use serde::{Deserialize, Serialize};

use crate::domain::{CumulativeState, ExpertClass, LossVector};
use crate::error::{FplError, Result};
use crate::leader::select_leader;
use crate::perturbation::PerturbationSource;

const META_STREAM_TAG: u64 = 0x3e7a;

/// Level `K = ceil(k)` of a complexity; complexities in `[0, 1]` share level 1.
pub fn subclass_level(k: f64) -> u32 {
    (k.ceil() as u32).max(1)
}

/// `1/2 + 2 ln K`.
pub fn meta_complexity(level: u32) -> f64 {
    0.5 + 2.0 * f64::from(level).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subclass {
    pub level: u32,
    /// Expert indices in this level, ascending.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyStep {
    pub t: u64,
    /// `I_t^K` for each materialized level, in level order.
    pub subclass_choices: Vec<usize>,
    /// Index into the materialized levels.
    pub meta_choice: usize,
    pub chosen: usize,
}

#[derive(Debug, Clone)]
pub struct HierarchyState {
    class: ExpertClass,
    perturbation: PerturbationSource,
    meta_perturbation: PerturbationSource,
    subclasses: Vec<Subclass>,
    meta_class: ExpertClass,
    cumulative: CumulativeState,
    /// `s~_{<t}^K`, realized level losses.
    meta_cumulative: CumulativeState,
    pending: Option<HierarchyStep>,
    trace: Vec<HierarchyStep>,
}

impl HierarchyState {
    pub fn new(class: ExpertClass, perturbation: PerturbationSource) -> Result<Self> {
        let max_level = subclass_level(class.max_complexity());
        let subclasses: Vec<Subclass> = (1..=max_level)
            .filter_map(|level| {
                let members: Vec<usize> = class
                    .complexities()
                    .iter()
                    .enumerate()
                    .filter(|(_, k)| subclass_level(**k) == level)
                    .map(|(i, _)| i)
                    .collect();
                (!members.is_empty()).then_some(Subclass { level, members })
            })
            .collect();
        let meta_class = ExpertClass::new(subclasses.iter().map(|s| meta_complexity(s.level)).collect())?;
        let n = class.len();
        let levels = subclasses.len();
        Ok(Self {
            class,
            perturbation,
            meta_perturbation: perturbation.derive(META_STREAM_TAG),
            subclasses,
            meta_class,
            cumulative: CumulativeState::new(n),
            meta_cumulative: CumulativeState::new(levels),
            pending: None,
            trace: Vec::new(),
        })
    }

    pub fn class(&self) -> &ExpertClass {
        &self.class
    }

    pub fn subclasses(&self) -> &[Subclass] {
        &self.subclasses
    }

    /// Complexities `1/2 + 2 ln K` of the materialized levels.
    pub fn meta_class(&self) -> &ExpertClass {
        &self.meta_class
    }

    pub fn cumulative(&self) -> &CumulativeState {
        &self.cumulative
    }

    /// `s~_{1:t}^K` for each materialized level.
    pub fn subclass_losses(&self) -> Vec<f64> {
        self.meta_cumulative.sums()
    }

    pub fn trace(&self) -> &[HierarchyStep] {
        &self.trace
    }

    pub fn hierarchical_decide(&mut self, t: u64) -> Result<usize> {
        if t != self.cumulative.step() + 1 {
            return Err(FplError::InvalidState(format!(
                "hierarchy expects step {}, asked for {t}",
                self.cumulative.step() + 1
            )));
        }
        if let Some(p) = self.pending.as_ref().filter(|p| p.t == t) {
            return Ok(p.chosen);
        }
        let q = self.perturbation.sample(self.class.len(), t)?;
        let sums = self.cumulative.sums();
        let tf = t as f64;
        let mut subclass_choices = Vec::with_capacity(self.subclasses.len());
        for sub in &self.subclasses {
            let eps = (f64::from(sub.level) / (2.0 * tf)).sqrt();
            let state: Vec<f64> = sub.members.iter().map(|&i| sums[i]).collect();
            let k: Vec<f64> = sub.members.iter().map(|&i| self.class.complexity(i)).collect();
            let qs: Vec<f64> = sub.members.iter().map(|&i| q.values()[i]).collect();
            subclass_choices.push(sub.members[select_leader(&state, &k, &qs, eps)?]);
        }
        let meta_q = self.meta_perturbation.sample(self.subclasses.len(), t)?;
        let meta_choice = select_leader(
            &self.meta_cumulative.sums(),
            self.meta_class.complexities(),
            meta_q.values(),
            1.0 / tf.sqrt(),
        )?;
        let chosen = subclass_choices[meta_choice];
        self.pending = Some(HierarchyStep {
            t,
            subclass_choices,
            meta_choice,
            chosen,
        });
        Ok(chosen)
    }

    /// Receives `s_t`; returns the realized loss of the hierarchical choice.
    pub fn observe(&mut self, loss: &LossVector) -> Result<f64> {
        let t = self.cumulative.step() + 1;
        let step = self
            .pending
            .take()
            .filter(|p| p.t == t)
            .ok_or_else(|| FplError::InvalidState(format!("no decision made for step {t}")))?;
        if loss.len() != self.class.len() {
            return Err(FplError::invalid("loss vector length differs from class size"));
        }
        let meta_loss = LossVector::new(step.subclass_choices.iter().map(|&i| loss.get(i)).collect())?;
        self.meta_cumulative.accumulate(&meta_loss)?;
        self.cumulative.accumulate(loss)?;
        let u = loss.get(step.chosen);
        self.trace.push(step);
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{Predictor, PredictorKind};
    use crate::environments::{Environment, EnvironmentSpec};
    use crate::perturbation::PerturbationMode;
    use crate::schedules::ScheduleSpec;

    #[test]
    fn levels_and_meta_complexities() {
        // expert i = 3 (one-based): k = 2 ln 4 = 2.77 -> level 3
        assert_eq!(subclass_level(2.0 * 4f64.ln()), 3);
        assert_eq!(subclass_level(2.0), 2);
        assert_eq!(subclass_level(0.0), 1);
        assert!((meta_complexity(3) - 2.697_224_577_336_219_6).abs() < 1e-12);
    }

    #[test]
    fn partition_covers_class() {
        let class = ExpertClass::inverse_square(50).unwrap();
        let h = HierarchyState::new(class.clone(), PerturbationSource::new(1, PerturbationMode::PerStep)).unwrap();
        let mut all: Vec<usize> = h.subclasses().iter().flat_map(|s| s.members.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        for s in h.subclasses() {
            for &i in &s.members {
                let k = class.complexity(i);
                assert!(f64::from(s.level) - 1.0 < k && k <= f64::from(s.level));
            }
        }
        assert!(h.meta_class().weight_sum() <= 1.0);
    }

    #[test]
    fn single_level_matches_plain_fpl() {
        // uniform k = ln 4 lies in level 2; the hierarchy reduces to one FPL with rate sqrt(2/2t)
        let class = ExpertClass::uniform(4).unwrap();
        let source = PerturbationSource::new(9, PerturbationMode::PerStep);
        let mut h = HierarchyState::new(class.clone(), source).unwrap();
        assert_eq!(h.subclasses().len(), 1);
        let mut p = Predictor::new(PredictorKind::Fpl, class, ScheduleSpec::SqrtKOver2t { k_bound: 2.0 }, source).unwrap();
        let env = Environment::new(
            &EnvironmentSpec::Bernoulli {
                probabilities: vec![0.2, 0.4, 0.6, 0.8],
                seed: 3,
            },
            4,
            100,
        )
        .unwrap();
        for t in 1..=100 {
            assert_eq!(h.hierarchical_decide(t).unwrap(), p.fpl_decide(t).unwrap());
            let s = env.next_loss(t, None).unwrap();
            h.observe(&s).unwrap();
            p.observe(&s, None).unwrap();
        }
    }

    #[test]
    fn level_losses_match_trace() {
        let class = ExpertClass::inverse_square(20).unwrap();
        let mut h = HierarchyState::new(class, PerturbationSource::new(4, PerturbationMode::PerStep)).unwrap();
        let env = Environment::new(
            &EnvironmentSpec::Bernoulli {
                probabilities: (0..20).map(|i| 0.05 * i as f64).collect(),
                seed: 8,
            },
            20,
            200,
        )
        .unwrap();
        let mut rows = Vec::new();
        for t in 1..=200 {
            h.hierarchical_decide(t).unwrap();
            let s = env.next_loss(t, None).unwrap();
            h.observe(&s).unwrap();
            rows.push(s);
        }
        let mut recomputed = vec![0.0; h.subclasses().len()];
        for (step, s) in h.trace().iter().zip(&rows) {
            for (acc, &i) in recomputed.iter_mut().zip(&step.subclass_choices) {
                *acc += s.get(i);
            }
        }
        for (a, b) in recomputed.iter().zip(h.subclass_losses()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn observe_without_decision_fails() {
        let mut h = HierarchyState::new(
            ExpertClass::uniform(2).unwrap(),
            PerturbationSource::new(0, PerturbationMode::PerStep),
        )
        .unwrap();
        assert!(h.observe(&LossVector::zeros(2)).is_err());
        assert!(h.hierarchical_decide(2).is_err());
    }
}
