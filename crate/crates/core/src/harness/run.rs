use crate::algorithms::{deterministic_master_decide, HierarchyState, Predictor, PredictorKind};
use crate::domain::CumulativeState;
use crate::environments::Environment;
use crate::error::Result;
use crate::probability::{expected_step_loss, WeightMethod};
use crate::schedules::ScheduleSpec;

use super::config::RunConfig;
use super::record::{Algorithm, Measurement, RunRecord, TraceRow};

/// Plays `config` for `t = 1..=T`: decide, let the environment generate
/// `s_t` (seeing `w_t` if it is adaptive), observe.
pub fn run_experiment(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let class = config.experts.build()?;
    let n = class.len();
    let env = Environment::new(&config.environment, n, config.horizon)?;
    let mut experts = CumulativeState::new(n);
    let mut steps = Vec::with_capacity(config.horizon as usize);

    let measurement = if config.algorithm == Algorithm::Hierarchy {
        Measurement::None
    } else {
        config.measurement
    };

    if config.algorithm == Algorithm::Hierarchy {
        let mut h = HierarchyState::new(class.clone(), config.perturbation)?;
        for t in 1..=config.horizon {
            let row = (|| {
                let chosen = h.hierarchical_decide(t)?;
                let loss = env.next_loss(t, None)?;
                let u_t = h.observe(&loss)?;
                experts.accumulate(&loss)?;
                Ok(TraceRow {
                    t,
                    chosen,
                    u_t,
                    eps_t: 1.0 / (t as f64).sqrt(),
                    ell_t: None,
                    r_t: None,
                    smin_t: experts.min_loss(),
                })
            })()
            .map_err(|e: crate::error::FplError| e.at_step(t))?;
            steps.push(row);
        }
    } else {
        let kind = match config.algorithm {
            Algorithm::Fl => PredictorKind::Fl,
            Algorithm::FlPenalized => PredictorKind::FlPenalized,
            _ => PredictorKind::Fpl,
        };
        let mut p = Predictor::new(kind, class.clone(), config.schedule, config.perturbation)?;
        for t in 1..=config.horizon {
            let row = predictor_step(config, &env, &mut p, &mut experts, t).map_err(|e| e.at_step(t))?;
            steps.push(row);
        }
    }

    Ok(RunRecord {
        algorithm: config.algorithm,
        schedule: config.schedule,
        complexities: class.complexities().to_vec(),
        perturbation: config.perturbation,
        measurement,
        steps,
        expert_losses: experts.sums(),
    })
}

fn predictor_step(
    config: &RunConfig,
    env: &Environment,
    p: &mut Predictor,
    experts: &mut CumulativeState,
    t: u64,
) -> Result<TraceRow> {
    let method = config.weight_method(t);
    let master = config.algorithm == Algorithm::DeterministicMaster;
    let weights = if master {
        Some(deterministic_master_decide(p, t, method.unwrap_or(WeightMethod::Auto))?)
    } else if method.is_some() || env.is_adaptive() {
        Some(p.weights(t, method.unwrap_or(WeightMethod::Auto))?)
    } else {
        None
    };
    let chosen = match &weights {
        Some(w) if master => w.argmax(),
        _ => p.fpl_decide(t)?,
    };
    let eps_t = p.current_epsilon().expect("decision prepared the step");

    let loss = env.next_loss(t, weights.as_ref())?;

    let ell_t = match (&weights, method, master) {
        (Some(w), Some(_), _) | (Some(w), None, true) => Some(expected_step_loss(w, &loss)?),
        _ if p.kind().is_deterministic() => Some(loss.get(chosen)),
        _ => None,
    };
    let r_t = match (config.algorithm, method) {
        (Algorithm::IfplPaired, Some(m)) => {
            let w = p.infeasible_weights(t, &loss, m)?;
            p.ifpl_decide(t, &loss)?;
            Some(expected_step_loss(&w, &loss)?)
        }
        _ => None,
    };
    let u_t = if master {
        ell_t.expect("master measures w_t")
    } else {
        loss.get(chosen)
    };

    // The measured l_t feeds the self-confident rate only if it matches the
    // rate's own estimator.
    let reuse = match p.schedule() {
        ScheduleSpec::SelfConfident { estimator, .. } => {
            estimator.is_exact(loss.len()) && method.is_some_and(|m| m.is_exact(loss.len()))
        }
        _ => true,
    };
    p.observe(&loss, if reuse { ell_t } else { None })?;
    experts.accumulate(&loss)?;

    Ok(TraceRow {
        t,
        chosen,
        u_t,
        eps_t,
        ell_t,
        r_t,
        smin_t: experts.min_loss(),
    })
}
