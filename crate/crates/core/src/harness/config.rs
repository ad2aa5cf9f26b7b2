//! Run configuration and its flat `key = value` file format.
//!
//! Keys may be dotted (`schedule.kind = "static"`) or grouped under a
//! `[schedule]` header; both spellings are the same key. Strings are quoted,
//! lists use brackets, `#` starts a comment. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundRequest, TheoremId};
use crate::domain::ExpertClass;
use crate::environments::{Environment, EnvironmentSpec};
use crate::error::{FplError, Result};
use crate::perturbation::{mix_seed, PerturbationMode, PerturbationSource};
use crate::probability::WeightMethod;
use crate::schedules::ScheduleSpec;

use super::record::{Algorithm, Measurement};

/// Every key with its default, as shown by `--help`.
pub const CONFIG_KEYS: &str = "\
CONFIG KEYS (defaults in brackets)
  experts.class          uniform | inverse_square | explicit        [uniform]
  experts.n              number of experts (uniform, inverse_square) [2]
  experts.complexities   list of k_i (explicit)                     [-]
  algorithm              fpl | ifpl_paired | fl | fl_penalized | hierarchy | deterministic_master [fpl]
  schedule.kind          static | inv_sqrt_t | sqrt_k_over_2t | self_confident |
                         self_confident_actual | adaptive_smin_general | adaptive_smin_uniform [inv_sqrt_t]
  schedule.epsilon       rate of the static schedule                [0.1]
  schedule.k_bound       K; at least max k_i                        [max k_i, or 1 if all k_i = 0]
  schedule.estimator     exact | mc, l_t estimator of self_confident [exact]
  schedule.samples       samples of the mc estimator                [100000]
  environment.kind       bernoulli | fl_killer | greedy_adversary | playback [bernoulli]
  environment.probabilities  bernoulli means, one per expert        [evenly spaced in 0.2..0.8]
  environment.seed       bernoulli seed                             [0]
  environment.path       playback file, one whitespace-separated row per step [-]
  horizon                number of steps T                          [1000]
  perturbation.mode      per_step | initial_only                    [per_step]
  perturbation.seed      seed of q; --seed overrides it             [0]
  measurement.kind       exact | mc | none                          [exact]
  measurement.samples    samples per step for mc                    [100000]
  bounds                 \"all\" or a list of theorem names           [all]
  confidence             c of the Markov and Chernoff envelopes     [3]
  output.trace           trace file name inside --out              [trace.csv]
  output.summary         summary file name inside --out            [summary.json]

THEOREMS
  static_i static_ii static_iii dynamic_i dynamic_ii selfconf_i selfconf_ii
  adaptive_i adaptive_ii hierarchy_a ifpl_corollary lower_uniform
";

/// Tag mixed into the perturbation seed to key Monte-Carlo measurement.
const MEASUREMENT_TAG: u64 = 0x003e_a50e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "class")]
pub enum ExpertClassSpec {
    /// `k_i = ln n`.
    Uniform { n: usize },
    /// `k_i = 2 ln(i + 1)` for one-based `i`, truncated at `n`.
    InverseSquare { n: usize },
    Explicit { complexities: Vec<f64> },
}

impl ExpertClassSpec {
    pub fn build(&self) -> Result<ExpertClass> {
        match self {
            ExpertClassSpec::Uniform { n } => ExpertClass::uniform(*n),
            ExpertClassSpec::InverseSquare { n } => ExpertClass::inverse_square(*n),
            ExpertClassSpec::Explicit { complexities } => ExpertClass::new(complexities.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub trace: PathBuf,
    pub summary: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            trace: PathBuf::from("trace.csv"),
            summary: PathBuf::from("summary.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experts: ExpertClassSpec,
    pub algorithm: Algorithm,
    pub schedule: ScheduleSpec,
    pub environment: EnvironmentSpec,
    pub horizon: u64,
    pub perturbation: PerturbationSource,
    pub measurement: Measurement,
    pub bounds: Vec<BoundRequest>,
    /// `c` of the high-probability envelopes.
    pub confidence: f64,
    pub output: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_kv_str("").expect("defaults are valid")
    }
}

fn all_bounds() -> Vec<BoundRequest> {
    TheoremId::ALL.into_iter().map(BoundRequest::new).collect()
}

fn spread_probabilities(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5];
    }
    (0..n).map(|i| 0.2 + 0.6 * i as f64 / (n - 1) as f64).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_kv_str(&text)
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| FplError::Format {
                row: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
                message: e.message().to_string(),
            })?;
        let mut keys = Keys::default();
        keys.flatten("", table);
        let config = keys.interpret()?;
        config.validate()?;
        Ok(config)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.perturbation.seed = seed;
        self
    }

    /// Method used to measure `w_t` at step `t`, if any.
    pub fn weight_method(&self, t: u64) -> Option<WeightMethod> {
        match self.measurement {
            Measurement::Exact => Some(WeightMethod::Auto),
            Measurement::MonteCarlo { samples } => Some(WeightMethod::MonteCarlo {
                samples,
                seed: mix_seed(mix_seed(self.perturbation.seed, MEASUREMENT_TAG), t),
            }),
            Measurement::None => None,
        }
    }

    /// Cross-field checks; the per-module checks run again when the run starts.
    pub fn validate(&self) -> Result<()> {
        let class = self.experts.build()?;
        if self.horizon == 0 {
            return Err(FplError::invalid("horizon must be at least 1"));
        }
        if !(self.confidence.is_finite() && self.confidence > 0.0) {
            return Err(FplError::invalid("confidence must be positive"));
        }
        Environment::new(&self.environment, class.len(), self.horizon)?;
        if matches!(self.algorithm, Algorithm::Fpl | Algorithm::IfplPaired | Algorithm::DeterministicMaster) {
            self.schedule.validate(&class)?;
        }
        if let Measurement::MonteCarlo { samples } = self.measurement {
            if samples == 0 {
                return Err(FplError::invalid("measurement.samples must be positive"));
            }
        }
        let adaptive = matches!(self.environment, EnvironmentSpec::GreedyAdversary);
        if adaptive && self.perturbation.mode != PerturbationMode::PerStep {
            return Err(FplError::invalid(
                "an adaptive environment needs perturbation.mode = per_step",
            ));
        }
        match self.algorithm {
            Algorithm::IfplPaired if self.measurement == Measurement::None => {
                Err(FplError::invalid("ifpl_paired needs measurement exact or mc"))
            }
            Algorithm::Hierarchy if adaptive => Err(FplError::Unsupported(
                "the hierarchy exposes no selection probabilities for an adaptive environment".into(),
            )),
            Algorithm::DeterministicMaster
                if matches!(self.schedule, ScheduleSpec::SelfConfidentActual { .. }) =>
            {
                Err(FplError::Unsupported(
                    "the deterministic master samples no expert, so it has no realized-loss rate".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Default)]
struct Keys(BTreeMap<String, toml::Value>);

fn type_error(key: &str, expected: &str) -> FplError {
    FplError::invalid(format!("config key `{key}` must be {expected}"))
}

impl Keys {
    fn flatten(&mut self, prefix: &str, table: toml::Table) {
        for (k, v) in table {
            let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
            match v {
                toml::Value::Table(inner) => self.flatten(&key, inner),
                other => {
                    self.0.insert(key, other);
                }
            }
        }
    }

    fn take(&mut self, key: &str) -> Option<toml::Value> {
        self.0.remove(key)
    }

    fn string(&mut self, key: &str, default: &str) -> Result<String> {
        match self.take(key) {
            None => Ok(default.to_string()),
            Some(toml::Value::String(s)) => Ok(s),
            Some(_) => Err(type_error(key, "a string")),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => Ok(Some(x)),
            Some(toml::Value::Integer(i)) => Ok(Some(i as f64)),
            Some(_) => Err(type_error(key, "a number")),
        }
    }

    fn unsigned(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            None => Ok(default),
            Some(toml::Value::Integer(i)) if i >= 0 => Ok(i as u64),
            Some(_) => Err(type_error(key, "a non-negative integer")),
        }
    }

    fn floats(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .into_iter()
                .map(|v| match v {
                    toml::Value::Float(x) => Ok(x),
                    toml::Value::Integer(i) => Ok(i as f64),
                    _ => Err(type_error(key, "a list of numbers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(type_error(key, "a list of numbers")),
        }
    }

    fn interpret(mut self) -> Result<RunConfig> {
        let n = self.unsigned("experts.n", 2)? as usize;
        let experts = match self.string("experts.class", "uniform")?.as_str() {
            "uniform" => ExpertClassSpec::Uniform { n },
            "inverse_square" => ExpertClassSpec::InverseSquare { n },
            "explicit" => ExpertClassSpec::Explicit {
                complexities: self
                    .floats("experts.complexities")?
                    .ok_or_else(|| FplError::invalid("experts.class = explicit needs experts.complexities"))?,
            },
            other => return Err(FplError::invalid(format!("unknown expert class `{other}`"))),
        };
        let class = experts.build()?;
        let n = class.len();

        let algorithm: Algorithm = self.string("algorithm", "fpl")?.parse()?;

        let max_k = class.max_complexity();
        let k_bound = self
            .float("schedule.k_bound")?
            .unwrap_or(if max_k > 0.0 { max_k } else { 1.0 });
        let epsilon = self.float("schedule.epsilon")?.unwrap_or(0.1);
        let estimator_samples = self.unsigned("schedule.samples", 100_000)?;
        let estimator = match self.string("schedule.estimator", "exact")?.as_str() {
            "exact" => WeightMethod::Auto,
            "mc" => WeightMethod::MonteCarlo {
                samples: estimator_samples,
                seed: 0,
            },
            other => return Err(FplError::invalid(format!("unknown estimator `{other}`"))),
        };
        let schedule = match self.string("schedule.kind", "inv_sqrt_t")?.as_str() {
            "static" => ScheduleSpec::Static { epsilon },
            "inv_sqrt_t" => ScheduleSpec::InvSqrtT,
            "sqrt_k_over_2t" => ScheduleSpec::SqrtKOver2t { k_bound },
            "self_confident" => ScheduleSpec::SelfConfident { k_bound, estimator },
            "self_confident_actual" => ScheduleSpec::SelfConfidentActual { k_bound },
            "adaptive_smin_general" => ScheduleSpec::AdaptiveSminGeneral,
            "adaptive_smin_uniform" => ScheduleSpec::AdaptiveSminUniform { k_bound },
            other => return Err(FplError::invalid(format!("unknown schedule `{other}`"))),
        };

        let probabilities = self.floats("environment.probabilities")?;
        let env_seed = self.unsigned("environment.seed", 0)?;
        let path = self.string("environment.path", "")?;
        let environment = match self.string("environment.kind", "bernoulli")?.as_str() {
            "bernoulli" => EnvironmentSpec::Bernoulli {
                probabilities: probabilities.unwrap_or_else(|| spread_probabilities(n)),
                seed: env_seed,
            },
            "fl_killer" => EnvironmentSpec::FlKiller,
            "greedy_adversary" => EnvironmentSpec::GreedyAdversary,
            "playback" if !path.is_empty() => EnvironmentSpec::Playback { path: path.into() },
            "playback" => return Err(FplError::invalid("environment.kind = playback needs environment.path")),
            other => return Err(FplError::invalid(format!("unknown environment `{other}`"))),
        };

        let horizon = self.unsigned("horizon", 1000)?;
        let mode: PerturbationMode = self.string("perturbation.mode", "per_step")?.parse()?;
        let seed = self.unsigned("perturbation.seed", 0)?;

        let samples = self.unsigned("measurement.samples", 100_000)?;
        let measurement = match self.string("measurement.kind", "exact")?.as_str() {
            "exact" => Measurement::Exact,
            "mc" => Measurement::MonteCarlo { samples },
            "none" => Measurement::None,
            other => return Err(FplError::invalid(format!("unknown measurement `{other}`"))),
        };

        let bounds = match self.take("bounds") {
            None => all_bounds(),
            Some(toml::Value::String(s)) if s == "all" => all_bounds(),
            Some(toml::Value::String(s)) => vec![BoundRequest::new(s.parse()?)],
            Some(toml::Value::Array(items)) => items
                .into_iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(BoundRequest::new(s.parse()?)),
                    _ => Err(type_error("bounds", "a list of theorem names")),
                })
                .collect::<Result<Vec<_>>>()?,
            Some(_) => return Err(type_error("bounds", "\"all\" or a list of theorem names")),
        };
        let confidence = self.float("confidence")?.unwrap_or(3.0);
        let output = OutputPaths {
            trace: self.string("output.trace", "trace.csv")?.into(),
            summary: self.string("output.summary", "summary.json")?.into(),
        };

        if let Some(key) = self.0.keys().next() {
            return Err(FplError::invalid(format!("unknown config key `{key}`")));
        }
        Ok(RunConfig {
            experts,
            algorithm,
            schedule,
            environment,
            horizon,
            perturbation: PerturbationSource::new(seed, mode),
            measurement,
            bounds,
            confidence,
            output,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.experts, ExpertClassSpec::Uniform { n: 2 });
        assert_eq!(c.algorithm, Algorithm::Fpl);
        assert_eq!(c.schedule, ScheduleSpec::InvSqrtT);
        assert_eq!(c.horizon, 1000);
        assert_eq!(c.perturbation.mode, PerturbationMode::PerStep);
        assert_eq!(c.measurement, Measurement::Exact);
        assert_eq!(c.bounds.len(), TheoremId::ALL.len());
        assert_eq!(
            c.environment,
            EnvironmentSpec::Bernoulli {
                probabilities: vec![0.2, 0.8],
                seed: 0
            }
        );
    }

    #[test]
    fn dotted_and_sectioned_keys_agree() {
        let dotted = RunConfig::from_kv_str(
            "horizon = 50\nschedule.kind = \"static\"\nschedule.epsilon = 0.5 # comment\n",
        )
        .unwrap();
        let sectioned =
            RunConfig::from_kv_str("horizon = 50\n[schedule]\nkind = \"static\"\nepsilon = 0.5\n").unwrap();
        assert_eq!(dotted, sectioned);
        assert_eq!(dotted.schedule, ScheduleSpec::Static { epsilon: 0.5 });
    }

    #[test]
    fn explicit_class_and_bounds_list() {
        let c = RunConfig::from_kv_str(
            "experts.class = \"explicit\"\nexperts.complexities = [1, 2.5]\nbounds = [\"dynamic_i\"]\n",
        )
        .unwrap();
        assert_eq!(
            c.experts,
            ExpertClassSpec::Explicit {
                complexities: vec![1.0, 2.5]
            }
        );
        assert_eq!(c.bounds, vec![BoundRequest::new(TheoremId::DynamicI)]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_kv_str("horizn = 3").is_err());
        assert!(RunConfig::from_kv_str("horizon = 0").is_err());
        assert!(RunConfig::from_kv_str("horizon = \"ten\"").is_err());
        assert!(RunConfig::from_kv_str("schedule.kind = \"sqrt_k_over_2t\"\nschedule.k_bound = 0.1").is_err());
        assert!(RunConfig::from_kv_str("environment.kind = \"fl_killer\"\nexperts.n = 3").is_err());
        assert!(RunConfig::from_kv_str(
            "environment.kind = \"greedy_adversary\"\nperturbation.mode = \"initial_only\""
        )
        .is_err());
        assert!(RunConfig::from_kv_str("algorithm = \"ifpl_paired\"\nmeasurement.kind = \"none\"").is_err());
        assert!(matches!(
            RunConfig::from_kv_str("horizon = = 3"),
            Err(FplError::Format { row: 1, .. })
        ));
    }

    #[test]
    fn mc_measurement_seeds_differ_per_step() {
        let c = RunConfig::from_kv_str("measurement.kind = \"mc\"\nmeasurement.samples = 10").unwrap();
        assert_ne!(c.weight_method(1), c.weight_method(2));
        assert_eq!(c.with_seed(7).perturbation.seed, 7);
    }
}
