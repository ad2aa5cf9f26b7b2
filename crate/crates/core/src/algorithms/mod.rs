//! Predictors built on the leader-selection primitive.

mod fpl;
mod hierarchy;
mod master;

pub use fpl::{Observation, Predictor, PredictorKind, StepRecord};
pub use hierarchy::{meta_complexity, subclass_level, HierarchyState, HierarchyStep, Subclass};
pub use master::{deterministic_master_decide, master_absolute_loss, AbsoluteLossRound, MasterLoss};
