//! Follow the Perturbed Leader for prediction with expert advice.
//!
//! Experts carry complexities `k_i >= 0` with `sum_i exp(-k_i) <= 1`. A
//! predictor picks `argmin_i s_{<t}^i + (k_i - q_i) / eps_t` with `q_i ~ Exp(1)`.
//! The crate computes the selection probabilities of that rule exactly
//! (subset sums or a one-dimensional integral) or by seeded Monte Carlo, and
//! checks finished runs against closed-form regret bounds.

pub mod algorithms;
pub mod bounds;
pub mod domain;
pub mod environments;
pub mod error;
pub mod harness;
pub mod leader;
pub mod perturbation;
pub mod probability;
pub mod schedules;

pub use domain::{CumulativeState, Decision, ExpertClass, LossVector, PerturbationVector};
pub use error::{FplError, Result};
pub use perturbation::{PerturbationMode, PerturbationSource};
pub use probability::{WeightMethod, WeightVector};
pub use schedules::ScheduleSpec;
