//! Recursive Bayesian goal and intention inference for a target moving on a
//! grid, with Monte Carlo trajectory forecasting.
//!
//! The target follows a Boltzmann kernel over single-step progress costs
//! towards one of `N` candidate goals. [`inference::Method`] tracks the joint
//! posterior over the goal and the rationality parameter alpha, and
//! [`predictor::predict`] rolls that posterior forward into per-step means
//! and covariances.

pub mod error;
pub mod gridworld;
pub mod inference;
pub mod kinematics;
pub mod live;
pub mod metrics;
pub mod parallel;
pub mod predictor;
pub mod runner;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
pub use gridworld::{Cell, Connectivity, DistanceField, GridMap};
pub use inference::{AlphaGrid, Belief, GoalSet, GoalTransition, Method, MethodConfig, Variant, World};
pub use kinematics::Alpha;
pub use parallel::Execution;
pub use predictor::{predict, PredictConfig, PredictionResult};
pub use scenario::Scenario;
