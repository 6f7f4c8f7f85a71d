//! Two-echelon supply chain simulation with multi-agent SAC and PPO learners,
//! reward shaping, inventory baselines and an experiment runner.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the runner uses.

pub mod agents;
pub mod baselines;
pub mod demand;
pub mod env;
mod error;
pub mod metrics;
pub mod nn;
pub mod rollout;
pub mod runner;
mod scalar;
pub mod seeds;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SupplyChain = env::SupplyChain<f64>;
pub type ChainParams = env::ChainParams<f64>;
pub type ChainState = env::ChainState<f64>;
pub type JointAction = env::JointAction<f64>;
pub type StepOutcome = env::StepOutcome<f64>;
pub type DemandModel = demand::DemandModel<f64>;
pub type DemandSampler = demand::DemandSampler<f64>;
pub type EnvConfig = rollout::EnvConfig<f64>;
pub type Matrix = nn::Matrix<f64>;
pub type Mlp = nn::Mlp<f64>;
pub type PolicyNet = agents::PolicyNet<f64>;
pub type PolicySet = agents::PolicySet<f64>;
pub type TrainOutcome = agents::TrainOutcome<f64>;
