//! Learners, their configuration and the training loop.

mod config;
mod curve;
mod gae;
mod policy;
mod ppo;
mod replay;
mod sac;
mod train;

pub use config::{AgentConfig, Algorithm, Architecture, PpoConfig, SacConfig};
pub use gae::compute_gae;
pub use policy::{compose_action, ActionSample, ActionSpec, HeadVars, ObsScaler, PolicyNet, StdHead};
pub use ppo::{clipped_surrogate, ppo_update, MinibatchGrads, PpoLearner, PpoStats, RolloutBatch};
pub use replay::{PrioritizedReplay, PrioritizedSample, Transition};
pub use sac::{sac_update, soft_bellman_target, SacLearner, SacStats};
pub use curve::{CurveRow, LearningCurve, CURVE_COLUMNS};
pub use train::{policy_ids, policy_rewards, train, PolicySet, TrainOutcome, TrainStatus};
