use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sac,
    Ppo,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sac => "sac",
            Algorithm::Ppo => "ppo",
        }
    }
}

/// One policy for the whole chain, or one policy per echelon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "homo")]
    Homogeneous,
    #[serde(rename = "hetero")]
    Heterogeneous,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Homogeneous => "homo",
            Architecture::Heterogeneous => "hetero",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub lr: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub kl_target: f64,
    pub kl_coeff: f64,
    pub vf_coeff: f64,
    pub entropy_coeff: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub init_log_std: f64,
    pub max_grad_norm: Option<f64>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.3,
            kl_target: 0.01,
            kl_coeff: 0.2,
            vf_coeff: 1.0,
            entropy_coeff: 0.0,
            epochs: 10,
            batch_size: 4000,
            minibatch_size: 128,
            init_log_std: 0.0,
            max_grad_norm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub initial_alpha: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub warmup: usize,
    /// Environment steps per training iteration, rounded up to whole episodes.
    pub steps_per_iteration: usize,
    /// Gradient updates are run every `update_every` environment steps.
    pub update_every: usize,
    pub gradient_steps: usize,
    pub priority_alpha: f64,
    pub priority_beta: f64,
    pub priority_eps: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            entropy_lr: 3e-4,
            gamma: 0.99,
            tau: 0.005,
            initial_alpha: 1.0,
            buffer_capacity: 100_000,
            batch_size: 256,
            warmup: 1000,
            steps_per_iteration: 1000,
            update_every: 1,
            gradient_steps: 1,
            priority_alpha: 0.6,
            priority_beta: 0.4,
            priority_eps: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub architecture: Architecture,
    pub hidden: Vec<usize>,
    /// Multiplies environment rewards before they reach the learner.
    pub reward_scale: f64,
    pub ppo: PpoConfig,
    pub sac: SacConfig,
}

impl AgentConfig {
    /// Reference hyperparameters for the given learner and architecture.
    pub fn new(algorithm: Algorithm, architecture: Architecture) -> Self {
        let mut ppo = PpoConfig::default();
        if architecture == Architecture::Homogeneous {
            ppo.lr = 1e-4;
            ppo.minibatch_size = 512;
        }
        Self {
            algorithm,
            architecture,
            hidden: vec![256, 256],
            reward_scale: 0.01,
            ppo,
            sac: SacConfig::default(),
        }
    }

    pub fn activation(&self) -> Activation {
        match self.algorithm {
            Algorithm::Ppo => Activation::Tanh,
            Algorithm::Sac => Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be non-empty and nonzero");
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return bad("reward_scale must be positive");
        }
        let p = &self.ppo;
        if !(p.gamma > 0.0 && p.gamma < 1.0) || !(0.0..=1.0).contains(&p.lambda) {
            return bad("ppo gamma must be in (0,1) and lambda in [0,1]");
        }
        if !(p.clip > 0.0) || !(p.lr > 0.0) || p.kl_target < 0.0 || p.kl_coeff < 0.0 {
            return bad("ppo clip and lr must be positive, kl settings nonnegative");
        }
        if p.epochs == 0 || p.batch_size == 0 || p.minibatch_size == 0 {
            return bad("ppo epochs, batch and minibatch sizes must be positive");
        }
        let s = &self.sac;
        if !(s.gamma > 0.0 && s.gamma < 1.0) || !(s.tau > 0.0 && s.tau < 1.0) {
            return bad("sac gamma and tau must be in (0,1)");
        }
        if !(s.actor_lr > 0.0 && s.critic_lr > 0.0 && s.entropy_lr > 0.0 && s.initial_alpha > 0.0) {
            return bad("sac learning rates and initial alpha must be positive");
        }
        if s.buffer_capacity == 0
            || s.batch_size == 0
            || s.steps_per_iteration == 0
            || s.update_every == 0
        {
            return bad("sac buffer, batch, iteration and update sizes must be positive");
        }
        if s.priority_alpha < 0.0 || s.priority_beta < 0.0 || s.priority_eps <= 0.0 {
            return bad("invalid prioritized replay constants");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let homo = AgentConfig::new(Algorithm::Ppo, Architecture::Homogeneous);
        let hetero = AgentConfig::new(Algorithm::Ppo, Architecture::Heterogeneous);
        assert_eq!(homo.ppo.lr, 1e-4);
        assert_eq!(homo.ppo.minibatch_size, 512);
        assert_eq!(hetero.ppo.lr, 5e-5);
        assert_eq!(hetero.ppo.minibatch_size, 128);
        assert_eq!(hetero.ppo.clip, 0.3);
        assert_eq!(hetero.ppo.batch_size, 4000);
        assert_eq!(hetero.hidden, vec![256, 256]);
        assert_eq!(hetero.activation(), Activation::Tanh);
        let sac = AgentConfig::new(Algorithm::Sac, Architecture::Homogeneous);
        assert_eq!(sac.activation(), Activation::Relu);
        assert_eq!(sac.sac.tau, 0.005);
        assert_eq!((sac.sac.priority_alpha, sac.sac.priority_beta), (0.6, 0.4));
        assert!(sac.validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = AgentConfig::new(Algorithm::Sac, Architecture::Homogeneous);
        c.sac.tau = 1.5;
        assert!(c.validate().is_err());
        let mut c = AgentConfig::new(Algorithm::Ppo, Architecture::Homogeneous);
        c.ppo.gamma = 1.0;
        assert!(c.validate().is_err());
        c.ppo.gamma = 0.99;
        c.ppo.clip = 0.0;
        assert!(c.validate().is_err());
    }
}
