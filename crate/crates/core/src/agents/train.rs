//! Collecting experience and updating learners until a curve converges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{AgentConfig, Algorithm, Architecture};
use super::curve::{CurveRow, LearningCurve};
use super::policy::{compose_action, ActionSample, ActionSpec, ObsScaler, PolicyNet};
use super::ppo::{ppo_update, PpoLearner, RolloutBatch};
use super::replay::Transition;
use super::sac::{sac_update, SacLearner};
use crate::demand::{DemandModel, DemandSampler};
use crate::env::{ChainParams, ChainState, Echelon, JointAction, StepOutcome};
use crate::error::{Error, Result};
use crate::metrics::{convergence_check, mean_std, ConvergenceRule};
use crate::nn::Checkpoint;
use crate::rollout::{Controller, EnvConfig};
use crate::scalar::Scalar;
use crate::seeds;

const HOMOGENEOUS_IDS: [&str; 1] = ["shared"];
const HETEROGENEOUS_IDS: [&str; 2] = ["retailer", "factory"];

pub fn policy_ids(arch: Architecture) -> &'static [&'static str] {
    match arch {
        Architecture::Homogeneous => &HOMOGENEOUS_IDS,
        Architecture::Heterogeneous => &HETEROGENEOUS_IDS,
    }
}

/// Per-policy rewards: the chain total for a shared policy, own rewards otherwise.
pub fn policy_rewards<T: Scalar>(arch: Architecture, rewards: (T, T)) -> Vec<T> {
    match arch {
        Architecture::Homogeneous => vec![rewards.0 + rewards.1],
        Architecture::Heterogeneous => vec![rewards.0, rewards.1],
    }
}

fn obs_dims(arch: Architecture) -> usize {
    match arch {
        Architecture::Homogeneous => crate::env::HOMOGENEOUS_OBS_DIM,
        Architecture::Heterogeneous => crate::env::HETEROGENEOUS_OBS_DIM,
    }
}

fn action_specs<T: Scalar>(arch: Architecture, params: &ChainParams<T>) -> Vec<ActionSpec<T>> {
    match arch {
        Architecture::Homogeneous => vec![ActionSpec::homogeneous(params)],
        Architecture::Heterogeneous => Echelon::ALL.iter().map(|&e| ActionSpec::echelon(params, e)).collect(),
    }
}

/// The trained policies of a team, acting deterministically.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySet<T> {
    pub architecture: Architecture,
    pub algorithm: Algorithm,
    pub policies: Vec<PolicyNet<T>>,
    scaler: ObsScaler<T>,
}

impl<T: Scalar> PolicySet<T> {
    pub fn new(
        architecture: Architecture,
        algorithm: Algorithm,
        policies: Vec<PolicyNet<T>>,
        params: &ChainParams<T>,
    ) -> Result<Self> {
        if policies.len() != policy_ids(architecture).len() {
            return Err(Error::DimensionMismatch {
                context: "policies for architecture",
                expected: policy_ids(architecture).len(),
                got: policies.len(),
            });
        }
        Ok(Self {
            architecture,
            algorithm,
            policies,
            scaler: ObsScaler::new(params),
        })
    }

    pub fn action(&self, state: &ChainState<T>) -> Result<JointAction<T>> {
        let obs = self.scaler.observe(self.architecture, state);
        let acts = self
            .policies
            .iter()
            .zip(&obs)
            .map(|(p, o)| p.act_deterministic(o))
            .collect::<Result<Vec<_>>>()?;
        compose_action(self.architecture, &acts)
    }

    pub fn to_checkpoint(&self) -> Checkpoint<T> {
        let mut ck = Checkpoint::new();
        ck.set_meta("architecture", self.architecture.name());
        ck.set_meta("algorithm", self.algorithm.name());
        for (p, id) in self.policies.iter().zip(policy_ids(self.architecture)) {
            p.save(&mut ck, id);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint<T>, params: &ChainParams<T>) -> Result<Self> {
        let arch = match ck.meta("architecture") {
            Some("homo") => Architecture::Homogeneous,
            Some("hetero") => Architecture::Heterogeneous,
            other => return Err(Error::Checkpoint(format!("bad architecture {other:?}"))),
        };
        let algo = match ck.meta("algorithm") {
            Some("sac") => Algorithm::Sac,
            Some("ppo") => Algorithm::Ppo,
            other => return Err(Error::Checkpoint(format!("bad algorithm {other:?}"))),
        };
        let policies = policy_ids(arch)
            .iter()
            .map(|id| PolicyNet::load(ck, id))
            .collect::<Result<Vec<_>>>()?;
        Self::new(arch, algo, policies, params)
    }
}

impl<T: Scalar> Controller<T> for PolicySet<T> {
    fn act(&mut self, state: &ChainState<T>) -> Result<JointAction<T>> {
        self.action(state)
    }
}

#[derive(Debug, Clone)]
enum Learner<T> {
    Ppo(Box<PpoLearner<T>>),
    Sac(Box<SacLearner<T>>),
}

impl<T: Scalar> Learner<T> {
    fn policy(&self) -> &PolicyNet<T> {
        match self {
            Learner::Ppo(l) => &l.policy,
            Learner::Sac(l) => &l.actor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainStatus {
    /// The convergence rule fired at this 1-based iteration.
    Converged { iteration: usize },
    IterationCap,
    /// A loss or reward became non-finite; the curve is partial.
    Diverged(String),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub curve: LearningCurve,
    pub policies: PolicySet<T>,
    pub status: TrainStatus,
    pub env_steps: u64,
}

impl<T> TrainOutcome<T> {
    pub fn iterations(&self) -> usize {
        self.curve.iterations()
    }
}

struct Trainer<'a, T> {
    arch: Architecture,
    cfg: &'a AgentConfig,
    env_cfg: &'a EnvConfig<T>,
    env: crate::env::SupplyChain<T>,
    scaler: ObsScaler<T>,
    learners: Vec<Learner<T>>,
    demand: DemandSampler<T>,
    rng: ChaCha8Rng,
    env_steps: u64,
}

impl<T: Scalar> Trainer<'_, T> {
    fn sample_actions(&mut self, obs: &[Vec<T>]) -> Result<Vec<ActionSample<T>>> {
        let rng = &mut self.rng;
        self.learners
            .iter()
            .zip(obs)
            .map(|(l, o)| match l {
                Learner::Ppo(p) => p.policy.select_action(o, true, rng),
                Learner::Sac(s) => s.act(o, rng),
            })
            .collect()
    }

    /// Plays one episode, handing each step to `sink`; returns per-policy
    /// unscaled returns.
    fn episode(
        &mut self,
        mut sink: impl FnMut(&mut Self, &[Vec<T>], &[ActionSample<T>], &[T], &StepOutcome<T>) -> Result<()>,
    ) -> Result<Vec<f64>> {
        if matches!(self.demand.model(), DemandModel::Scripted(_)) {
            self.demand.rewind();
        }
        let mut state = self.env.reset(self.env_cfg.initial_price)?;
        let mut returns = vec![0.0; self.learners.len()];
        while state.t < self.env.horizon() {
            let obs = self.scaler.observe(self.arch, &state);
            let samples = self.sample_actions(&obs)?;
            let acts: Vec<Vec<T>> = samples.iter().map(|s| s.action.clone()).collect();
            let joint = compose_action(self.arch, &acts)?;
            let d = self.demand.sample()?;
            let out = self.env.step(&state, &joint, d)?;
            let rewards = policy_rewards(self.arch, out.rewards);
            for (acc, r) in returns.iter_mut().zip(&rewards) {
                *acc += r.as_f64();
            }
            self.env_steps += 1;
            sink(self, &obs, &samples, &rewards, &out)?;
            state = out.next_state;
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFiniteLoss("episode return".into()));
        }
        Ok(returns)
    }

    fn ppo_iteration(&mut self) -> Result<Vec<Vec<f64>>> {
        let scale = T::lit(self.cfg.reward_scale);
        let mut batches: Vec<RolloutBatch<T>> = self.learners.iter().map(|_| RolloutBatch::new()).collect();
        let mut returns = Vec::new();
        while batches[0].len() < self.cfg.ppo.batch_size {
            returns.push(self.episode(|tr, obs, samples, rewards, out| {
                for (i, l) in tr.learners.iter().enumerate() {
                    if let Learner::Ppo(p) = l {
                        let v = p.value_of(&obs[i])?;
                        batches[i].push(obs[i].clone(), &samples[i], rewards[i] * scale, v, out.done);
                    }
                }
                Ok(())
            })?);
        }
        let (gamma, lambda) = (T::lit(self.cfg.ppo.gamma), T::lit(self.cfg.ppo.lambda));
        for (l, b) in self.learners.iter_mut().zip(&mut batches) {
            if let Learner::Ppo(p) = l {
                b.finish(gamma, lambda, T::zero())?;
                let stats = ppo_update(p, b, &mut self.rng)?;
                log::debug!("ppo update: {stats:?}");
            }
        }
        Ok(returns)
    }

    fn sac_iteration(&mut self) -> Result<Vec<Vec<f64>>> {
        let scale = T::lit(self.cfg.reward_scale);
        let sac = self.cfg.sac.clone();
        let start = self.env_steps;
        let mut returns = Vec::new();
        while self.env_steps - start < sac.steps_per_iteration as u64 {
            returns.push(self.episode(|tr, obs, samples, rewards, out| {
                let next = tr.scaler.observe(tr.arch, &out.next_state);
                let update = tr.env_steps % sac.update_every as u64 == 0;
                for (i, l) in tr.learners.iter_mut().enumerate() {
                    if let Learner::Sac(s) = l {
                        s.remember(Transition {
                            obs: obs[i].clone(),
                            action: samples[i].squashed.clone(),
                            reward: rewards[i] * scale,
                            next_obs: next[i].clone(),
                            done: out.done,
                        });
                        if update && s.warmed_up() {
                            for _ in 0..sac.gradient_steps {
                                sac_update(s, &mut tr.rng)?;
                            }
                        }
                    }
                }
                Ok(())
            })?);
        }
        Ok(returns)
    }

    fn policies(&self) -> Result<PolicySet<T>> {
        PolicySet::new(
            self.arch,
            self.cfg.algorithm,
            self.learners.iter().map(|l| l.policy().clone()).collect(),
            &self.env_cfg.params,
        )
    }
}

/// Trains a team from `seed` until `rule` fires on the total reward curve or
/// `max_iters` iterations have run.
pub fn train<T: Scalar>(
    env_cfg: &EnvConfig<T>,
    cfg: &AgentConfig,
    seed: u64,
    rule: ConvergenceRule,
    max_iters: usize,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    env_cfg.params.validate()?;
    if max_iters == 0 {
        return Err(Error::Config("iteration cap must be at least 1".into()));
    }
    let arch = cfg.architecture;
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::agent(seed));
    let hidden = cfg.hidden.clone();
    let learners = action_specs(arch, &env_cfg.params)
        .into_iter()
        .map(|spec| -> Result<Learner<T>> {
            let d = obs_dims(arch);
            Ok(match cfg.algorithm {
                Algorithm::Ppo => Learner::Ppo(Box::new(PpoLearner::new(d, spec, &hidden, &cfg.ppo, &mut rng)?)),
                Algorithm::Sac => Learner::Sac(Box::new(SacLearner::new(d, spec, &hidden, &cfg.sac, &mut rng)?)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tr = Trainer {
        arch,
        cfg,
        env_cfg,
        env: env_cfg.build()?,
        scaler: ObsScaler::new(&env_cfg.params),
        learners,
        demand: DemandSampler::new(env_cfg.demand.clone(), seeds::training_demand(seed))?,
        rng: ChaCha8Rng::seed_from_u64(rng.random()),
        env_steps: 0,
    };
    let ids = policy_ids(arch);
    let mut curve = LearningCurve::default();
    let mut status = TrainStatus::IterationCap;
    for iteration in 1..=max_iters {
        let result = match cfg.algorithm {
            Algorithm::Ppo => tr.ppo_iteration(),
            Algorithm::Sac => tr.sac_iteration(),
        };
        let returns = match result {
            Ok(r) => r,
            Err(Error::NonFiniteLoss(msg)) => {
                log::error!("training diverged at iteration {iteration}: {msg}");
                status = TrainStatus::Diverged(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        for (i, id) in ids.iter().enumerate() {
            let per_episode: Vec<f64> = returns.iter().map(|r| r[i]).collect();
            let (mean, std) = mean_std(&per_episode);
            curve.rows.push(CurveRow {
                iteration,
                policy_id: id.to_string(),
                mean_episode_reward: mean,
                std,
                episodes: per_episode.len(),
                env_steps: tr.env_steps,
            });
        }
        log::info!(
            "iteration {iteration}: total mean episode reward {:.3}",
            curve.total().last().copied().unwrap_or(f64::NAN)
        );
        if let Some(k) = convergence_check(&curve.total(), rule) {
            status = TrainStatus::Converged { iteration: k + 1 };
            break;
        }
    }
    Ok(TrainOutcome {
        policies: tr.policies()?,
        curve,
        status,
        env_steps: tr.env_steps,
    })
}
