//! Clipped-surrogate PPO with an adaptive KL penalty and a separate value network.

use rand::seq::SliceRandom;
use rand::Rng;

use super::config::PpoConfig;
use super::gae::compute_gae;
use super::policy::{ActionSample, ActionSpec, PolicyNet};
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, Activation, Adam, Matrix, Mlp, Tape};
use crate::scalar::Scalar;

/// `min(r * A, clip(r, 1 - c, 1 + c) * A)`.
pub fn clipped_surrogate<T: Scalar>(ratio: T, advantage: T, clip: T) -> T {
    let clipped = ratio.max(T::one() - clip).min(T::one() + clip);
    (ratio * advantage).min(clipped * advantage)
}

/// On-policy samples for one learner, in collection order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch<T> {
    pub obs: Vec<Vec<T>>,
    pub raw_actions: Vec<Vec<T>>,
    pub log_probs: Vec<T>,
    pub rewards: Vec<T>,
    pub values: Vec<T>,
    pub dones: Vec<bool>,
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
}

impl<T: Scalar> RolloutBatch<T> {
    pub fn new() -> Self {
        Self {
            obs: Vec::new(),
            raw_actions: Vec::new(),
            log_probs: Vec::new(),
            rewards: Vec::new(),
            values: Vec::new(),
            dones: Vec::new(),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, obs: Vec<T>, sample: &ActionSample<T>, reward: T, value: T, done: bool) {
        self.obs.push(obs);
        self.raw_actions.push(sample.raw.clone());
        self.log_probs.push(sample.log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    /// Fills advantages and returns.
    pub fn finish(&mut self, gamma: T, lambda: T, bootstrap: T) -> Result<()> {
        let (adv, ret) = compute_gae(&self.rewards, &self.values, &self.dones, bootstrap, gamma, lambda)?;
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub kl: f64,
    pub kl_coeff: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

/// Losses and gradients for one minibatch.
#[derive(Debug, Clone)]
pub struct MinibatchGrads<T> {
    pub policy_loss: T,
    pub value_loss: T,
    pub kl: T,
    pub clip_fraction: T,
    pub policy: Vec<Matrix<T>>,
    pub log_std: Option<Matrix<T>>,
    pub value: Vec<Matrix<T>>,
}

#[derive(Debug, Clone)]
pub struct PpoLearner<T> {
    pub policy: PolicyNet<T>,
    pub value: Mlp<T>,
    pub kl_coeff: T,
    cfg: PpoConfig,
    policy_opt: Adam<T>,
    log_std_opt: Adam<T>,
    value_opt: Adam<T>,
}

impl<T: Scalar> PpoLearner<T> {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        spec: ActionSpec<T>,
        hidden: &[usize],
        cfg: &PpoConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let policy = PolicyNet::new(
            obs_dim,
            hidden,
            Activation::Tanh,
            spec,
            false,
            T::lit(cfg.init_log_std),
            rng,
        )?;
        let mut widths = vec![obs_dim];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let value = Mlp::new(&widths, Activation::Tanh, rng)?;
        let lr = T::lit(cfg.lr);
        Ok(Self {
            policy,
            value,
            kl_coeff: T::lit(cfg.kl_coeff),
            cfg: cfg.clone(),
            policy_opt: Adam::new(lr),
            log_std_opt: Adam::new(lr),
            value_opt: Adam::new(lr),
        })
    }

    pub fn config(&self) -> &PpoConfig {
        &self.cfg
    }

    pub fn value_of(&self, obs: &[T]) -> Result<T> {
        Ok(self.value.forward(obs)?[0])
    }

    /// Importance ratios `pi_new / pi_old` of every stored sample under the
    /// current policy.
    pub fn importance_ratios(&self, batch: &RolloutBatch<T>) -> Result<Vec<T>> {
        let obs = Matrix::from_rows(&batch.obs)?;
        let (mean, ls) = self.policy.head_batch(&obs)?;
        Ok((0..batch.len())
            .map(|i| {
                let lp = self.policy.log_prob_raw(mean.row(i), ls.row(i), &batch.raw_actions[i]);
                (lp - batch.log_probs[i]).exp()
            })
            .collect())
    }

    /// Loss `-surrogate + kl_coeff * KL + vf_coeff * value_loss - entropy_coeff * H`
    /// on the samples `idx`, with gradients for every parameter.
    pub fn minibatch_grads(&self, batch: &RolloutBatch<T>, idx: &[usize], advantages: &[T]) -> Result<MinibatchGrads<T>> {
        let m = idx.len();
        let pick = |v: &[T]| -> Result<Matrix<T>> { Matrix::from_vec(m, 1, idx.iter().map(|&i| v[i]).collect()) };
        let obs = Matrix::from_rows(&idx.iter().map(|&i| batch.obs[i].as_slice()).collect::<Vec<_>>())?;
        let raw = Matrix::from_rows(&idx.iter().map(|&i| batch.raw_actions[i].as_slice()).collect::<Vec<_>>())?;
        let clip = T::lit(self.cfg.clip);

        let mut tape = Tape::new();
        let o = tape.constant(obs);
        let head = self.policy.record_head(&mut tape, o, true)?;
        let lp_new = self.policy.record_log_prob(&mut tape, &head, &raw)?;
        let lp_old = tape.constant(pick(&batch.log_probs)?);
        let adv = tape.constant(pick(advantages)?);
        let log_ratio = tape.sub(lp_new, lp_old)?;
        let ratio = tape.exp(log_ratio);
        let unclipped = tape.mul(ratio, adv)?;
        let clipped_ratio = tape.clamp(ratio, T::one() - clip, T::one() + clip);
        let clipped = tape.mul(clipped_ratio, adv)?;
        let surr = tape.min(unclipped, clipped)?;
        let surr = tape.mean(surr);
        let policy_loss = tape.neg(surr);

        // k3 estimator of KL(old || new): r - 1 - ln r
        let kl = tape.sub(ratio, log_ratio)?;
        let kl = tape.add_scalar(kl, -T::one());
        let kl = tape.mean(kl);

        let values = self.value.record(&mut tape, o, true)?;
        let ret = tape.constant(pick(&batch.returns)?);
        let err = tape.sub(values.output, ret)?;
        let sq = tape.square(err);
        let value_loss = tape.mean(sq);

        let weighted_kl = tape.scale(kl, self.kl_coeff);
        let weighted_vf = tape.scale(value_loss, T::lit(self.cfg.vf_coeff));
        let mut total = tape.add(policy_loss, weighted_kl)?;
        total = tape.add(total, weighted_vf)?;
        if self.cfg.entropy_coeff != 0.0 {
            let neg_entropy = tape.mean(lp_new);
            let e = tape.scale(neg_entropy, T::lit(self.cfg.entropy_coeff));
            total = tape.add(total, e)?;
        }

        let loss_value = tape.value(total).get(0, 0);
        if !loss_value.is_finite() {
            return Err(Error::NonFiniteLoss(format!("ppo minibatch loss = {loss_value}")));
        }
        let mut g = tape.backward(total)?;
        let clip_fraction = tape
            .value(ratio)
            .as_slice()
            .iter()
            .filter(|&&r| (r - T::one()).abs() > clip)
            .count();
        Ok(MinibatchGrads {
            policy_loss: tape.value(policy_loss).get(0, 0),
            value_loss: tape.value(value_loss).get(0, 0),
            kl: tape.value(kl).get(0, 0),
            clip_fraction: T::from_usize_lossy(clip_fraction) / T::from_usize_lossy(m.max(1)),
            policy: head.net_params.iter().map(|&v| g.take(v)).collect(),
            log_std: head.log_std_param.map(|v| g.take(v)),
            value: values.params.iter().map(|&v| g.take(v)).collect(),
        })
    }
}

/// Runs `epochs` passes of shuffled minibatch updates over a finished batch and
/// adapts the KL coefficient toward `kl_target`.
pub fn ppo_update<T: Scalar, R: Rng + ?Sized>(
    learner: &mut PpoLearner<T>,
    batch: &RolloutBatch<T>,
    rng: &mut R,
) -> Result<PpoStats> {
    let n = batch.len();
    if n == 0 || batch.advantages.len() != n || batch.returns.len() != n {
        return Err(Error::InvalidInput(
            "ppo update needs a non-empty batch with advantages and returns".into(),
        ));
    }
    if batch.advantages.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFiniteLoss("ppo advantages".into()));
    }
    let advantages = normalize(&batch.advantages);
    let cfg = learner.cfg.clone();
    let mb = cfg.minibatch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = PpoStats::default();
    let mut last_epoch_kl = Vec::new();

    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(mb) {
            let mut g = learner.minibatch_grads(batch, chunk, &advantages)?;
            if let Some(max) = cfg.max_grad_norm {
                let max = T::lit(max);
                let mut all: Vec<Matrix<T>> = g.policy.drain(..).chain(g.log_std.take()).collect();
                clip_grad_norm(&mut all, max);
                if matches!(learner.policy.std_head, super::policy::StdHead::Global(_)) {
                    g.log_std = all.pop();
                }
                g.policy = all;
                clip_grad_norm(&mut g.value, max);
            }
            learner.policy_opt.step(learner.policy.net.params_mut(), &g.policy)?;
            if let (super::policy::StdHead::Global(ls), Some(gls)) = (&mut learner.policy.std_head, &g.log_std) {
                learner.log_std_opt.step(std::slice::from_mut(ls), std::slice::from_ref(gls))?;
            }
            learner.value_opt.step(learner.value.params_mut(), &g.value)?;

            stats.policy_loss += g.policy_loss.as_f64();
            stats.value_loss += g.value_loss.as_f64();
            stats.clip_fraction += g.clip_fraction.as_f64();
            stats.minibatches += 1;
            if epoch + 1 == cfg.epochs {
                last_epoch_kl.push(g.kl.as_f64());
            }
        }
    }
    if !learner.policy.net.all_finite() || !learner.value.all_finite() {
        return Err(Error::NonFiniteLoss("ppo parameters diverged".into()));
    }
    let k = stats.minibatches.max(1) as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.clip_fraction /= k;
    stats.kl = last_epoch_kl.iter().sum::<f64>() / last_epoch_kl.len().max(1) as f64;
    if stats.kl > 2.0 * cfg.kl_target {
        learner.kl_coeff = learner.kl_coeff * T::lit(1.5);
    } else if stats.kl < 0.5 * cfg.kl_target {
        learner.kl_coeff = learner.kl_coeff * T::lit(0.5);
    }
    stats.kl_coeff = learner.kl_coeff.as_f64();
    Ok(stats)
}

fn normalize<T: Scalar>(xs: &[T]) -> Vec<T> {
    let n = T::from_usize_lossy(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let std = var.sqrt();
    if xs.len() < 2 || std < T::lit(1e-8) {
        return xs.to_vec();
    }
    xs.iter().map(|&x| (x - mean) / std).collect()
}
