//! Soft actor-critic with twin critics, Polyak targets, a tuned temperature
//! and prioritized replay.

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::SacConfig;
use super::policy::{ActionSample, ActionSpec, PolicyNet};
use super::replay::{PrioritizedReplay, Transition};
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Matrix, Mlp, Tape};
use crate::scalar::Scalar;

/// `r + gamma * (1 - done) * (min_q_next - alpha * log_prob_next)`.
pub fn soft_bellman_target<T: Scalar>(reward: T, done: bool, gamma: T, min_q_next: T, alpha: T, log_prob_next: T) -> T {
    if done {
        reward
    } else {
        reward + gamma * (min_q_next - alpha * log_prob_next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SacStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
    pub mean_q: f64,
}

#[derive(Debug, Clone)]
pub struct SacLearner<T> {
    pub actor: PolicyNet<T>,
    pub critics: [Mlp<T>; 2],
    pub targets: [Mlp<T>; 2],
    pub log_alpha: T,
    pub buffer: PrioritizedReplay<T>,
    pub target_entropy: T,
    cfg: SacConfig,
    actor_opt: Adam<T>,
    critic_opts: [Adam<T>; 2],
    alpha_opt: Adam<T>,
    updates: u64,
}

impl<T: Scalar> SacLearner<T> {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        spec: ActionSpec<T>,
        hidden: &[usize],
        cfg: &SacConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let adim = spec.dim();
        let actor = PolicyNet::new(obs_dim, hidden, Activation::Relu, spec, true, T::zero(), rng)?;
        let mut widths = vec![obs_dim + adim];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let c1 = Mlp::new(&widths, Activation::Relu, rng)?;
        let c2 = Mlp::new(&widths, Activation::Relu, rng)?;
        Ok(Self {
            actor,
            targets: [c1.clone(), c2.clone()],
            critics: [c1, c2],
            log_alpha: T::lit(cfg.initial_alpha.ln()),
            buffer: PrioritizedReplay::new(cfg.buffer_capacity, cfg.priority_alpha, cfg.priority_beta, cfg.priority_eps),
            target_entropy: -T::from_usize_lossy(adim),
            cfg: cfg.clone(),
            actor_opt: Adam::new(T::lit(cfg.actor_lr)),
            critic_opts: [Adam::new(T::lit(cfg.critic_lr)), Adam::new(T::lit(cfg.critic_lr))],
            alpha_opt: Adam::new(T::lit(cfg.entropy_lr)),
            updates: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn alpha(&self) -> T {
        self.log_alpha.exp()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Whether enough transitions are stored to start learning.
    pub fn warmed_up(&self) -> bool {
        self.buffer.len() >= self.cfg.warmup.max(1)
    }

    /// Uniform random action during warm-up, a policy sample afterwards.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[T], rng: &mut R) -> Result<ActionSample<T>> {
        if self.buffer.len() < self.cfg.warmup {
            let squashed: Vec<T> = (0..self.actor.action_dim())
                .map(|_| T::lit(rng.random_range(-1.0..=1.0)))
                .collect();
            return Ok(ActionSample {
                action: self.actor.spec.to_env(&squashed),
                raw: squashed.iter().map(|&s| atanh_clamped(s)).collect(),
                squashed,
                log_prob: T::zero(),
            });
        }
        self.actor.select_action(obs, true, rng)
    }

    pub fn remember(&mut self, t: Transition<T>) {
        self.buffer.push(t);
    }

    fn critic_input(obs: &[&[T]], act: &[&[T]]) -> Result<Matrix<T>> {
        let rows: Vec<Vec<T>> = obs.iter().zip(act).map(|(o, a)| o.iter().chain(a.iter()).copied().collect()).collect();
        Matrix::from_rows(&rows)
    }

    fn noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Matrix<T>> {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect(),
        )
    }
}

fn atanh_clamped<T: Scalar>(s: T) -> T {
    let lim = T::lit(1.0 - 1e-6);
    s.max(-lim).min(lim).atanh()
}

/// One gradient step on both critics, the actor and the temperature, then a
/// Polyak update of the targets. Before warm-up completes this does nothing.
pub fn sac_update<T: Scalar, R: Rng + ?Sized>(learner: &mut SacLearner<T>, rng: &mut R) -> Result<Option<SacStats>> {
    let cfg = learner.cfg.clone();
    if !learner.warmed_up() {
        log::warn!(
            "sac update requested with {} of {} warm-up transitions; skipping",
            learner.buffer.len(),
            cfg.warmup
        );
        return Ok(None);
    }
    let n = cfg.batch_size.min(learner.buffer.len());
    let sample = learner
        .buffer
        .sample(n, rng)
        .ok_or_else(|| Error::InvalidInput("empty replay buffer".into()))?;
    let batch: Vec<Transition<T>> = sample.indices.iter().map(|&i| learner.buffer.get(i).clone()).collect();
    let adim = learner.actor.action_dim();
    let gamma = T::lit(cfg.gamma);
    let alpha = learner.alpha();

    // targets
    let next_obs = Matrix::from_rows(&batch.iter().map(|t| t.next_obs.as_slice()).collect::<Vec<_>>())?;
    let (mean, log_std) = learner.actor.head_batch(&next_obs)?;
    let eps = SacLearner::<T>::noise(n, adim, rng)?;
    let mut next_act = Vec::with_capacity(n);
    let mut next_logp = Vec::with_capacity(n);
    for i in 0..n {
        let raw: Vec<T> = (0..adim)
            .map(|j| mean.get(i, j) + log_std.get(i, j).exp() * eps.get(i, j))
            .collect();
        next_logp.push(learner.actor.log_prob_raw(mean.row(i), log_std.row(i), &raw));
        next_act.push(raw.iter().map(|u| u.tanh()).collect::<Vec<T>>());
    }
    let tin = SacLearner::critic_input(
        &batch.iter().map(|t| t.next_obs.as_slice()).collect::<Vec<_>>(),
        &next_act.iter().map(Vec::as_slice).collect::<Vec<_>>(),
    )?;
    let q1n = learner.targets[0].forward_batch(&tin)?;
    let q2n = learner.targets[1].forward_batch(&tin)?;
    let y: Vec<T> = (0..n)
        .map(|i| {
            soft_bellman_target(
                batch[i].reward,
                batch[i].done,
                gamma,
                q1n.get(i, 0).min(q2n.get(i, 0)),
                alpha,
                next_logp[i],
            )
        })
        .collect();
    let y = Matrix::from_vec(n, 1, y)?;
    let w = Matrix::from_vec(n, 1, sample.weights.clone())?;

    // critics
    let obs_rows: Vec<&[T]> = batch.iter().map(|t| t.obs.as_slice()).collect();
    let cin = SacLearner::critic_input(&obs_rows, &batch.iter().map(|t| t.action.as_slice()).collect::<Vec<_>>())?;
    let mut td = vec![T::zero(); n];
    let mut critic_loss = T::zero();
    let mut mean_q = T::zero();
    for k in 0..2 {
        let mut tape = Tape::new();
        let x = tape.constant(cin.clone());
        let q = learner.critics[k].record(&mut tape, x, true)?;
        let target = tape.constant(y.clone());
        let err = tape.sub(q.output, target)?;
        for (i, d) in tape.value(err).as_slice().iter().enumerate() {
            td[i] = td[i] + d.abs() * T::lit(0.5);
        }
        let sq = tape.square(err);
        let wv = tape.constant(w.clone());
        let weighted = tape.mul(sq, wv)?;
        let loss = tape.mean(weighted);
        let lv = tape.value(loss).get(0, 0);
        if !lv.is_finite() {
            return Err(Error::NonFiniteLoss(format!("sac critic {k} loss = {lv}")));
        }
        critic_loss = critic_loss + lv * T::lit(0.5);
        mean_q = mean_q + tape.value(q.output).sum() / T::from_usize_lossy(n) * T::lit(0.5);
        let mut g = tape.backward(loss)?;
        let grads: Vec<Matrix<T>> = q.params.iter().map(|&v| g.take(v)).collect();
        learner.critic_opts[k].step(learner.critics[k].params_mut(), &grads)?;
    }
    learner.buffer.update_priorities(&sample.indices, &td);

    // actor
    let obs = Matrix::from_rows(&obs_rows)?;
    let eps = SacLearner::<T>::noise(n, adim, rng)?;
    let mut tape = Tape::new();
    let o = tape.constant(obs);
    let head = learner.actor.record_head(&mut tape, o, true)?;
    let (act, logp) = learner.actor.record_rsample(&mut tape, &head, &eps)?;
    let x = tape.concat_cols(o, act)?;
    let q1 = learner.critics[0].record(&mut tape, x, false)?;
    let q2 = learner.critics[1].record(&mut tape, x, false)?;
    let qmin = tape.min(q1.output, q2.output)?;
    let scaled = tape.scale(logp, alpha);
    let obj = tape.sub(scaled, qmin)?;
    let actor_loss = tape.mean(obj);
    let al = tape.value(actor_loss).get(0, 0);
    if !al.is_finite() {
        return Err(Error::NonFiniteLoss(format!("sac actor loss = {al}")));
    }
    let mut g = tape.backward(actor_loss)?;
    let grads: Vec<Matrix<T>> = head.net_params.iter().map(|&v| g.take(v)).collect();
    learner.actor_opt.step(learner.actor.net.params_mut(), &grads)?;
    let mean_logp = tape.value(logp).sum() / T::from_usize_lossy(n);

    // temperature: loss = -log_alpha * (log_prob + target_entropy)
    let grad_alpha = -(mean_logp + learner.target_entropy);
    let mut la = [Matrix::scalar(learner.log_alpha)];
    learner.alpha_opt.step(&mut la, &[Matrix::scalar(grad_alpha)])?;
    learner.log_alpha = la[0].get(0, 0);

    let tau = T::lit(cfg.tau);
    for k in 0..2 {
        let (src, dst) = (&learner.critics[k], &mut learner.targets[k]);
        dst.soft_update_from(src, tau)?;
    }
    learner.updates += 1;
    Ok(Some(SacStats {
        critic_loss: critic_loss.as_f64(),
        actor_loss: al.as_f64(),
        alpha: learner.alpha().as_f64(),
        entropy: -mean_logp.as_f64(),
        mean_q: mean_q.as_f64(),
    }))
}
