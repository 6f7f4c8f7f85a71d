//! Tanh-squashed Gaussian policies and the mapping between network outputs and
//! environment units.

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::Architecture;
use crate::env::{
    observe_echelon, observe_homogeneous, ChainParams, ChainState, Echelon, Interval, JointAction,
};
use crate::error::{Error, Result};
use crate::nn::{Activation, Checkpoint, Matrix, Mlp, Tape, Var};
use crate::scalar::Scalar;

/// `ln(1 - tanh(u)^2 + SQUASH_EPS)` keeps the correction finite at saturation.
const SQUASH_EPS: f64 = 1e-6;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Legal range of every action component, in network output order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec<T> {
    pub bounds: Vec<Interval<T>>,
}

impl<T: Scalar> ActionSpec<T> {
    /// Joint action `(Q1, Q2, Sp1, Sp2)`.
    pub fn homogeneous(params: &ChainParams<T>) -> Self {
        Self {
            bounds: vec![
                params.retailer.order_range,
                params.factory.order_range,
                params.retailer.sales_price_range,
                params.factory.sales_price_range,
            ],
        }
    }

    /// Per-echelon action `(Q_i, Sp_i)`.
    pub fn echelon(params: &ChainParams<T>, e: Echelon) -> Self {
        let p = match e {
            Echelon::Retailer => &params.retailer,
            Echelon::Factory => &params.factory,
        };
        Self {
            bounds: vec![p.order_range, p.sales_price_range],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Maps `y` in `[-1, 1]` onto the component's range.
    pub fn to_env(&self, squashed: &[T]) -> Vec<T> {
        squashed
            .iter()
            .zip(&self.bounds)
            .map(|(&y, b)| b.clamp(b.lo + (y + T::one()) * T::lit(0.5) * b.width()))
            .collect()
    }

    pub fn to_unit(&self, env: &[T]) -> Vec<T> {
        env.iter()
            .zip(&self.bounds)
            .map(|(&x, b)| {
                if b.width() > T::zero() {
                    (x - b.lo) / b.width() * T::lit(2.0) - T::one()
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    /// `sum_j ln(half-width_j)`, the log-Jacobian of the affine map.
    pub fn log_scale(&self) -> T {
        self.bounds
            .iter()
            .map(|b| (b.width() * T::lit(0.5)).max(T::lit(1e-12)).ln())
            .sum()
    }
}

/// Scales raw observations to order-one magnitudes: inventory and overstock by
/// capacity, stockouts and demands by the maximum order, price by the maximum
/// price.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsScaler<T> {
    retailer: [T; 7],
    factory: [T; 7],
}

impl<T: Scalar> ObsScaler<T> {
    pub fn new(params: &ChainParams<T>) -> Self {
        let row = |p: &crate::env::EchelonParams<T>, price_hi: T| {
            let cap = p.capacity.max(T::one());
            let q = p.order_range.hi.max(T::one());
            [cap, cap, q, q, q, q, price_hi.max(T::one())]
        };
        let price_hi = params.factory.sales_price_range.hi;
        Self {
            retailer: row(&params.retailer, price_hi),
            factory: row(&params.factory, price_hi),
        }
    }

    pub fn echelon(&self, state: &ChainState<T>, e: Echelon) -> Vec<T> {
        let div = match e {
            Echelon::Retailer => &self.retailer,
            Echelon::Factory => &self.factory,
        };
        observe_echelon(state, e)
            .iter()
            .zip(div)
            .map(|(&x, &d)| x / d)
            .collect()
    }

    pub fn homogeneous(&self, state: &ChainState<T>) -> Vec<T> {
        let (r, f) = (&self.retailer, &self.factory);
        let div = [r[0], f[0], r[1], f[1], r[2], f[2], r[3], f[3], r[4], f[4], r[5], f[5], r[6]];
        observe_homogeneous(state)
            .iter()
            .zip(div)
            .map(|(&x, d)| x / d)
            .collect()
    }

    /// Observations for each policy of an architecture, in policy order.
    pub fn observe(&self, arch: Architecture, state: &ChainState<T>) -> Vec<Vec<T>> {
        match arch {
            Architecture::Homogeneous => vec![self.homogeneous(state)],
            Architecture::Heterogeneous => Echelon::ALL
                .iter()
                .map(|&e| self.echelon(state, e))
                .collect(),
        }
    }
}

/// Assembles per-policy actions (environment units) into a joint action.
pub fn compose_action<T: Scalar>(arch: Architecture, actions: &[Vec<T>]) -> Result<JointAction<T>> {
    let want = match arch {
        Architecture::Homogeneous => [4].as_slice(),
        Architecture::Heterogeneous => [2, 2].as_slice(),
    };
    if actions.len() != want.len() {
        return Err(Error::LengthMismatch {
            context: "policies vs actions",
            left: want.len(),
            right: actions.len(),
        });
    }
    for (a, &n) in actions.iter().zip(want) {
        if a.len() != n {
            return Err(Error::DimensionMismatch {
                context: "policy action",
                expected: n,
                got: a.len(),
            });
        }
    }
    Ok(match arch {
        Architecture::Homogeneous => {
            let a = &actions[0];
            JointAction::new(a[0], a[2], a[1], a[3])
        }
        Architecture::Heterogeneous => {
            JointAction::new(actions[0][0], actions[0][1], actions[1][0], actions[1][1])
        }
    })
}

/// How the Gaussian head's log standard deviation is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum StdHead<T> {
    /// The network emits `[mean, log_std]`.
    StateDependent,
    /// A single learned `1 x action_dim` vector.
    Global(Matrix<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample<T> {
    /// Environment units.
    pub action: Vec<T>,
    /// `tanh(raw)`, in `[-1, 1]`.
    pub squashed: Vec<T>,
    /// Pre-squash Gaussian draw.
    pub raw: Vec<T>,
    /// Log density of `action`, including the tanh and affine Jacobians.
    pub log_prob: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet<T> {
    pub net: Mlp<T>,
    pub std_head: StdHead<T>,
    pub spec: ActionSpec<T>,
    pub log_std_min: T,
    pub log_std_max: T,
}

/// Tape handles of a recorded policy head.
#[derive(Debug, Clone)]
pub struct HeadVars {
    pub net_params: Vec<Var>,
    pub log_std_param: Option<Var>,
    pub mean: Var,
    /// `batch x action_dim`, already clamped to the band.
    pub log_std: Var,
}

impl<T: Scalar> PolicyNet<T> {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        activation: Activation,
        spec: ActionSpec<T>,
        state_dependent_std: bool,
        init_log_std: T,
        rng: &mut R,
    ) -> Result<Self> {
        let adim = spec.dim();
        let out = if state_dependent_std { 2 * adim } else { adim };
        let mut widths = vec![obs_dim];
        widths.extend_from_slice(hidden);
        widths.push(out);
        let net = Mlp::new(&widths, activation, rng)?;
        let (std_head, lo, hi) = if state_dependent_std {
            (StdHead::StateDependent, T::lit(-20.0), T::lit(2.0))
        } else {
            (
                StdHead::Global(Matrix::filled(1, adim, init_log_std)),
                T::lit(-5.0),
                T::lit(2.0),
            )
        };
        Ok(Self {
            net,
            std_head,
            spec,
            log_std_min: lo,
            log_std_max: hi,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.spec.dim()
    }

    fn check_obs(&self, got: usize) -> Result<()> {
        if got != self.obs_dim() {
            return Err(Error::DimensionMismatch {
                context: "policy observation",
                expected: self.obs_dim(),
                got,
            });
        }
        Ok(())
    }

    /// Mean and clamped log-std for a batch of observations.
    pub fn head_batch(&self, obs: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
        self.check_obs(obs.cols())?;
        let out = self.net.forward_batch(obs)?;
        let n = obs.rows();
        let adim = self.action_dim();
        let (lo, hi) = (self.log_std_min, self.log_std_max);
        match &self.std_head {
            StdHead::StateDependent => {
                let mut mean = Vec::with_capacity(n * adim);
                let mut ls = Vec::with_capacity(n * adim);
                for i in 0..n {
                    let row = out.row(i);
                    mean.extend_from_slice(&row[..adim]);
                    ls.extend(row[adim..].iter().map(|&x| x.max(lo).min(hi)));
                }
                Ok((Matrix::from_vec(n, adim, mean)?, Matrix::from_vec(n, adim, ls)?))
            }
            StdHead::Global(g) => {
                let row: Vec<T> = g.as_slice().iter().map(|&x| x.max(lo).min(hi)).collect();
                let mut ls = Vec::with_capacity(n * adim);
                for _ in 0..n {
                    ls.extend_from_slice(&row);
                }
                Ok((out, Matrix::from_vec(n, adim, ls)?))
            }
        }
    }

    /// Log density of the squashed action whose pre-squash value is `raw`.
    pub fn log_prob_raw(&self, mean: &[T], log_std: &[T], raw: &[T]) -> T {
        let half = T::lit(0.5);
        let mut lp = -self.spec.log_scale();
        for ((&m, &ls), &u) in mean.iter().zip(log_std).zip(raw) {
            let z = (u - m) / ls.exp();
            let t = u.tanh();
            lp = lp - half * z * z - ls - T::lit(HALF_LN_2PI)
                - (T::one() - t * t + T::lit(SQUASH_EPS)).ln();
        }
        lp
    }

    /// Draws (or, when `stochastic` is false, returns the squashed mean of) an action.
    pub fn select_action<R: Rng + ?Sized>(&self, obs: &[T], stochastic: bool, rng: &mut R) -> Result<ActionSample<T>> {
        self.check_obs(obs.len())?;
        let (mean, log_std) = self.head_batch(&Matrix::row_vector(obs.to_vec()))?;
        let (mean, log_std) = (mean.as_slice(), log_std.as_slice());
        let raw: Vec<T> = if stochastic {
            mean.iter()
                .zip(log_std)
                .map(|(&m, &ls)| {
                    let eps: f64 = rng.sample(StandardNormal);
                    m + ls.exp() * T::lit(eps)
                })
                .collect()
        } else {
            mean.to_vec()
        };
        let squashed: Vec<T> = raw.iter().map(|u| u.tanh()).collect();
        Ok(ActionSample {
            action: self.spec.to_env(&squashed),
            log_prob: self.log_prob_raw(mean, log_std, &raw),
            squashed,
            raw,
        })
    }

    pub fn act_deterministic(&self, obs: &[T]) -> Result<Vec<T>> {
        self.check_obs(obs.len())?;
        let (mean, _) = self.head_batch(&Matrix::row_vector(obs.to_vec()))?;
        let squashed: Vec<T> = mean.as_slice().iter().map(|u| u.tanh()).collect();
        Ok(self.spec.to_env(&squashed))
    }

    /// Records mean and log-std on a tape.
    pub fn record_head(&self, tape: &mut Tape<T>, obs: Var, trainable: bool) -> Result<HeadVars> {
        let adim = self.action_dim();
        let n = tape.shape(obs).0;
        let vars = self.net.record(tape, obs, trainable)?;
        let (lo, hi) = (self.log_std_min, self.log_std_max);
        match &self.std_head {
            StdHead::StateDependent => {
                let mean = tape.slice_cols(vars.output, 0, adim)?;
                let ls = tape.slice_cols(vars.output, adim, adim)?;
                let ls = tape.clamp(ls, lo, hi);
                Ok(HeadVars {
                    net_params: vars.params,
                    log_std_param: None,
                    mean,
                    log_std: ls,
                })
            }
            StdHead::Global(g) => {
                let p = if trainable {
                    tape.param(g.clone())
                } else {
                    tape.constant(g.clone())
                };
                let clamped = tape.clamp(p, lo, hi);
                let ls = tape.broadcast_rows(clamped, n)?;
                Ok(HeadVars {
                    net_params: vars.params,
                    log_std_param: Some(p),
                    mean: vars.output,
                    log_std: ls,
                })
            }
        }
    }

    /// Per-row log density of stored pre-squash actions `raw` (`batch x adim`,
    /// constant) under the recorded head. Returns a `batch x 1` node.
    pub fn record_log_prob(&self, tape: &mut Tape<T>, head: &HeadVars, raw: &Matrix<T>) -> Result<Var> {
        let u = tape.constant(raw.clone());
        let diff = tape.sub(u, head.mean)?;
        let neg_ls = tape.neg(head.log_std);
        let inv_std = tape.exp(neg_ls);
        let z = tape.mul(diff, inv_std)?;
        let z2 = tape.square(z);
        let gauss = tape.scale(z2, T::lit(-0.5));
        let gauss = tape.sub(gauss, head.log_std)?;
        let per_row = tape.sum_cols(gauss);
        // Jacobian terms depend only on the stored raw action.
        let mut consts = Vec::with_capacity(raw.rows());
        let adim = T::from_usize_lossy(raw.cols());
        for i in 0..raw.rows() {
            let corr: T = raw
                .row(i)
                .iter()
                .map(|&x| {
                    let t = x.tanh();
                    (T::one() - t * t + T::lit(SQUASH_EPS)).ln()
                })
                .sum();
            consts.push(-corr - adim * T::lit(HALF_LN_2PI) - self.spec.log_scale());
        }
        let c = tape.constant(Matrix::from_vec(raw.rows(), 1, consts)?);
        tape.add(per_row, c)
    }

    /// Reparameterized sample on the tape: `raw = mean + exp(log_std) * noise`,
    /// returning `(squashed batch x adim, log_prob batch x 1)`.
    pub fn record_rsample(&self, tape: &mut Tape<T>, head: &HeadVars, noise: &Matrix<T>) -> Result<(Var, Var)> {
        let eps = tape.constant(noise.clone());
        let std = tape.exp(head.log_std);
        let scaled = tape.mul(std, eps)?;
        let raw = tape.add(head.mean, scaled)?;
        let squashed = tape.tanh(raw);
        let sq = tape.square(squashed);
        let one_minus = tape.scale(sq, -T::one());
        let one_minus = tape.add_scalar(one_minus, T::one() + T::lit(SQUASH_EPS));
        let corr = tape.ln(one_minus);
        let gauss_const: Vec<T> = (0..noise.rows())
            .map(|i| {
                let e2: T = noise.row(i).iter().map(|&e| e * e).sum();
                -T::lit(0.5) * e2
                    - T::from_usize_lossy(noise.cols()) * T::lit(HALF_LN_2PI)
                    - self.spec.log_scale()
            })
            .collect();
        let terms = tape.add(head.log_std, corr)?;
        let terms = tape.sum_cols(terms);
        let terms = tape.neg(terms);
        let c = tape.constant(Matrix::from_vec(noise.rows(), 1, gauss_const)?);
        let log_prob = tape.add(terms, c)?;
        Ok((squashed, log_prob))
    }

    /// Writes the policy under `prefix` into a checkpoint.
    pub fn save(&self, ck: &mut Checkpoint<T>, prefix: &str) {
        ck.push_mlp(&format!("{prefix}.net"), &self.net);
        let b: Vec<String> = self
            .spec
            .bounds
            .iter()
            .map(|b| format!("{:?}:{:?}", b.lo.as_f64(), b.hi.as_f64()))
            .collect();
        ck.set_meta(&format!("{prefix}.bounds"), b.join(","));
        ck.set_meta(
            &format!("{prefix}.log_std_band"),
            format!("{:?}:{:?}", self.log_std_min.as_f64(), self.log_std_max.as_f64()),
        );
        if let StdHead::Global(g) = &self.std_head {
            ck.tensors.push((format!("{prefix}.log_std"), g.clone()));
        }
    }

    pub fn load(ck: &Checkpoint<T>, prefix: &str) -> Result<Self> {
        let net = ck.read_mlp(&format!("{prefix}.net"))?;
        let pair = |s: &str| -> Result<(T, T)> {
            let (a, b) = s
                .split_once(':')
                .ok_or_else(|| Error::Checkpoint(format!("bad interval {s:?}")))?;
            let p = |x: &str| {
                x.parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| Error::Checkpoint(format!("bad number {x:?}")))
            };
            Ok((p(a)?, p(b)?))
        };
        let bounds = ck
            .meta(&format!("{prefix}.bounds"))
            .ok_or_else(|| Error::Checkpoint(format!("missing {prefix}.bounds")))?
            .split(',')
            .map(|s| pair(s).map(|(lo, hi)| Interval::new(lo, hi)))
            .collect::<Result<Vec<_>>>()?;
        let (lo, hi) = pair(
            ck.meta(&format!("{prefix}.log_std_band"))
                .ok_or_else(|| Error::Checkpoint(format!("missing {prefix}.log_std_band")))?,
        )?;
        let std_head = match ck.tensor(&format!("{prefix}.log_std")) {
            Some(g) => StdHead::Global(g.clone()),
            None => StdHead::StateDependent,
        };
        let adim = bounds.len();
        let expected_out = match std_head {
            StdHead::Global(_) => adim,
            StdHead::StateDependent => 2 * adim,
        };
        if net.output_dim() != expected_out {
            return Err(Error::Checkpoint(format!(
                "{prefix}: network output {} does not match action dim {adim}",
                net.output_dim()
            )));
        }
        Ok(Self {
            net,
            std_head,
            spec: ActionSpec { bounds },
            log_std_min: lo,
            log_std_max: hi,
        })
    }
}
