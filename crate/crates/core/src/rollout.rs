//! Driving the environment with a fixed controller.

use crate::demand::DemandSampler;
use crate::env::{ChainState, JointAction, SupplyChain};
use crate::error::Result;
use crate::metrics::{EpisodeTrace, TraceRow};
use crate::scalar::Scalar;

/// Anything that maps a chain state to a joint action.
pub trait Controller<T: Scalar> {
    fn act(&mut self, state: &ChainState<T>) -> Result<JointAction<T>>;
}

/// Plays one episode of `env.horizon()` steps from a fresh reset.
pub fn run_episode<T: Scalar, C: Controller<T> + ?Sized>(
    env: &SupplyChain<T>,
    controller: &mut C,
    demand: &mut DemandSampler<T>,
    initial_price: T,
) -> Result<EpisodeTrace> {
    let mut state = env.reset(initial_price)?;
    let mut rows = Vec::with_capacity(env.horizon());
    while state.t < env.horizon() {
        let action = controller.act(&state)?;
        let d = demand.sample()?;
        let out = env.step(&state, &action, d)?;
        rows.push(TraceRow::from_outcome(state.t, &out));
        state = out.next_state;
    }
    Ok(EpisodeTrace { rows })
}

/// Environment plus demand process for one experiment cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig<T> {
    pub params: crate::env::ChainParams<T>,
    pub reward_mode: crate::env::RewardMode,
    pub demand: crate::demand::DemandModel<T>,
    pub initial_price: T,
    pub strict: bool,
}

impl<T: Scalar> EnvConfig<T> {
    /// Reference parameters, unshaped rewards, initial price 3.
    pub fn new(demand: crate::demand::DemandModel<T>) -> Self {
        Self {
            params: crate::env::ChainParams::default(),
            reward_mode: crate::env::RewardMode::Baseline,
            demand,
            initial_price: T::lit(3.0),
            strict: false,
        }
    }

    pub fn with_reward(mut self, mode: crate::env::RewardMode) -> Self {
        self.reward_mode = mode;
        self
    }

    pub fn build(&self) -> Result<SupplyChain<T>> {
        self.demand.validate()?;
        Ok(SupplyChain::new(self.params.clone(), self.reward_mode)?.strict(self.strict))
    }
}

/// Plays `episodes` episodes, each on its own evaluation demand stream derived
/// from `seed`.
pub fn evaluate<T: Scalar, C: Controller<T> + ?Sized>(
    cfg: &EnvConfig<T>,
    controller: &mut C,
    seed: u64,
    episodes: usize,
) -> Result<Vec<EpisodeTrace>> {
    let env = cfg.build()?;
    (0..episodes)
        .map(|e| {
            let mut demand = DemandSampler::new(cfg.demand.clone(), crate::seeds::evaluation_demand(seed, e as u64))?;
            run_episode(&env, controller, &mut demand, cfg.initial_price)
        })
        .collect()
}
