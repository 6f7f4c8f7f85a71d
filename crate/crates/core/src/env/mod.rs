//! Two-echelon supply chain: a retailer facing customer demand and a factory
//! supplying the retailer.
//!
//! The environment is a pure function of `(state, action, demand)`. It holds no
//! RNG, so any number of states can be driven from one `SupplyChain`.

mod observe;
mod params;
mod reward;
mod state;

pub use observe::{
    observe_echelon, observe_heterogeneous, observe_homogeneous, HETEROGENEOUS_OBS_DIM,
    HOMOGENEOUS_FROM_CONCAT, HOMOGENEOUS_OBS_DIM,
};
pub use params::{ChainParams, EchelonParams, Interval, PurchaseCost};
pub use reward::{apply_shaping, factory_reward, retailer_reward, ShapingInputs};
pub use state::{
    ChainState, Echelon, EchelonInfo, EchelonState, JointAction, RewardMode, StepInfo,
    StepOutcome,
};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SupplyChain<T> {
    params: ChainParams<T>,
    mode: RewardMode,
    strict: bool,
}

impl<T: Scalar> SupplyChain<T> {
    pub fn new(params: ChainParams<T>, mode: RewardMode) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            mode,
            strict: false,
        })
    }

    /// Out-of-range actions become errors instead of being clamped.
    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn params(&self) -> &ChainParams<T> {
        &self.params
    }

    pub fn reward_mode(&self) -> RewardMode {
        self.mode
    }

    pub fn horizon(&self) -> usize {
        self.params.horizon()
    }

    pub fn reset(&self, initial_price: T) -> Result<ChainState<T>> {
        let range = self.params.factory.sales_price_range;
        if !initial_price.is_finite() || !range.contains(initial_price) {
            return Err(Error::Config(format!(
                "initial price {initial_price} outside factory price range [{}, {}]",
                range.lo, range.hi
            )));
        }
        let r = &self.params.retailer;
        let f = &self.params.factory;
        Ok(ChainState {
            retailer: EchelonState::fresh(r.initial_inventory, r.backlog_threshold),
            factory: EchelonState::fresh(f.initial_inventory, f.backlog_threshold),
            upstream_price: initial_price,
            t: 0,
        })
    }

    /// Clamps (or, in strict mode, rejects) out-of-range fields and rounds
    /// orders to whole units.
    pub fn legalize(&self, action: &JointAction<T>) -> Result<JointAction<T>> {
        let r = &self.params.retailer;
        let f = &self.params.factory;
        let fields = [
            ("retailer_order", action.retailer_order, r.order_range),
            ("retailer_price", action.retailer_price, r.sales_price_range),
            ("factory_order", action.factory_order, f.order_range),
            ("factory_price", action.factory_price, f.sales_price_range),
        ];
        let mut out = [T::zero(); 4];
        for (slot, (field, value, range)) in out.iter_mut().zip(fields) {
            if !value.is_finite() {
                return Err(Error::NonFiniteAction(field));
            }
            if self.strict && !range.contains(value) {
                return Err(Error::ActionOutOfRange {
                    field,
                    value: value.as_f64(),
                    lo: range.lo.as_f64(),
                    hi: range.hi.as_f64(),
                });
            }
            *slot = range.clamp(value);
        }
        // Rounding can step outside a non-integral range; clamp again.
        let q1 = r.order_range.clamp(out[0].round());
        let q2 = f.order_range.clamp(out[2].round());
        Ok(JointAction::new(q1, out[1], q2, out[3]))
    }

    pub fn step(
        &self,
        state: &ChainState<T>,
        action: &JointAction<T>,
        customer_demand: T,
    ) -> Result<StepOutcome<T>> {
        let horizon = self.horizon();
        if state.t >= horizon {
            return Err(Error::EpisodeFinished { t: state.t, horizon });
        }
        if !customer_demand.is_finite() || customer_demand < T::zero() {
            return Err(Error::InvalidDemand(customer_demand.as_f64()));
        }
        let a = self.legalize(action)?;
        let rp = &self.params.retailer;
        let fp = &self.params.factory;

        let r1 = retailer_reward(rp, &state.retailer, &a, customer_demand);
        let r2 = factory_reward(fp, &state.factory, &a);
        let shaping = ShapingInputs {
            demand: customer_demand,
            retailer_inventory: state.retailer.inventory,
            retailer_order: a.retailer_order,
            factory_inventory: state.factory.inventory,
            retailer_stockout_cost: rp.stockout_cost,
            factory_stockout_cost: fp.stockout_cost,
        };
        let rewards = apply_shaping(self.mode, (r1, r2), &shaping);

        let (retailer, r_info) = advance(
            &state.retailer,
            rp,
            a.retailer_order,
            a.retailer_price,
            customer_demand,
        );
        // The retailer's order is the factory's demand.
        let (factory, f_info) = advance(
            &state.factory,
            fp,
            a.factory_order,
            a.factory_price,
            a.retailer_order,
        );
        let next_state = ChainState {
            retailer,
            factory,
            upstream_price: a.factory_price,
            t: state.t + 1,
        };
        Ok(StepOutcome {
            done: next_state.t >= horizon,
            next_state,
            rewards,
            profits: (r1, r2),
            applied: a,
            info: StepInfo {
                retailer: r_info,
                factory: f_info,
            },
        })
    }
}

/// Material balance for one echelon. Unmet demand is lost (recorded as
/// stockout) and inventory never goes below zero.
fn advance<T: Scalar>(
    s: &EchelonState<T>,
    p: &EchelonParams<T>,
    order: T,
    price: T,
    demand: T,
) -> (EchelonState<T>, EchelonInfo<T>) {
    let inv = s.inventory;
    let stockout = (demand - inv).pos();
    let next_inventory = (inv + order - demand).pos();
    let [_, d1, d0] = s.demand_history;
    let next = EchelonState {
        inventory: next_inventory,
        backlog_level: (next_inventory - p.backlog_threshold).pos(),
        stockout_level: stockout,
        demand_history: [d1, d0, demand],
    };
    let info = EchelonInfo {
        inventory: inv,
        demand,
        sold: demand.min(inv),
        stockout,
        backlog: (inv - p.backlog_threshold).pos(),
        order,
        price,
    };
    (next, info)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(mode: RewardMode) -> SupplyChain<f64> {
        SupplyChain::new(ChainParams::default(), mode).unwrap()
    }

    fn with_inventory(env: &SupplyChain<f64>, i1: f64, i2: f64) -> ChainState<f64> {
        let mut s = env.reset(3.0).unwrap();
        s.retailer.inventory = i1;
        s.factory.inventory = i2;
        s
    }

    #[test]
    fn reset_matches_initial_levels() {
        let env = chain(RewardMode::Baseline);
        let s = env.reset(2.5).unwrap();
        assert_eq!(s.retailer.inventory, 10.0);
        assert_eq!(s.factory.inventory, 10.0);
        assert_eq!(s.retailer.backlog_level, 0.0);
        assert_eq!(s.factory.stockout_level, 0.0);
        assert_eq!(s.retailer.demand_history, [0.0; 3]);
        assert_eq!(s.t, 0);
        assert_eq!(s, env.reset(2.5).unwrap());
    }

    #[test]
    fn reset_rejects_bad_price_and_params() {
        let env = chain(RewardMode::Baseline);
        assert!(env.reset(7.0).is_err());
        let mut p = ChainParams::<f64>::default();
        p.retailer.capacity = -1.0;
        assert!(matches!(
            SupplyChain::new(p, RewardMode::Baseline),
            Err(Error::Config(_))
        ));
        let mut p = ChainParams::<f64>::default();
        p.factory.order_range = Interval::new(5.0, 1.0);
        assert!(SupplyChain::new(p, RewardMode::Baseline).is_err());
        let mut p = ChainParams::<f64>::default();
        p.factory.holding_cost = -0.1;
        assert!(SupplyChain::new(p, RewardMode::Baseline).is_err());
    }

    #[test]
    fn material_balance_cases() {
        let env = chain(RewardMode::Baseline);
        let s = with_inventory(&env, 10.0, 30.0);
        let out = env.step(&s, &JointAction::new(5.0, 3.0, 0.0, 2.0), 7.0).unwrap();
        assert_eq!(out.next_state.retailer.inventory, 8.0);
        // factory demand is the retailer order
        assert_eq!(out.next_state.factory.inventory, 25.0);
        assert_eq!(out.next_state.factory.demand_history, [0.0, 0.0, 5.0]);

        let out = env.step(&s, &JointAction::new(6.0, 3.0, 0.0, 2.0), 6.0).unwrap();
        assert_eq!(out.next_state.retailer.inventory, 10.0);

        let s = with_inventory(&env, 3.0, 30.0);
        let out = env.step(&s, &JointAction::new(0.0, 3.0, 0.0, 2.0), 5.0).unwrap();
        assert_eq!(out.next_state.retailer.inventory, 0.0);
        assert_eq!(out.next_state.retailer.stockout_level, 2.0);
        assert_eq!(out.info.retailer.stockout, 2.0);
        assert_eq!(out.info.retailer.sold, 3.0);
    }

    #[test]
    fn price_and_history_shift() {
        let env = chain(RewardMode::Baseline);
        let mut s = env.reset(1.0).unwrap();
        for (k, d) in [4.0, 5.0, 6.0, 7.0].into_iter().enumerate() {
            let out = env
                .step(&s, &JointAction::new(2.0, 3.0, 1.0, 4.5 - k as f64), d)
                .unwrap();
            s = out.next_state;
        }
        assert_eq!(s.retailer.demand_history, [5.0, 6.0, 7.0]);
        assert_eq!(s.factory.demand_history, [2.0, 2.0, 2.0]);
        assert_eq!(s.upstream_price, 1.5);
        assert_eq!(s.t, 4);
    }

    #[test]
    fn step_after_horizon_is_an_error() {
        let env = SupplyChain::new(ChainParams::default().with_horizon(2), RewardMode::Baseline)
            .unwrap();
        let a = JointAction::new(1.0, 1.0, 1.0, 1.0);
        let s0 = env.reset(1.0).unwrap();
        let o1 = env.step(&s0, &a, 1.0).unwrap();
        assert!(!o1.done);
        let o2 = env.step(&o1.next_state, &a, 1.0).unwrap();
        assert!(o2.done);
        assert!(matches!(
            env.step(&o2.next_state, &a, 1.0),
            Err(Error::EpisodeFinished { t: 2, horizon: 2 })
        ));
    }

    #[test]
    fn clamps_by_default_and_rejects_in_strict_mode() {
        let env = chain(RewardMode::Baseline);
        let s = env.reset(1.0).unwrap();
        let wild = JointAction::new(25.0, -1.0, 4.4, 9.0);
        let out = env.step(&s, &wild, 1.0).unwrap();
        assert_eq!(out.applied, JointAction::new(20.0, 0.0, 4.0, 6.0));
        let strict = env.clone().strict(true);
        assert!(matches!(
            strict.step(&s, &wild, 1.0),
            Err(Error::ActionOutOfRange { field: "retailer_order", .. })
        ));
        let nan = JointAction::new(f64::NAN, 1.0, 1.0, 1.0);
        assert!(env.step(&s, &nan, 1.0).is_err());
        assert!(matches!(
            env.step(&s, &JointAction::new(1.0, 1.0, 1.0, 1.0), -1.0),
            Err(Error::InvalidDemand(_))
        ));
    }

    #[test]
    fn observations_on_reset() {
        let env = chain(RewardMode::Baseline);
        let s = env.reset(2.0).unwrap();
        assert_eq!(
            observe_heterogeneous(&s, 1).unwrap(),
            [10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]
        );
        assert_eq!(
            observe_homogeneous(&s),
            [10.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]
        );
        assert!(matches!(observe_heterogeneous(&s, 0), Err(Error::InvalidEchelon(0))));
        assert!(observe_heterogeneous(&s, 3).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let env = SupplyChain::<f32>::new(ChainParams::default(), RewardMode::Colla).unwrap();
        let s = env.reset(3.0).unwrap();
        let out = env.step(&s, &JointAction::new(12.0, 4.0, 0.0, 4.0), 2.0).unwrap();
        assert_eq!(out.next_state.retailer.inventory, 20.0);
        // factory held 10 against an order of 12
        assert_eq!(out.info.factory.stockout, 2.0);
        assert!((out.rewards.0 - (out.profits.0 - 140.0)).abs() < 1e-4);
    }
}
