//! Non-learning comparison policies and the economic order quantity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ChainParams, ChainState, Echelon, EchelonParams, JointAction};
use crate::error::{Error, Result};
use crate::rollout::Controller;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EoqInputs<T> {
    pub demand_rate: T,
    pub order_cost: T,
    pub holding_cost: T,
    pub stockout_cost: T,
}

/// `sqrt(2 D Oc / Hc) * sqrt((Hc + Sc) / Sc)`.
pub fn eoq<T: Scalar>(x: &EoqInputs<T>) -> Result<T> {
    for (name, v) in [
        ("demand_rate", x.demand_rate),
        ("order_cost", x.order_cost),
        ("holding_cost", x.holding_cost),
        ("stockout_cost", x.stockout_cost),
    ] {
        if !(v.is_finite() && v > T::zero()) {
            return Err(Error::InvalidInput(format!("eoq {name} must be positive, got {v}")));
        }
    }
    let two = T::lit(2.0);
    let base = (two * x.demand_rate * x.order_cost / x.holding_cost).sqrt();
    Ok(base * ((x.holding_cost + x.stockout_cost) / x.stockout_cost).sqrt())
}

/// EOQ rounded to the nearest whole unit.
pub fn eoq_rounded<T: Scalar>(x: &EoqInputs<T>) -> Result<T> {
    Ok(eoq(x)?.round())
}

/// Per-echelon rule of thumb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HeuristicPolicy {
    /// Order up to `target` and sell at `price`.
    BaseStock { target: f64, price: f64 },
    ConstantOrder { q: f64, price: f64 },
    /// Uniform over the legal order and price ranges.
    Random { seed: u64 },
}

/// A heuristic together with the generator it owns.
#[derive(Debug, Clone)]
pub struct Heuristic {
    policy: HeuristicPolicy,
    rng: ChaCha8Rng,
}

impl Heuristic {
    pub fn new(policy: HeuristicPolicy) -> Self {
        let seed = match policy {
            HeuristicPolicy::Random { seed } => seed,
            _ => 0,
        };
        Self {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn policy(&self) -> HeuristicPolicy {
        self.policy
    }

    /// `(order, price)` for an echelon holding `inventory`.
    pub fn act<T: Scalar>(&mut self, inventory: T, params: &EchelonParams<T>) -> (T, T) {
        let (orders, prices) = (params.order_range, params.sales_price_range);
        match self.policy {
            HeuristicPolicy::BaseStock { target, price } => {
                let q = (T::lit(target) - inventory).max(T::zero());
                (orders.clamp(q), prices.clamp(T::lit(price)))
            }
            HeuristicPolicy::ConstantOrder { q, price } => (orders.clamp(T::lit(q)), prices.clamp(T::lit(price))),
            HeuristicPolicy::Random { .. } => {
                let u: f64 = self.rng.random_range(0.0..=1.0);
                let v: f64 = self.rng.random_range(0.0..=1.0);
                (
                    orders.lo + T::lit(u) * orders.width(),
                    prices.lo + T::lit(v) * prices.width(),
                )
            }
        }
    }
}

/// Drives both echelons with independent heuristics.
#[derive(Debug, Clone)]
pub struct HeuristicController<T> {
    pub retailer: Heuristic,
    pub factory: Heuristic,
    params: ChainParams<T>,
}

impl<T: Scalar> HeuristicController<T> {
    pub fn new(params: ChainParams<T>, retailer: HeuristicPolicy, factory: HeuristicPolicy) -> Self {
        Self {
            retailer: Heuristic::new(retailer),
            factory: Heuristic::new(factory),
            params,
        }
    }

    /// Uniform-random actions at both echelons from one seed.
    pub fn uniform_random(params: ChainParams<T>, seed: u64) -> Self {
        let s = crate::seeds::mix(seed);
        Self::new(
            params,
            HeuristicPolicy::Random { seed: s },
            HeuristicPolicy::Random { seed: crate::seeds::mix(s) },
        )
    }
}

impl<T: Scalar> Controller<T> for HeuristicController<T> {
    fn act(&mut self, state: &ChainState<T>) -> Result<JointAction<T>> {
        let (q1, p1) = self
            .retailer
            .act(state.echelon(Echelon::Retailer).inventory, &self.params.retailer);
        let (q2, p2) = self
            .factory
            .act(state.echelon(Echelon::Factory).inventory, &self.params.factory);
        Ok(JointAction::new(q1, p1, q2, p2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandModel, DemandSampler};
    use crate::env::{RewardMode, SupplyChain};
    use crate::rollout::run_episode;

    fn inputs(d: f64, oc: f64, hc: f64, sc: f64) -> EoqInputs<f64> {
        EoqInputs {
            demand_rate: d,
            order_cost: oc,
            holding_cost: hc,
            stockout_cost: sc,
        }
    }

    #[test]
    fn eoq_reference_values() {
        assert!((eoq(&inputs(4.0, 2.0, 1.0, 1e9)).unwrap() - 4.0).abs() < 1e-3);
        let q = eoq(&inputs(10.0, 5.0, 0.2, 140.0)).unwrap();
        let want = 500f64.sqrt() * (140.2f64 / 140.0).sqrt();
        assert!((q - want).abs() < 1e-12);
        assert!((q - 22.38).abs() < 1e-2);
        assert_eq!(eoq_rounded(&inputs(10.0, 5.0, 0.2, 140.0)).unwrap(), 22.0);
        let base = (2.0f64 * 3.0 * 7.0 / 5.0).sqrt();
        assert!((eoq(&inputs(3.0, 7.0, 5.0, 5.0)).unwrap() / base - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eoq_rejects_nonpositive() {
        assert!(eoq(&inputs(0.0, 1.0, 1.0, 1.0)).is_err());
        assert!(eoq(&inputs(1.0, -1.0, 1.0, 1.0)).is_err());
        assert!(eoq(&inputs(1.0, 1.0, f64::NAN, 1.0)).is_err());
    }

    #[test]
    fn eoq_monotone_on_grid() {
        let grid = [0.5, 1.0, 2.0, 5.0, 10.0];
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    let f = |d, oc, hc| eoq(&inputs(d, oc, hc, c)).unwrap();
                    assert!(f(a * 1.1, b, 1.0) > f(a, b, 1.0));
                    assert!(f(a, b * 1.1, 1.0) > f(a, b, 1.0));
                    assert!(f(a, b, b * 1.1) < f(a, b, b));
                }
            }
        }
    }

    #[test]
    fn base_stock_orders() {
        let p = EchelonParams::<f64>::retailer();
        let mut h = Heuristic::new(HeuristicPolicy::BaseStock { target: 15.0, price: 4.0 });
        assert_eq!(h.act(10.0, &p), (5.0, 4.0));
        assert_eq!(h.act(20.0, &p), (0.0, 4.0));
        let mut big = Heuristic::new(HeuristicPolicy::BaseStock { target: 100.0, price: 9.0 });
        assert_eq!(big.act(0.0, &p), (20.0, 6.0));
    }

    #[test]
    fn constant_order_is_fixed() {
        let p = EchelonParams::<f64>::factory();
        let mut h = Heuristic::new(HeuristicPolicy::ConstantOrder { q: 7.0, price: 2.5 });
        assert_eq!(h.act(3.0, &p), (7.0, 2.5));
        assert_eq!(h.act(50.0, &p), (7.0, 2.5));
    }

    #[test]
    fn random_orders_are_uniform() {
        let p = EchelonParams::<f64>::retailer();
        let mut h = Heuristic::new(HeuristicPolicy::Random { seed: 3 });
        let n = 100_000;
        let (mut sq, mut sp) = (0.0, 0.0);
        for _ in 0..n {
            let (q, pr) = h.act(0.0, &p);
            assert!((0.0..=20.0).contains(&q) && (0.0..=6.0).contains(&pr));
            sq += q;
            sp += pr;
        }
        assert!((sq / n as f64 - 10.0).abs() < 0.1);
        assert!((sp / n as f64 - 3.0).abs() < 0.03);
    }

    fn base_stock_trace(d: usize, target: usize) -> crate::metrics::EpisodeTrace {
        let params = ChainParams::<f64>::default();
        let env = SupplyChain::new(params.clone(), RewardMode::Baseline).unwrap();
        let mut c = HeuristicController::new(
            params,
            HeuristicPolicy::BaseStock { target: target as f64, price: 5.0 },
            HeuristicPolicy::BaseStock { target: 60.0, price: 3.0 },
        );
        let mut demand = DemandSampler::new(DemandModel::Scripted(vec![d as f64; 30]), 0).unwrap();
        run_episode(&env, &mut c, &mut demand, 3.0).unwrap()
    }

    #[test]
    fn base_stock_never_stocks_out_under_constant_demand() {
        // sales draw on the stock held at the start of the step, so the
        // steady-state opening level is target - d
        for d in 0..=10 {
            for target in 2 * d..=20 {
                let tr = base_stock_trace(d, target);
                assert!(tr.rows[1..].iter().all(|r| r.retailer_stockout == 0.0), "d={d} target={target}");
            }
        }
    }

    #[test]
    fn base_stock_below_twice_demand_runs_short() {
        for d in 1..=10 {
            for target in d..2 * d {
                let tr = base_stock_trace(d, target);
                assert!(tr.rows.iter().any(|r| r.retailer_stockout > 0.0), "d={d} target={target}");
            }
        }
    }
}
