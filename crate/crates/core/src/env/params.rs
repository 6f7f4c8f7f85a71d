//! Per-echelon economic constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: T) -> T {
        x.max(self.lo).min(self.hi)
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> T {
        (self.lo + self.hi) * T::lit(0.5)
    }
}

/// What an echelon pays per unit it orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PurchaseCost<T> {
    Fixed(T),
    /// Pays the upstream echelon's current sales price.
    UpstreamPrice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchelonParams<T> {
    pub sales_price_range: Interval<T>,
    pub order_range: Interval<T>,
    pub purchase_cost: PurchaseCost<T>,
    pub holding_cost: T,
    pub initial_inventory: T,
    /// Physical capacity. Used for observation scaling only; the overstock
    /// penalty starts at `backlog_threshold`.
    pub capacity: T,
    pub stockout_cost: T,
    pub backlog_cost: T,
    pub backlog_threshold: T,
    pub horizon: usize,
}

impl<T: Scalar> EchelonParams<T> {
    /// Retailer row of the reference two-echelon chain.
    pub fn retailer() -> Self {
        Self {
            sales_price_range: Interval::new(T::zero(), T::lit(6.0)),
            order_range: Interval::new(T::zero(), T::lit(20.0)),
            purchase_cost: PurchaseCost::UpstreamPrice,
            holding_cost: T::lit(0.2),
            initial_inventory: T::lit(10.0),
            capacity: T::lit(19.0),
            stockout_cost: T::lit(140.0),
            backlog_cost: T::one(),
            backlog_threshold: T::lit(20.0),
            horizon: 30,
        }
    }

    /// Factory row of the reference two-echelon chain.
    pub fn factory() -> Self {
        Self {
            sales_price_range: Interval::new(T::zero(), T::lit(6.0)),
            order_range: Interval::new(T::zero(), T::lit(20.0)),
            purchase_cost: PurchaseCost::Fixed(T::lit(0.2)),
            holding_cost: T::lit(0.2),
            initial_inventory: T::lit(10.0),
            capacity: T::lit(59.0),
            stockout_cost: T::lit(70.0),
            backlog_cost: T::one(),
            backlog_threshold: T::lit(60.0),
            horizon: 30,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{name}: {what}")));
        let finite = [
            self.sales_price_range.lo,
            self.sales_price_range.hi,
            self.order_range.lo,
            self.order_range.hi,
            self.holding_cost,
            self.initial_inventory,
            self.capacity,
            self.stockout_cost,
            self.backlog_cost,
            self.backlog_threshold,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.sales_price_range.lo > self.sales_price_range.hi {
            return bad("sales price range bounds inverted");
        }
        if self.order_range.lo > self.order_range.hi {
            return bad("order range bounds inverted");
        }
        if self.sales_price_range.lo < T::zero() || self.order_range.lo < T::zero() {
            return bad("ranges must be nonnegative");
        }
        if self.holding_cost < T::zero()
            || self.stockout_cost < T::zero()
            || self.backlog_cost < T::zero()
        {
            return bad("costs must be nonnegative");
        }
        if let PurchaseCost::Fixed(c) = self.purchase_cost {
            if !c.is_finite() || c < T::zero() {
                return bad("purchase cost must be finite and nonnegative");
            }
        }
        if self.capacity < T::zero() {
            return bad("capacity must be nonnegative");
        }
        if self.initial_inventory < T::zero() || self.backlog_threshold < T::zero() {
            return bad("inventory levels must be nonnegative");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        Ok(())
    }
}

/// Parameters for the retailer (echelon 1) and factory (echelon 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams<T> {
    pub retailer: EchelonParams<T>,
    pub factory: EchelonParams<T>,
}

impl<T: Scalar> Default for ChainParams<T> {
    fn default() -> Self {
        Self {
            retailer: EchelonParams::retailer(),
            factory: EchelonParams::factory(),
        }
    }
}

impl<T: Scalar> ChainParams<T> {
    pub fn validate(&self) -> Result<()> {
        self.retailer.validate("retailer")?;
        self.factory.validate("factory")?;
        if self.retailer.horizon != self.factory.horizon {
            return Err(Error::Config(format!(
                "echelon horizons differ: {} vs {}",
                self.retailer.horizon, self.factory.horizon
            )));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.retailer.horizon
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.retailer.horizon = horizon;
        self.factory.horizon = horizon;
        self
    }
}
