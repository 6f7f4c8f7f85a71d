//! Per-echelon profit and the cross-echelon shaping penalties.

use super::params::{EchelonParams, PurchaseCost};
use super::state::{EchelonState, JointAction, RewardMode};
use crate::scalar::Scalar;

fn unit_purchase_cost<T: Scalar>(params: &EchelonParams<T>, action: &JointAction<T>) -> T {
    match params.purchase_cost {
        PurchaseCost::Fixed(c) => c,
        PurchaseCost::UpstreamPrice => action.factory_price,
    }
}

/// Retailer profit for one step, charged on the inventory held before the transition:
///
/// `Sp1*D - Hc*I1 - Bc*max(I1 - threshold, 0) - Sc*max(D - I1, 0) - Sp2*Q1`
pub fn retailer_reward<T: Scalar>(
    params: &EchelonParams<T>,
    pre: &EchelonState<T>,
    action: &JointAction<T>,
    demand: T,
) -> T {
    let inv = pre.inventory;
    action.retailer_price * demand
        - params.holding_cost * inv
        - params.backlog_cost * (inv - params.backlog_threshold).pos()
        - params.stockout_cost * (demand - inv).pos()
        - unit_purchase_cost(params, action) * action.retailer_order
}

/// Factory profit for one step. The factory's demand is the retailer's order:
///
/// `Sp2*Q1 - Hc*I2 - Bc*max(I2 - threshold, 0) - Sc*max(Q1 - I2, 0) - c2*Q2`
pub fn factory_reward<T: Scalar>(
    params: &EchelonParams<T>,
    pre: &EchelonState<T>,
    action: &JointAction<T>,
) -> T {
    let inv = pre.inventory;
    let demand = action.retailer_order;
    action.factory_price * demand
        - params.holding_cost * inv
        - params.backlog_cost * (inv - params.backlog_threshold).pos()
        - params.stockout_cost * (demand - inv).pos()
        - unit_purchase_cost(params, action) * action.factory_order
}

/// Quantities the shaping penalties depend on, all measured before the transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingInputs<T> {
    pub demand: T,
    pub retailer_inventory: T,
    pub retailer_order: T,
    pub factory_inventory: T,
    /// Per-unit cost charged for a retailer stockout.
    pub retailer_stockout_cost: T,
    /// Per-unit cost charged for a factory stockout.
    pub factory_stockout_cost: T,
}

/// Charges each echelon for the partner's stockout according to `mode`.
/// No profit changes hands; only penalties are added.
pub fn apply_shaping<T: Scalar>(mode: RewardMode, base: (T, T), x: &ShapingInputs<T>) -> (T, T) {
    let factory_short = x.factory_stockout_cost * (x.retailer_order - x.factory_inventory).pos();
    let retailer_short = x.retailer_stockout_cost * (x.demand - x.retailer_inventory).pos();
    let (r1, r2) = base;
    match mode {
        RewardMode::Baseline => (r1, r2),
        RewardMode::PeaRSO => (r1, r2 - retailer_short),
        RewardMode::PeaFSO => (r1 - factory_short, r2),
        RewardMode::Colla => (r1 - factory_short, r2 - retailer_short),
    }
}
