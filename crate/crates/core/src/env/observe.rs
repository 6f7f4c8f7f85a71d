//! Observation vectors. Element orders are a frozen contract for trace files.

use super::state::{ChainState, Echelon};
use crate::error::Result;
use crate::scalar::Scalar;

pub const HETEROGENEOUS_OBS_DIM: usize = 7;
pub const HOMOGENEOUS_OBS_DIM: usize = 13;

/// `(I, B, SL, D[t-2], D[t-1], D[t], p)` for one echelon, selected by index
/// (1 = retailer, 2 = factory).
pub fn observe_heterogeneous<T: Scalar>(state: &ChainState<T>, echelon: usize) -> Result<[T; 7]> {
    Ok(observe_echelon(state, Echelon::from_index(echelon)?))
}

pub fn observe_echelon<T: Scalar>(state: &ChainState<T>, echelon: Echelon) -> [T; 7] {
    let s = state.echelon(echelon);
    let [d2, d1, d0] = s.demand_history;
    [
        s.inventory,
        s.backlog_level,
        s.stockout_level,
        d2,
        d1,
        d0,
        state.upstream_price,
    ]
}

/// Joint observation shared by a single policy controlling both echelons:
/// `(I1, I2, B1, B2, SL1, SL2, D1[t-2], D2[t-2], D1[t-1], D2[t-1], D1[t], D2[t], p)`.
pub fn observe_homogeneous<T: Scalar>(state: &ChainState<T>) -> [T; 13] {
    let r = &state.retailer;
    let f = &state.factory;
    [
        r.inventory,
        f.inventory,
        r.backlog_level,
        f.backlog_level,
        r.stockout_level,
        f.stockout_level,
        r.demand_history[0],
        f.demand_history[0],
        r.demand_history[1],
        f.demand_history[1],
        r.demand_history[2],
        f.demand_history[2],
        state.upstream_price,
    ]
}

/// Position of each joint-observation element inside the concatenation
/// `observe_echelon(Retailer) ++ observe_echelon(Factory)`; the shared price
/// maps to the retailer copy.
pub const HOMOGENEOUS_FROM_CONCAT: [usize; 13] = [0, 7, 1, 8, 2, 9, 3, 10, 4, 11, 5, 12, 6];
