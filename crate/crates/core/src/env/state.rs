use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Echelon {
    Retailer,
    Factory,
}

impl Echelon {
    pub const ALL: [Echelon; 2] = [Echelon::Retailer, Echelon::Factory];

    /// 1 = retailer, 2 = factory.
    pub fn from_index(i: usize) -> crate::Result<Self> {
        match i {
            1 => Ok(Echelon::Retailer),
            2 => Ok(Echelon::Factory),
            other => Err(crate::Error::InvalidEchelon(other)),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Echelon::Retailer => 1,
            Echelon::Factory => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Echelon::Retailer => "retailer",
            Echelon::Factory => "factory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchelonState<T> {
    pub inventory: T,
    /// Overstock above the penalty threshold, `max(I - threshold, 0)`.
    pub backlog_level: T,
    /// Demand left unmet in the last step.
    pub stockout_level: T,
    /// `(D[t-2], D[t-1], D[t])`, oldest first.
    pub demand_history: [T; 3],
}

impl<T: Scalar> EchelonState<T> {
    pub fn fresh(inventory: T, threshold: T) -> Self {
        Self {
            inventory,
            backlog_level: (inventory - threshold).pos(),
            stockout_level: T::zero(),
            demand_history: [T::zero(); 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainState<T> {
    pub retailer: EchelonState<T>,
    pub factory: EchelonState<T>,
    /// The factory's most recent sales price.
    pub upstream_price: T,
    pub t: usize,
}

impl<T> ChainState<T> {
    pub fn echelon(&self, e: Echelon) -> &EchelonState<T> {
        match e {
            Echelon::Retailer => &self.retailer,
            Echelon::Factory => &self.factory,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAction<T> {
    pub retailer_order: T,
    pub retailer_price: T,
    pub factory_order: T,
    pub factory_price: T,
}

impl<T: Scalar> JointAction<T> {
    pub fn new(retailer_order: T, retailer_price: T, factory_order: T, factory_price: T) -> Self {
        Self {
            retailer_order,
            retailer_price,
            factory_order,
            factory_price,
        }
    }

    pub fn order(&self, e: Echelon) -> T {
        match e {
            Echelon::Retailer => self.retailer_order,
            Echelon::Factory => self.factory_order,
        }
    }

    pub fn price(&self, e: Echelon) -> T {
        match e {
            Echelon::Retailer => self.retailer_price,
            Echelon::Factory => self.factory_price,
        }
    }
}

/// Cross-echelon stockout penalties added on top of each echelon's own profit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// Each echelon receives only its own profit.
    #[default]
    Baseline,
    /// Factory is also charged for retailer stockouts.
    PeaRSO,
    /// Retailer is also charged for factory stockouts.
    PeaFSO,
    /// Both cross-penalties.
    Colla,
}

impl RewardMode {
    pub const ALL: [RewardMode; 4] = [
        RewardMode::Baseline,
        RewardMode::PeaRSO,
        RewardMode::PeaFSO,
        RewardMode::Colla,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RewardMode::Baseline => "baseline",
            RewardMode::PeaRSO => "pearso",
            RewardMode::PeaFSO => "peafso",
            RewardMode::Colla => "colla",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

/// What happened at one echelon during a step. All quantities are nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchelonInfo<T> {
    /// Inventory the step started from.
    pub inventory: T,
    pub demand: T,
    pub sold: T,
    pub stockout: T,
    /// Overstock penalized this step.
    pub backlog: T,
    pub order: T,
    pub price: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo<T> {
    pub retailer: EchelonInfo<T>,
    pub factory: EchelonInfo<T>,
}

impl<T> StepInfo<T> {
    pub fn echelon(&self, e: Echelon) -> &EchelonInfo<T> {
        match e {
            Echelon::Retailer => &self.retailer,
            Echelon::Factory => &self.factory,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub next_state: ChainState<T>,
    /// `(r1, r2)` after reward shaping.
    pub rewards: (T, T),
    /// `(r1, r2)` before reward shaping.
    pub profits: (T, T),
    /// The action actually applied after clamping and order rounding.
    pub applied: JointAction<T>,
    pub info: StepInfo<T>,
    pub done: bool,
}
