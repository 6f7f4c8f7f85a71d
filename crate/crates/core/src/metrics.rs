//! Episode traces and the statistics computed from them.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::env::StepOutcome;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One simulated step. Inventories are the levels the step started from;
/// stockout and backlog are the quantities penalized in that step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub demand: f64,
    pub retailer_order: f64,
    pub factory_order: f64,
    pub retailer_price: f64,
    pub factory_price: f64,
    pub retailer_inventory: f64,
    pub factory_inventory: f64,
    pub retailer_stockout: f64,
    pub factory_stockout: f64,
    pub retailer_backlog: f64,
    pub factory_backlog: f64,
    pub retailer_reward: f64,
    pub factory_reward: f64,
}

impl TraceRow {
    pub fn from_outcome<T: Scalar>(t: usize, o: &StepOutcome<T>) -> Self {
        let (r, f) = (&o.info.retailer, &o.info.factory);
        Self {
            t,
            demand: r.demand.as_f64(),
            retailer_order: o.applied.retailer_order.as_f64(),
            factory_order: o.applied.factory_order.as_f64(),
            retailer_price: o.applied.retailer_price.as_f64(),
            factory_price: o.applied.factory_price.as_f64(),
            retailer_inventory: r.inventory.as_f64(),
            factory_inventory: f.inventory.as_f64(),
            retailer_stockout: r.stockout.as_f64(),
            factory_stockout: f.stockout.as_f64(),
            retailer_backlog: r.backlog.as_f64(),
            factory_backlog: f.backlog.as_f64(),
            retailer_reward: o.rewards.0.as_f64(),
            factory_reward: o.rewards.1.as_f64(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    pub rows: Vec<TraceRow>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Total reward of both echelons.
    pub fn total_reward(&self) -> f64 {
        self.rows.iter().map(|r| r.retailer_reward + r.factory_reward).sum()
    }

    pub fn column(&self, f: impl Fn(&TraceRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if self.rows.is_empty() {
            out.write_record(TRACE_COLUMNS)?;
        }
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != TRACE_COLUMNS {
            return Err(Error::InvalidInput(format!("unexpected trace header {header:?}")));
        }
        let rows = rd.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        Ok(Self { rows })
    }
}

pub const TRACE_COLUMNS: [&str; 14] = [
    "t",
    "demand",
    "retailer_order",
    "factory_order",
    "retailer_price",
    "factory_price",
    "retailer_inventory",
    "factory_inventory",
    "retailer_stockout",
    "factory_stockout",
    "retailer_backlog",
    "factory_backlog",
    "retailer_reward",
    "factory_reward",
];

/// Sample mean and `n - 1` standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// `Var(orders) / Var(demands)` with sample variances.
pub fn bullwhip_ratio(orders: &[f64], demands: &[f64]) -> Result<f64> {
    if orders.len() != demands.len() {
        return Err(Error::LengthMismatch {
            context: "bullwhip series",
            left: orders.len(),
            right: demands.len(),
        });
    }
    if orders.len() < 2 {
        return Err(Error::InvalidInput("bullwhip needs at least two points".into()));
    }
    let vd = sample_variance(demands);
    if vd <= 0.0 || !vd.is_finite() {
        return Err(Error::UndefinedRatio);
    }
    Ok(sample_variance(orders) / vd)
}

/// Stopping rule on a learning curve: sliding-window mean over `window`
/// iterations, converged once consecutive window means differ by less than
/// `tol` times the mean absolute value inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceRule {
    pub window: usize,
    pub tol: f64,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        Self { window: 20, tol: 0.01 }
    }
}

/// First index `k` (0-based, `k >= window`) at which the rule fires.
pub fn convergence_check(curve: &[f64], rule: ConvergenceRule) -> Option<usize> {
    let w = rule.window.max(2);
    if curve.len() <= w {
        return None;
    }
    let wf = w as f64;
    let window_mean = |k: usize| curve[k + 1 - w..=k].iter().sum::<f64>() / wf;
    (w..curve.len()).find(|&k| {
        let change = (window_mean(k) - window_mean(k - 1)).abs();
        let scale = curve[k + 1 - w..=k].iter().map(|x| x.abs()).sum::<f64>() / wf;
        change == 0.0 || change < rule.tol * scale
    })
}

/// Identifies one cell of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub demand: String,
    pub architecture: String,
    pub algorithm: String,
    pub reward: String,
}

/// Evaluation traces of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedTraces {
    pub key: GroupKey,
    pub seed: u64,
    pub episodes: Vec<EpisodeTrace>,
}

/// Per-cell aggregate. Rewards are mean and standard deviation over seeds of
/// each seed's mean episode reward; the remaining statistics pool every step
/// of every episode, with counts given per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub demand: String,
    pub architecture: String,
    pub algorithm: String,
    pub reward: String,
    pub seeds: usize,
    pub mean_episode_reward: f64,
    pub std_episode_reward: f64,
    pub retailer_mean_inventory: f64,
    pub factory_mean_inventory: f64,
    pub retailer_mean_price: f64,
    pub factory_mean_price: f64,
    pub retailer_stockout_count: f64,
    pub factory_stockout_count: f64,
    pub retailer_backlog_count: f64,
    pub factory_backlog_count: f64,
    pub retailer_stockout_qty: f64,
    pub factory_stockout_qty: f64,
    pub retailer_backlog_qty: f64,
    pub factory_backlog_qty: f64,
    pub retailer_bullwhip: Option<f64>,
    pub factory_bullwhip: Option<f64>,
    /// Seeds whose run failed; they contribute nothing above.
    pub failed_seeds: usize,
}

pub fn summarize(runs: &[SeedTraces]) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<&GroupKey, Vec<&SeedTraces>> = BTreeMap::new();
    for r in runs {
        groups.entry(&r.key).or_default().push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (key, mut seeds) in groups {
        seeds.sort_by_key(|s| s.seed);
        let name = format!("{}/{}/{}/{}", key.demand, key.architecture, key.algorithm, key.reward);
        if seeds.iter().all(|s| s.episodes.iter().all(EpisodeTrace::is_empty)) {
            return Err(Error::EmptyGroup(name));
        }
        let mut per_seed = Vec::new();
        for s in &seeds {
            if s.episodes.is_empty() {
                return Err(Error::EmptyGroup(format!("{name} seed {}", s.seed)));
            }
            let r: Vec<f64> = s.episodes.iter().map(EpisodeTrace::total_reward).collect();
            per_seed.push(mean_std(&r).0);
        }
        let (mean_r, std_r) = mean_std(&per_seed);
        let episodes: Vec<&EpisodeTrace> = seeds.iter().flat_map(|s| &s.episodes).collect();
        let rows: Vec<&TraceRow> = episodes.iter().flat_map(|e| &e.rows).collect();
        let n_ep = episodes.len() as f64;
        let avg = |f: fn(&TraceRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
        let count = |f: fn(&TraceRow) -> f64| rows.iter().filter(|r| f(r) > 0.0).count() as f64 / n_ep;
        let qty = |f: fn(&TraceRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n_ep;
        let col = |f: fn(&TraceRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
        out.push(SummaryRow {
            demand: key.demand.clone(),
            architecture: key.architecture.clone(),
            algorithm: key.algorithm.clone(),
            reward: key.reward.clone(),
            seeds: seeds.len(),
            mean_episode_reward: mean_r,
            std_episode_reward: std_r,
            retailer_mean_inventory: avg(|r| r.retailer_inventory),
            factory_mean_inventory: avg(|r| r.factory_inventory),
            retailer_mean_price: avg(|r| r.retailer_price),
            factory_mean_price: avg(|r| r.factory_price),
            retailer_stockout_count: count(|r| r.retailer_stockout),
            factory_stockout_count: count(|r| r.factory_stockout),
            retailer_backlog_count: count(|r| r.retailer_backlog),
            factory_backlog_count: count(|r| r.factory_backlog),
            retailer_stockout_qty: qty(|r| r.retailer_stockout),
            factory_stockout_qty: qty(|r| r.factory_stockout),
            retailer_backlog_qty: qty(|r| r.retailer_backlog),
            factory_backlog_qty: qty(|r| r.factory_backlog),
            retailer_bullwhip: bullwhip_ratio(&col(|r| r.retailer_order), &col(|r| r.demand)).ok(),
            factory_bullwhip: bullwhip_ratio(&col(|r| r.factory_order), &col(|r| r.retailer_order)).ok(),
            failed_seeds: 0,
        });
    }
    Ok(out)
}
