//! Comparison tables built from run artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::{Cell, DemandRegime, ExperimentConfig};
use super::{load_controller, seed_dir, write_atomic, RunRecord, CONFIG_SNAPSHOT, RUN_RECORD, TRACE_DIR};
use crate::baselines::{eoq, EoqInputs};
use crate::env::RewardMode;
use crate::error::Result;
use crate::metrics::{mean_std, summarize, EpisodeTrace, GroupKey, SeedTraces, SummaryRow};
use crate::rollout::evaluate;

/// Inventory and reward change from unshaped to collaborative rewards.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub demand: String,
    pub architecture: String,
    pub algorithm: String,
    pub baseline_retailer_inventory: f64,
    pub colla_retailer_inventory: f64,
    pub retailer_inventory_delta: f64,
    pub baseline_factory_inventory: f64,
    pub colla_factory_inventory: f64,
    pub factory_inventory_delta: f64,
    pub reward_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EoqRow {
    pub demand: String,
    pub echelon: String,
    pub demand_rate: f64,
    pub order_cost: f64,
    pub eoq: f64,
    pub eoq_rounded: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: Vec<SummaryRow>,
    pub deltas: Vec<DeltaRow>,
    pub eoq: Vec<EoqRow>,
    pub text: String,
}

fn snapshot_config(root: &Path) -> ExperimentConfig {
    match fs::read_to_string(root.join(CONFIG_SNAPSHOT)).map(|t| ExperimentConfig::from_toml(&t)) {
        Ok(Ok(c)) => c,
        _ => {
            log::warn!("no readable {CONFIG_SNAPSHOT} under {}; using defaults", root.display());
            ExperimentConfig::default()
        }
    }
}

fn read_record(dir: &Path) -> Option<RunRecord> {
    let text = fs::read_to_string(dir.join(RUN_RECORD)).ok()?;
    serde_json::from_str(&text).ok()
}

fn read_traces(dir: &Path) -> Result<Vec<EpisodeTrace>> {
    let mut files: Vec<_> = fs::read_dir(dir.join(TRACE_DIR))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| EpisodeTrace::read_csv(fs::File::open(p)?))
        .collect()
}

/// Finished cells under `root` with their seed directories.
fn scan(root: &Path) -> Result<BTreeMap<Cell, Vec<(u64, std::path::PathBuf)>>> {
    let mut out: BTreeMap<Cell, Vec<(u64, std::path::PathBuf)>> = BTreeMap::new();
    for entry in fs::read_dir(root)? {
        let path = entry?.path();
        let Some(cell) = path.file_name().and_then(|n| n.to_str()).and_then(Cell::parse) else {
            continue;
        };
        if !path.is_dir() {
            continue;
        }
        for sd in fs::read_dir(&path)? {
            let sp = sd?.path();
            if let Some(seed) = sp
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_prefix("seed-"))
                .and_then(|s| s.parse().ok())
            {
                out.entry(cell).or_default().push((seed, sp));
            }
        }
    }
    for v in out.values_mut() {
        v.sort();
    }
    Ok(out)
}

fn key(cell: &Cell) -> GroupKey {
    GroupKey {
        demand: cell.demand.name().into(),
        architecture: cell.architecture.name().into(),
        algorithm: cell.method.name().into(),
        reward: cell.reward.name().into(),
    }
}

fn failed_row(cell: &Cell, failed: usize) -> SummaryRow {
    let k = key(cell);
    SummaryRow {
        demand: k.demand,
        architecture: k.architecture,
        algorithm: k.algorithm,
        reward: k.reward,
        seeds: 0,
        mean_episode_reward: f64::NAN,
        std_episode_reward: f64::NAN,
        retailer_mean_inventory: f64::NAN,
        factory_mean_inventory: f64::NAN,
        retailer_mean_price: f64::NAN,
        factory_mean_price: f64::NAN,
        retailer_stockout_count: f64::NAN,
        factory_stockout_count: f64::NAN,
        retailer_backlog_count: f64::NAN,
        factory_backlog_count: f64::NAN,
        retailer_stockout_qty: f64::NAN,
        factory_stockout_qty: f64::NAN,
        retailer_backlog_qty: f64::NAN,
        factory_backlog_qty: f64::NAN,
        retailer_bullwhip: None,
        factory_bullwhip: None,
        failed_seeds: failed,
    }
}

/// Aggregates every run under `root` into `summary.csv`, `deltas.csv` and
/// `report.txt`. Runs that failed, diverged or never finished are counted per
/// cell and flagged.
pub fn report(root: &Path) -> Result<Report> {
    let cfg = snapshot_config(root);
    let mut summary = Vec::new();
    for (cell, seeds) in scan(root)? {
        let mut ok = Vec::new();
        let mut failed = 0;
        for (seed, dir) in seeds {
            match read_record(&dir) {
                Some(r) if r.status.ok() => ok.push(SeedTraces {
                    key: key(&cell),
                    seed,
                    episodes: read_traces(&dir)?,
                }),
                _ => failed += 1,
            }
        }
        let mut rows = if ok.is_empty() { vec![failed_row(&cell, failed)] } else { summarize(&ok)? };
        for r in &mut rows {
            r.failed_seeds = failed;
        }
        summary.extend(rows);
    }
    let deltas = deltas(&summary);
    let eoq = eoq_rows(&cfg, &summary)?;
    let text = render(&summary, &deltas, &eoq);

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in &summary {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    write_atomic(&root.join("summary.csv"), &buf)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in &deltas {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    write_atomic(&root.join("deltas.csv"), &buf)?;
    write_atomic(&root.join("report.txt"), text.as_bytes())?;
    Ok(Report {
        summary,
        deltas,
        eoq,
        text,
    })
}

fn deltas(summary: &[SummaryRow]) -> Vec<DeltaRow> {
    let find = |r: &SummaryRow, mode: RewardMode| {
        summary.iter().find(|s| {
            s.demand == r.demand && s.architecture == r.architecture && s.algorithm == r.algorithm && s.reward == mode.name()
        })
    };
    summary
        .iter()
        .filter(|r| r.reward == RewardMode::Baseline.name())
        .filter_map(|b| {
            let c = find(b, RewardMode::Colla)?;
            Some(DeltaRow {
                demand: b.demand.clone(),
                architecture: b.architecture.clone(),
                algorithm: b.algorithm.clone(),
                baseline_retailer_inventory: b.retailer_mean_inventory,
                colla_retailer_inventory: c.retailer_mean_inventory,
                retailer_inventory_delta: c.retailer_mean_inventory - b.retailer_mean_inventory,
                baseline_factory_inventory: b.factory_mean_inventory,
                colla_factory_inventory: c.factory_mean_inventory,
                factory_inventory_delta: c.factory_mean_inventory - b.factory_mean_inventory,
                reward_delta: c.mean_episode_reward - b.mean_episode_reward,
            })
        })
        .collect()
}

fn eoq_rows(cfg: &ExperimentConfig, summary: &[SummaryRow]) -> Result<Vec<EoqRow>> {
    let params = crate::env::ChainParams::<f64>::default();
    let mut regimes: Vec<DemandRegime> = summary.iter().filter_map(|r| DemandRegime::parse(&r.demand)).collect();
    regimes.sort();
    regimes.dedup();
    let mut out = Vec::new();
    for regime in regimes {
        let rate = match cfg.demand_model(regime) {
            crate::demand::DemandModel::HighPoisson { mean } => mean,
            crate::demand::DemandModel::LowNormal { mean, .. } => mean,
            crate::demand::DemandModel::Scripted(s) => {
                if s.is_empty() {
                    continue;
                }
                mean_std(&s).0
            }
        };
        if rate <= 0.0 {
            continue;
        }
        for (name, p) in [("retailer", &params.retailer), ("factory", &params.factory)] {
            let q = eoq(&EoqInputs {
                demand_rate: rate,
                order_cost: cfg.eoq_order_cost,
                holding_cost: p.holding_cost,
                stockout_cost: p.stockout_cost,
            })?;
            out.push(EoqRow {
                demand: regime.name().into(),
                echelon: name.into(),
                demand_rate: rate,
                order_cost: cfg.eoq_order_cost,
                eoq: q,
                eoq_rounded: q.round(),
            });
        }
    }
    Ok(out)
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if i < 4 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "{c:>w$}");
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(width.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

fn f(x: f64) -> String {
    if x.is_nan() {
        "-".into()
    } else {
        format!("{x:.2}")
    }
}

fn render(summary: &[SummaryRow], deltas: &[DeltaRow], eoq: &[EoqRow]) -> String {
    let mut out = String::from("Per-cell evaluation summary (mean over seeds; counts per episode)\n\n");
    let rows: Vec<Vec<String>> = summary
        .iter()
        .map(|r| {
            vec![
                r.demand.clone(),
                r.architecture.clone(),
                r.algorithm.clone(),
                r.reward.clone(),
                r.seeds.to_string(),
                format!("{} ± {}", f(r.mean_episode_reward), f(r.std_episode_reward)),
                f(r.retailer_mean_inventory),
                f(r.factory_mean_inventory),
                f(r.retailer_mean_price),
                f(r.factory_mean_price),
                f(r.retailer_stockout_count),
                f(r.retailer_backlog_count),
                r.retailer_bullwhip.map_or("-".into(), f),
                if r.failed_seeds > 0 { format!("FAILED x{}", r.failed_seeds) } else { "ok".into() },
            ]
        })
        .collect();
    out += &table(
        &[
            "demand", "arch", "algo", "reward", "seeds", "episode reward", "inv R", "inv F", "price R", "price F",
            "stockouts R", "backlogs R", "bullwhip R", "status",
        ],
        &rows,
    );
    if !deltas.is_empty() {
        out += "\nBaseline vs Colla mean inventory\n\n";
        let rows: Vec<Vec<String>> = deltas
            .iter()
            .map(|d| {
                vec![
                    d.demand.clone(),
                    d.architecture.clone(),
                    d.algorithm.clone(),
                    String::new(),
                    f(d.baseline_retailer_inventory),
                    f(d.colla_retailer_inventory),
                    f(d.retailer_inventory_delta),
                    f(d.baseline_factory_inventory),
                    f(d.colla_factory_inventory),
                    f(d.factory_inventory_delta),
                    f(d.reward_delta),
                ]
            })
            .collect();
        out += &table(
            &["demand", "arch", "algo", "", "R base", "R colla", "R delta", "F base", "F colla", "F delta", "reward delta"],
            &rows,
        );
    }
    if !eoq.is_empty() {
        out += "\nEconomic order quantity\n\n";
        let rows: Vec<Vec<String>> = eoq
            .iter()
            .map(|e| {
                vec![
                    e.demand.clone(),
                    e.echelon.clone(),
                    String::new(),
                    String::new(),
                    f(e.demand_rate),
                    f(e.order_cost),
                    f(e.eoq),
                    format!("{}", e.eoq_rounded),
                ]
            })
            .collect();
        out += &table(&["demand", "echelon", "", "", "rate", "order cost", "eoq", "rounded"], &rows);
    }
    out
}

/// Statistics of one long evaluation rollout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongEvalRow {
    pub cell: String,
    pub seed: u64,
    pub steps: usize,
    pub total_reward: f64,
    pub retailer_mean_inventory: f64,
    pub factory_mean_inventory: f64,
    pub retailer_stockouts: usize,
    pub retailer_backlogs: usize,
}

/// Rolls every finished run's controller for `steps` steps without episode
/// resets and writes `long-<steps>.csv` next to its other artifacts.
pub fn long_eval(root: &Path, steps: usize, only: Option<&dyn Fn(&Cell) -> bool>) -> Result<Vec<LongEvalRow>> {
    let mut cfg = snapshot_config(root);
    cfg.horizon = steps.max(1);
    let mut out = Vec::new();
    for (cell, seeds) in scan(root)? {
        if only.is_some_and(|p| !p(&cell)) {
            continue;
        }
        if cell.demand == DemandRegime::Scripted && cfg.scripted_demand.len() < cfg.horizon {
            log::warn!("{}: scripted demand shorter than {steps} steps; skipped", cell.name());
            continue;
        }
        for (seed, dir) in seeds {
            if !read_record(&dir).is_some_and(|r| r.status.ok()) {
                continue;
            }
            let mut ctl = load_controller(&cfg, &cell, seed, root)?;
            let env = cfg.env_config(cell.demand, cell.reward);
            let tr = evaluate(&env, ctl.as_mut(), seed, 1)?.remove(0);
            let mut buf = Vec::new();
            tr.write_csv(&mut buf)?;
            write_atomic(&seed_dir(root, &cell, seed).join(format!("long-{steps}.csv")), &buf)?;
            let n = tr.len() as f64;
            out.push(LongEvalRow {
                cell: cell.name(),
                seed,
                steps: tr.len(),
                total_reward: tr.total_reward(),
                retailer_mean_inventory: tr.rows.iter().map(|r| r.retailer_inventory).sum::<f64>() / n,
                factory_mean_inventory: tr.rows.iter().map(|r| r.factory_inventory).sum::<f64>() / n,
                retailer_stockouts: tr.rows.iter().filter(|r| r.retailer_stockout > 0.0).count(),
                retailer_backlogs: tr.rows.iter().filter(|r| r.retailer_backlog > 0.0).count(),
            });
        }
    }
    Ok(out)
}
