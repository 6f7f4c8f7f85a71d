//! Running experiment matrices and reporting on their artifacts.
//!
//! Layout under the output root:
//!
//! ```text
//! config.toml                      copy of the experiment config
//! <demand>-<arch>-<method>-<reward>/
//!     seed-<n>/
//!         curve.csv                learning curve (header only for heuristics)
//!         policy.ckpt              trained policies (learners only)
//!         traces/episode-000.csv   evaluation episodes
//!         run.json                 status and timing, written last
//! summary.csv, deltas.csv, report.txt
//! ```

mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    parse_architecture, Cell, DemandRegime, ExperimentConfig, HeuristicConfig, Method, NetworkConfig, DEFAULT_OUT,
    OUT_ENV,
};
pub use report::{long_eval, report, DeltaRow, EoqRow, LongEvalRow, Report};

use crate::agents::{train, LearningCurve, PolicySet, TrainStatus};
use crate::baselines::HeuristicController;
use crate::error::{Error, Result};
use crate::metrics::EpisodeTrace;
use crate::rollout::{evaluate, Controller};

pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const RUN_RECORD: &str = "run.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const CHECKPOINT_FILE: &str = "policy.ckpt";
pub const TRACE_DIR: &str = "traces";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    IterationCap,
    /// A heuristic needs no training.
    Fixed,
    Diverged,
    Failed,
}

impl RunStatus {
    pub fn ok(self) -> bool {
        matches!(self, RunStatus::Converged | RunStatus::IterationCap | RunStatus::Fixed)
    }
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub cell: String,
    pub seed: u64,
    pub status: RunStatus,
    pub converged_at: Option<usize>,
    pub iterations: usize,
    pub env_steps: u64,
    pub eval_episodes: usize,
    pub mean_eval_reward: Option<f64>,
    pub wall_clock_secs: f64,
    pub error: Option<String>,
}

pub fn seed_dir(root: &Path, cell: &Cell, seed: u64) -> PathBuf {
    root.join(cell.name()).join(format!("seed-{seed}"))
}

/// Writes through a temporary file so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Trains (or sets up) the controller of one cell and seed, evaluates it and
/// writes its artifacts. Failures inside the run are recorded, not returned.
pub fn run_one(cfg: &ExperimentConfig, cell: &Cell, seed: u64, root: &Path) -> Result<RunRecord> {
    let dir = seed_dir(root, cell, seed);
    fs::create_dir_all(dir.join(TRACE_DIR))?;
    let started = Instant::now();
    let mut record = RunRecord {
        cell: cell.name(),
        seed,
        status: RunStatus::Failed,
        converged_at: None,
        iterations: 0,
        env_steps: 0,
        eval_episodes: 0,
        mean_eval_reward: None,
        wall_clock_secs: 0.0,
        error: None,
    };
    if let Err(e) = run_inner(cfg, cell, seed, &dir, &mut record) {
        if matches!(e, Error::Io(_)) {
            return Err(e);
        }
        log::error!("{} seed {seed} failed: {e}", cell.name());
        record.status = RunStatus::Failed;
        record.error = Some(e.to_string());
    }
    record.wall_clock_secs = started.elapsed().as_secs_f64();
    write_atomic(&dir.join(RUN_RECORD), serde_json::to_string_pretty(&record)?.as_bytes())?;
    Ok(record)
}

fn run_inner(cfg: &ExperimentConfig, cell: &Cell, seed: u64, dir: &Path, record: &mut RunRecord) -> Result<()> {
    let env = cfg.env_config(cell.demand, cell.reward);
    let mut controller: Box<dyn Controller<f64>> = match cell.method.algorithm() {
        Some(algo) => {
            let agent = cfg.agent_config(algo, cell.architecture);
            let out = train(&env, &agent, seed, cfg.convergence, cfg.iterations)?;
            let mut buf = Vec::new();
            out.curve.write_csv(&mut buf)?;
            write_atomic(&dir.join(CURVE_FILE), &buf)?;
            write_atomic(&dir.join(CHECKPOINT_FILE), out.policies.to_checkpoint().to_text().as_bytes())?;
            record.iterations = out.iterations();
            record.env_steps = out.env_steps;
            match out.status {
                TrainStatus::Converged { iteration } => {
                    record.status = RunStatus::Converged;
                    record.converged_at = Some(iteration);
                }
                TrainStatus::IterationCap => record.status = RunStatus::IterationCap,
                TrainStatus::Diverged(msg) => {
                    record.status = RunStatus::Diverged;
                    record.error = Some(msg);
                    return Ok(());
                }
            }
            Box::new(out.policies)
        }
        None => {
            let (r, f) = cfg.heuristics(cell.method, seed).expect("heuristic method");
            let mut buf = Vec::new();
            LearningCurve::default().write_csv(&mut buf)?;
            write_atomic(&dir.join(CURVE_FILE), &buf)?;
            record.status = RunStatus::Fixed;
            Box::new(HeuristicController::new(env.params.clone(), r, f))
        }
    };
    let traces = evaluate(&env, controller.as_mut(), seed, cfg.eval_episodes)?;
    for (i, tr) in traces.iter().enumerate() {
        let mut buf = Vec::new();
        tr.write_csv(&mut buf)?;
        write_atomic(&dir.join(TRACE_DIR).join(format!("episode-{i:03}.csv")), &buf)?;
    }
    record.eval_episodes = traces.len();
    record.mean_eval_reward = Some(traces.iter().map(EpisodeTrace::total_reward).sum::<f64>() / traces.len() as f64);
    Ok(())
}

/// Runs every (cell, seed) of `cfg` with up to `jobs` in parallel. The config
/// snapshot is `source` verbatim when given.
pub fn run(cfg: &ExperimentConfig, source: Option<&str>, jobs: usize) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let root = cfg.out_root();
    fs::create_dir_all(&root)?;
    let snapshot = match source {
        Some(s) => s.to_string(),
        None => cfg.to_toml()?,
    };
    write_atomic(&root.join(CONFIG_SNAPSHOT), snapshot.as_bytes())?;
    let work: Vec<(Cell, u64)> = cfg
        .cells()
        .into_iter()
        .flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        work.par_iter()
            .map(|(cell, seed)| {
                log::info!("starting {} seed {seed}", cell.name());
                run_one(cfg, cell, *seed, &root)
            })
            .collect()
    })
}

/// Loads the trained policies or heuristic controller of a finished run.
pub fn load_controller(cfg: &ExperimentConfig, cell: &Cell, seed: u64, root: &Path) -> Result<Box<dyn Controller<f64>>> {
    let params = cfg.env_config(cell.demand, cell.reward).params;
    match cell.method.algorithm() {
        Some(_) => {
            let text = fs::read_to_string(seed_dir(root, cell, seed).join(CHECKPOINT_FILE))?;
            let ck = crate::nn::Checkpoint::from_text(&text)?;
            Ok(Box::new(PolicySet::from_checkpoint(&ck, &params)?))
        }
        None => {
            let (r, f) = cfg.heuristics(cell.method, seed).expect("heuristic method");
            Ok(Box::new(HeuristicController::new(params, r, f)))
        }
    }
}
