use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One policy's statistics for one training iteration. Rewards are unscaled
/// environment rewards summed over an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub policy_id: String,
    pub mean_episode_reward: f64,
    pub std: f64,
    pub episodes: usize,
    pub env_steps: u64,
}

pub const CURVE_COLUMNS: [&str; 6] = ["iteration", "policy_id", "mean_episode_reward", "std", "episodes", "env_steps"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
}

impl LearningCurve {
    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iteration)
    }

    /// Per-iteration sum of the policies' mean episode rewards.
    pub fn total(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if out.len() < r.iteration {
                out.resize(r.iteration, 0.0);
            }
            out[r.iteration - 1] += r.mean_episode_reward;
        }
        out
    }

    /// Rows of one policy, in iteration order.
    pub fn policy(&self, id: &str) -> Vec<&CurveRow> {
        self.rows.iter().filter(|r| r.policy_id == id).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if self.rows.is_empty() {
            out.write_record(CURVE_COLUMNS)?;
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
        if header != CURVE_COLUMNS {
            return Err(Error::InvalidInput(format!("unexpected curve header {header:?}")));
        }
        let rows = rd.deserialize().collect::<std::result::Result<Vec<CurveRow>, _>>()?;
        Ok(Self { rows })
    }
}
