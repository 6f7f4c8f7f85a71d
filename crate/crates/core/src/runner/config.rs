//! Experiment configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, Algorithm, Architecture, PpoConfig, SacConfig};
use crate::baselines::HeuristicPolicy;
use crate::demand::DemandModel;
use crate::env::{ChainParams, RewardMode};
use crate::error::{Error, Result};
use crate::metrics::ConvergenceRule;
use crate::rollout::EnvConfig;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "ECHELON_OUT";
pub const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandRegime {
    High,
    Low,
    /// Replays `scripted_demand` each episode.
    Scripted,
}

impl DemandRegime {
    pub fn name(self) -> &'static str {
        match self {
            DemandRegime::High => "high",
            DemandRegime::Low => "low",
            DemandRegime::Scripted => "scripted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "high" => Some(DemandRegime::High),
            "low" => Some(DemandRegime::Low),
            "scripted" => Some(DemandRegime::Scripted),
            _ => None,
        }
    }
}

/// Who chooses the actions in a cell: a learner, or a fixed heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Sac,
    Ppo,
    Random,
    BaseStock,
    Constant,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sac => "sac",
            Method::Ppo => "ppo",
            Method::Random => "random",
            Method::BaseStock => "base-stock",
            Method::Constant => "constant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sac" => Some(Method::Sac),
            "ppo" => Some(Method::Ppo),
            "random" => Some(Method::Random),
            "base-stock" | "basestock" => Some(Method::BaseStock),
            "constant" => Some(Method::Constant),
            _ => None,
        }
    }

    pub fn algorithm(self) -> Option<Algorithm> {
        match self {
            Method::Sac => Some(Algorithm::Sac),
            Method::Ppo => Some(Algorithm::Ppo),
            _ => None,
        }
    }
}

pub fn parse_architecture(s: &str) -> Option<Architecture> {
    match s.to_ascii_lowercase().as_str() {
        "homo" | "homogeneous" => Some(Architecture::Homogeneous),
        "hetero" | "heterogeneous" => Some(Architecture::Heterogeneous),
        _ => None,
    }
}

/// Parameters of the heuristic methods, per echelon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeuristicConfig {
    pub retailer_target: f64,
    pub factory_target: f64,
    pub retailer_order: f64,
    pub factory_order: f64,
    pub retailer_price: f64,
    pub factory_price: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            retailer_target: 15.0,
            factory_target: 40.0,
            retailer_order: 10.0,
            factory_order: 10.0,
            retailer_price: 5.0,
            factory_price: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub demand: Vec<DemandRegime>,
    pub architecture: Vec<Architecture>,
    pub algorithm: Vec<Method>,
    pub reward: Vec<RewardMode>,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    pub iterations: usize,
    pub eval_episodes: usize,
    pub initial_price: f64,
    pub strict_actions: bool,
    /// Fixed ordering cost used for the EOQ comparison.
    pub eoq_order_cost: f64,
    pub scripted_demand: Vec<f64>,
    /// Output root; falls back to the environment variable, then `runs`.
    pub out: Option<PathBuf>,
    pub convergence: ConvergenceRule,
    pub network: NetworkConfig,
    pub heuristics: HeuristicConfig,
    /// Replaces the architecture-dependent PPO defaults when present.
    pub ppo: Option<PpoConfig>,
    pub sac: Option<SacConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub reward_scale: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            reward_scale: 0.01,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            demand: vec![DemandRegime::Low],
            architecture: vec![Architecture::Homogeneous],
            algorithm: vec![Method::Sac],
            reward: vec![RewardMode::Baseline],
            seeds: vec![0, 1, 2, 3, 4],
            horizon: 30,
            iterations: 500,
            eval_episodes: 100,
            initial_price: 3.0,
            strict_actions: false,
            eoq_order_cost: 1.0,
            scripted_demand: Vec::new(),
            out: None,
            convergence: ConvergenceRule::default(),
            network: NetworkConfig::default(),
            heuristics: HeuristicConfig::default(),
            ppo: None,
            sac: None,
        }
    }
}

/// One (demand, architecture, method, reward) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub demand: DemandRegime,
    pub architecture: Architecture,
    pub method: Method,
    pub reward: RewardMode,
}

impl Cell {
    /// Directory name, e.g. `low-homo-sac-colla`.
    pub fn name(&self) -> String {
        format!(
            "{}-{}-{}-{}",
            self.demand.name(),
            self.architecture.name(),
            self.method.name(),
            self.reward.name()
        )
    }

    pub fn parse(name: &str) -> Option<Self> {
        let parts: Vec<&str> = name.splitn(3, '-').collect();
        if parts.len() != 3 {
            return None;
        }
        let (method, reward) = parts[2].rsplit_once('-')?;
        Some(Self {
            demand: DemandRegime::parse(parts[0])?,
            architecture: parse_architecture(parts[1])?,
            method: Method::parse(method)?,
            reward: RewardMode::parse(reward)?,
        })
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        Ok((Self::from_toml(&text)?, text))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.demand.is_empty() || self.architecture.is_empty() || self.algorithm.is_empty() || self.reward.is_empty() {
            return bad("demand, architecture, algorithm and reward lists must be non-empty".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.horizon == 0 || self.iterations == 0 || self.eval_episodes == 0 {
            return bad("horizon, iterations and eval_episodes must be at least 1".into());
        }
        if self.convergence.window < 2 || !(self.convergence.tol >= 0.0) {
            return bad("convergence window must be >= 2 and tol >= 0".into());
        }
        if !(self.eoq_order_cost > 0.0) {
            return bad("eoq_order_cost must be positive".into());
        }
        if self.demand.contains(&DemandRegime::Scripted) {
            DemandModel::Scripted(self.scripted_demand.clone()).validate()?;
            if self.scripted_demand.len() < self.horizon {
                return bad(format!(
                    "scripted_demand has {} values but the horizon is {}",
                    self.scripted_demand.len(),
                    self.horizon
                ));
            }
        }
        self.env_config(DemandRegime::Low, RewardMode::Baseline).params.validate()?;
        for &a in &self.architecture {
            for &m in &self.algorithm {
                if let Some(algo) = m.algorithm() {
                    self.agent_config(algo, a).validate()?;
                }
            }
        }
        Ok(())
    }

    /// Output root: explicit setting, then the environment variable, then `runs`.
    pub fn out_root(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    /// Every cell, in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &demand in &self.demand {
            for &architecture in &self.architecture {
                for &method in &self.algorithm {
                    for &reward in &self.reward {
                        out.push(Cell {
                            demand,
                            architecture,
                            method,
                            reward,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn demand_model(&self, regime: DemandRegime) -> DemandModel<f64> {
        match regime {
            DemandRegime::High => DemandModel::high(),
            DemandRegime::Low => DemandModel::low(),
            DemandRegime::Scripted => DemandModel::Scripted(self.scripted_demand.clone()),
        }
    }

    pub fn env_config(&self, regime: DemandRegime, reward: RewardMode) -> EnvConfig<f64> {
        EnvConfig {
            params: ChainParams::default().with_horizon(self.horizon),
            reward_mode: reward,
            demand: self.demand_model(regime),
            initial_price: self.initial_price,
            strict: self.strict_actions,
        }
    }

    pub fn agent_config(&self, algorithm: Algorithm, architecture: Architecture) -> AgentConfig {
        let mut c = AgentConfig::new(algorithm, architecture);
        c.hidden = self.network.hidden.clone();
        c.reward_scale = self.network.reward_scale;
        if let Some(p) = &self.ppo {
            c.ppo = p.clone();
        }
        if let Some(s) = &self.sac {
            c.sac = s.clone();
        }
        c
    }

    /// Retailer and factory heuristics for a non-learning method.
    pub fn heuristics(&self, method: Method, seed: u64) -> Option<(HeuristicPolicy, HeuristicPolicy)> {
        let h = &self.heuristics;
        match method {
            Method::Sac | Method::Ppo => None,
            Method::Random => {
                let s = crate::seeds::mix(crate::seeds::evaluation_demand(seed, u64::MAX));
                Some((HeuristicPolicy::Random { seed: s }, HeuristicPolicy::Random { seed: crate::seeds::mix(s) }))
            }
            Method::BaseStock => Some((
                HeuristicPolicy::BaseStock { target: h.retailer_target, price: h.retailer_price },
                HeuristicPolicy::BaseStock { target: h.factory_target, price: h.factory_price },
            )),
            Method::Constant => Some((
                HeuristicPolicy::ConstantOrder { q: h.retailer_order, price: h.retailer_price },
                HeuristicPolicy::ConstantOrder { q: h.factory_order, price: h.factory_price },
            )),
        }
    }
}
