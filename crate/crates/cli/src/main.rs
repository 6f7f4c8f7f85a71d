use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use echelon::agents::Architecture;
use echelon::env::RewardMode;
use echelon::runner::{self, parse_architecture, Cell, DemandRegime, ExperimentConfig, Method};

#[derive(Parser, Debug)]
#[command(name = "echelon", version, about = "Two-echelon supply chain experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train and evaluate every cell and seed of an experiment.
    Run(RunArgs),
    /// Summarize the artifacts under an output root.
    Report(OutArg),
    /// Roll finished runs for a long stretch without episode resets.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct OutArg {
    /// Output root [default: $ECHELON_OUT, then ./runs]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct Filters {
    /// Demand regimes: high, low
    #[arg(long, value_delimiter = ',')]
    demand: Vec<String>,
    /// Architectures: homo, hetero
    #[arg(long, value_delimiter = ',')]
    arch: Vec<String>,
    /// Methods: sac, ppo (or random, base-stock, constant)
    #[arg(long, value_delimiter = ',')]
    algo: Vec<String>,
    /// Reward modes: baseline, pearso, peafso, colla
    #[arg(long, value_delimiter = ',')]
    reward: Vec<String>,
    /// Seeds, comma separated
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config (TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    filters: Filters,
    /// Iteration cap per run
    #[arg(long)]
    iters: Option<usize>,
    /// Reject out-of-range actions instead of clamping them
    #[arg(long)]
    strict_actions: bool,
    /// Runs executed in parallel
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    filters: Filters,
    /// Steps per rollout
    #[arg(long, default_value_t = 500)]
    steps: usize,
}

fn parse_list<T>(items: &[String], what: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    items
        .iter()
        .map(|s| f(s).with_context(|| format!("unknown {what} {s:?}")))
        .collect()
}

struct Parsed {
    demand: Vec<DemandRegime>,
    arch: Vec<Architecture>,
    algo: Vec<Method>,
    reward: Vec<RewardMode>,
    seed: Vec<u64>,
}

impl Filters {
    fn parse(&self) -> Result<Parsed> {
        Ok(Parsed {
            demand: parse_list(&self.demand, "demand regime", DemandRegime::parse)?,
            arch: parse_list(&self.arch, "architecture", parse_architecture)?,
            algo: parse_list(&self.algo, "algorithm", Method::parse)?,
            reward: parse_list(&self.reward, "reward mode", RewardMode::parse)?,
            seed: self.seed.clone(),
        })
    }
}

fn out_root(flag: &Option<PathBuf>) -> PathBuf {
    ExperimentConfig {
        out: flag.clone(),
        ..ExperimentConfig::default()
    }
    .out_root()
}

fn run(args: RunArgs) -> Result<()> {
    let (mut cfg, source) = match &args.config {
        Some(p) => {
            let (c, text) = ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?;
            (c, Some(text))
        }
        None => (ExperimentConfig::default(), None),
    };
    let f = args.filters.parse()?;
    let overridden = !(f.demand.is_empty()
        && f.arch.is_empty()
        && f.algo.is_empty()
        && f.reward.is_empty()
        && f.seed.is_empty()
        && args.iters.is_none()
        && !args.strict_actions);
    if !f.demand.is_empty() {
        cfg.demand = f.demand;
    }
    if !f.arch.is_empty() {
        cfg.architecture = f.arch;
    }
    if !f.algo.is_empty() {
        cfg.algorithm = f.algo;
    }
    if !f.reward.is_empty() {
        cfg.reward = f.reward;
    }
    if !f.seed.is_empty() {
        cfg.seeds = f.seed;
    }
    if let Some(n) = args.iters {
        cfg.iterations = n;
    }
    cfg.strict_actions |= args.strict_actions;
    if args.out.out.is_some() {
        cfg.out = args.out.out.clone();
    }
    cfg.validate()?;
    let root = cfg.out_root();
    // flags change the experiment, so the snapshot then records the effective config
    let snapshot = if overridden { None } else { source.as_deref() };
    let n = cfg.cells().len() * cfg.seeds.len();
    eprintln!("running {n} run(s) into {}", root.display());
    let records = runner::run(&cfg, snapshot, args.jobs)?;
    let failed: Vec<_> = records.iter().filter(|r| !r.status.ok()).collect();
    for r in &records {
        eprintln!(
            "{} seed {}: {:?} after {} iteration(s), eval reward {}",
            r.cell,
            r.seed,
            r.status,
            r.iterations,
            r.mean_eval_reward.map_or("-".to_string(), |x| format!("{x:.2}"))
        );
    }
    if !failed.is_empty() {
        eprintln!("{} run(s) failed; see their run.json", failed.len());
    }
    let rep = runner::report(&root)?;
    print!("{}", rep.text);
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    if args.steps == 0 {
        bail!("--steps must be at least 1");
    }
    let root = out_root(&args.out.out);
    let f = args.filters.parse()?;
    let keep = |c: &Cell| {
        (f.demand.is_empty() || f.demand.contains(&c.demand))
            && (f.arch.is_empty() || f.arch.contains(&c.architecture))
            && (f.algo.is_empty() || f.algo.contains(&c.method))
            && (f.reward.is_empty() || f.reward.contains(&c.reward))
    };
    let mut rows = runner::long_eval(&root, args.steps, Some(&keep))?;
    if !f.seed.is_empty() {
        rows.retain(|r| f.seed.contains(&r.seed));
    }
    if rows.is_empty() {
        bail!("no finished runs under {}", root.display());
    }
    println!("cell,seed,steps,total_reward,retailer_mean_inventory,factory_mean_inventory,retailer_stockouts,retailer_backlogs");
    for r in rows {
        println!(
            "{},{},{},{:.3},{:.3},{:.3},{},{}",
            r.cell,
            r.seed,
            r.steps,
            r.total_reward,
            r.retailer_mean_inventory,
            r.factory_mean_inventory,
            r.retailer_stockouts,
            r.retailer_backlogs
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Report(o) => {
            let root = out_root(&o.out);
            print!("{}", runner::report(&root).with_context(|| format!("reporting on {}", root.display()))?.text);
            Ok(())
        }
        Command::Eval(a) => eval(a),
    }
}
