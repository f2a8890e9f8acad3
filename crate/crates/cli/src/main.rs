//! Command-line front end for the skill extraction pipeline.
//!
//! Configuration is layered: built-in defaults, then an optional TOML file
//! given with `--config`, then individual flags. Every run writes the fully
//! resolved configuration to its output directory, so any artifact can be
//! reproduced by pointing `--config` at that snapshot.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod commands;
mod settings;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use skillgen::{KChoice, Result, Strategy};

use settings::{load_file_config, FileConfig};

#[derive(Parser)]
#[command(
    name = "skillgen",
    version,
    about = "Extracts temporally extended skills from continuous-action \
             trajectories and validates them as macro-actions in a 2-D maze"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scripted demonstration trajectories in a maze
    GenDemos(GenDemosArgs),
    /// Extract a skill library from a demonstration dataset
    Extract(ExtractArgs),
    /// Train a tabular agent that picks skills as macro-actions
    Train(TrainArgs),
    /// Evaluate a saved policy greedily
    Evaluate(EvaluateArgs),
    /// Sweep extraction hyperparameters and report one row per cell
    Ablate(AblateArgs),
    /// Print statistics for a dataset or a skill library
    Stats(StatsArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for artifacts and the resolved config snapshot
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl CommonArgs {
    fn base_config(&self) -> Result<FileConfig> {
        let mut config = match &self.config {
            Some(path) => load_file_config(path)?,
            None => FileConfig::default(),
        };
        if let Some(dir) = &self.out_dir {
            config.out_dir = dir.clone();
        }
        Ok(config)
    }
}

#[derive(Args)]
struct MazeArgs {
    /// Built-in maze name (u, medium, large) or path to an ASCII map file
    #[arg(long)]
    maze: Option<String>,
    /// Side length of one grid cell
    #[arg(long)]
    cell_size: Option<f64>,
    /// Distance to the goal center that counts as success
    #[arg(long)]
    goal_radius: Option<f64>,
    /// Per-axis bound on one action
    #[arg(long)]
    max_action: Option<f64>,
    /// Steps before an episode is cut off
    #[arg(long)]
    horizon: Option<usize>,
}

impl MazeArgs {
    fn apply(&self, config: &mut FileConfig) {
        if let Some(maze) = &self.maze {
            if matches!(maze.as_str(), "u" | "medium" | "large") {
                config.maze.name = maze.clone();
                config.maze.map_file = None;
            } else {
                config.maze.map_file = Some(PathBuf::from(maze));
            }
        }
        if self.cell_size.is_some() {
            config.maze.cell_size = self.cell_size;
        }
        if self.goal_radius.is_some() {
            config.maze.goal_radius = self.goal_radius;
        }
        if self.max_action.is_some() {
            config.maze.max_action = self.max_action;
        }
        if self.horizon.is_some() {
            config.maze.horizon = self.horizon;
        }
    }
}

#[derive(Args)]
struct LiftArgs {
    /// Lift planar actions into this dimension with a fixed random linear map
    #[arg(long)]
    lift_dim: Option<usize>,
    /// Seed of the lifting map
    #[arg(long)]
    lift_seed: Option<u64>,
}

impl LiftArgs {
    fn apply(&self, config: &mut FileConfig) {
        if self.lift_dim.is_some() {
            config.demos.lift_dim = self.lift_dim;
        }
        if let Some(seed) = self.lift_seed {
            config.demos.lift_seed = seed;
        }
    }
}

#[derive(Args)]
struct ExtractionArgs {
    /// Codebook size: "auto" (twice the action dimension) or an integer
    #[arg(long)]
    k: Option<KChoice>,
    /// Vocabulary size the merge loop grows toward
    #[arg(long)]
    n_max: Option<usize>,
    /// Vocabulary size the prune loop shrinks toward
    #[arg(long)]
    n_min: Option<usize>,
    /// Diagonal regularizer added to the heading covariance
    #[arg(long)]
    epsilon: Option<f64>,
    /// Merge scoring strategy: mahalanobis or frequency
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Minimum pair count considered by the mahalanobis strategy
    #[arg(long)]
    min_count: Option<usize>,
    /// Protect base tokens from pruning (true or false)
    #[arg(long)]
    keep_base_tokens: Option<bool>,
    /// Comma-separated observation columns used for headings
    #[arg(long, value_delimiter = ',')]
    obs_dims: Option<Vec<usize>>,
    /// Seed for codebook fitting
    #[arg(long)]
    extraction_seed: Option<u64>,
}

impl ExtractionArgs {
    fn apply(&self, config: &mut FileConfig) {
        let extraction = &mut config.extraction;
        if let Some(k) = self.k {
            extraction.k = k;
        }
        if let Some(n_max) = self.n_max {
            extraction.n_max = n_max;
        }
        if let Some(n_min) = self.n_min {
            extraction.n_min = n_min;
        }
        if let Some(epsilon) = self.epsilon {
            extraction.epsilon = epsilon;
        }
        if let Some(strategy) = self.strategy {
            extraction.strategy = strategy;
        }
        if let Some(min_count) = self.min_count {
            extraction.min_count = min_count;
        }
        if let Some(keep) = self.keep_base_tokens {
            extraction.keep_base_tokens = keep;
        }
        if let Some(dims) = &self.obs_dims {
            extraction.obs_dims = if dims.is_empty() {
                None
            } else {
                Some(dims.clone())
            };
        }
        if let Some(seed) = self.extraction_seed {
            extraction.seed = seed;
        }
    }
}

#[derive(Args)]
struct AgentArgs {
    /// Discount factor
    #[arg(long)]
    gamma: Option<f64>,
    /// Q-learning step size
    #[arg(long)]
    alpha: Option<f64>,
    /// Exploration rate at the start of training
    #[arg(long)]
    epsilon_start: Option<f64>,
    /// Exploration rate after annealing
    #[arg(long)]
    epsilon_end: Option<f64>,
    /// Fraction of the budget over which exploration anneals
    #[arg(long)]
    anneal_fraction: Option<f64>,
}

impl AgentArgs {
    fn apply(&self, config: &mut FileConfig) {
        let agent = &mut config.agent;
        if let Some(gamma) = self.gamma {
            agent.gamma = gamma;
        }
        if let Some(alpha) = self.alpha {
            agent.alpha = alpha;
        }
        if let Some(eps) = self.epsilon_start {
            agent.epsilon_start = eps;
        }
        if let Some(eps) = self.epsilon_end {
            agent.epsilon_end = eps;
        }
        if let Some(fraction) = self.anneal_fraction {
            agent.anneal_fraction = fraction;
        }
    }
}

#[derive(Args)]
struct GenDemosArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    maze: MazeArgs,
    #[command(flatten)]
    lift: LiftArgs,
    /// Number of trajectories to generate
    #[arg(long)]
    trajectories: Option<usize>,
    /// Standard deviation of the Gaussian action noise
    #[arg(long)]
    noise: Option<f64>,
    /// Seed for waypoints, jitter, and noise
    #[arg(long)]
    seed: Option<u64>,
    /// Keep only this seeded random fraction of trajectories
    #[arg(long)]
    subsample: Option<f64>,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    extraction: ExtractionArgs,
    /// Demonstration dataset (JSON Lines)
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    maze: MazeArgs,
    #[command(flatten)]
    lift: LiftArgs,
    #[command(flatten)]
    extraction: ExtractionArgs,
    #[command(flatten)]
    agent: AgentArgs,
    /// Skill library path, or "primitives" for the bare-codebook control arm
    #[arg(long)]
    library: Option<String>,
    /// Demonstration dataset, needed when --library is "primitives"
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Total primitive steps each training run may consume
    #[arg(long)]
    budget: Option<usize>,
    /// Comma-separated training seeds, one run per seed
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Greedy evaluation episodes after each run
    #[arg(long)]
    episodes: Option<usize>,
    /// Gamma correction of the visitation heatmaps
    #[arg(long)]
    heatmap_gamma: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    maze: MazeArgs,
    #[command(flatten)]
    lift: LiftArgs,
    #[command(flatten)]
    extraction: ExtractionArgs,
    /// Skill library path, or "primitives" for the bare-codebook control arm
    #[arg(long)]
    library: Option<String>,
    /// Demonstration dataset, needed when --library is "primitives"
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Saved policy to evaluate
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Number of evaluation episodes
    #[arg(long)]
    episodes: Option<usize>,
    /// Seed for episode start jitter
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    maze: MazeArgs,
    #[command(flatten)]
    lift: LiftArgs,
    #[command(flatten)]
    extraction: ExtractionArgs,
    #[command(flatten)]
    agent: AgentArgs,
    /// Demonstration dataset every cell extracts from
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Total primitive steps each training run may consume
    #[arg(long)]
    budget: Option<usize>,
    /// Comma-separated training seeds, one run per seed per cell
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Greedy evaluation episodes after each run
    #[arg(long)]
    episodes: Option<usize>,
    /// Base dataset fraction for cells outside the subsample sweep
    #[arg(long)]
    subsample: Option<f64>,
    /// Codebook sizes to sweep
    #[arg(long, value_delimiter = ',')]
    sweep_k: Option<Vec<KChoice>>,
    /// Merge targets to sweep
    #[arg(long, value_delimiter = ',')]
    sweep_n_max: Option<Vec<usize>>,
    /// Prune targets to sweep
    #[arg(long, value_delimiter = ',')]
    sweep_n_min: Option<Vec<usize>>,
    /// Strategies to sweep
    #[arg(long, value_delimiter = ',')]
    sweep_strategy: Option<Vec<Strategy>>,
    /// Dataset fractions to sweep
    #[arg(long, value_delimiter = ',')]
    sweep_subsample: Option<Vec<f64>>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Demonstration dataset to describe
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Skill library to describe
    #[arg(long)]
    library: Option<String>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDemos(args) => {
            let mut config = args.common.base_config()?;
            args.maze.apply(&mut config);
            args.lift.apply(&mut config);
            if let Some(n) = args.trajectories {
                config.demos.trajectories = n;
            }
            if let Some(noise) = args.noise {
                config.demos.noise = noise;
            }
            if let Some(seed) = args.seed {
                config.demos.seed = seed;
            }
            if let Some(fraction) = args.subsample {
                config.demos.subsample = fraction;
            }
            commands::gen_demos(&config)
        }
        Command::Extract(args) => {
            let mut config = args.common.base_config()?;
            args.extraction.apply(&mut config);
            if args.dataset.is_some() {
                config.dataset = args.dataset;
            }
            commands::extract(&config)
        }
        Command::Train(args) => {
            let mut config = args.common.base_config()?;
            args.maze.apply(&mut config);
            args.lift.apply(&mut config);
            args.extraction.apply(&mut config);
            args.agent.apply(&mut config);
            if args.library.is_some() {
                config.library = args.library;
            }
            if args.dataset.is_some() {
                config.dataset = args.dataset;
            }
            if let Some(budget) = args.budget {
                config.train.budget = budget;
            }
            if let Some(seeds) = args.seeds {
                config.train.seeds = seeds;
            }
            if let Some(episodes) = args.episodes {
                config.train.episodes = episodes;
            }
            if let Some(gamma) = args.heatmap_gamma {
                config.train.heatmap_gamma = gamma;
            }
            commands::train(&config)
        }
        Command::Evaluate(args) => {
            let mut config = args.common.base_config()?;
            args.maze.apply(&mut config);
            args.lift.apply(&mut config);
            args.extraction.apply(&mut config);
            if args.library.is_some() {
                config.library = args.library;
            }
            if args.dataset.is_some() {
                config.dataset = args.dataset;
            }
            if args.policy.is_some() {
                config.policy = args.policy;
            }
            if let Some(episodes) = args.episodes {
                config.evaluate.episodes = episodes;
            }
            if let Some(seed) = args.seed {
                config.evaluate.seed = seed;
            }
            commands::eval_policy(&config)
        }
        Command::Ablate(args) => {
            let mut config = args.common.base_config()?;
            args.maze.apply(&mut config);
            args.lift.apply(&mut config);
            args.extraction.apply(&mut config);
            args.agent.apply(&mut config);
            if args.dataset.is_some() {
                config.dataset = args.dataset;
            }
            if let Some(budget) = args.budget {
                config.train.budget = budget;
            }
            if let Some(seeds) = args.seeds {
                config.train.seeds = seeds;
            }
            if let Some(episodes) = args.episodes {
                config.train.episodes = episodes;
            }
            if let Some(fraction) = args.subsample {
                config.demos.subsample = fraction;
            }
            if let Some(values) = args.sweep_k {
                config.sweep.k = values;
            }
            if let Some(values) = args.sweep_n_max {
                config.sweep.n_max = values;
            }
            if let Some(values) = args.sweep_n_min {
                config.sweep.n_min = values;
            }
            if let Some(values) = args.sweep_strategy {
                config.sweep.strategy = values;
            }
            if let Some(values) = args.sweep_subsample {
                config.sweep.subsample = values;
            }
            commands::ablate(&config)
        }
        Command::Stats(args) => {
            let mut config = args.common.base_config()?;
            if args.dataset.is_some() {
                config.dataset = args.dataset;
            }
            if args.library.is_some() {
                config.library = args.library;
            }
            commands::stats(&config)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests land here too; they are not errors.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.class().exit_code());
    }
}
