//! The six subcommands. Each resolves its inputs from a [`FileConfig`],
//! writes the resolved snapshot first so even failed runs leave provenance,
//! then emits its artifacts under fixed names in the output directory.

use std::fmt::Write as _;
use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::thread;

use skillgen::{
    build_skill_library, coverage, evaluate, generate_demos, save_dataset, skill_length_stats,
    train_lifted, visitation_histogram, ActionLift, Dataset, Error, ErrorClass, KChoice,
    MacroPolicy, Maze, PipelineConfig, Result, RolloutLog, SkillLibrary, Strategy,
};

use crate::settings::{require_dataset, resolve_library, write_resolved, FileConfig};

/// Prints one line to stdout. A closed pipe (`skillgen ... | head`) is a
/// normal way for a reader to stop early, so it ends the process quietly
/// instead of panicking; any other stdout failure is fatal.
macro_rules! outln {
    ($($arg:tt)*) => {
        crate::commands::emit_line(std::format_args!($($arg)*))
    };
}

pub(crate) fn emit_line(args: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(err) = out.write_fmt(args).and_then(|()| out.write_all(b"\n")) {
        if err.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {err}");
        std::process::exit(ErrorClass::Internal.exit_code());
    }
}

pub fn gen_demos(config: &FileConfig) -> Result<()> {
    write_resolved(config, "gen-demos")?;
    let maze = config.maze.build()?;
    let lift = config.demos.build_lift()?;
    let demos = &config.demos;
    let mut dataset = generate_demos(
        &maze,
        demos.trajectories,
        demos.seed,
        demos.noise,
        lift.as_ref(),
    )?;
    // Exactly 1.0 keeps the dataset as generated; anything else goes through
    // the subsampler, which also rejects fractions outside [0, 1].
    if demos.subsample != 1.0 {
        dataset = dataset.subsample(demos.subsample, demos.seed)?;
    }
    let path = config.out_dir.join("demos.jsonl");
    save_dataset(&dataset, &path)?;
    outln!(
        "wrote {} trajectories ({} steps, obs dim {}, act dim {}) to {}",
        dataset.trajectories().len(),
        dataset.total_steps(),
        dataset.obs_dim(),
        dataset.act_dim(),
        path.display()
    );
    Ok(())
}

pub fn extract(config: &FileConfig) -> Result<()> {
    write_resolved(config, "extract")?;
    let dataset = require_dataset(config)?;
    let library = build_skill_library(&dataset, &config.extraction)?;
    let path = config.out_dir.join("library.json");
    library.save(&path)?;
    match skill_length_stats(&library) {
        Some((mean, std)) => outln!(
            "library: {} skills, mean length {mean:.2} +/- {std:.2}",
            library.skills.len()
        ),
        None => outln!("library: 0 skills"),
    }
    outln!(
        "skill generation took {:.2} s",
        library.generation_seconds
    );
    outln!("wrote {}", path.display());
    Ok(())
}

/// Everything one training seed produces.
struct SeedOutcome {
    seed: u64,
    policy: MacroPolicy,
    rollout: RolloutLog,
    success: f64,
    coverage: f64,
}

fn run_seed(
    maze: &Maze,
    library: &SkillLibrary,
    config: &FileConfig,
    seed: u64,
    lift: Option<&ActionLift>,
) -> Result<SeedOutcome> {
    let agent = config.agent.to_config();
    let (policy, rollout) = train_lifted(maze, library, config.train.budget, &agent, seed, lift)?;
    let histogram = visitation_histogram(&[&rollout], maze)?;
    let covered = coverage(&histogram, maze);
    let (success, _) = evaluate(maze, library, &policy, config.train.episodes, seed, lift)?;
    Ok(SeedOutcome {
        seed,
        policy,
        rollout,
        success,
        coverage: covered,
    })
}

pub fn train(config: &FileConfig) -> Result<()> {
    write_resolved(config, "train")?;
    let maze = config.maze.build()?;
    let lift = config.demos.build_lift()?;
    let library = resolve_library(config)?;
    let seeds = &config.train.seeds;
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("--seeds must not be empty".into()));
    }

    // Seeds fan out across worker threads; results are joined in seed order
    // and all files are written by this thread, so reruns are bit-identical.
    let maze_ref = &maze;
    let library_ref = &library;
    let lift_ref = lift.as_ref();
    let outcomes: Vec<Result<SeedOutcome>> = thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                scope.spawn(move || run_seed(maze_ref, library_ref, config, seed, lift_ref))
            })
            .collect();
        handles.into_iter().map(join_worker).collect()
    });

    let mut successes = Vec::new();
    let mut coverages = Vec::new();
    let mut rows = String::from("seed,success,coverage\n");
    for outcome in outcomes {
        let outcome = outcome?;
        let policy_path = config
            .out_dir
            .join(format!("policy_seed{}.json", outcome.seed));
        outcome.policy.save(&policy_path)?;
        let rollout_path = config
            .out_dir
            .join(format!("rollout_seed{}.csv", outcome.seed));
        outcome.rollout.write_csv(&rollout_path)?;
        let histogram = visitation_histogram(&[&outcome.rollout], &maze)?;
        skillgen::export_heatmap(
            &histogram,
            &config.out_dir.join(format!("heatmap_seed{}.csv", outcome.seed)),
            &config.out_dir.join(format!("heatmap_seed{}.pgm", outcome.seed)),
            config.train.heatmap_gamma,
        )?;
        outln!(
            "seed {}: success {:.3}, coverage {:.3}",
            outcome.seed, outcome.success, outcome.coverage
        );
        let _ = writeln!(
            rows,
            "{},{:.6},{:.6}",
            outcome.seed, outcome.success, outcome.coverage
        );
        successes.push(outcome.success);
        coverages.push(outcome.coverage);
    }

    let (success_mean, success_std) = mean_std(&successes);
    let (coverage_mean, coverage_std) = mean_std(&coverages);
    let _ = writeln!(rows, "mean,{success_mean:.6},{coverage_mean:.6}");
    let _ = writeln!(rows, "std,{success_std:.6},{coverage_std:.6}");
    let report_path = config.out_dir.join("report.csv");
    write_text(&report_path, &rows)?;
    outln!(
        "success {success_mean:.3} +/- {success_std:.3}, coverage {coverage_mean:.3} +/- {coverage_std:.3} over {} seeds",
        seeds.len()
    );
    outln!("wrote {}", report_path.display());
    Ok(())
}

pub fn eval_policy(config: &FileConfig) -> Result<()> {
    write_resolved(config, "evaluate")?;
    let maze = config.maze.build()?;
    let lift = config.demos.build_lift()?;
    let library = resolve_library(config)?;
    let policy_path = config.policy.as_ref().ok_or_else(|| {
        Error::InvalidConfig("no policy given, pass --policy or set it in the config".into())
    })?;
    let policy = MacroPolicy::load(policy_path)?;
    let eval = &config.evaluate;
    let (success, rollout) =
        evaluate(&maze, &library, &policy, eval.episodes, eval.seed, lift.as_ref())?;
    let histogram = visitation_histogram(&[&rollout], &maze)?;
    let covered = coverage(&histogram, &maze);

    rollout.write_csv(&config.out_dir.join(format!("rollout_seed{}.csv", eval.seed)))?;
    skillgen::export_heatmap(
        &histogram,
        &config.out_dir.join(format!("heatmap_seed{}.csv", eval.seed)),
        &config.out_dir.join(format!("heatmap_seed{}.pgm", eval.seed)),
        config.train.heatmap_gamma,
    )?;
    let report_path = config.out_dir.join("report.csv");
    write_text(
        &report_path,
        &format!(
            "seed,success,coverage\n{},{success:.6},{covered:.6}\n",
            eval.seed
        ),
    )?;
    outln!(
        "success {success:.3} over {} episodes, coverage {covered:.3}",
        eval.episodes
    );
    outln!("wrote {}", report_path.display());
    Ok(())
}

/// One cell of the ablation cross-product.
#[derive(Debug, Clone)]
struct Cell {
    k: KChoice,
    n_max: usize,
    n_min: usize,
    strategy: Strategy,
    subsample: f64,
}

struct CellRow {
    cell: Cell,
    k_resolved: usize,
    success_mean: f64,
    success_std: f64,
    coverage_mean: f64,
    coverage_std: f64,
    length_mean: f64,
}

fn run_cell(
    maze: &Maze,
    dataset: &Dataset,
    base: &FileConfig,
    cell: &Cell,
    lift: Option<&ActionLift>,
) -> Result<CellRow> {
    let subsampled = dataset.subsample(cell.subsample, base.extraction.seed)?;
    let extraction = PipelineConfig {
        k: cell.k,
        n_max: cell.n_max,
        n_min: cell.n_min,
        strategy: cell.strategy,
        ..base.extraction.clone()
    };
    let library = build_skill_library(&subsampled, &extraction)?;
    let agent = base.agent.to_config();
    let mut successes = Vec::new();
    let mut coverages = Vec::new();
    for &seed in &base.train.seeds {
        let (policy, rollout) =
            train_lifted(maze, &library, base.train.budget, &agent, seed, lift)?;
        let histogram = visitation_histogram(&[&rollout], maze)?;
        coverages.push(coverage(&histogram, maze));
        let (success, _) = evaluate(maze, &library, &policy, base.train.episodes, seed, lift)?;
        successes.push(success);
    }
    let (success_mean, success_std) = mean_std(&successes);
    let (coverage_mean, coverage_std) = mean_std(&coverages);
    let length_mean = skill_length_stats(&library).map_or(0.0, |(mean, _)| mean);
    Ok(CellRow {
        cell: cell.clone(),
        k_resolved: extraction.resolve_k(subsampled.act_dim()),
        success_mean,
        success_std,
        coverage_mean,
        coverage_std,
        length_mean,
    })
}

pub fn ablate(config: &FileConfig) -> Result<()> {
    write_resolved(config, "ablate")?;
    let maze = config.maze.build()?;
    let lift = config.demos.build_lift()?;
    let dataset = require_dataset(config)?;
    if config.train.seeds.is_empty() {
        return Err(Error::InvalidConfig("--seeds must not be empty".into()));
    }

    let sweep = &config.sweep;
    let base = &config.extraction;
    let ks = or_base(&sweep.k, base.k);
    let n_maxes = or_base(&sweep.n_max, base.n_max);
    let n_mins = or_base(&sweep.n_min, base.n_min);
    let strategies = or_base(&sweep.strategy, base.strategy);
    let subsamples = or_base(&sweep.subsample, config.demos.subsample);

    let mut cells = Vec::new();
    for &k in &ks {
        for &n_max in &n_maxes {
            for &n_min in &n_mins {
                for &strategy in &strategies {
                    for &subsample in &subsamples {
                        cells.push(Cell {
                            k,
                            n_max,
                            n_min,
                            strategy,
                            subsample,
                        });
                    }
                }
            }
        }
    }

    // Cells fan out in bounded batches; rows are collected in cell order.
    let parallelism = thread::available_parallelism()
        .map(NonZeroUsize::get)
        .unwrap_or(1);
    let maze_ref = &maze;
    let dataset_ref = &dataset;
    let lift_ref = lift.as_ref();
    let mut rows = Vec::new();
    for batch in cells.chunks(parallelism) {
        let batch_rows: Vec<Result<CellRow>> = thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|cell| {
                    scope.spawn(move || run_cell(maze_ref, dataset_ref, config, cell, lift_ref))
                })
                .collect();
            handles.into_iter().map(join_worker).collect()
        });
        for row in batch_rows {
            rows.push(row?);
        }
    }

    let mut text =
        String::from("k,n_max,n_min,strategy,subsample,success_mean,success_std,coverage_mean,coverage_std,skill_length_mean\n");
    for row in &rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            row.k_resolved,
            row.cell.n_max,
            row.cell.n_min,
            row.cell.strategy,
            row.cell.subsample,
            row.success_mean,
            row.success_std,
            row.coverage_mean,
            row.coverage_std,
            row.length_mean
        );
        outln!(
            "k={} n_max={} n_min={} strategy={} subsample={}: success {:.3} +/- {:.3}, coverage {:.3} +/- {:.3}",
            row.k_resolved,
            row.cell.n_max,
            row.cell.n_min,
            row.cell.strategy,
            row.cell.subsample,
            row.success_mean,
            row.success_std,
            row.coverage_mean,
            row.coverage_std
        );
    }
    let report_path = config.out_dir.join("report.csv");
    write_text(&report_path, &text)?;
    outln!("wrote {} ({} cells)", report_path.display(), rows.len());
    Ok(())
}

pub fn stats(config: &FileConfig) -> Result<()> {
    write_resolved(config, "stats")?;
    match (&config.dataset, &config.library) {
        (Some(_), None) => {
            let dataset = require_dataset(config)?;
            let lengths: Vec<f64> = dataset
                .trajectories()
                .iter()
                .map(|t| t.len() as f64)
                .collect();
            let (mean, std) = mean_std(&lengths);
            outln!("trajectories: {}", dataset.trajectories().len());
            outln!("steps: {}", dataset.total_steps());
            outln!("obs dim: {}", dataset.obs_dim());
            outln!("act dim: {}", dataset.act_dim());
            outln!("trajectory length: {mean:.2} +/- {std:.2}");
            Ok(())
        }
        (None, Some(_)) => {
            let library = resolve_library(config)?;
            outln!("codebook size: {}", library.codebook.k);
            outln!("skills: {}", library.skills.len());
            outln!("strategy: {}", library.config.strategy);
            outln!(
                "n_max: {}, n_min: {}",
                library.config.n_max, library.config.n_min
            );
            if let Some((mean, std)) = skill_length_stats(&library) {
                outln!("skill length: {mean:.2} +/- {std:.2}");
            }
            outln!("generation seconds: {:.2}", library.generation_seconds);
            for skill in &library.skills {
                let norm = skill
                    .heading
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                outln!(
                    "skill {}: length {}, heading norm {:.3}",
                    skill.id, skill.length, norm
                );
            }
            Ok(())
        }
        _ => Err(Error::InvalidConfig(
            "stats needs exactly one of --dataset or --library".into(),
        )),
    }
}

fn or_base<T: Copy>(sweep: &[T], base: T) -> Vec<T> {
    if sweep.is_empty() {
        vec![base]
    } else {
        sweep.to_vec()
    }
}

fn join_worker<T>(handle: thread::ScopedJoinHandle<'_, Result<T>>) -> Result<T> {
    handle
        .join()
        .unwrap_or_else(|_| Err(Error::Internal("worker thread panicked".into())))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, variance.sqrt())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Write {
        path: PathBuf::from(path),
        source,
    })
}
