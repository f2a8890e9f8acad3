//! Trajectory datasets and their JSON Lines serialization.
//!
//! A dataset is a list of trajectories, each an equal-length sequence of
//! observation and action vectors. On disk it is one JSON object per line:
//!
//! ```text
//! {"observations": [[0.0, 1.0], ...], "actions": [[0.5], ...]}
//! ```
//!
//! Observation and action dimensions must be consistent across the whole
//! dataset and every value must be finite. Validation failures report the
//! offending trajectory index and file line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One episode: paired observation and action vectors, one action per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Number of steps (observation/action pairs).
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// A validated collection of trajectories with consistent dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
    obs_dim: usize,
    act_dim: usize,
}

impl Dataset {
    /// Validates and wraps a set of trajectories. Requirements:
    /// at least one trajectory, each with at least one step, equal numbers of
    /// observations and actions, consistent dimensions, and finite values.
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        Self::with_line_numbers(trajectories, |index| index + 1)
    }

    fn with_line_numbers(
        mut trajectories: Vec<Trajectory>,
        line_of: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::EmptyDataset);
        }
        // Source data may carry one terminal observation past the last
        // action; drop it so observations pair with actions one to one.
        for traj in &mut trajectories {
            if traj.observations.len() == traj.actions.len() + 1 {
                traj.observations.pop();
            }
        }
        let mut obs_dim = None;
        let mut act_dim = None;
        for (index, traj) in trajectories.iter().enumerate() {
            let malformed = |reason: String| Error::MalformedRecord {
                trajectory: index,
                line: line_of(index),
                reason,
            };
            if traj.observations.is_empty() || traj.actions.is_empty() {
                return Err(malformed("trajectory has no steps".into()));
            }
            if traj.observations.len() != traj.actions.len() {
                return Err(malformed(format!(
                    "{} observations but {} actions",
                    traj.observations.len(),
                    traj.actions.len()
                )));
            }
            for (t, obs) in traj.observations.iter().enumerate() {
                let dim = *obs_dim.get_or_insert(obs.len());
                if obs.len() != dim {
                    return Err(malformed(format!(
                        "observation {t} has dimension {}, expected {dim}",
                        obs.len()
                    )));
                }
                if let Some(bad) = obs.iter().find(|v| !v.is_finite()) {
                    return Err(malformed(format!(
                        "observation {t} contains non-finite value {bad}"
                    )));
                }
            }
            for (t, act) in traj.actions.iter().enumerate() {
                let dim = *act_dim.get_or_insert(act.len());
                if act.len() != dim {
                    return Err(malformed(format!(
                        "action {t} has dimension {}, expected {dim}",
                        act.len()
                    )));
                }
                if let Some(bad) = act.iter().find(|v| !v.is_finite()) {
                    return Err(malformed(format!(
                        "action {t} contains non-finite value {bad}"
                    )));
                }
            }
        }
        let obs_dim = obs_dim.expect("non-empty dataset has a first observation");
        let act_dim = act_dim.expect("non-empty dataset has a first action");
        if obs_dim == 0 {
            return Err(Error::MalformedRecord {
                trajectory: 0,
                line: line_of(0),
                reason: "observations have dimension 0".into(),
            });
        }
        if act_dim == 0 {
            return Err(Error::MalformedRecord {
                trajectory: 0,
                line: line_of(0),
                reason: "actions have dimension 0".into(),
            });
        }
        Ok(Dataset {
            trajectories,
            obs_dim,
            act_dim,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    /// Total number of steps across all trajectories.
    pub fn total_steps(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// Keeps a random `fraction` of trajectories (at least one), chosen with
    /// a seeded shuffle. Survivors keep their original relative order so the
    /// result is deterministic in both membership and sequence.
    pub fn subsample(&self, fraction: f64, seed: u64) -> Result<Dataset> {
        if !(0.0..=1.0).contains(&fraction) || !fraction.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "subsample fraction must be in [0, 1], got {fraction}"
            )));
        }
        let n = self.trajectories.len();
        let keep = ((fraction * n as f64).round() as usize).clamp(1, n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut chosen: Vec<usize> = order.into_iter().take(keep).collect();
        chosen.sort_unstable();
        let trajectories = chosen
            .into_iter()
            .map(|i| self.trajectories[i].clone())
            .collect();
        Ok(Dataset {
            trajectories,
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
        })
    }
}

/// Reads a JSON Lines dataset. Blank lines are rejected; every line must be
/// a single trajectory object.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut trajectories = Vec::new();
    let mut lines = Vec::new();
    for (line_index, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let trajectory_index = trajectories.len();
        let traj: Trajectory =
            serde_json::from_str(&line).map_err(|err| Error::MalformedRecord {
                trajectory: trajectory_index,
                line: line_index + 1,
                reason: err.to_string(),
            })?;
        trajectories.push(traj);
        lines.push(line_index + 1);
    }
    Dataset::with_line_numbers(trajectories, move |index| lines[index])
}

/// Writes a dataset as JSON Lines with LF line endings.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for traj in dataset.trajectories() {
            serde_json::to_writer(&mut writer, traj)
                .map_err(|err| std::io::Error::new(std::io::ErrorKind::Other, err))?;
            writer.write_all(b"\n")?;
        }
        writer.flush()
    };
    write().map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}
