//! Visitation statistics over maze cells.
//!
//! Rollout logs are binned into a per-cell visit histogram; coverage is the
//! fraction of free cells visited at least once. The histogram exports as a
//! raw-count CSV and as a binary PGM image whose pixels are power-law
//! normalized, `255 * (count / max)^gamma`, so sparse visits stay visible.

use crate::agent::RolloutLog;
use crate::error::{Error, Result};
use crate::maze::Maze;

/// Visit counts per grid cell, indexed `[row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitationHistogram {
    counts: Vec<Vec<u64>>,
    total: u64,
}

impl VisitationHistogram {
    pub fn rows(&self) -> usize {
        self.counts.len()
    }

    pub fn cols(&self) -> usize {
        self.counts.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn count(&self, cell: (usize, usize)) -> u64 {
        self.counts[cell.0][cell.1]
    }

    /// Total mass, equal to the number of logged primitive steps.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn max_count(&self) -> u64 {
        self.counts
            .iter()
            .flat_map(|row| row.iter().copied())
            .max()
            .unwrap_or(0)
    }
}

/// Bins every logged position into its maze cell. Rejects an empty list of
/// logs and any position that lands in a wall cell, which would mean the
/// logs came from a different maze.
pub fn visitation_histogram(
    logs: &[&RolloutLog],
    maze: &Maze,
) -> Result<VisitationHistogram> {
    if logs.is_empty() {
        return Err(Error::InvalidConfig(
            "visitation histogram needs at least one rollout log".into(),
        ));
    }
    let mut counts = vec![vec![0u64; maze.cols()]; maze.rows()];
    let mut total = 0u64;
    for log in logs {
        for episode in &log.episodes {
            for &position in &episode.positions {
                let (row, col) = maze.cell_of(position);
                if maze.is_wall(row, col) {
                    return Err(Error::Internal(format!(
                        "logged position ({}, {}) lies in a wall cell ({row}, {col})",
                        position[0], position[1]
                    )));
                }
                counts[row][col] += 1;
                total += 1;
            }
        }
    }
    Ok(VisitationHistogram { counts, total })
}

/// Fraction of free cells visited at least once.
pub fn coverage(histogram: &VisitationHistogram, maze: &Maze) -> f64 {
    let free = maze.free_cells().len();
    let visited = maze
        .free_cells()
        .iter()
        .filter(|&&cell| histogram.count(cell) > 0)
        .count();
    visited as f64 / free as f64
}

/// Writes the histogram twice: raw counts as CSV (one row per grid row) and
/// a binary PGM whose pixel for count c is `round(255 * (c / max)^gamma)`.
/// An all-zero histogram renders black.
pub fn export_heatmap(
    histogram: &VisitationHistogram,
    csv_path: &std::path::Path,
    pgm_path: &std::path::Path,
    gamma: f64,
) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "heatmap gamma must be positive and finite, got {gamma}"
        )));
    }
    let mut csv = String::new();
    for row in 0..histogram.rows() {
        let cells: Vec<String> = (0..histogram.cols())
            .map(|col| histogram.count((row, col)).to_string())
            .collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    std::fs::write(csv_path, csv).map_err(|source| Error::Write {
        path: csv_path.to_path_buf(),
        source,
    })?;

    let max = histogram.max_count();
    let mut pgm = format!("P5\n{} {}\n255\n", histogram.cols(), histogram.rows())
        .into_bytes();
    for row in 0..histogram.rows() {
        for col in 0..histogram.cols() {
            let value = if max == 0 {
                0.0
            } else {
                let fraction = histogram.count((row, col)) as f64 / max as f64;
                255.0 * fraction.powf(gamma)
            };
            pgm.push(value.round() as u8);
        }
    }
    std::fs::write(pgm_path, pgm).map_err(|source| Error::Write {
        path: pgm_path.to_path_buf(),
        source,
    })
}
