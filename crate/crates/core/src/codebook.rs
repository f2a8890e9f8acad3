//! Action discretization with k-means.
//!
//! Actions are clustered with Lloyd's algorithm seeded by k-means++ and the
//! resulting centroids become the base token vocabulary: every action maps to
//! the id of its nearest centroid. All randomness flows through an explicit
//! seed so a given dataset and seed always produce the same codebook.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::squared_distance;

/// Index of a codebook centroid, the id of a base token.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TokenId(pub usize);

/// A fitted k-means codebook over the action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub k: usize,
    pub seed: u64,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from each training action to its centroid.
    pub inertia: f64,
}

impl Codebook {
    pub fn act_dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }
}

/// Default codebook size for a given action dimensionality.
pub fn default_k(act_dim: usize) -> usize {
    2 * act_dim
}

/// Fits a codebook on every action in the dataset.
pub fn fit_codebook(
    dataset: &Dataset,
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<Codebook> {
    let actions: Vec<&[f64]> = dataset
        .trajectories()
        .iter()
        .flat_map(|t| t.actions.iter().map(Vec::as_slice))
        .collect();
    let (centroids, inertia, _trace) = kmeans(&actions, k, seed, max_iters, tol)?;
    Ok(Codebook {
        k,
        seed,
        centroids,
        inertia,
    })
}

/// Id of the nearest centroid; ties go to the lowest index.
pub fn assign(codebook: &Codebook, action: &[f64]) -> TokenId {
    assert_eq!(
        action.len(),
        codebook.act_dim(),
        "action dimension does not match the codebook"
    );
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, centroid) in codebook.centroids.iter().enumerate() {
        let d2 = squared_distance(centroid, action);
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    TokenId(best)
}

/// Maps every action in the dataset to its base token id.
pub fn tokenize_dataset(dataset: &Dataset, codebook: &Codebook) -> Vec<Vec<TokenId>> {
    dataset
        .trajectories()
        .iter()
        .map(|traj| traj.actions.iter().map(|a| assign(codebook, a)).collect())
        .collect()
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Empty clusters are repaired each iteration by moving the point farthest
/// from its assigned centroid into the empty slot. Iteration stops when the
/// largest centroid displacement drops below `tol`, or at `max_iters`.
/// Returns centroids, final inertia, and the per-iteration inertia trace.
fn kmeans(
    points: &[&[f64]],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<Vec<f64>>, f64, Vec<f64>)> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let distinct = count_distinct(points);
    if distinct < k {
        return Err(Error::InsufficientDistinctActions {
            needed: k,
            found: distinct,
        });
    }
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);
    let mut assignments = vec![0usize; points.len()];
    let mut trace = Vec::new();

    for _ in 0..max_iters {
        // Assignment step, ties to the lowest centroid index.
        for (p, point) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d2 = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d2 = squared_distance(centroid, point);
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = c;
                }
            }
            assignments[p] = best;
        }

        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }

        // Repair empty clusters: each takes the point currently farthest from
        // its own centroid, skipping donors that would become empty.
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let mut farthest: Option<(usize, f64)> = None;
            for (p, point) in points.iter().enumerate() {
                if counts[assignments[p]] <= 1 {
                    continue;
                }
                let d2 = squared_distance(&centroids[assignments[p]], point);
                let better = match farthest {
                    None => true,
                    Some((_, best_d2)) => d2 > best_d2,
                };
                if better {
                    farthest = Some((p, d2));
                }
            }
            let (p, _) = farthest.ok_or_else(|| {
                Error::Internal("no donor point available for empty cluster".into())
            })?;
            counts[assignments[p]] -= 1;
            assignments[p] = empty;
            counts[empty] = 1;
            centroids[empty] = points[p].to_vec();
        }

        trace.push(cost(points, &assignments, &centroids));

        // Update step.
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, point) in points.iter().enumerate() {
            for (s, v) in sums[assignments[p]].iter_mut().zip(point.iter()) {
                *s += v;
            }
        }
        let mut max_shift: f64 = 0.0;
        for c in 0..k {
            debug_assert!(counts[c] > 0);
            let inv = 1.0 / counts[c] as f64;
            let mut shift2 = 0.0;
            for d in 0..dim {
                let new = sums[c][d] * inv;
                let delta = new - centroids[c][d];
                shift2 += delta * delta;
                centroids[c][d] = new;
            }
            max_shift = max_shift.max(shift2.sqrt());
        }
        if max_shift < tol {
            break;
        }
    }

    // Final assignment against the updated centroids.
    for (p, point) in points.iter().enumerate() {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d2 = squared_distance(centroid, point);
            if d2 < best_d2 {
                best_d2 = d2;
                best = c;
            }
        }
        assignments[p] = best;
    }
    let inertia = cost(points, &assignments, &centroids);
    Ok((centroids, inertia, trace))
}

fn cost(points: &[&[f64]], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(point, &a)| squared_distance(&centroids[a], point))
        .sum()
}

/// k-means++: the first centroid is uniform over points, each further one is
/// drawn with probability proportional to squared distance from the nearest
/// centroid chosen so far.
fn seed_plus_plus(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..points.len());
    centroids.push(points[first].to_vec());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        debug_assert!(total > 0.0, "distinct-count precheck guarantees a gap");
        let r = rng.gen::<f64>() * total;
        let mut cum = 0.0;
        let mut chosen = None;
        for (i, &w) in d2.iter().enumerate() {
            cum += w;
            if w > 0.0 && cum > r {
                chosen = Some(i);
                break;
            }
        }
        // Rounding can push the cursor past every bucket; fall back to the
        // last point with positive weight.
        let chosen = chosen.unwrap_or_else(|| {
            d2.iter()
                .rposition(|&w| w > 0.0)
                .expect("total > 0 implies a positive weight")
        });
        let new = points[chosen].to_vec();
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, &new));
        }
        centroids.push(new);
    }
    centroids
}

fn count_distinct(points: &[&[f64]]) -> usize {
    let mut keys: Vec<Vec<u64>> = points
        .iter()
        .map(|p| p.iter().map(|v| v.to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}
