//! Subword headings and merge scoring.
//!
//! The heading of a subword instance spanning steps `start .. start + L` of a
//! trajectory is the mean displacement of its observations from the first
//! one:
//!
//! ```text
//! q = (1/L) * sum_{r=0}^{L-1} (o[start + r] - o[start])
//! ```
//!
//! A length-1 instance therefore has a zero heading. A subword's heading is
//! the arithmetic mean over all of its instances. Candidate merges are scored
//! either by raw occurrence count or by the Mahalanobis distance of their
//! heading from the distribution of headings admitted so far:
//!
//! ```text
//! d = (q - mean)ᵀ cov⁻¹ (q - mean)
//! ```
//!
//! Before anything is admitted the distribution is the standard normal
//! (zero mean, identity covariance). With one admitted heading the covariance
//! is `eps * I`; with more it is the population covariance plus `eps * I`.

use crate::corpus::Instance;
use crate::dataset::{Dataset, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};

/// Mean observation displacement of a subword, one entry per tracked
/// observation dimension.
pub type Heading = Vec<f64>;

/// Heading of a single instance. `dims` restricts which observation columns
/// participate; `None` uses all of them.
pub fn heading_of_instance(
    trajectory: &Trajectory,
    instance: Instance,
    dims: Option<&[usize]>,
) -> Result<Heading> {
    let obs = &trajectory.observations;
    let end = instance.start + instance.length;
    if instance.length == 0 || end > obs.len() {
        return Err(Error::SpanOutOfRange {
            start: instance.start,
            length: instance.length,
            available: obs.len(),
        });
    }
    let base = &obs[instance.start];
    let project = |o: &[f64]| -> Result<Vec<f64>> {
        match dims {
            None => Ok(o.to_vec()),
            Some(cols) => cols
                .iter()
                .map(|&c| {
                    o.get(c).copied().ok_or_else(|| Error::DimensionMismatch {
                        expected: o.len(),
                        got: c,
                        context: "observation column index".into(),
                    })
                })
                .collect(),
        }
    };
    let base = project(base)?;
    let mut sum = vec![0.0; base.len()];
    for r in 0..instance.length {
        let o = project(&obs[instance.start + r])?;
        for (s, (v, b)) in sum.iter_mut().zip(o.iter().zip(&base)) {
            *s += v - b;
        }
    }
    let inv = 1.0 / instance.length as f64;
    Ok(sum.into_iter().map(|s| s * inv).collect())
}

/// Mean heading over all instances of a subword.
pub fn subword_heading(
    dataset: &Dataset,
    instances: &[Instance],
    dims: Option<&[usize]>,
) -> Result<Heading> {
    if instances.is_empty() {
        return Err(Error::Internal(
            "subword heading requested for zero instances".into(),
        ));
    }
    let trajectories = dataset.trajectories();
    let mut sum: Option<Vec<f64>> = None;
    for &instance in instances {
        let traj = trajectories.get(instance.trajectory).ok_or_else(|| {
            Error::Internal(format!(
                "instance references trajectory {} of {}",
                instance.trajectory,
                trajectories.len()
            ))
        })?;
        let h = heading_of_instance(traj, instance, dims)?;
        match &mut sum {
            None => sum = Some(h),
            Some(acc) => {
                for (a, v) in acc.iter_mut().zip(&h) {
                    *a += v;
                }
            }
        }
    }
    let mut mean = sum.expect("instances is non-empty");
    let inv = 1.0 / instances.len() as f64;
    for v in &mut mean {
        *v *= inv;
    }
    Ok(mean)
}

/// Frozen statistics of the admitted headings, ready to score candidates.
#[derive(Debug, Clone)]
pub struct ScoreState {
    mean: Heading,
    chol: Cholesky,
}

impl ScoreState {
    /// Builds scoring statistics from the admitted headings.
    ///
    /// No headings: standard normal. One heading: its value as mean with
    /// `epsilon * I` covariance. Otherwise population covariance (normalized
    /// by the count, not count minus one) plus `epsilon * I`.
    pub fn from_headings(headings: &[Heading], dim: usize, epsilon: f64) -> Result<Self> {
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be finite and non-negative, got {epsilon}"
            )));
        }
        if headings.is_empty() {
            return Self::from_parts(vec![0.0; dim], Matrix::identity(dim));
        }
        for h in headings {
            if h.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: h.len(),
                    context: "admitted heading".into(),
                });
            }
        }
        let n = headings.len() as f64;
        let mut mean = vec![0.0; dim];
        for h in headings {
            for (m, v) in mean.iter_mut().zip(h) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut cov = Matrix::zeros(dim);
        for h in headings {
            let centered: Vec<f64> = h.iter().zip(&mean).map(|(v, m)| v - m).collect();
            for i in 0..dim {
                for j in 0..dim {
                    *cov.at_mut(i, j) += centered[i] * centered[j];
                }
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                *cov.at_mut(i, j) /= n;
            }
        }
        cov.add_diagonal(epsilon);
        Self::from_parts(mean, cov)
    }

    /// Wraps an explicit mean and covariance. Fails when the covariance is
    /// not positive definite to working precision.
    pub fn from_parts(mean: Heading, cov: Matrix) -> Result<Self> {
        if cov.dim() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: cov.dim(),
                context: "covariance dimension".into(),
            });
        }
        let chol = cov.cholesky().ok_or_else(|| {
            Error::Internal(
                "heading covariance is not positive definite; a larger epsilon is needed"
                    .into(),
            )
        })?;
        Ok(ScoreState { mean, chol })
    }

    pub fn mean(&self) -> &Heading {
        &self.mean
    }

    /// Squared Mahalanobis distance of `heading` from the admitted
    /// distribution. Computed as the squared norm of the forward-substituted
    /// residual, so it is non-negative even in floating point.
    pub fn mahalanobis_score(&self, heading: &Heading) -> f64 {
        debug_assert_eq!(heading.len(), self.mean.len());
        let diff: Vec<f64> = heading.iter().zip(&self.mean).map(|(q, m)| q - m).collect();
        let y = self.chol.forward_sub(&diff);
        dot(&y, &y)
    }
}

/// Convenience constructor mirroring the admission loop's update step.
pub fn update_stats(headings: &[Heading], dim: usize, epsilon: f64) -> Result<ScoreState> {
    ScoreState::from_headings(headings, dim, epsilon)
}

/// Score used by the frequency merge strategy: the raw occurrence count.
pub fn frequency_score(count: usize) -> f64 {
    count as f64
}
