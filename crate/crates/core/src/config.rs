//! Pipeline configuration: codebook size, vocabulary budgets, scoring
//! strategy, and numeric knobs. Serializes to TOML and JSON with every field
//! optional, falling back to the documented defaults.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::codebook::default_k;
use crate::error::{Error, Result};

/// How candidate merges are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Mahalanobis distance of the candidate heading from the admitted set.
    Mahalanobis,
    /// Raw occurrence count, plain byte-pair encoding.
    Frequency,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mahalanobis" => Ok(Strategy::Mahalanobis),
            "frequency" => Ok(Strategy::Frequency),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy {other:?}, expected \"mahalanobis\" or \"frequency\""
            ))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Mahalanobis => write!(f, "mahalanobis"),
            Strategy::Frequency => write!(f, "frequency"),
        }
    }
}

/// Codebook size: either derived from the action dimension or pinned.
/// Serializes as the string `"auto"` or a bare integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Auto,
    Fixed(usize),
}

impl KChoice {
    /// Resolves to a concrete size: `Auto` doubles the action dimension.
    pub fn resolve(self, act_dim: usize) -> usize {
        match self {
            KChoice::Auto => default_k(act_dim),
            KChoice::Fixed(k) => k,
        }
    }
}

impl FromStr for KChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KChoice::Auto);
        }
        s.parse::<usize>().map(KChoice::Fixed).map_err(|_| {
            Error::InvalidConfig(format!(
                "k must be \"auto\" or a positive integer, got {s:?}"
            ))
        })
    }
}

impl fmt::Display for KChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KChoice::Auto => write!(f, "auto"),
            KChoice::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl Serialize for KChoice {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KChoice::Auto => serializer.serialize_str("auto"),
            KChoice::Fixed(k) => serializer.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KChoice {
    fn deserialize<D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        struct KVisitor;

        impl Visitor<'_> for KVisitor {
            type Value = KChoice;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("\"auto\" or a positive integer")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<KChoice, E> {
                KChoice::from_str(v).map_err(|e| E::custom(e.to_string()))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<KChoice, E> {
                Ok(KChoice::Fixed(v as usize))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<KChoice, E> {
                if v < 0 {
                    return Err(E::custom("k cannot be negative"));
                }
                Ok(KChoice::Fixed(v as usize))
            }
        }

        deserializer.deserialize_any(KVisitor)
    }
}

fn default_k_choice() -> KChoice {
    KChoice::Auto
}
fn default_n_max() -> usize {
    128
}
fn default_n_min() -> usize {
    16
}
fn default_epsilon() -> f64 {
    1e-6
}
fn default_strategy() -> Strategy {
    Strategy::Mahalanobis
}
fn default_min_count() -> usize {
    2
}
fn default_seed() -> u64 {
    0
}
fn default_kmeans_max_iters() -> usize {
    300
}
fn default_kmeans_tol() -> f64 {
    1e-6
}

/// Everything the extraction pipeline needs besides the dataset itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Codebook size, `"auto"` for twice the action dimension.
    #[serde(default = "default_k_choice")]
    pub k: KChoice,
    /// Vocabulary size the merge loop grows toward.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Vocabulary size the prune loop shrinks toward.
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    /// Diagonal regularizer added to the heading covariance.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    /// Minimum occurrences for a pair to be considered by the Mahalanobis
    /// strategy. The frequency strategy ignores it.
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    /// Keep base tokens out of the prune loop's reach.
    #[serde(default)]
    pub keep_base_tokens: bool,
    /// Observation columns used for headings; all columns when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_dims: Option<Vec<usize>>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_kmeans_max_iters")]
    pub kmeans_max_iters: usize,
    #[serde(default = "default_kmeans_tol")]
    pub kmeans_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: default_k_choice(),
            n_max: default_n_max(),
            n_min: default_n_min(),
            epsilon: default_epsilon(),
            strategy: default_strategy(),
            min_count: default_min_count(),
            keep_base_tokens: false,
            obs_dims: None,
            seed: default_seed(),
            kmeans_max_iters: default_kmeans_max_iters(),
            kmeans_tol: default_kmeans_tol(),
        }
    }
}

impl PipelineConfig {
    /// Concrete codebook size for a dataset with the given action dimension.
    pub fn resolve_k(&self, act_dim: usize) -> usize {
        self.k.resolve(act_dim)
    }

    /// Checks the configuration against the dataset's dimensions.
    ///
    /// The codebook needs at least two entries. The prune target must not
    /// exceed the merge target, and when base tokens are protected from
    /// pruning the prune target must leave room for all of them; otherwise it
    /// only has to stay at or above one.
    pub fn validate(&self, obs_dim: usize, act_dim: usize) -> Result<()> {
        let k = self.resolve_k(act_dim);
        if k < 2 {
            return Err(Error::InvalidConfig(format!(
                "k must be at least 2, got {k}"
            )));
        }
        if self.n_min > self.n_max {
            return Err(Error::InvalidConfig(format!(
                "n_min ({}) must not exceed n_max ({})",
                self.n_min, self.n_max
            )));
        }
        if self.keep_base_tokens {
            if self.n_min < k {
                return Err(Error::InvalidConfig(format!(
                    "with base tokens kept, n_min ({}) must be at least k ({k})",
                    self.n_min
                )));
            }
        } else if self.n_min < 1 {
            return Err(Error::InvalidConfig("n_min must be at least 1".into()));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if self.min_count < 1 {
            return Err(Error::InvalidConfig("min_count must be at least 1".into()));
        }
        if self.kmeans_max_iters < 1 {
            return Err(Error::InvalidConfig(
                "kmeans_max_iters must be at least 1".into(),
            ));
        }
        if !self.kmeans_tol.is_finite() || self.kmeans_tol < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "kmeans_tol must be finite and non-negative, got {}",
                self.kmeans_tol
            )));
        }
        if let Some(dims) = &self.obs_dims {
            if dims.is_empty() {
                return Err(Error::InvalidConfig(
                    "obs_dims must name at least one column".into(),
                ));
            }
            let mut seen = dims.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != dims.len() {
                return Err(Error::InvalidConfig(
                    "obs_dims contains duplicate columns".into(),
                ));
            }
            if let Some(&bad) = dims.iter().find(|&&d| d >= obs_dim) {
                return Err(Error::InvalidConfig(format!(
                    "obs_dims column {bad} out of range for {obs_dim}-dimensional observations"
                )));
            }
        }
        Ok(())
    }

    /// Observation dimensionality that headings will have.
    pub fn heading_dim(&self, obs_dim: usize) -> usize {
        self.obs_dims.as_ref().map_or(obs_dim, Vec::len)
    }
}
