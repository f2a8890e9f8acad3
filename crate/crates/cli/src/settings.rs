//! Configuration surface of the tool.
//!
//! A run starts from built-in defaults, layers an optional TOML file over
//! them, then applies command-line flags. The fully resolved result is
//! written to the output directory as `resolved_config.toml`, and feeding
//! that file back through `--config` reproduces the run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use skillgen::{
    fit_codebook, load_dataset, ActionLift, AgentConfig, Dataset, Error, KChoice, Maze, MazeSpec,
    PipelineConfig, Result, Skill, SkillLibrary, Strategy,
};

/// Everything a command can consume, grouped the way the TOML file is.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Subcommand that wrote this snapshot. Informational on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub out_dir: PathBuf,
    /// Demonstration dataset path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Skill library path, or the word "primitives" for the control arm
    /// that uses bare codebook actions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub library: Option<String>,
    /// Saved policy path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,
    pub maze: MazeSection,
    pub demos: DemosSection,
    pub extraction: PipelineConfig,
    pub agent: AgentSection,
    pub train: TrainSection,
    pub evaluate: EvaluateSection,
    pub sweep: SweepSection,
}

impl Default for FileConfig {
    fn default() -> Self {
        FileConfig {
            command: None,
            out_dir: PathBuf::from("out"),
            dataset: None,
            library: None,
            policy: None,
            maze: MazeSection::default(),
            demos: DemosSection::default(),
            extraction: PipelineConfig::default(),
            agent: AgentSection::default(),
            train: TrainSection::default(),
            evaluate: EvaluateSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// Which maze to run in. A map file takes precedence over the built-in
/// name; geometry fields override the defaults of either source.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MazeSection {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_action: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for MazeSection {
    fn default() -> Self {
        MazeSection {
            name: "medium".to_string(),
            map_file: None,
            cell_size: None,
            goal_radius: None,
            max_action: None,
            horizon: None,
            seed: None,
        }
    }
}

impl MazeSection {
    pub fn build(&self) -> Result<Maze> {
        let mut spec = match &self.map_file {
            Some(path) => {
                let map = fs::read_to_string(path).map_err(|source| Error::Read {
                    path: path.clone(),
                    source,
                })?;
                MazeSpec::from_ascii(&map, 1.0, 0.5, 0.2, 600, 0)?
            }
            None => MazeSpec::builtin(&self.name)?,
        };
        if let Some(v) = self.cell_size {
            spec.cell_size = v;
        }
        if let Some(v) = self.goal_radius {
            spec.goal_radius = v;
        }
        if let Some(v) = self.max_action {
            spec.max_action = v;
        }
        if let Some(v) = self.horizon {
            spec.horizon = v;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        Maze::new(spec)
    }
}

/// Demonstration generation and the optional action lift. The lift is part
/// of the data's identity: training and evaluation rebuild the same map
/// from these fields to read low-dimensional actions back out.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemosSection {
    pub trajectories: usize,
    pub noise: f64,
    pub seed: u64,
    pub subsample: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lift_dim: Option<usize>,
    pub lift_seed: u64,
}

impl Default for DemosSection {
    fn default() -> Self {
        DemosSection {
            trajectories: 100,
            noise: 0.1,
            seed: 0,
            subsample: 1.0,
            lift_dim: None,
            lift_seed: 0,
        }
    }
}

impl DemosSection {
    pub fn build_lift(&self) -> Result<Option<ActionLift>> {
        self.lift_dim
            .map(|dim| ActionLift::new(dim, self.lift_seed))
            .transpose()
    }
}

/// Q-learning hyperparameters, mirrored field for field so a partial
/// `[agent]` section falls back to the library defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub anneal_fraction: f64,
}

impl Default for AgentSection {
    fn default() -> Self {
        let config = AgentConfig::default();
        AgentSection {
            gamma: config.gamma,
            alpha: config.alpha,
            epsilon_start: config.epsilon_start,
            epsilon_end: config.epsilon_end,
            anneal_fraction: config.anneal_fraction,
        }
    }
}

impl AgentSection {
    pub fn to_config(&self) -> AgentConfig {
        AgentConfig {
            gamma: self.gamma,
            alpha: self.alpha,
            epsilon_start: self.epsilon_start,
            epsilon_end: self.epsilon_end,
            anneal_fraction: self.anneal_fraction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Total primitive steps each training run may consume.
    pub budget: usize,
    pub seeds: Vec<u64>,
    /// Greedy evaluation episodes after each training run.
    pub episodes: usize,
    /// Gamma correction of the visitation heatmap.
    pub heatmap_gamma: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            budget: 200_000,
            seeds: vec![0, 1, 2, 3, 4],
            episodes: 100,
            heatmap_gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub episodes: usize,
    pub seed: u64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            episodes: 100,
            seed: 0,
        }
    }
}

/// Value lists for the ablation cross-product. An empty list means the
/// dimension stays at its resolved base value.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub k: Vec<KChoice>,
    pub n_max: Vec<usize>,
    pub n_min: Vec<usize>,
    pub strategy: Vec<Strategy>,
    pub subsample: Vec<f64>,
}

pub fn load_file_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|err| {
        Error::InvalidConfig(format!("cannot read config file {}: {err}", path.display()))
    })?;
    toml::from_str(&text).map_err(|err| {
        Error::InvalidConfig(format!("bad config file {}: {err}", path.display()))
    })
}

/// Creates the output directory and records the fully resolved
/// configuration, stamped with the subcommand that produced it.
pub fn write_resolved(config: &FileConfig, command: &str) -> Result<PathBuf> {
    fs::create_dir_all(&config.out_dir).map_err(|source| Error::Write {
        path: config.out_dir.clone(),
        source,
    })?;
    let mut stamped = config.clone();
    stamped.command = Some(command.to_string());
    let text = toml::to_string_pretty(&stamped)
        .map_err(|err| Error::Internal(format!("cannot serialize resolved config: {err}")))?;
    let path = config.out_dir.join("resolved_config.toml");
    fs::write(&path, text).map_err(|source| Error::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub fn require_dataset(config: &FileConfig) -> Result<Dataset> {
    let path = config.dataset.as_ref().ok_or_else(|| {
        Error::InvalidConfig("no dataset given, pass --dataset or set it in the config".into())
    })?;
    load_dataset(path)
}

/// Loads the skill library named by the configuration. The special value
/// "primitives" builds the control arm instead: a codebook is fitted to the
/// dataset with the extraction settings and exported as length-1 skills.
pub fn resolve_library(config: &FileConfig) -> Result<SkillLibrary> {
    let spec = config.library.as_deref().ok_or_else(|| {
        Error::InvalidConfig(
            "no skill library given, pass --library <path> or --library primitives".into(),
        )
    })?;
    if spec == "primitives" {
        let dataset = require_dataset(config)?;
        primitive_library(&dataset, &config.extraction)
    } else {
        SkillLibrary::load(Path::new(spec))
    }
}

fn primitive_library(dataset: &Dataset, config: &PipelineConfig) -> Result<SkillLibrary> {
    config.validate(dataset.obs_dim(), dataset.act_dim())?;
    let k = config.resolve_k(dataset.act_dim());
    let codebook = fit_codebook(
        dataset,
        k,
        config.seed,
        config.kmeans_max_iters,
        config.kmeans_tol,
    )?;
    let heading_dim = config.heading_dim(dataset.obs_dim());
    let skills = codebook
        .centroids
        .iter()
        .enumerate()
        .map(|(id, centroid)| Skill {
            id,
            base_tokens: vec![id],
            actions: vec![centroid.clone()],
            length: 1,
            heading: vec![0.0; heading_dim],
        })
        .collect();
    Ok(SkillLibrary {
        codebook,
        skills,
        config: config.clone(),
        merge_log: Vec::new(),
        generation_seconds: 0.0,
    })
}
