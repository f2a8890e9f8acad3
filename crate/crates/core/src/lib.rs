//! Skill extraction from continuous-action trajectory data.
//!
//! The pipeline discretizes a continuous action space with k-means, treats
//! each trajectory as a string of discrete tokens, and grows a vocabulary of
//! temporally extended "skills" by repeatedly merging adjacent token pairs.
//! Merges are chosen either by frequency (plain byte-pair encoding) or by the
//! Mahalanobis distance of a candidate's mean observation displacement from
//! the displacement distribution of the vocabulary built so far. The grown
//! vocabulary is then pruned back down with the same metric, and the survivors
//! are exported as open-loop action sequences.
//!
//! The crate also ships a small 2-D point-mass maze with sparse reward, a
//! scripted demonstration generator, and a tabular semi-Markov Q-learning
//! agent, so the extracted skills can be validated end to end as macro-actions
//! on a downstream exploration task.

pub mod agent;
pub mod codebook;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod maze;
pub mod metrics;
pub mod scoring;
pub mod tokenizer;

pub use agent::{
    evaluate, execute_skill, macro_backup, train, train_lifted, AgentConfig, EpisodeLog,
    MacroPolicy, RolloutLog, SkillOutcome,
};
pub use codebook::{assign, default_k, fit_codebook, tokenize_dataset, Codebook, TokenId};
pub use config::{KChoice, PipelineConfig, Strategy};
pub use corpus::{
    apply_merge, enumerate_candidates, CandidatePair, Instance, SubwordId, TokenizedCorpus,
};
pub use dataset::{load_dataset, save_dataset, Dataset, Trajectory};
pub use error::{Error, ErrorClass, Result};
pub use maze::{generate_demos, ActionLift, EnvState, Maze, MazeSpec, StepResult};
pub use metrics::{coverage, export_heatmap, visitation_histogram, VisitationHistogram};
pub use scoring::{
    frequency_score, heading_of_instance, subword_heading, update_stats, Heading, ScoreState,
};
pub use tokenizer::{
    build_skill_library, merge_loop, prune_loop, skill_length_stats, MergeOptions, MergeRecord,
    MergeSummary, PruneOptions, PruneRecord, Skill, SkillLibrary, Subword, SubwordKind, Vocabulary,
};
