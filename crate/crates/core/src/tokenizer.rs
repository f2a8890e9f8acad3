//! Vocabulary growth and pruning, end to end.
//!
//! Starting from the base tokens, the merge loop repeatedly scores every
//! adjacent candidate pair, admits the argmax, records its heading, refreshes
//! the heading statistics, and rewrites the corpus, until the vocabulary
//! reaches its growth target or no admissible candidate remains. The prune
//! loop then repeatedly removes the subword whose heading sits closest to the
//! admitted distribution until the vocabulary shrinks to its final size. The
//! corpus is not rewritten while pruning, and removing a subword never
//! invalidates subwords built from it, because every subword expands to base
//! tokens. Survivors are exported as open-loop centroid-action sequences.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::codebook::{fit_codebook, tokenize_dataset, Codebook, TokenId};
use crate::config::{PipelineConfig, Strategy};
use crate::corpus::{apply_merge, enumerate_candidates, Instance, SubwordId, TokenizedCorpus};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scoring::{frequency_score, subword_heading, Heading, ScoreState};

/// How a vocabulary entry came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubwordKind {
    Base,
    Merged { left: SubwordId, right: SubwordId },
}

/// One vocabulary entry. Base tokens carry a zero heading by convention;
/// merged subwords carry the mean heading over their instances at the time
/// they were admitted.
#[derive(Debug, Clone)]
pub struct Subword {
    pub id: SubwordId,
    pub kind: SubwordKind,
    pub expansion: Vec<TokenId>,
    pub heading: Heading,
    pub instance_count: usize,
}

/// One admitted merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub left: SubwordId,
    pub right: SubwordId,
    pub new_id: SubwordId,
    pub score: f64,
    pub instance_count: usize,
}

/// One pruned subword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneRecord {
    pub removed: SubwordId,
    pub score: f64,
}

/// The evolving vocabulary: every subword ever created, which of them are
/// active, the admitted headings in admission order, and the merge and prune
/// logs that allow exact replay.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    subwords: Vec<Subword>,
    active: Vec<bool>,
    admitted: Vec<SubwordId>,
    expansions: HashSet<Vec<TokenId>>,
    merge_log: Vec<MergeRecord>,
    prune_log: Vec<PruneRecord>,
    heading_dim: usize,
    base_count: usize,
}

impl Vocabulary {
    /// Base-token vocabulary for a codebook. Instance counts are taken from
    /// the corpus, headings are zero vectors of `heading_dim`.
    pub fn new(codebook: &Codebook, corpus: &TokenizedCorpus, heading_dim: usize) -> Self {
        let mut counts = vec![0usize; codebook.k];
        for seq in &corpus.sequences {
            for entry in seq {
                if entry.id.0 < codebook.k {
                    counts[entry.id.0] += 1;
                }
            }
        }
        let subwords: Vec<Subword> = (0..codebook.k)
            .map(|i| Subword {
                id: SubwordId(i),
                kind: SubwordKind::Base,
                expansion: vec![TokenId(i)],
                heading: vec![0.0; heading_dim],
                instance_count: counts[i],
            })
            .collect();
        let expansions = subwords.iter().map(|s| s.expansion.clone()).collect();
        Vocabulary {
            subwords,
            active: vec![true; codebook.k],
            admitted: Vec::new(),
            expansions,
            merge_log: Vec::new(),
            prune_log: Vec::new(),
            heading_dim,
            base_count: codebook.k,
        }
    }

    /// Number of active subwords.
    pub fn size(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Active ids in ascending order.
    pub fn active_ids(&self) -> Vec<SubwordId> {
        self.active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| SubwordId(i))
            .collect()
    }

    pub fn subword(&self, id: SubwordId) -> &Subword {
        &self.subwords[id.0]
    }

    pub fn is_active(&self, id: SubwordId) -> bool {
        self.active[id.0]
    }

    pub fn is_base(&self, id: SubwordId) -> bool {
        id.0 < self.base_count
    }

    pub fn base_count(&self) -> usize {
        self.base_count
    }

    pub fn heading_dim(&self) -> usize {
        self.heading_dim
    }

    /// Headings of still-admitted merged subwords, in admission order.
    pub fn admitted_headings(&self) -> Vec<Heading> {
        self.admitted
            .iter()
            .map(|&id| self.subwords[id.0].heading.clone())
            .collect()
    }

    pub fn merge_log(&self) -> &[MergeRecord] {
        &self.merge_log
    }

    pub fn prune_log(&self) -> &[PruneRecord] {
        &self.prune_log
    }

    pub fn contains_expansion(&self, expansion: &[TokenId]) -> bool {
        self.expansions.contains(expansion)
    }

    /// Admits a merged subword, appends its heading to the admitted set, and
    /// logs the merge. Returns the new id.
    pub fn admit(
        &mut self,
        left: SubwordId,
        right: SubwordId,
        heading: Heading,
        score: f64,
        instance_count: usize,
    ) -> Result<SubwordId> {
        if !self.is_active(left) || !self.is_active(right) {
            return Err(Error::Internal(format!(
                "merge parents {left:?}, {right:?} must be active"
            )));
        }
        if heading.len() != self.heading_dim {
            return Err(Error::DimensionMismatch {
                expected: self.heading_dim,
                got: heading.len(),
                context: "admitted heading".into(),
            });
        }
        let mut expansion = self.subwords[left.0].expansion.clone();
        expansion.extend_from_slice(&self.subwords[right.0].expansion);
        if self.expansions.contains(&expansion) {
            return Err(Error::Internal(format!(
                "duplicate expansion admitted for merge of {left:?}, {right:?}"
            )));
        }
        let id = SubwordId(self.subwords.len());
        self.expansions.insert(expansion.clone());
        self.subwords.push(Subword {
            id,
            kind: SubwordKind::Merged { left, right },
            expansion,
            heading,
            instance_count,
        });
        self.active.push(true);
        self.admitted.push(id);
        self.merge_log.push(MergeRecord {
            left,
            right,
            new_id: id,
            score,
            instance_count,
        });
        Ok(id)
    }

    /// Deactivates a subword, retracts its heading from the admitted set,
    /// and logs the removal.
    pub fn remove(&mut self, id: SubwordId, score: f64) -> Result<()> {
        if !self.is_active(id) {
            return Err(Error::Internal(format!("{id:?} is not active")));
        }
        self.active[id.0] = false;
        self.admitted.retain(|&a| a != id);
        self.prune_log.push(PruneRecord { removed: id, score });
        Ok(())
    }
}

/// Merge-loop settings, a projection of the pipeline configuration.
#[derive(Debug, Clone)]
pub struct MergeOptions {
    /// Vocabulary size to grow toward.
    pub n_max: usize,
    pub strategy: Strategy,
    pub epsilon: f64,
    /// Minimum occurrences for a candidate under the Mahalanobis strategy.
    pub min_count: usize,
    /// Observation columns for headings; all when absent.
    pub obs_dims: Option<Vec<usize>>,
}

impl MergeOptions {
    pub fn from_config(config: &PipelineConfig) -> Self {
        MergeOptions {
            n_max: config.n_max,
            strategy: config.strategy,
            epsilon: config.epsilon,
            min_count: config.min_count,
            obs_dims: config.obs_dims.clone(),
        }
    }
}

/// What the merge loop accomplished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeSummary {
    pub merges: usize,
    /// True when the loop stopped because no admissible candidate remained
    /// before the vocabulary reached its target size.
    pub exhausted: bool,
}

struct ScoredCandidate {
    left: SubwordId,
    right: SubwordId,
    expansion: Vec<TokenId>,
    score: f64,
    heading: Option<Heading>,
    instances: Vec<Instance>,
}

fn beats(a: &ScoredCandidate, b: &ScoredCandidate) -> bool {
    match a.score.total_cmp(&b.score) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match a.expansion.cmp(&b.expansion) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => (a.left, a.right) < (b.left, b.right),
        },
    }
}

/// Grows the vocabulary to `n_max` active subwords by repeated best-first
/// merging. Ties break toward the lexicographically smaller base-token
/// expansion, then the smaller pair of parent ids. Candidates whose expansion
/// already exists are skipped; under the Mahalanobis strategy so are
/// candidates with fewer than `min_count` occurrences.
pub fn merge_loop(
    dataset: &Dataset,
    corpus: &mut TokenizedCorpus,
    vocab: &mut Vocabulary,
    options: &MergeOptions,
) -> Result<MergeSummary> {
    let dims = options.obs_dims.as_deref();
    let mut merges = 0;
    while vocab.size() < options.n_max {
        let state = match options.strategy {
            Strategy::Mahalanobis => Some(ScoreState::from_headings(
                &vocab.admitted_headings(),
                vocab.heading_dim(),
                options.epsilon,
            )?),
            Strategy::Frequency => None,
        };
        let mut best: Option<ScoredCandidate> = None;
        for pair in enumerate_candidates(corpus) {
            let mut expansion = vocab.subword(pair.left).expansion.clone();
            expansion.extend_from_slice(&vocab.subword(pair.right).expansion);
            if vocab.contains_expansion(&expansion) {
                continue;
            }
            let scored = match &state {
                None => ScoredCandidate {
                    left: pair.left,
                    right: pair.right,
                    expansion,
                    score: frequency_score(pair.count()),
                    heading: None,
                    instances: pair.instances,
                },
                Some(state) => {
                    if pair.count() < options.min_count {
                        continue;
                    }
                    let heading = subword_heading(dataset, &pair.instances, dims)?;
                    ScoredCandidate {
                        left: pair.left,
                        right: pair.right,
                        expansion,
                        score: state.mahalanobis_score(&heading),
                        heading: Some(heading),
                        instances: pair.instances,
                    }
                }
            };
            let replace = match &best {
                None => true,
                Some(current) => beats(&scored, current),
            };
            if replace {
                best = Some(scored);
            }
        }
        let Some(winner) = best else {
            return Ok(MergeSummary {
                merges,
                exhausted: true,
            });
        };
        let heading = match winner.heading {
            Some(h) => h,
            None => subword_heading(dataset, &winner.instances, dims)?,
        };
        let new_id = vocab.admit(
            winner.left,
            winner.right,
            heading,
            winner.score,
            winner.instances.len(),
        )?;
        let created = apply_merge(corpus, winner.left, winner.right, new_id);
        debug_assert_eq!(created, winner.instances);
        merges += 1;
    }
    Ok(MergeSummary {
        merges,
        exhausted: false,
    })
}

/// Prune-loop settings.
#[derive(Debug, Clone)]
pub struct PruneOptions {
    /// Vocabulary size to shrink toward.
    pub n_min: usize,
    pub epsilon: f64,
    /// Exempt base tokens from removal.
    pub keep_base_tokens: bool,
}

impl PruneOptions {
    pub fn from_config(config: &PipelineConfig) -> Self {
        PruneOptions {
            n_min: config.n_min,
            epsilon: config.epsilon,
            keep_base_tokens: config.keep_base_tokens,
        }
    }
}

/// Shrinks the vocabulary to `n_min` active subwords by repeatedly removing
/// the subword whose stored heading scores lowest against the statistics of
/// the still-admitted headings. Base tokens score with their zero heading and
/// are eligible unless `keep_base_tokens` is set. Removing a base token does
/// not change the admitted statistics; removing a merged subword retracts its
/// heading before the next round.
pub fn prune_loop(vocab: &mut Vocabulary, options: &PruneOptions) -> Result<()> {
    if options.n_min > vocab.size() {
        return Err(Error::InvalidConfig(format!(
            "n_min ({}) exceeds the vocabulary size ({})",
            options.n_min,
            vocab.size()
        )));
    }
    while vocab.size() > options.n_min {
        let state = ScoreState::from_headings(
            &vocab.admitted_headings(),
            vocab.heading_dim(),
            options.epsilon,
        )?;
        let mut worst: Option<(SubwordId, f64)> = None;
        for id in vocab.active_ids() {
            if options.keep_base_tokens && vocab.is_base(id) {
                continue;
            }
            let sub = vocab.subword(id);
            let score = state.mahalanobis_score(&sub.heading);
            let replace = match worst {
                None => true,
                Some((current_id, current_score)) => match score.total_cmp(&current_score) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => {
                        let current = vocab.subword(current_id);
                        match sub.expansion.cmp(&current.expansion) {
                            Ordering::Less => true,
                            Ordering::Greater => false,
                            Ordering::Equal => id < current_id,
                        }
                    }
                },
            };
            if replace {
                worst = Some((id, score));
            }
        }
        let Some((loser, score)) = worst else {
            return Err(Error::Internal(
                "no prunable subword although the vocabulary exceeds n_min".into(),
            ));
        };
        vocab.remove(loser, score)?;
    }
    Ok(())
}

/// One exported skill: an open-loop sequence of centroid actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skill {
    pub id: usize,
    pub base_tokens: Vec<usize>,
    pub actions: Vec<Vec<f64>>,
    pub length: usize,
    pub heading: Vec<f64>,
}

/// The final vocabulary with everything needed to execute and audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillLibrary {
    pub codebook: Codebook,
    pub skills: Vec<Skill>,
    pub config: PipelineConfig,
    pub merge_log: Vec<MergeRecord>,
    pub generation_seconds: f64,
}

impl SkillLibrary {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer(&mut writer, self).map_err(|err| Error::Write {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::Other, err),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_reader(BufReader::new(file)).map_err(|err| Error::MalformedLibrary {
            path: path.to_path_buf(),
            reason: err.to_string(),
        })
    }

    /// A library of the codebook centroids as length-1 skills, the baseline
    /// action space without any merging.
    pub fn primitive_variant(&self) -> SkillLibrary {
        let heading_dim = self
            .skills
            .first()
            .map_or(0, |skill| skill.heading.len());
        let skills = self
            .codebook
            .centroids
            .iter()
            .enumerate()
            .map(|(i, centroid)| Skill {
                id: i,
                base_tokens: vec![i],
                actions: vec![centroid.clone()],
                length: 1,
                heading: vec![0.0; heading_dim],
            })
            .collect();
        SkillLibrary {
            codebook: self.codebook.clone(),
            skills,
            config: self.config.clone(),
            merge_log: Vec::new(),
            generation_seconds: 0.0,
        }
    }
}

/// Runs the whole pipeline: fit the codebook, tokenize, grow, prune, export.
/// Deterministic given the dataset and configuration; the recorded wall-clock
/// duration is the only field that varies between identical runs.
pub fn build_skill_library(dataset: &Dataset, config: &PipelineConfig) -> Result<SkillLibrary> {
    config.validate(dataset.obs_dim(), dataset.act_dim())?;
    let started = Instant::now();
    let k = config.resolve_k(dataset.act_dim());
    let codebook = fit_codebook(
        dataset,
        k,
        config.seed,
        config.kmeans_max_iters,
        config.kmeans_tol,
    )?;
    let tokens = tokenize_dataset(dataset, &codebook);
    let mut corpus = TokenizedCorpus::from_tokens(&tokens);
    let mut vocab = Vocabulary::new(&codebook, &corpus, config.heading_dim(dataset.obs_dim()));
    merge_loop(
        dataset,
        &mut corpus,
        &mut vocab,
        &MergeOptions::from_config(config),
    )?;
    // An exhausted corpus can leave the vocabulary below the prune target;
    // export whatever exists instead of failing.
    let mut prune = PruneOptions::from_config(config);
    prune.n_min = prune.n_min.min(vocab.size());
    prune_loop(&mut vocab, &prune)?;
    let skills = vocab
        .active_ids()
        .into_iter()
        .map(|id| {
            let sub = vocab.subword(id);
            Skill {
                id: id.0,
                base_tokens: sub.expansion.iter().map(|t| t.0).collect(),
                actions: sub
                    .expansion
                    .iter()
                    .map(|t| codebook.centroids[t.0].clone())
                    .collect(),
                length: sub.expansion.len(),
                heading: sub.heading.clone(),
            }
        })
        .collect();
    Ok(SkillLibrary {
        codebook,
        skills,
        config: config.clone(),
        merge_log: vocab.merge_log().to_vec(),
        generation_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Mean and population standard deviation of skill lengths. `None` for an
/// empty library.
pub fn skill_length_stats(library: &SkillLibrary) -> Option<(f64, f64)> {
    if library.skills.is_empty() {
        return None;
    }
    let n = library.skills.len() as f64;
    let mean = library.skills.iter().map(|s| s.length as f64).sum::<f64>() / n;
    let var = library
        .skills
        .iter()
        .map(|s| {
            let d = s.length as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Trajectory;

    /// Dataset whose actions map one-to-one onto the tokens of `sequences`
    /// under a two-centroid-per-unit codebook, with per-step observations
    /// supplied alongside.
    fn fixture(
        centroids: Vec<Vec<f64>>,
        sequences: &[(&[usize], &[f64])],
    ) -> (Dataset, Codebook, TokenizedCorpus, Vocabulary) {
        let codebook = Codebook {
            k: centroids.len(),
            seed: 0,
            centroids,
            inertia: 0.0,
        };
        let trajectories: Vec<Trajectory> = sequences
            .iter()
            .map(|(tokens, obs)| {
                assert_eq!(tokens.len(), obs.len());
                Trajectory {
                    observations: obs.iter().map(|&v| vec![v]).collect(),
                    actions: tokens
                        .iter()
                        .map(|&t| codebook.centroids[t].clone())
                        .collect(),
                }
            })
            .collect();
        let dataset = Dataset::new(trajectories).unwrap();
        let tokens = tokenize_dataset(&dataset, &codebook);
        let corpus = TokenizedCorpus::from_tokens(&tokens);
        let vocab = Vocabulary::new(&codebook, &corpus, 1);
        (dataset, codebook, corpus, vocab)
    }

    fn centroids_1d(k: usize) -> Vec<Vec<f64>> {
        (0..k).map(|i| vec![i as f64 * 10.0]).collect()
    }

    fn options(n_max: usize, strategy: Strategy, min_count: usize) -> MergeOptions {
        MergeOptions {
            n_max,
            strategy,
            epsilon: 1e-6,
            min_count,
            obs_dims: None,
        }
    }

    #[test]
    fn vocabulary_starts_with_base_tokens() {
        let (_, _, corpus, vocab) = fixture(
            centroids_1d(3),
            &[(&[0, 1, 2, 0], &[0.0, 0.0, 0.0, 0.0])],
        );
        assert_eq!(vocab.size(), 3);
        assert_eq!(corpus.total_entries(), 4);
        for i in 0..3 {
            let sub = vocab.subword(SubwordId(i));
            assert_eq!(sub.kind, SubwordKind::Base);
            assert_eq!(sub.expansion, vec![TokenId(i)]);
            assert_eq!(sub.heading, vec![0.0]);
        }
        assert_eq!(vocab.subword(SubwordId(0)).instance_count, 2);
        assert_eq!(vocab.subword(SubwordId(1)).instance_count, 1);
    }

    #[test]
    fn frequency_first_merge_is_most_common_pair() {
        // Tokens a b a b c a b: pair (a, b) occurs three times, every other
        // pair once.
        let (dataset, _, mut corpus, mut vocab) = fixture(
            centroids_1d(3),
            &[(&[0, 1, 0, 1, 2, 0, 1], &[0.0; 7])],
        );
        let summary = merge_loop(
            &dataset,
            &mut corpus,
            &mut vocab,
            &options(4, Strategy::Frequency, 1),
        )
        .unwrap();
        assert_eq!(summary.merges, 1);
        assert!(!summary.exhausted);
        let record = &vocab.merge_log()[0];
        assert_eq!((record.left, record.right), (SubwordId(0), SubwordId(1)));
        assert_eq!(record.new_id, SubwordId(3));
        assert_eq!(record.score, 3.0);
        assert_eq!(record.instance_count, 3);
        let ids: Vec<usize> = corpus.sequences[0].iter().map(|e| e.id.0).collect();
        assert_eq!(ids, vec![3, 3, 2, 3]);
    }

    #[test]
    fn mahalanobis_first_merge_maximizes_heading_norm() {
        // With nothing admitted the score state is the standard normal, so
        // the winner is the candidate with the largest squared heading norm.
        // Pair (0, 0) moves the observation by 8 per instance (heading 4),
        // pair (1, 1) by 2 (heading 1).
        let (dataset, _, mut corpus, mut vocab) = fixture(
            centroids_1d(2),
            &[(&[0, 0], &[0.0, 8.0]), (&[1, 1], &[0.0, 2.0])],
        );
        let summary = merge_loop(
            &dataset,
            &mut corpus,
            &mut vocab,
            &options(3, Strategy::Mahalanobis, 1),
        )
        .unwrap();
        assert_eq!(summary.merges, 1);
        let record = &vocab.merge_log()[0];
        assert_eq!((record.left, record.right), (SubwordId(0), SubwordId(0)));
        assert!((record.score - 16.0).abs() < 1e-9);
        assert_eq!(vocab.subword(record.new_id).heading, vec![4.0]);
    }

    #[test]
    fn min_count_excludes_rare_candidates() {
        let (dataset, _, mut corpus, mut vocab) = fixture(
            centroids_1d(2),
            &[(&[0, 0], &[0.0, 8.0]), (&[1, 1], &[0.0, 2.0])],
        );
        let summary = merge_loop(
            &dataset,
            &mut corpus,
            &mut vocab,
            &options(3, Strategy::Mahalanobis, 2),
        )
        .unwrap();
        assert_eq!(summary.merges, 0);
        assert!(summary.exhausted);
    }

    #[test]
    fn frequency_ignores_min_count() {
        let (dataset, _, mut corpus, mut vocab) =
            fixture(centroids_1d(2), &[(&[0, 1], &[0.0, 0.0])]);
        let summary = merge_loop(
            &dataset,
            &mut corpus,
            &mut vocab,
            &options(3, Strategy::Frequency, 99),
        )
        .unwrap();
        assert_eq!(summary.merges, 1);
    }

    #[test]
    fn merge_stops_when_corpus_is_exhausted() {
        let (dataset, _, mut corpus, mut vocab) =
            fixture(centroids_1d(2), &[(&[0, 1], &[0.0, 0.0])]);
        let summary = merge_loop(
            &dataset,
            &mut corpus,
            &mut vocab,
            &options(10, Strategy::Frequency, 1),
        )
        .unwrap();
        assert_eq!(summary.merges, 1);
        assert!(summary.exhausted);
        assert_eq!(vocab.size(), 3);
        assert_eq!(corpus.sequences[0].len(), 1);
    }

    #[test]
    fn duplicate_expansions_are_skipped() {
        // Pre-admit a subword expanding to [0, 1]; the only candidate pair in
        // the corpus would recreate it, so the loop must stop empty-handed.
        let (dataset, _, mut corpus, mut vocab) =
            fixture(centroids_1d(2), &[(&[0, 1], &[0.0, 0.0])]);
        vocab
            .admit(SubwordId(0), SubwordId(1), vec![0.0], 0.0, 1)
            .unwrap();
        let summary = merge_loop(
            &dataset,
            &mut corpus,
            &mut vocab,
            &options(10, Strategy::Frequency, 1),
        )
        .unwrap();
        assert_eq!(summary.merges, 0);
        assert!(summary.exhausted);
    }

    #[test]
    fn vocabulary_size_tracks_merges_and_prunes() {
        let (dataset, _, mut corpus, mut vocab) = fixture(
            centroids_1d(2),
            &[(
                &[0, 1, 0, 1, 0, 0, 1, 1, 0, 1],
                &[0.0, 1.0, 3.0, 4.0, 6.0, 7.0, 9.0, 10.0, 12.0, 13.0],
            )],
        );
        let sizes_after_merges: Vec<usize> = (3..=5)
            .map(|target| {
                let mut c = corpus.clone();
                let mut v = vocab.clone();
                merge_loop(
                    &dataset,
                    &mut c,
                    &mut v,
                    &options(target, Strategy::Frequency, 1),
                )
                .unwrap();
                v.size()
            })
            .collect();
        assert_eq!(sizes_after_merges, vec![3, 4, 5]);

        merge_loop(
            &dataset,
            &mut corpus,
            &mut vocab,
            &options(5, Strategy::Frequency, 1),
        )
        .unwrap();
        assert_eq!(vocab.merge_log().len(), 3);
        prune_loop(
            &mut vocab,
            &PruneOptions {
                n_min: 2,
                epsilon: 1e-6,
                keep_base_tokens: false,
            },
        )
        .unwrap();
        assert_eq!(vocab.size(), 2);
        assert_eq!(vocab.prune_log().len(), 3);
    }

    #[test]
    fn prune_to_current_size_is_identity() {
        let (_, _, _, mut vocab) = fixture(centroids_1d(3), &[(&[0, 1, 2], &[0.0; 3])]);
        prune_loop(
            &mut vocab,
            &PruneOptions {
                n_min: 3,
                epsilon: 1e-6,
                keep_base_tokens: false,
            },
        )
        .unwrap();
        assert_eq!(vocab.size(), 3);
        assert!(vocab.prune_log().is_empty());
    }

    #[test]
    fn prune_rejects_oversized_target() {
        let (_, _, _, mut vocab) = fixture(centroids_1d(2), &[(&[0, 1], &[0.0; 2])]);
        let err = prune_loop(
            &mut vocab,
            &PruneOptions {
                n_min: 5,
                epsilon: 1e-6,
                keep_base_tokens: false,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    /// Brute-force single prune step: score every candidate against the
    /// statistics of the admitted headings, tracking the argmin with the
    /// same tie-break the implementation documents.
    fn oracle_prune_choice(
        vocab: &Vocabulary,
        epsilon: f64,
        keep_base: bool,
    ) -> (SubwordId, f64) {
        let state = ScoreState::from_headings(
            &vocab.admitted_headings(),
            vocab.heading_dim(),
            epsilon,
        )
        .unwrap();
        let mut best: Option<(SubwordId, f64)> = None;
        for id in vocab.active_ids() {
            if keep_base && vocab.is_base(id) {
                continue;
            }
            let score = state.mahalanobis_score(&vocab.subword(id).heading);
            let better = match best {
                None => true,
                Some((bid, bscore)) => {
                    score < bscore
                        || (score == bscore
                            && vocab.subword(id).expansion < vocab.subword(bid).expansion)
                }
            };
            if better {
                best = Some((id, score));
            }
        }
        best.unwrap()
    }

    #[test]
    fn prune_removes_heading_nearest_to_mean() {
        // Three admitted headings (0,0), (10,0), (0,1) with base tokens kept.
        // Each removal must match a from-scratch re-scoring oracle.
        let codebook = Codebook {
            k: 2,
            seed: 0,
            centroids: vec![vec![0.0], vec![1.0]],
            inertia: 0.0,
        };
        let corpus = TokenizedCorpus::from_tokens(&[vec![TokenId(0), TokenId(1)]]);
        let mut vocab = Vocabulary::new(&codebook, &corpus, 2);
        vocab
            .admit(SubwordId(0), SubwordId(1), vec![0.0, 0.0], 0.0, 2)
            .unwrap();
        vocab
            .admit(SubwordId(2), SubwordId(1), vec![10.0, 0.0], 0.0, 2)
            .unwrap();
        vocab
            .admit(SubwordId(3), SubwordId(1), vec![0.0, 1.0], 0.0, 2)
            .unwrap();

        let mut reference = vocab.clone();
        let mut expected_removals = Vec::new();
        for _ in 0..2 {
            let (id, score) = oracle_prune_choice(&reference, 1e-6, true);
            reference.remove(id, score).unwrap();
            expected_removals.push(id);
        }

        prune_loop(
            &mut vocab,
            &PruneOptions {
                n_min: 3,
                epsilon: 1e-6,
                keep_base_tokens: true,
            },
        )
        .unwrap();
        let removed: Vec<SubwordId> =
            vocab.prune_log().iter().map(|r| r.removed).collect();
        assert_eq!(removed, expected_removals);
        assert_eq!(vocab.size(), 3);
        assert!(vocab.is_active(SubwordId(0)) && vocab.is_active(SubwordId(1)));
    }

    #[test]
    fn keep_base_tokens_protects_them() {
        let (dataset, _, mut corpus, mut vocab) = fixture(
            centroids_1d(2),
            &[(&[0, 1, 0, 1], &[0.0, 1.0, 2.0, 3.0])],
        );
        merge_loop(
            &dataset,
            &mut corpus,
            &mut vocab,
            &options(3, Strategy::Frequency, 1),
        )
        .unwrap();
        prune_loop(
            &mut vocab,
            &PruneOptions {
                n_min: 2,
                epsilon: 1e-6,
                keep_base_tokens: true,
            },
        )
        .unwrap();
        assert!(vocab.is_active(SubwordId(0)));
        assert!(vocab.is_active(SubwordId(1)));
        assert!(!vocab.is_active(SubwordId(2)));
    }

    #[test]
    fn prune_order_follows_scores_then_lexicographic_ties() {
        // One admitted heading: the admitted statistics center on it, so the
        // merged subword scores zero and is removed first. With the admitted
        // set then empty, the zero-heading base tokens tie at score zero and
        // the lexicographically smaller expansion goes next.
        let (dataset, _, mut corpus, mut vocab) = fixture(
            centroids_1d(2),
            &[(&[0, 1, 0, 1], &[0.0, 50.0, 100.0, 150.0])],
        );
        merge_loop(
            &dataset,
            &mut corpus,
            &mut vocab,
            &options(3, Strategy::Frequency, 1),
        )
        .unwrap();
        prune_loop(
            &mut vocab,
            &PruneOptions {
                n_min: 1,
                epsilon: 1e-6,
                keep_base_tokens: false,
            },
        )
        .unwrap();
        let removed: Vec<usize> = vocab.prune_log().iter().map(|r| r.removed.0).collect();
        assert_eq!(removed, vec![2, 0]);
        assert!(vocab.is_active(SubwordId(1)));
    }

    fn maze_free_dataset(seed: u64, trajectories: usize, steps: usize) -> Dataset {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let trajs = (0..trajectories)
            .map(|_| {
                let mut pos = vec![0.0f64, 0.0];
                let mut observations = Vec::with_capacity(steps);
                let mut actions = Vec::with_capacity(steps);
                for _ in 0..steps {
                    observations.push(pos.clone());
                    let act = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    pos[0] += act[0];
                    pos[1] += act[1];
                    actions.push(act);
                }
                Trajectory {
                    observations,
                    actions,
                }
            })
            .collect();
        Dataset::new(trajs).unwrap()
    }

    #[test]
    fn build_produces_exactly_n_min_skills() {
        let dataset = maze_free_dataset(1, 8, 60);
        let config = PipelineConfig {
            k: KChoice::Fixed(4),
            n_max: 12,
            n_min: 6,
            ..PipelineConfig::default()
        };
        let library = build_skill_library(&dataset, &config).unwrap();
        assert_eq!(library.skills.len(), 6);
        for skill in &library.skills {
            assert_eq!(skill.length, skill.base_tokens.len());
            assert_eq!(skill.actions.len(), skill.length);
            for (action, &token) in skill.actions.iter().zip(&skill.base_tokens) {
                assert_eq!(action, &library.codebook.centroids[token]);
            }
        }
    }

    use crate::config::KChoice;

    #[test]
    fn expansion_soundness_under_retokenization() {
        let dataset = maze_free_dataset(2, 8, 60);
        let config = PipelineConfig {
            k: KChoice::Fixed(4),
            n_max: 12,
            n_min: 6,
            ..PipelineConfig::default()
        };
        let library = build_skill_library(&dataset, &config).unwrap();
        for skill in &library.skills {
            for (action, &token) in skill.actions.iter().zip(&skill.base_tokens) {
                let re = crate::codebook::assign(&library.codebook, action);
                assert_eq!(re.0, token);
            }
        }
    }

    #[test]
    fn merge_log_replay_reproduces_corpus() {
        let dataset = maze_free_dataset(3, 6, 50);
        let config = PipelineConfig {
            k: KChoice::Fixed(4),
            n_max: 14,
            n_min: 5,
            ..PipelineConfig::default()
        };
        let codebook = fit_codebook(&dataset, 4, config.seed, 300, 1e-6).unwrap();
        let tokens = tokenize_dataset(&dataset, &codebook);
        let mut corpus = TokenizedCorpus::from_tokens(&tokens);
        let mut vocab = Vocabulary::new(&codebook, &corpus, 2);
        merge_loop(
            &dataset,
            &mut corpus,
            &mut vocab,
            &MergeOptions::from_config(&config),
        )
        .unwrap();

        let mut replayed = TokenizedCorpus::from_tokens(&tokens);
        for record in vocab.merge_log() {
            apply_merge(&mut replayed, record.left, record.right, record.new_id);
        }
        assert_eq!(replayed, corpus);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let dataset = maze_free_dataset(4, 6, 50);
        let config = PipelineConfig {
            k: KChoice::Fixed(4),
            n_max: 16,
            n_min: 8,
            ..PipelineConfig::default()
        };
        let mut a = build_skill_library(&dataset, &config).unwrap();
        let mut b = build_skill_library(&dataset, &config).unwrap();
        a.generation_seconds = 0.0;
        b.generation_seconds = 0.0;
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn library_save_load_round_trips() {
        let dataset = maze_free_dataset(5, 5, 40);
        let config = PipelineConfig {
            k: KChoice::Fixed(4),
            n_max: 10,
            n_min: 4,
            ..PipelineConfig::default()
        };
        let library = build_skill_library(&dataset, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("library.json");
        library.save(&path).unwrap();
        let loaded = SkillLibrary::load(&path).unwrap();
        assert_eq!(loaded, library);
    }

    #[test]
    fn library_json_shape_is_stable() {
        let dataset = maze_free_dataset(6, 5, 40);
        let config = PipelineConfig {
            k: KChoice::Fixed(4),
            n_max: 8,
            n_min: 4,
            ..PipelineConfig::default()
        };
        let library = build_skill_library(&dataset, &config).unwrap();
        let body = serde_json::to_string(&library).unwrap();
        // Top-level keys appear in a fixed document order.
        let ordered = ["\"codebook\"", "\"skills\"", "\"config\"", "\"merge_log\"",
            "\"generation_seconds\""];
        let positions: Vec<usize> = ordered
            .iter()
            .map(|key| body.find(key).unwrap_or_else(|| panic!("missing {key}")))
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{positions:?}");
        // So do the keys of each skill object.
        let first_skill_end = body[positions[1]..].find('}').unwrap() + positions[1];
        let first_skill = &body[positions[1]..first_skill_end];
        let skill_keys = ["\"id\"", "\"base_tokens\"", "\"actions\"", "\"length\"",
            "\"heading\""];
        let skill_positions: Vec<usize> = skill_keys
            .iter()
            .map(|key| {
                first_skill
                    .find(key)
                    .unwrap_or_else(|| panic!("missing {key} in {first_skill}"))
            })
            .collect();
        assert!(skill_positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn primitive_variant_is_length_one_centroid_skills() {
        let dataset = maze_free_dataset(7, 5, 40);
        let config = PipelineConfig {
            k: KChoice::Fixed(4),
            n_max: 8,
            n_min: 4,
            ..PipelineConfig::default()
        };
        let library = build_skill_library(&dataset, &config).unwrap();
        let primitive = library.primitive_variant();
        assert_eq!(primitive.skills.len(), 4);
        for (i, skill) in primitive.skills.iter().enumerate() {
            assert_eq!(skill.id, i);
            assert_eq!(skill.length, 1);
            assert_eq!(skill.base_tokens, vec![i]);
            assert_eq!(skill.actions, vec![library.codebook.centroids[i].clone()]);
        }
        assert!(primitive.merge_log.is_empty());
    }

    #[test]
    fn length_stats_match_hand_computation() {
        let skill = |length: usize| Skill {
            id: length,
            base_tokens: vec![0; length],
            actions: vec![vec![0.0]; length],
            length,
            heading: vec![0.0],
        };
        let mut library = SkillLibrary {
            codebook: Codebook {
                k: 1,
                seed: 0,
                centroids: vec![vec![0.0]],
                inertia: 0.0,
            },
            skills: vec![skill(10), skill(10)],
            config: PipelineConfig::default(),
            merge_log: Vec::new(),
            generation_seconds: 0.0,
        };
        assert_eq!(skill_length_stats(&library), Some((10.0, 0.0)));

        library.skills = vec![skill(8), skill(12)];
        let (mean, std) = skill_length_stats(&library).unwrap();
        assert_eq!(mean, 10.0);
        assert_eq!(std, 2.0);

        library.skills.clear();
        assert_eq!(skill_length_stats(&library), None);
    }

    #[test]
    fn frequency_runs_still_store_headings_for_pruning() {
        let (dataset, _, mut corpus, mut vocab) = fixture(
            centroids_1d(2),
            &[(&[0, 1, 0, 1], &[0.0, 3.0, 6.0, 9.0])],
        );
        merge_loop(
            &dataset,
            &mut corpus,
            &mut vocab,
            &options(3, Strategy::Frequency, 1),
        )
        .unwrap();
        let merged = vocab.subword(SubwordId(2));
        assert_eq!(merged.heading, vec![1.5]);
    }
}
