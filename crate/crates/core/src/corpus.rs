//! Tokenized corpora and adjacent-pair merging.
//!
//! Each trajectory becomes a sequence of subword occurrences. An occurrence
//! remembers the span of original steps it covers, so headings can be
//! computed for any subword instance at any stage of merging. Pair counting
//! is greedy left to right per pair type: in `[a, a, a]` the pair `(a, a)`
//! occurs once, because the middle token is already consumed by the first
//! occurrence. Pairs never cross trajectory boundaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codebook::TokenId;

/// Vocabulary entry id. Ids below the codebook size are base tokens; ids at
/// or above it are merged subwords, numbered in creation order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SubwordId(pub usize);

/// A contiguous span of steps inside one trajectory.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Instance {
    pub trajectory: usize,
    pub start: usize,
    pub length: usize,
}

/// One subword occurrence in a tokenized sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusEntry {
    pub id: SubwordId,
    pub span: Instance,
}

/// Dataset re-expressed as sequences of subword occurrences.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedCorpus {
    pub sequences: Vec<Vec<CorpusEntry>>,
}

impl TokenizedCorpus {
    /// Wraps base-token sequences; every occurrence covers a single step.
    pub fn from_tokens(tokens: &[Vec<TokenId>]) -> Self {
        let sequences = tokens
            .iter()
            .enumerate()
            .map(|(trajectory, seq)| {
                seq.iter()
                    .enumerate()
                    .map(|(start, &TokenId(id))| CorpusEntry {
                        id: SubwordId(id),
                        span: Instance {
                            trajectory,
                            start,
                            length: 1,
                        },
                    })
                    .collect()
            })
            .collect();
        TokenizedCorpus { sequences }
    }

    /// Total occurrences across all sequences.
    pub fn total_entries(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    /// All occurrences of one subword, in scan order.
    pub fn instances_of(&self, id: SubwordId) -> Vec<Instance> {
        self.sequences
            .iter()
            .flat_map(|seq| seq.iter())
            .filter(|e| e.id == id)
            .map(|e| e.span)
            .collect()
    }
}

/// An adjacent pair with its non-overlapping occurrences. Each occurrence is
/// the combined span the merged subword would cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePair {
    pub left: SubwordId,
    pub right: SubwordId,
    pub instances: Vec<Instance>,
}

impl CandidatePair {
    pub fn count(&self) -> usize {
        self.instances.len()
    }
}

/// Enumerates every adjacent pair with greedy left-to-right non-overlapping
/// counting per pair type. Output is ordered by `(left, right)` id.
pub fn enumerate_candidates(corpus: &TokenizedCorpus) -> Vec<CandidatePair> {
    let mut found: BTreeMap<(SubwordId, SubwordId), Vec<Instance>> = BTreeMap::new();
    let mut next_allowed: BTreeMap<(SubwordId, SubwordId), usize> = BTreeMap::new();
    for seq in &corpus.sequences {
        next_allowed.clear();
        for i in 0..seq.len().saturating_sub(1) {
            let key = (seq[i].id, seq[i + 1].id);
            let gate = next_allowed.entry(key).or_insert(0);
            if i < *gate {
                continue;
            }
            *gate = i + 2;
            found.entry(key).or_default().push(combine(seq[i].span, seq[i + 1].span));
        }
    }
    found
        .into_iter()
        .map(|((left, right), instances)| CandidatePair {
            left,
            right,
            instances,
        })
        .collect()
}

/// Rewrites every greedy left-to-right occurrence of `(left, right)` into a
/// single occurrence of `new_id`. Returns the spans that were created, which
/// match what `enumerate_candidates` reported for the pair.
pub fn apply_merge(
    corpus: &mut TokenizedCorpus,
    left: SubwordId,
    right: SubwordId,
    new_id: SubwordId,
) -> Vec<Instance> {
    let mut created = Vec::new();
    for seq in &mut corpus.sequences {
        let mut out = Vec::with_capacity(seq.len());
        let mut i = 0;
        while i < seq.len() {
            if i + 1 < seq.len() && seq[i].id == left && seq[i + 1].id == right {
                let span = combine(seq[i].span, seq[i + 1].span);
                out.push(CorpusEntry { id: new_id, span });
                created.push(span);
                i += 2;
            } else {
                out.push(seq[i]);
                i += 1;
            }
        }
        *seq = out;
    }
    created
}

fn combine(left: Instance, right: Instance) -> Instance {
    debug_assert_eq!(left.trajectory, right.trajectory);
    debug_assert_eq!(left.start + left.length, right.start);
    Instance {
        trajectory: left.trajectory,
        start: left.start,
        length: left.length + right.length,
    }
}
