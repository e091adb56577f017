//! Corpus construction from raw n-best decoder dumps.
//!
//! A dump is line-delimited JSON: `{id, reference, candidates:
//! [{text, score}], split}` with candidates sorted by descending
//! score. Building a corpus keeps the k highest-scoring candidates
//! with distinct normalized text per utterance (sampling from the
//! distinct set to fill shortfalls), filters references to a word-count
//! band, deduplicates references within each split, and excludes
//! dev/test records whose reference also appears in train.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HypoError, Result};
use crate::model::{EvalCorpus, HypothesisSet, Split, Transcript, UtteranceRecord};
use crate::textnorm::NormConfig;

/// One beam candidate: raw text and a log-probability-like score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub score: f64,
}

/// One utterance of a raw decoder dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawNBest {
    pub id: String,
    #[serde(rename = "reference")]
    pub reference_raw: String,
    pub candidates: Vec<Candidate>,
    pub split: Split,
}

/// Corpus-builder settings.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    /// Hypotheses kept per utterance.
    pub k: usize,
    /// Reference word-count band, inclusive.
    pub min_words: usize,
    pub max_words: usize,
    /// Seed for the fill-by-sampling draws.
    pub rng_seed: u64,
    pub norm: NormConfig,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            k: 5,
            min_words: 4,
            max_words: 32,
            rng_seed: 0,
            norm: NormConfig::default(),
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.k > 50 {
            return Err(HypoError::Config(format!(
                "hypothesis count k={} outside 1..=50",
                self.k
            )));
        }
        if self.min_words > self.max_words {
            return Err(HypoError::Config(format!(
                "min_words {} exceeds max_words {}",
                self.min_words, self.max_words
            )));
        }
        Ok(())
    }
}

/// Read a raw dump, validating per line: candidates present, scores
/// finite and sorted descending, ids unique.
pub fn read_raw_nbest(path: &Path) -> Result<Vec<RawNBest>> {
    let file = File::open(path).map_err(|e| HypoError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut raws = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| HypoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawNBest = serde_json::from_str(&line)
            .map_err(|e| HypoError::schema(path, line_no, e.to_string()))?;
        if raw.id.is_empty() {
            return Err(HypoError::schema(path, line_no, "empty id"));
        }
        if !seen_ids.insert(raw.id.clone()) {
            return Err(HypoError::DuplicateId {
                id: raw.id,
                path: path.to_path_buf(),
                line: line_no,
            });
        }
        if raw.candidates.is_empty() {
            return Err(HypoError::schema(path, line_no, "no candidates"));
        }
        if raw.candidates.iter().any(|c| !c.score.is_finite()) {
            return Err(HypoError::schema(path, line_no, "non-finite score"));
        }
        if raw.candidates.windows(2).any(|w| w[0].score < w[1].score) {
            return Err(HypoError::schema(
                path,
                line_no,
                "candidates not sorted by descending score",
            ));
        }
        raws.push(raw);
    }
    Ok(raws)
}

/// Per-record generator: hashing the corpus seed with the record id
/// makes every record's sampling reproducible on its own, independent
/// of record order or parallel scheduling.
fn record_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(id.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Keep the k highest-scoring candidates with distinct normalized
/// text, in score order. When fewer than k are distinct, the remainder
/// is drawn uniformly (with replacement, seeded) from the distinct
/// set, so the top-1 slot always holds the best-scoring candidate.
pub fn select_topk_unique(raw: &RawNBest, cfg: &BuildConfig) -> Result<HypothesisSet> {
    cfg.validate()?;
    if raw.candidates.is_empty() {
        return Err(HypoError::Contract(format!(
            "record `{}` has no candidates",
            raw.id
        )));
    }
    let mut seen: HashSet<String> = HashSet::new();
    let mut distinct: Vec<Transcript> = Vec::new();
    for cand in &raw.candidates {
        let t = Transcript::new(cand.text.clone(), &cfg.norm);
        if seen.insert(t.normalized_text()) {
            distinct.push(t);
            if distinct.len() == cfg.k {
                break;
            }
        }
    }
    let mut items = distinct.clone();
    let mut rng = record_rng(cfg.rng_seed, &raw.id);
    while items.len() < cfg.k {
        items.push(distinct[rng.random_range(0..distinct.len())].clone());
    }
    HypothesisSet::new(items)
}

/// Apply selection, length filtering, per-split deduplication, and the
/// train-exclusion rule, preserving input order.
///
/// A record survives iff its normalized reference has `min_words` to
/// `max_words` tokens, no earlier same-split record shares that
/// normalized reference, and — for dev/test — no surviving train
/// record shares it. Duplicate reference text *across* dev and test is
/// left alone; only train text contaminates the other splits.
pub fn build_corpus(raws: &[RawNBest], cfg: &BuildConfig) -> Result<EvalCorpus> {
    cfg.validate()?;
    let mut seen_ids: HashSet<&str> = HashSet::new();
    for raw in raws {
        if !seen_ids.insert(&raw.id) {
            return Err(HypoError::Contract(format!(
                "duplicate record id `{}` in dump",
                raw.id
            )));
        }
    }

    // Length filter first: a train record that fails it is not part of
    // the train set and must not exclude dev/test text.
    let kept: Vec<(&RawNBest, Transcript)> = raws
        .iter()
        .map(|raw| (raw, Transcript::new(raw.reference_raw.clone(), &cfg.norm)))
        .filter(|(_, reference)| {
            (cfg.min_words..=cfg.max_words).contains(&reference.len())
        })
        .collect();

    let train_keys: HashSet<String> = kept
        .iter()
        .filter(|(raw, _)| raw.split == Split::Train)
        .map(|(_, reference)| reference.normalized_text())
        .collect();

    let mut seen_per_split: [HashSet<String>; 3] = Default::default();
    let mut records = Vec::new();
    for (raw, reference) in kept {
        let key = reference.normalized_text();
        if raw.split != Split::Train && train_keys.contains(&key) {
            continue;
        }
        let seen = &mut seen_per_split[raw.split as usize];
        if !seen.insert(key) {
            continue;
        }
        records.push(UtteranceRecord {
            id: raw.id.clone(),
            reference,
            hypotheses: select_topk_unique(raw, cfg)?,
            split: raw.split,
        });
    }
    Ok(EvalCorpus::new(records))
}

/// Record counts per split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitStats {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }
}

pub fn split_stats(corpus: &EvalCorpus) -> SplitStats {
    let mut stats = SplitStats::default();
    for record in corpus.iter() {
        match record.split {
            Split::Train => stats.train += 1,
            Split::Dev => stats.dev += 1,
            Split::Test => stats.test += 1,
        }
    }
    stats
}
