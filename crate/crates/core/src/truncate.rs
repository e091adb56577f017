//! Repeated-phrase truncation.
//!
//! ASR and LLM output sometimes loops: the decoder emits a phrase and
//! then repeats it back-to-back until the hypothesis fills up
//! (`... turn on the turn on the turn on the`). Truncation finds the
//! phrase with the strongest consecutive repetition and cuts the token
//! sequence right after that phrase's *first* occurrence.
//!
//! Candidate phrases are the contiguous subsequences `u` of the input
//! with `m <= |u| <= M` that occur at least twice back-to-back
//! somewhere in the sequence. Among candidates, the winner maximizes
//! repeats times phrase length (tokens covered by the repeated block);
//! ties prefer the earliest first occurrence, then the shorter phrase.
//! The first occurrence is the phrase's earliest position anywhere in
//! the sequence, which need not be where the repetition run sits.
//! With no candidate the sequence is returned unchanged.

use std::cmp::Reverse;
use std::collections::HashSet;
use std::hash::Hash;

use crate::error::{HypoError, Result};

/// Phrase-length bounds for truncation: phrases of `min_phrase` to
/// `max_phrase` tokens are considered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationConfig {
    pub min_phrase: usize,
    pub max_phrase: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            min_phrase: 1,
            max_phrase: 5,
        }
    }
}

impl TruncationConfig {
    pub fn new(min_phrase: usize, max_phrase: usize) -> Result<Self> {
        if min_phrase < 1 {
            return Err(HypoError::Config(
                "minimum phrase length must be at least 1".into(),
            ));
        }
        if max_phrase < min_phrase {
            return Err(HypoError::Config(format!(
                "maximum phrase length {max_phrase} is below minimum {min_phrase}"
            )));
        }
        Ok(TruncationConfig {
            min_phrase,
            max_phrase,
        })
    }
}

/// Maximum number of consecutive occurrences of `phrase` in `tokens`.
///
/// Counts back-to-back runs starting at any offset: in `a b a b a b`,
/// `[a, b]` scores 3; in `a b a`, `[a]` scores 1 (occurrences are not
/// adjacent). A phrase that never occurs scores 0.
///
/// # Panics
/// Panics if `phrase` is empty.
pub fn repeat_count<T: Eq>(tokens: &[T], phrase: &[T]) -> usize {
    assert!(!phrase.is_empty(), "repeat_count: empty phrase");
    let p = phrase.len();
    if p > tokens.len() {
        return 0;
    }
    let mut best = 0usize;
    for i in 0..=(tokens.len() - p) {
        if tokens[i..i + p] == *phrase {
            let mut run = 1usize;
            let mut j = i + p;
            while j + p <= tokens.len() && tokens[j..j + p] == *phrase {
                run += 1;
                j += p;
            }
            best = best.max(run);
        }
    }
    best
}

/// The winning repetition: the phrase's first occurrence index in the
/// full sequence, its length, and the maximum consecutive run count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseRepeat {
    pub first_index: usize,
    pub phrase_len: usize,
    pub repeats: usize,
}

impl PhraseRepeat {
    /// Tokens covered by the repeated block: repeats * phrase_len.
    pub fn coverage(&self) -> usize {
        self.repeats * self.phrase_len
    }
}

/// Find the dominant consecutive phrase repetition, if any.
///
/// Enumerates every distinct phrase of an in-bounds length, keeps those
/// repeating at least twice somewhere, and picks the maximum by
/// (coverage, earliest first occurrence, shortest phrase).
pub fn find_dominant_repeat<T: Eq + Hash>(
    tokens: &[T],
    cfg: &TruncationConfig,
) -> Option<PhraseRepeat> {
    let n = tokens.len();
    let mut best: Option<PhraseRepeat> = None;
    // A phrase needs room for two adjacent copies to qualify.
    let longest = cfg.max_phrase.min(n / 2);
    for p in cfg.min_phrase..=longest {
        let mut seen: HashSet<&[T]> = HashSet::new();
        for start in 0..=(n - p) {
            let phrase = &tokens[start..start + p];
            // Scanning left to right, the first insertion of a phrase
            // is its first occurrence; later copies are skipped.
            if !seen.insert(phrase) {
                continue;
            }
            let repeats = repeat_count(tokens, phrase);
            if repeats < 2 {
                continue;
            }
            let cand = PhraseRepeat {
                first_index: start,
                phrase_len: p,
                repeats,
            };
            let better = match &best {
                None => true,
                Some(b) => {
                    (cand.coverage(), Reverse(cand.first_index), Reverse(cand.phrase_len))
                        > (b.coverage(), Reverse(b.first_index), Reverse(b.phrase_len))
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }
    best
}

/// Cut `tokens` right after the first occurrence of the dominant
/// repeated phrase; the full slice when nothing repeats.
pub fn truncate_repeated_phrase<'a, T: Eq + Hash>(
    tokens: &'a [T],
    cfg: &TruncationConfig,
) -> &'a [T] {
    match find_dominant_repeat(tokens, cfg) {
        Some(rep) => &tokens[..rep.first_index + rep.phrase_len],
        None => tokens,
    }
}

/// [`truncate_repeated_phrase`] with the default phrase-length bounds.
pub fn truncate_default<T: Eq + Hash>(tokens: &[T]) -> &[T] {
    truncate_repeated_phrase(tokens, &TruncationConfig::default())
}
