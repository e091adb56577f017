//! Word error rate: token-level edit distance, corpus aggregation, and
//! the error-free/errorful corpus partition.

use serde::{Deserialize, Serialize};

use crate::error::{HypoError, Result};
use crate::model::EvalCorpus;

/// Unit-cost edit operations aligning a hypothesis to a reference,
/// plus the reference length the rate is normalized by.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_len: usize,
}

impl EditCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// Utterance WER as a fraction; `None` for an empty reference
    /// (the rate is undefined, not zero).
    pub fn wer(&self) -> Option<f64> {
        (self.ref_len > 0).then(|| self.total() as f64 / self.ref_len as f64)
    }
}

/// Minimal-cost edit decomposition via dynamic programming.
///
/// The total is the Levenshtein distance. Several decompositions can
/// reach it; ties resolve in favor of substitution over deletion over
/// insertion, realized as a secondary objective that maximizes aligned
/// (matched or substituted) token pairs among minimal-cost alignments.
/// That makes the counts deterministic and exactly mirrored when the
/// arguments swap: substitutions are unchanged, deletions and
/// insertions trade places. A purely local backtrace preference would
/// not guarantee the mirror. Deletions are reference tokens missing
/// from the hypothesis; insertions are extra hypothesis tokens.
pub fn edit_counts<T: Eq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let m = reference.len();
    let n = hypothesis.len();
    // dist[i][j]: distance between reference[..i] and hypothesis[..j].
    // aligned[i][j]: most aligned pairs on any minimal-cost path.
    let mut dist = vec![vec![0usize; n + 1]; m + 1];
    let mut aligned = vec![vec![0usize; n + 1]; m + 1];
    for (i, row) in dist.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=n {
        dist[0][j] = j;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub = dist[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = dist[i - 1][j] + 1;
            let ins = dist[i][j - 1] + 1;
            let best = sub.min(del).min(ins);
            let mut pairs = 0usize;
            if sub == best {
                pairs = pairs.max(aligned[i - 1][j - 1] + 1);
            }
            if del == best {
                pairs = pairs.max(aligned[i - 1][j]);
            }
            if ins == best {
                pairs = pairs.max(aligned[i][j - 1]);
            }
            dist[i][j] = best;
            aligned[i][j] = pairs;
        }
    }

    // With the aligned-pair count fixed, the decomposition is forced:
    // unaligned tokens on each side are deletions/insertions and the
    // rest of the cost is substitutions.
    let total = dist[m][n];
    let pairs = aligned[m][n];
    let deletions = m - pairs;
    let insertions = n - pairs;
    EditCounts {
        substitutions: total - deletions - insertions,
        insertions,
        deletions,
        ref_len: m,
    }
}

/// How per-utterance edits are pooled into a corpus figure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Pooled edits over pooled reference length (standard WER).
    #[default]
    Micro,
    /// Unweighted mean of per-utterance rates.
    Macro,
}

/// Corpus WER as a percentage over precomputed per-utterance counts.
///
/// Micro: `sum(edits) / sum(ref_len) * 100`. Macro: mean of utterance
/// rates, skipping empty references. Errors when every reference is
/// empty (the rate is undefined).
pub fn aggregate_wer(counts: &[EditCounts], agg: Aggregation) -> Result<f64> {
    match agg {
        Aggregation::Micro => {
            let ref_total: usize = counts.iter().map(|c| c.ref_len).sum();
            if ref_total == 0 {
                return Err(HypoError::Metric(
                    "corpus WER undefined: total reference length is 0".into(),
                ));
            }
            let edits: usize = counts.iter().map(|c| c.total()).sum();
            Ok(edits as f64 / ref_total as f64 * 100.0)
        }
        Aggregation::Macro => {
            let rates: Vec<f64> = counts.iter().filter_map(|c| c.wer()).collect();
            if rates.is_empty() {
                return Err(HypoError::Metric(
                    "corpus WER undefined: no non-empty references".into(),
                ));
            }
            Ok(rates.iter().sum::<f64>() / rates.len() as f64 * 100.0)
        }
    }
}

/// Corpus WER as a percentage directly from (reference, hypothesis)
/// token-sequence pairs.
pub fn corpus_wer<T: Eq>(pairs: &[(&[T], &[T])], agg: Aggregation) -> Result<f64> {
    let counts: Vec<EditCounts> = pairs
        .iter()
        .map(|(r, h)| edit_counts(r, h))
        .collect();
    aggregate_wer(&counts, agg)
}

/// Corpus split by whether the ASR top-1 hypothesis is error-free.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub no_err: Vec<String>,
    pub err: Vec<String>,
}

impl Partition {
    pub fn contains_no_err(&self, id: &str) -> bool {
        self.no_err.iter().any(|x| x == id)
    }
}

/// Split a corpus into error-free and errorful records: a record is
/// error-free iff its top-1 hypothesis has edit distance 0 to the
/// reference. The two id lists are disjoint and cover the corpus, in
/// corpus order.
pub fn partition_noerr(corpus: &EvalCorpus) -> Partition {
    let mut partition = Partition::default();
    for record in corpus.iter() {
        let counts = edit_counts(
            record.reference.tokens(),
            record.hypotheses.top1().tokens(),
        );
        if counts.total() == 0 {
            partition.no_err.push(record.id.clone());
        } else {
            partition.err.push(record.id.clone());
        }
    }
    partition
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HypothesisSet, Split, Transcript, UtteranceRecord};
    use crate::textnorm::NormConfig;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    fn counts(r: &str, h: &str) -> EditCounts {
        edit_counts(&toks(r), &toks(h))
    }

    #[test]
    fn identical_sequences_have_no_edits() {
        let c = counts("a b c", "a b c");
        assert_eq!(c, EditCounts { ref_len: 3, ..Default::default() });
        assert_eq!(c.wer(), Some(0.0));
    }

    #[test]
    fn single_substitution() {
        let c = counts("a b c", "a x c");
        assert_eq!(c.substitutions, 1);
        assert_eq!(c.total(), 1);
        assert!((c.wer().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn full_deletion_and_insertion() {
        let c = counts("a", "");
        assert_eq!((c.deletions, c.total(), c.ref_len), (1, 1, 1));
        assert_eq!(c.wer(), Some(1.0));

        let c = counts("", "a b");
        assert_eq!((c.insertions, c.ref_len), (2, 0));
        assert_eq!(c.wer(), None);
    }

    #[test]
    fn swap_decomposes_as_two_substitutions() {
        // Distance 2 admits several decompositions; the backtrace
        // priority picks substitutions.
        let c = counts("a b", "b a");
        assert_eq!(c.substitutions, 2);
        assert_eq!(c.insertions, 0);
        assert_eq!(c.deletions, 0);
    }

    #[test]
    fn mixed_edit_example() {
        // ref: the cat sat on the mat / hyp: the cats sat on mat
        let c = counts("the cat sat on the mat", "the cats sat on mat");
        assert_eq!(c.total(), 2);
        assert_eq!(c.substitutions, 1);
        assert_eq!(c.deletions, 1);
    }

    #[test]
    fn micro_aggregation_pools_edits() {
        let cs = [counts("a b c", "a x c"), counts("d e f", "d e f")];
        let wer = aggregate_wer(&cs, Aggregation::Micro).unwrap();
        assert!((wer - 100.0 / 6.0).abs() < 1e-9, "got {wer}");
    }

    #[test]
    fn micro_and_macro_differ_on_uneven_lengths() {
        let cs = [counts("a", "x"), counts("b c d", "b c d")];
        let micro = aggregate_wer(&cs, Aggregation::Micro).unwrap();
        let macro_ = aggregate_wer(&cs, Aggregation::Macro).unwrap();
        assert!((micro - 25.0).abs() < 1e-9);
        assert!((macro_ - 50.0).abs() < 1e-9);
    }

    #[test]
    fn all_identical_pairs_score_zero() {
        let a = toks("a b");
        let b = toks("c");
        let pairs: Vec<(&[&str], &[&str])> =
            vec![(&a, &a), (&b, &b)];
        assert_eq!(corpus_wer(&pairs, Aggregation::Micro).unwrap(), 0.0);
    }

    #[test]
    fn empty_references_are_an_error() {
        let empty = toks("");
        let hyp = toks("a");
        let pairs: Vec<(&[&str], &[&str])> = vec![(&empty, &hyp)];
        assert!(corpus_wer(&pairs, Aggregation::Micro).is_err());
        assert!(corpus_wer(&pairs, Aggregation::Macro).is_err());
        let none: Vec<(&[&str], &[&str])> = vec![];
        assert!(corpus_wer(&none, Aggregation::Micro).is_err());
    }

    fn record(id: &str, reference: &str, top1: &str) -> UtteranceRecord {
        let cfg = NormConfig::default();
        UtteranceRecord {
            id: id.into(),
            reference: Transcript::new(reference, &cfg),
            hypotheses: HypothesisSet::new(vec![
                Transcript::new(top1, &cfg),
                Transcript::new("unrelated filler words here", &cfg),
            ])
            .unwrap(),
            split: Split::Test,
        }
    }

    #[test]
    fn partition_tracks_top1_exactness() {
        let corpus = EvalCorpus::new(vec![
            record("clean", "turn the lights on", "turn the lights on"),
            record("noisy", "turn the lights on", "turn the light on"),
            // Normalization differences do not count as errors.
            record("cased", "Watch TV now please", "watch t v now please"),
        ]);
        let p = partition_noerr(&corpus);
        assert_eq!(p.no_err, ["clean", "cased"]);
        assert_eq!(p.err, ["noisy"]);
        assert!(p.contains_no_err("clean"));
        assert!(!p.contains_no_err("noisy"));
    }

    #[test]
    fn noerr_subset_wer_is_exactly_zero() {
        let corpus = EvalCorpus::new(vec![
            record("a", "one two three four", "one two three four"),
            record("b", "five six seven eight", "five six 7 eight"),
        ]);
        let p = partition_noerr(&corpus);
        let cs: Vec<EditCounts> = corpus
            .iter()
            .filter(|r| p.no_err.contains(&r.id))
            .map(|r| edit_counts(r.reference.tokens(), r.hypotheses.top1().tokens()))
            .collect();
        assert_eq!(aggregate_wer(&cs, Aggregation::Micro).unwrap(), 0.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// Textbook recursive edit distance, exponential but obviously
        /// correct; the DP must match its totals.
        fn naive_distance<T: Eq>(r: &[T], h: &[T]) -> usize {
            match (r.split_first(), h.split_first()) {
                (None, _) => h.len(),
                (_, None) => r.len(),
                (Some((rh, rt)), Some((hh, ht))) => {
                    let sub = naive_distance(rt, ht) + usize::from(rh != hh);
                    let del = naive_distance(rt, h) + 1;
                    let ins = naive_distance(r, ht) + 1;
                    sub.min(del).min(ins)
                }
            }
        }

        fn short_seq() -> impl Strategy<Value = Vec<u8>> {
            proptest::collection::vec(0u8..5, 0..=8)
        }

        proptest! {
            #[test]
            fn dp_total_matches_naive_oracle(r in short_seq(), h in short_seq()) {
                prop_assert_eq!(edit_counts(&r, &h).total(), naive_distance(&r, &h));
            }

            #[test]
            fn total_is_symmetric_and_swaps_ins_del(r in short_seq(), h in short_seq()) {
                let fwd = edit_counts(&r, &h);
                let rev = edit_counts(&h, &r);
                prop_assert_eq!(fwd.total(), rev.total());
                prop_assert_eq!(fwd.substitutions, rev.substitutions);
                prop_assert_eq!(fwd.insertions, rev.deletions);
                prop_assert_eq!(fwd.deletions, rev.insertions);
            }

            #[test]
            fn triangle_inequality(
                a in short_seq(),
                b in short_seq(),
                c in short_seq(),
            ) {
                let ab = edit_counts(&a, &b).total();
                let bc = edit_counts(&b, &c).total();
                let ac = edit_counts(&a, &c).total();
                prop_assert!(ac <= ab + bc);
            }

            #[test]
            fn counts_are_consistent(r in short_seq(), h in short_seq()) {
                let c = edit_counts(&r, &h);
                // Alignment accounting: matches + subs + dels = |ref|,
                // matches + subs + ins = |hyp|.
                prop_assert_eq!(c.ref_len, r.len());
                prop_assert!(c.substitutions + c.deletions <= r.len());
                prop_assert_eq!(
                    r.len() + c.insertions,
                    h.len() + c.deletions
                );
            }
        }
    }
}
