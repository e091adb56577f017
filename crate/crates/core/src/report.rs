//! Score assembly, aggregation auditing, and table rendering.
//!
//! A [`MetricReport`] holds one scored run: a row per utterance plus corpus
//! aggregates and enough metadata to rerun the configuration. Corpus values
//! are always recomputable from the rows — [`audit_aggregation`] checks that
//! exactly, at full precision. Rounding happens only when rendering tables;
//! score files on disk are never rounded.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentMode, CorrectionResult};
use crate::error::{HypoError, Result};
use crate::metrics::semantic::{bertscore_f1, nli_entail_score, q_emb_score, EmbeddingProvider, NliProvider};
use crate::metrics::slu::{slot_counts, slot_micro_f1, SlotCounts, SluTagger};
use crate::metrics::wer::{aggregate_wer, edit_counts, partition_noerr, Aggregation, EditCounts};
use crate::model::EvalCorpus;
use crate::textnorm::NormConfig;
use crate::truncate::TruncationConfig;

/// Which side of the top-1-correctness split an utterance falls on. The
/// label is a property of the ASR output, not of the system under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionLabel {
    NoErr,
    Err,
}

impl fmt::Display for PartitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionLabel::NoErr => "noerr",
            PartitionLabel::Err => "err",
        })
    }
}

/// Everything measured for one utterance. Optional fields are absent when
/// the corresponding provider was not supplied (or its tagging failed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRow {
    pub id: String,
    pub partition: PartitionLabel,
    pub edits: EditCounts,
    /// Utterance WER as a percentage; `None` for an empty reference.
    pub wer: Option<f64>,
    pub q_emb: Option<f64>,
    pub bert_f1: Option<f64>,
    pub menli: Option<f64>,
    pub intent_match: Option<bool>,
    pub slots: Option<SlotCounts>,
}

/// Corpus-level aggregates. `None` means the column was not computed (no
/// provider, or an empty partition).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub wer_all: Option<f64>,
    pub wer_noerr: Option<f64>,
    pub wer_err: Option<f64>,
    pub q_emb: Option<f64>,
    pub bert_f1: Option<f64>,
    pub menli: Option<f64>,
    pub intent_acc: Option<f64>,
    pub slot_f1: Option<f64>,
}

/// Run configuration snapshot; every number in the report traces back here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub mode: String,
    pub provider: String,
    pub template_sha256: String,
    pub aggregation: Aggregation,
    pub truncation_min: usize,
    pub truncation_max: usize,
    pub abbreviation_min_len: usize,
    pub expand_contractions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metadata: RunMetadata,
    pub corpus: CorpusScores,
    pub per_utterance: Vec<UtteranceRow>,
}

/// Providers and knobs for scoring a finished correction run. Metric math
/// lives in the metrics modules; this only selects what to compute.
#[derive(Default)]
pub struct ScoringConfig<'a> {
    pub embedder: Option<&'a dyn EmbeddingProvider>,
    pub nli: Option<&'a dyn NliProvider>,
    pub tagger: Option<&'a dyn SluTagger>,
    pub aggregation: Aggregation,
    pub truncation: TruncationConfig,
    pub norm: NormConfig,
}

/// Scores one correction run against its corpus.
///
/// `results` must line up with the corpus one-to-one and in order (which is
/// what [`crate::agent::run_batch`] produces). WER columns are always
/// computed; semantic and SLU columns appear when the matching provider is
/// present. A tagger failure on one utterance excludes that utterance from
/// the SLU aggregates (logged, never silently zeroed).
pub fn build_report(
    corpus: &EvalCorpus,
    results: &[CorrectionResult],
    scoring: &ScoringConfig,
) -> Result<MetricReport> {
    if corpus.is_empty() {
        return Err(HypoError::Metric("report undefined over an empty corpus".into()));
    }
    if results.len() != corpus.size() {
        return Err(HypoError::Contract(format!(
            "{} results for {} corpus records",
            results.len(),
            corpus.size()
        )));
    }
    for (record, result) in corpus.iter().zip(results) {
        if record.id != result.utterance_id {
            return Err(HypoError::Contract(format!(
                "results out of order: expected '{}', found '{}'",
                record.id, result.utterance_id
            )));
        }
        if result.mode != results[0].mode {
            return Err(HypoError::Contract(format!(
                "mixed agent modes in one run: '{}' vs '{}'",
                results[0].mode, result.mode
            )));
        }
    }

    let partition = partition_noerr(corpus);
    let noerr: HashSet<&str> = partition.no_err.iter().map(|s| s.as_str()).collect();

    let rows: Vec<UtteranceRow> = corpus
        .records()
        .par_iter()
        .zip(results)
        .map(|(record, result)| {
            let reference = &record.reference;
            let hypothesis = &result.final_transcript;
            let edits = edit_counts(reference.tokens(), hypothesis.tokens());
            let (q_emb, bert_f1) = match scoring.embedder {
                Some(embedder) => {
                    let q = q_emb_score(&reference.normalized_text(), &hypothesis.normalized_text(), embedder)?;
                    let b = bertscore_f1(&reference.normalized_text(), &hypothesis.normalized_text(), embedder)?;
                    (Some(q), Some(b))
                }
                None => (None, None),
            };
            let menli = match scoring.nli {
                Some(nli) => Some(nli_entail_score(
                    &reference.normalized_text(),
                    &hypothesis.normalized_text(),
                    nli,
                )?),
                None => None,
            };
            let (intent_match, slots) = match scoring.tagger {
                Some(tagger) => {
                    match (tagger.tag(reference.raw()), tagger.tag(hypothesis.raw())) {
                        (Ok(gold), Ok(pred)) => (
                            Some(gold.intent == pred.intent),
                            Some(slot_counts(&gold, &pred)),
                        ),
                        (gold, pred) => {
                            let err = gold.err().or(pred.err()).expect("one side failed");
                            log::warn!("tagger failed on '{}': {err}; excluding from SLU", record.id);
                            (None, None)
                        }
                    }
                }
                None => (None, None),
            };
            Ok(UtteranceRow {
                id: record.id.clone(),
                partition: if noerr.contains(record.id.as_str()) {
                    PartitionLabel::NoErr
                } else {
                    PartitionLabel::Err
                },
                edits,
                wer: edits.wer().map(|w| w * 100.0),
                q_emb,
                bert_f1,
                menli,
                intent_match,
                slots,
            })
        })
        .collect::<Result<_>>()?;

    let corpus_scores = corpus_scores(&rows, scoring.aggregation)?;
    Ok(MetricReport {
        metadata: RunMetadata {
            mode: results[0].mode.as_str().to_string(),
            provider: results[0].provider_name.clone(),
            template_sha256: results[0].template_sha256.clone(),
            aggregation: scoring.aggregation,
            truncation_min: scoring.truncation.min_phrase,
            truncation_max: scoring.truncation.max_phrase,
            abbreviation_min_len: scoring.norm.abbreviation_min_len,
            expand_contractions: scoring.norm.expand_contractions,
        },
        corpus: corpus_scores,
        per_utterance: rows,
    })
}

/// Reduces per-utterance rows to corpus aggregates. Sums run in row order so
/// the result is bit-stable for a given report.
fn corpus_scores(rows: &[UtteranceRow], aggregation: Aggregation) -> Result<CorpusScores> {
    let wer_over = |label: Option<PartitionLabel>| -> Result<Option<f64>> {
        let counts: Vec<EditCounts> = rows
            .iter()
            .filter(|r| label.is_none_or(|l| r.partition == l))
            .map(|r| r.edits)
            .collect();
        if counts.is_empty() {
            return Ok(None);
        }
        aggregate_wer(&counts, aggregation).map(Some)
    };
    let mean_of = |pick: fn(&UtteranceRow) -> Option<f64>| -> Option<f64> {
        let values: Vec<f64> = rows.iter().filter_map(pick).collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };
    let intent_acc = {
        let flags: Vec<bool> = rows.iter().filter_map(|r| r.intent_match).collect();
        if flags.is_empty() {
            None
        } else {
            Some(100.0 * flags.iter().filter(|m| **m).count() as f64 / flags.len() as f64)
        }
    };
    let slot_f1 = {
        let counts: Vec<SlotCounts> = rows.iter().filter_map(|r| r.slots).collect();
        if counts.is_empty() {
            None
        } else {
            Some(slot_micro_f1(&counts)?)
        }
    };
    Ok(CorpusScores {
        wer_all: wer_over(None)?,
        wer_noerr: wer_over(Some(PartitionLabel::NoErr))?,
        wer_err: wer_over(Some(PartitionLabel::Err))?,
        q_emb: mean_of(|r| r.q_emb),
        bert_f1: mean_of(|r| r.bert_f1),
        menli: mean_of(|r| r.menli),
        intent_acc,
        slot_f1,
    })
}

/// Recomputes every corpus value from the rows and demands exact equality.
pub fn audit_aggregation(report: &MetricReport) -> Result<()> {
    if report.per_utterance.is_empty() {
        return Err(HypoError::Metric("cannot audit a report with no utterances".into()));
    }
    let recomputed = corpus_scores(&report.per_utterance, report.metadata.aggregation)?;
    let stored = report.corpus;
    let columns: [(&str, Option<f64>, Option<f64>); 8] = [
        ("wer_all", stored.wer_all, recomputed.wer_all),
        ("wer_noerr", stored.wer_noerr, recomputed.wer_noerr),
        ("wer_err", stored.wer_err, recomputed.wer_err),
        ("q_emb", stored.q_emb, recomputed.q_emb),
        ("bert_f1", stored.bert_f1, recomputed.bert_f1),
        ("menli", stored.menli, recomputed.menli),
        ("intent_acc", stored.intent_acc, recomputed.intent_acc),
        ("slot_f1", stored.slot_f1, recomputed.slot_f1),
    ];
    for (name, a, b) in columns {
        if a != b {
            return Err(HypoError::Metric(format!(
                "aggregation audit failed: {name} stored {a:?} but rows give {b:?}"
            )));
        }
    }
    Ok(())
}

/// Writes the full-precision report as JSON. Never rounds, never embeds
/// timestamps: identical runs give byte-identical files.
pub fn write_scores(report: &MetricReport, path: &Path) -> Result<()> {
    if report.per_utterance.is_empty() {
        return Err(HypoError::Metric("refusing to write a report with no utterances".into()));
    }
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| HypoError::Contract(format!("encode report: {e}")))?;
    json.push('\n');
    fs::write(path, json).map_err(|e| HypoError::io(path, e))
}

pub fn read_scores(path: &Path) -> Result<MetricReport> {
    let text = fs::read_to_string(path).map_err(|e| HypoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HypoError::schema(path, 1, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableShape {
    /// WER split into All / NoErr / Err columns.
    Partition,
    /// One row per run across all metric columns.
    MultiMetric,
    /// MultiMetric plus judge/editor toggle columns; first report is the
    /// baseline row.
    Ablation,
}

impl FromStr for TableShape {
    type Err = HypoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "partition" => Ok(TableShape::Partition),
            "multimetric" => Ok(TableShape::MultiMetric),
            "ablation" => Ok(TableShape::Ablation),
            other => Err(HypoError::Config(format!(
                "unknown table shape '{other}' (expected partition, multimetric or ablation)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Text,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = HypoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(TableFormat::Text),
            "markdown" => Ok(TableFormat::Markdown),
            other => Err(HypoError::Config(format!(
                "unknown table format '{other}' (expected text or markdown)"
            ))),
        }
    }
}

/// Rounds to 2 decimals, halves away from zero (all metrics are
/// non-negative, so this is half-up at the stored binary value).
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn cell(x: f64) -> String {
    format!("{:.2}", round2(x))
}

fn need(value: Option<f64>, column: &str, mode: &str) -> Result<f64> {
    value.ok_or_else(|| {
        HypoError::Metric(format!(
            "table needs column '{column}' but the report for mode '{mode}' does not have it"
        ))
    })
}

/// Renders one table over the given reports (one row each, in order).
/// Values are rounded to 2 decimals half-up; missing columns are an error
/// naming the column, not a blank cell.
pub fn render_table(
    reports: &[MetricReport],
    shape: TableShape,
    format: TableFormat,
) -> Result<String> {
    if reports.is_empty() {
        return Err(HypoError::Metric("no reports to render".into()));
    }
    for report in reports {
        if report.per_utterance.is_empty() {
            return Err(HypoError::Metric(format!(
                "report for mode '{}' has no utterances",
                report.metadata.mode
            )));
        }
    }

    let header: Vec<&str> = match shape {
        TableShape::Partition => vec!["system", "WER-All", "WER-NoErr", "WER-Err"],
        TableShape::MultiMetric => {
            vec!["system", "WER", "Q-Emb", "BERT-F1", "MENLI", "Intent-Acc", "Slot-F1"]
        }
        TableShape::Ablation => vec![
            "system", "judge", "editor", "WER", "Q-Emb", "BERT-F1", "MENLI", "Intent-Acc",
            "Slot-F1",
        ],
    };

    let mut rows: Vec<Vec<String>> = Vec::with_capacity(reports.len());
    for report in reports {
        let mode = report.metadata.mode.as_str();
        let c = &report.corpus;
        let row = match shape {
            TableShape::Partition => vec![
                mode.to_string(),
                cell(need(c.wer_all, "WER-All", mode)?),
                cell(need(c.wer_noerr, "WER-NoErr", mode)?),
                cell(need(c.wer_err, "WER-Err", mode)?),
            ],
            TableShape::MultiMetric | TableShape::Ablation => {
                let mut row = vec![mode.to_string()];
                if shape == TableShape::Ablation {
                    let parsed = AgentMode::from_str(mode)?;
                    row.push(if parsed.judge { "yes" } else { "no" }.to_string());
                    row.push(if parsed.editor { "yes" } else { "no" }.to_string());
                }
                row.extend([
                    cell(need(c.wer_all, "WER", mode)?),
                    cell(need(c.q_emb, "Q-Emb", mode)?),
                    cell(need(c.bert_f1, "BERT-F1", mode)?),
                    cell(need(c.menli, "MENLI", mode)?),
                    cell(need(c.intent_acc, "Intent-Acc", mode)?),
                    cell(need(c.slot_f1, "Slot-F1", mode)?),
                ]);
                row
            }
        };
        rows.push(row);
    }

    Ok(match format {
        TableFormat::Text => render_text(&header, &rows),
        TableFormat::Markdown => render_markdown(&header, &rows),
    })
}

fn render_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, cells: Vec<&str>| {
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i == 0 {
                out.push_str(&format!("{cell:<w$}"));
            } else {
                out.push_str(&format!("{cell:>w$}"));
            }
        }
        out.push('\n');
    };
    emit(&mut out, header.to_vec());
    for row in rows {
        emit(&mut out, row.iter().map(|s| s.as_str()).collect());
    }
    out
}

fn render_markdown(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!("|{}\n", " --- |".repeat(header.len())));
    for row in rows {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{run_batch, EchoProvider, ScriptedProvider};
    use crate::metrics::semantic::{HashEmbeddingProvider, OverlapNliProvider};
    use crate::metrics::slu::{evaluate_slu, MockTagger};
    use crate::model::{HypothesisSet, Split, Transcript, UtteranceRecord};
    use std::collections::HashMap;

    fn cfg() -> NormConfig {
        NormConfig::default()
    }

    fn record(id: &str, reference: &str, hyps: &[&str]) -> UtteranceRecord {
        UtteranceRecord {
            id: id.into(),
            reference: Transcript::new(reference, &cfg()),
            hypotheses: HypothesisSet::new(
                hyps.iter().map(|h| Transcript::new(*h, &cfg())).collect(),
            )
            .unwrap(),
            split: Split::Test,
        }
    }

    fn corpus() -> EvalCorpus {
        EvalCorpus::new(vec![
            // Top-1 exactly right: NoErr.
            record("u1", "set an alarm for seven", &["set an alarm for seven", "set a alarm"]),
            // Top-1 wrong: Err.
            record("u2", "play some music now", &["play sum music now", "play some music now"]),
            record("u3", "call bob this evening", &["call rob this evening", "call bob"]),
        ])
    }

    fn full_scoring<'a>(
        embedder: &'a HashEmbeddingProvider,
        nli: &'a OverlapNliProvider,
        tagger: &'a MockTagger,
    ) -> ScoringConfig<'a> {
        ScoringConfig {
            embedder: Some(embedder),
            nli: Some(nli),
            tagger: Some(tagger),
            ..ScoringConfig::default()
        }
    }

    fn echo_report(scoring: &ScoringConfig) -> MetricReport {
        let corpus = corpus();
        let echo = EchoProvider::from_corpus(&corpus);
        let results = run_batch(
            &corpus,
            AgentMode::JEA,
            &echo,
            &TruncationConfig::default(),
            1,
        )
        .unwrap();
        build_report(&corpus, &results, scoring).unwrap()
    }

    #[test]
    fn rows_follow_corpus_order_and_partition_sizes_sum() {
        let embedder = HashEmbeddingProvider::default();
        let nli = OverlapNliProvider;
        let tagger = MockTagger::default();
        let report = echo_report(&full_scoring(&embedder, &nli, &tagger));
        assert_eq!(
            report.per_utterance.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(),
            ["u1", "u2", "u3"]
        );
        let noerr = report.per_utterance.iter().filter(|r| r.partition == PartitionLabel::NoErr).count();
        let err = report.per_utterance.iter().filter(|r| r.partition == PartitionLabel::Err).count();
        assert_eq!(noerr, 1);
        assert_eq!(err, 2);
        assert_eq!(noerr + err, report.per_utterance.len());
    }

    #[test]
    fn wer_aggregates_match_the_metrics_module_exactly() {
        let report = echo_report(&ScoringConfig::default());
        let counts: Vec<EditCounts> = report.per_utterance.iter().map(|r| r.edits).collect();
        assert_eq!(
            report.corpus.wer_all,
            Some(aggregate_wer(&counts, Aggregation::Micro).unwrap())
        );
        // NoErr subset of an echo run has zero WER by definition.
        assert_eq!(report.corpus.wer_noerr, Some(0.0));
        assert!(report.corpus.wer_err.unwrap() > 0.0);
    }

    #[test]
    fn slu_aggregates_match_evaluate_slu() {
        let embedder = HashEmbeddingProvider::default();
        let nli = OverlapNliProvider;
        let tagger = MockTagger::default();
        let report = echo_report(&full_scoring(&embedder, &nli, &tagger));

        let corpus = corpus();
        let finals: HashMap<String, String> = corpus
            .iter()
            .map(|r| (r.id.clone(), r.hypotheses.top1().raw().to_string()))
            .collect();
        let slu = evaluate_slu(&corpus, &finals, &tagger).unwrap();
        assert_eq!(report.corpus.intent_acc, Some(slu.intent_accuracy * 100.0));
        assert_eq!(report.corpus.slot_f1, Some(slu.slot_f1));
    }

    #[test]
    fn audit_passes_for_built_reports_and_catches_tampering() {
        let embedder = HashEmbeddingProvider::default();
        let nli = OverlapNliProvider;
        let tagger = MockTagger::default();
        let mut report = echo_report(&full_scoring(&embedder, &nli, &tagger));
        audit_aggregation(&report).unwrap();

        report.corpus.wer_all = Some(report.corpus.wer_all.unwrap() + 0.25);
        let err = audit_aggregation(&report).unwrap_err();
        assert!(err.to_string().contains("wer_all"));
    }

    #[test]
    fn missing_providers_leave_columns_absent() {
        let report = echo_report(&ScoringConfig::default());
        assert!(report.corpus.wer_all.is_some());
        assert!(report.corpus.q_emb.is_none());
        assert!(report.corpus.menli.is_none());
        assert!(report.corpus.intent_acc.is_none());
        assert!(report.corpus.slot_f1.is_none());
        audit_aggregation(&report).unwrap();
    }

    #[test]
    fn misaligned_results_are_rejected() {
        let corpus = corpus();
        let echo = EchoProvider::from_corpus(&corpus);
        let mut results =
            run_batch(&corpus, AgentMode::JEA, &echo, &TruncationConfig::default(), 1).unwrap();
        results.swap(0, 1);
        let err = build_report(&corpus, &results, &ScoringConfig::default()).unwrap_err();
        assert!(matches!(err, HypoError::Contract(_)));

        results.truncate(1);
        let err = build_report(&corpus, &results, &ScoringConfig::default()).unwrap_err();
        assert!(matches!(err, HypoError::Contract(_)));
    }

    #[test]
    fn empty_corpus_is_refused() {
        let corpus = EvalCorpus::new(Vec::new());
        let err = build_report(&corpus, &[], &ScoringConfig::default()).unwrap_err();
        assert!(matches!(err, HypoError::Metric(_)));
    }

    #[test]
    fn tagger_failures_exclude_rows_from_slu_only() {
        struct Picky;
        impl SluTagger for Picky {
            fn name(&self) -> &str {
                "mock:picky"
            }
            fn tag(&self, text: &str) -> crate::error::Result<crate::metrics::slu::SluAnnotation> {
                if text.contains("music") {
                    return Err(HypoError::Metric("no opinion".into()));
                }
                MockTagger::default().tag(text)
            }
        }
        let scoring = ScoringConfig { tagger: Some(&Picky), ..ScoringConfig::default() };
        let report = echo_report(&scoring);
        let u2 = &report.per_utterance[1];
        assert!(u2.intent_match.is_none() && u2.slots.is_none());
        assert!(u2.wer.is_some());
        // Aggregates still exist, over the two taggable rows.
        assert!(report.corpus.intent_acc.is_some());
        audit_aggregation(&report).unwrap();
    }

    #[test]
    fn passthrough_and_echo_runs_score_identically() {
        let corpus = corpus();
        let echo = EchoProvider::from_corpus(&corpus);
        let embedder = HashEmbeddingProvider::default();
        let nli = OverlapNliProvider;
        let tagger = MockTagger::default();
        let scoring = full_scoring(&embedder, &nli, &tagger);

        let pass = run_batch(&corpus, AgentMode::PASSTHROUGH, &echo, &TruncationConfig::default(), 1)
            .unwrap();
        let jea =
            run_batch(&corpus, AgentMode::JEA, &echo, &TruncationConfig::default(), 1).unwrap();
        let r1 = build_report(&corpus, &pass, &scoring).unwrap();
        let r2 = build_report(&corpus, &jea, &scoring).unwrap();
        assert_eq!(r1.corpus, r2.corpus);
        // Rows differ only in nothing: same edits, same scores.
        for (a, b) in r1.per_utterance.iter().zip(&r2.per_utterance) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn score_files_roundtrip_and_are_byte_identical() {
        let embedder = HashEmbeddingProvider::default();
        let nli = OverlapNliProvider;
        let tagger = MockTagger::default();
        let report = echo_report(&full_scoring(&embedder, &nli, &tagger));
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        write_scores(&report, &a).unwrap();
        write_scores(&report, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let back = read_scores(&a).unwrap();
        assert_eq!(back, report);
        audit_aggregation(&back).unwrap();
    }

    #[test]
    fn writing_an_empty_report_is_refused() {
        let report = MetricReport {
            metadata: RunMetadata {
                mode: "jea".into(),
                provider: "mock:echo".into(),
                template_sha256: String::new(),
                aggregation: Aggregation::Micro,
                truncation_min: 1,
                truncation_max: 5,
                abbreviation_min_len: 2,
                expand_contractions: false,
            },
            corpus: CorpusScores {
                wer_all: None,
                wer_noerr: None,
                wer_err: None,
                q_emb: None,
                bert_f1: None,
                menli: None,
                intent_acc: None,
                slot_f1: None,
            },
            per_utterance: Vec::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.json");
        assert!(matches!(write_scores(&report, &path), Err(HypoError::Metric(_))));
        assert!(!path.exists());
    }

    #[test]
    fn round2_is_half_up() {
        assert_eq!(round2(13.625), 13.63);
        assert_eq!(round2(0.125), 0.13);
        assert_eq!(round2(0.124), 0.12);
        assert_eq!(round2(21.984_999), 21.98);
        assert_eq!(round2(0.0), 0.0);
    }

    #[test]
    fn partition_table_shows_noerr_zero_for_baseline() {
        let report = echo_report(&ScoringConfig::default());
        let text = render_table(&[report], TableShape::Partition, TableFormat::Text).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("system"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("jea"));
        assert!(row.contains("0.00"));
    }

    #[test]
    fn multimetric_table_errors_name_the_missing_column() {
        let report = echo_report(&ScoringConfig::default());
        let err = render_table(&[report], TableShape::MultiMetric, TableFormat::Text).unwrap_err();
        assert!(err.to_string().contains("Q-Emb"));
    }

    #[test]
    fn ablation_table_has_baseline_plus_mode_rows() {
        let corpus = corpus();
        let echo = EchoProvider::from_corpus(&corpus);
        let embedder = HashEmbeddingProvider::default();
        let nli = OverlapNliProvider;
        let tagger = MockTagger::default();
        let scoring = full_scoring(&embedder, &nli, &tagger);
        let tcfg = TruncationConfig::default();

        let mut reports = Vec::new();
        for mode in [AgentMode::PASSTHROUGH, AgentMode::JUDGE, AgentMode::EDITOR, AgentMode::JEA] {
            let results = run_batch(&corpus, mode, &echo, &tcfg, 1).unwrap();
            reports.push(build_report(&corpus, &results, &scoring).unwrap());
        }
        let table = render_table(&reports, TableShape::Ablation, TableFormat::Markdown).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2 + 4); // header + separator + 4 rows
        assert!(lines[2].starts_with("| passthrough | no | no |"));
        assert!(lines[3].starts_with("| judge | yes | no |"));
        assert!(lines[4].starts_with("| editor | no | yes |"));
        assert!(lines[5].starts_with("| jea | yes | yes |"));
    }

    #[test]
    fn markdown_and_text_formats_carry_the_same_cells() {
        let report = echo_report(&ScoringConfig::default());
        let text = render_table(std::slice::from_ref(&report), TableShape::Partition, TableFormat::Text).unwrap();
        let md = render_table(&[report], TableShape::Partition, TableFormat::Markdown).unwrap();
        assert!(md.starts_with("| system |"));
        for token in ["WER-All", "WER-NoErr", "WER-Err", "jea"] {
            assert!(text.contains(token) && md.contains(token));
        }
    }

    #[test]
    fn renderer_rejects_empty_input() {
        assert!(render_table(&[], TableShape::Partition, TableFormat::Text).is_err());
    }

    #[test]
    fn judge_mode_results_render_in_ablation_even_when_fuzzy() {
        // A scripted provider whose replies never match a candidate exactly
        // still produces a well-formed report (flags do not leak into math).
        let corpus = corpus();
        let mut sp = ScriptedProvider::default();
        sp.insert("u1", "sit an alarm for seven");
        sp.insert("u2", "play sum musik now");
        sp.insert("u3", "call rub this evening");
        let results =
            run_batch(&corpus, AgentMode::JUDGE, &sp, &TruncationConfig::default(), 1).unwrap();
        let report = build_report(&corpus, &results, &ScoringConfig::default()).unwrap();
        audit_aggregation(&report).unwrap();
        assert!(report.corpus.wer_all.is_some());
    }
}
