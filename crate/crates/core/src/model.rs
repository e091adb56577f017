//! Shared domain types and the line-delimited corpus format.
//!
//! A corpus file is UTF-8, one JSON object per line, with the fields
//! `id`, `reference`, `hypotheses` (array of raw hypothesis strings,
//! rank-ordered, top-1 first) and `split`. Text is stored raw and
//! normalized on load, so the same file supports different
//! normalization settings.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HypoError, Result};
use crate::textnorm::{detokenize, normalize, NormConfig};

/// Corpus partition tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = HypoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(HypoError::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// A transcript in both raw and normalized form.
///
/// `tokens` is always `normalize(raw)` under the config the transcript
/// was built with; the raw text is kept for diagnostics and for scorers
/// that want the unnormalized view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    raw: String,
    tokens: Vec<String>,
}

impl Transcript {
    pub fn new(raw: impl Into<String>, cfg: &NormConfig) -> Self {
        let raw = raw.into();
        let tokens = normalize(&raw, cfg);
        Transcript { raw, tokens }
    }

    /// Build a transcript from already-normalized tokens; the raw form
    /// is the single-space join.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let raw = detokenize(&tokens)?;
        Ok(Transcript { raw, tokens })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Normalized text: tokens joined by single spaces. Used as the
    /// identity key for deduplication and exact-match checks.
    pub fn normalized_text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Rank-ordered ASR hypotheses for one utterance; index 0 is the top-1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypothesisSet {
    items: Vec<Transcript>,
}

impl HypothesisSet {
    pub fn new(items: Vec<Transcript>) -> Result<Self> {
        if items.is_empty() {
            return Err(HypoError::Contract("hypothesis set is empty".into()));
        }
        Ok(HypothesisSet { items })
    }

    pub fn items(&self) -> &[Transcript] {
        &self.items
    }

    pub fn k(&self) -> usize {
        self.items.len()
    }

    /// The ASR top-1 hypothesis, the baseline for every comparison.
    pub fn top1(&self) -> &Transcript {
        &self.items[0]
    }
}

/// One utterance: reference, ranked hypotheses, and split tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub id: String,
    pub reference: Transcript,
    pub hypotheses: HypothesisSet,
    pub split: Split,
}

/// An ordered collection of utterance records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalCorpus {
    records: Vec<UtteranceRecord>,
}

impl EvalCorpus {
    pub fn new(records: Vec<UtteranceRecord>) -> Self {
        EvalCorpus { records }
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn size(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, UtteranceRecord> {
        self.records.iter()
    }
}

/// On-disk record shape. Raw text only; normalization happens on load.
#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    reference: String,
    hypotheses: Vec<String>,
    split: Split,
}

/// Read a line-delimited corpus file with the default normalization.
pub fn read_corpus(path: &Path) -> Result<EvalCorpus> {
    read_corpus_with(path, &NormConfig::default())
}

/// Read a line-delimited corpus file, normalizing under `cfg`.
///
/// Fails with the offending line number on malformed lines and with the
/// offending id on duplicates. Record order is file order.
pub fn read_corpus_with(path: &Path, cfg: &NormConfig) -> Result<EvalCorpus> {
    let file = File::open(path).map_err(|e| HypoError::io(path, e))?;
    let reader = BufReader::new(file);

    let mut records = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| HypoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RecordLine = serde_json::from_str(&line)
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
        if raw.hypotheses.is_empty() {
            return Err(HypoError::schema(path, line_no, "empty hypotheses array"));
        }
        let hypotheses = HypothesisSet::new(
            raw.hypotheses
                .into_iter()
                .map(|h| Transcript::new(h, cfg))
                .collect(),
        )?;
        records.push(UtteranceRecord {
            id: raw.id,
            reference: Transcript::new(raw.reference, cfg),
            hypotheses,
            split: raw.split,
        });
    }
    Ok(EvalCorpus::new(records))
}

/// Write a corpus, one JSON object per line, preserving raw text bytes.
pub fn write_corpus(corpus: &EvalCorpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| HypoError::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in corpus.iter() {
        let line = RecordLine {
            id: record.id.clone(),
            reference: record.reference.raw().to_string(),
            hypotheses: record
                .hypotheses
                .items()
                .iter()
                .map(|h| h.raw().to_string())
                .collect(),
            split: record.split,
        };
        let json = serde_json::to_string(&line)
            .map_err(|e| HypoError::Contract(format!("serialize record `{}`: {e}", record.id)))?;
        writeln!(writer, "{json}").map_err(|e| HypoError::io(path, e))?;
    }
    writer.flush().map_err(|e| HypoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record(id: &str, split: Split) -> UtteranceRecord {
        let cfg = NormConfig::default();
        UtteranceRecord {
            id: id.to_string(),
            reference: Transcript::new("please turn on the lights", &cfg),
            hypotheses: HypothesisSet::new(vec![
                Transcript::new("please turn on the lights", &cfg),
                Transcript::new("please turn on the light", &cfg),
            ])
            .unwrap(),
            split,
        }
    }

    #[test]
    fn transcript_tokens_are_normalized() {
        let t = Transcript::new("Watch TV, please!", &NormConfig::default());
        assert_eq!(t.tokens(), ["watch", "t", "v", "please"]);
        assert_eq!(t.raw(), "Watch TV, please!");
        assert_eq!(t.normalized_text(), "watch t v please");
    }

    #[test]
    fn empty_file_reads_as_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        File::create(&path).unwrap();
        let corpus = read_corpus(&path).unwrap();
        assert_eq!(corpus.size(), 0);
    }

    #[test]
    fn reads_records_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("two.jsonl");
        let mut f = File::create(&path).unwrap();
        writeln!(f, r#"{{"id":"a","reference":"one two three four","hypotheses":["one two three four"],"split":"train"}}"#).unwrap();
        writeln!(f, r#"{{"id":"b","reference":"five six seven eight","hypotheses":["five six seven eight"],"split":"test"}}"#).unwrap();
        let corpus = read_corpus(&path).unwrap();
        assert_eq!(corpus.size(), 2);
        assert_eq!(corpus.records()[0].id, "a");
        assert_eq!(corpus.records()[1].id, "b");
    }

    #[test]
    fn missing_field_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let mut f = File::create(&path).unwrap();
        writeln!(f, r#"{{"id":"a","reference":"one two three four","hypotheses":["x"],"split":"train"}}"#).unwrap();
        writeln!(f, r#"{{"id":"b","hypotheses":["x"],"split":"train"}}"#).unwrap();
        match read_corpus(&path) {
            Err(HypoError::Schema { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("reference"), "message: {message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.jsonl");
        let mut f = File::create(&path).unwrap();
        for _ in 0..2 {
            writeln!(f, r#"{{"id":"same","reference":"a b c d","hypotheses":["a b c d"],"split":"dev"}}"#).unwrap();
        }
        match read_corpus(&path) {
            Err(HypoError::DuplicateId { id, line, .. }) => {
                assert_eq!(id, "same");
                assert_eq!(line, 2);
            }
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn write_then_read_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.jsonl");
        let corpus = EvalCorpus::new(vec![
            sample_record("r1", Split::Train),
            sample_record("r2", Split::Test),
        ]);
        write_corpus(&corpus, &path).unwrap();
        let back = read_corpus(&path).unwrap();
        assert_eq!(back, corpus);
    }

    #[test]
    fn empty_corpus_writes_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty_out.jsonl");
        write_corpus(&EvalCorpus::default(), &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap().len(), 0);
    }

    #[test]
    fn unicode_apostrophes_survive_roundtrip_bytewise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("uni.jsonl");
        let cfg = NormConfig::default();
        let corpus = EvalCorpus::new(vec![UtteranceRecord {
            id: "u1".into(),
            reference: Transcript::new("I can\u{2019}t see the \u{201C}screen\u{201D} today", &cfg),
            hypotheses: HypothesisSet::new(vec![Transcript::new(
                "i can\u{2019}t see the screen today",
                &cfg,
            )])
            .unwrap(),
            split: Split::Dev,
        }]);
        write_corpus(&corpus, &path).unwrap();
        let bytes_first = std::fs::read(&path).unwrap();
        assert!(String::from_utf8(bytes_first.clone())
            .unwrap()
            .contains("can\u{2019}t"));

        let back = read_corpus(&path).unwrap();
        assert_eq!(back, corpus);
        let path2 = dir.path().join("uni2.jsonl");
        write_corpus(&back, &path2).unwrap();
        assert_eq!(std::fs::read(&path2).unwrap(), bytes_first);
    }
}
