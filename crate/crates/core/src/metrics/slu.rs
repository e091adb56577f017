//! Downstream task metrics: intent accuracy and value-level slot
//! micro-F1. The SLU tagger is a provider; running it on reference
//! transcripts yields pseudo-gold labels, so no human slot annotation
//! is needed. Slot scoring compares (type, normalized value) pairs as
//! multisets, deliberately ignoring span positions.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HypoError, Result};
use crate::model::EvalCorpus;
use crate::net::{post_json, RetryPolicy};
use crate::textnorm::{normalize, NormConfig};

/// Intent label plus a multiset of (slot type, normalized value)
/// pairs for one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SluAnnotation {
    pub intent: String,
    pub slots: Vec<(String, String)>,
}

impl SluAnnotation {
    /// Build an annotation, passing every slot value through the
    /// transcript normalizer so values compare on equal footing.
    pub fn new(
        intent: impl Into<String>,
        raw_slots: &[(String, String)],
        cfg: &NormConfig,
    ) -> Self {
        SluAnnotation {
            intent: intent.into(),
            slots: raw_slots
                .iter()
                .map(|(slot_type, value)| (slot_type.clone(), normalize(value, cfg).join(" ")))
                .collect(),
        }
    }
}

/// Pooled slot decision counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl SlotCounts {
    pub fn add(&mut self, other: SlotCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Maps text to an intent and slot annotation, deterministically.
pub trait SluTagger: Send + Sync {
    fn name(&self) -> &str;
    fn tag(&self, text: &str) -> Result<SluAnnotation>;
}

/// Exact-match fraction of predicted intents against gold intents.
pub fn intent_accuracy(gold: &[String], pred: &[String]) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(HypoError::Metric(format!(
            "intent label lists differ in length: {} vs {}",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(HypoError::Metric(
            "intent accuracy undefined over zero utterances".into(),
        ));
    }
    let hits = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Per-utterance slot decisions by multiset intersection: a predicted
/// pair is a true positive while the gold multiset still has a copy of
/// it; leftovers on the predicted side are false positives and on the
/// gold side false negatives.
pub fn slot_counts(gold: &SluAnnotation, pred: &SluAnnotation) -> SlotCounts {
    let mut remaining: HashMap<&(String, String), usize> = HashMap::new();
    for pair in &gold.slots {
        *remaining.entry(pair).or_insert(0) += 1;
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    for pair in &pred.slots {
        match remaining.get_mut(pair) {
            Some(count) if *count > 0 => {
                *count -= 1;
                tp += 1;
            }
            _ => fp += 1,
        }
    }
    SlotCounts {
        tp,
        fp,
        fn_: gold.slots.len() - tp,
    }
}

/// Micro-averaged slot F1 (percentage) from pooled per-utterance
/// counts. A corpus with no slots anywhere scores 100 (nothing to get
/// wrong); zero true positives against any slot at all scores 0.
pub fn slot_micro_f1(per_utt: &[SlotCounts]) -> Result<f64> {
    if per_utt.is_empty() {
        return Err(HypoError::Metric(
            "slot F1 undefined over zero utterances".into(),
        ));
    }
    let mut pooled = SlotCounts::default();
    for counts in per_utt {
        pooled.add(*counts);
    }
    if pooled.tp == 0 {
        return Ok(if pooled.fp + pooled.fn_ == 0 { 100.0 } else { 0.0 });
    }
    let precision = pooled.tp as f64 / (pooled.tp + pooled.fp) as f64;
    let recall = pooled.tp as f64 / (pooled.tp + pooled.fn_) as f64;
    Ok(200.0 * precision * recall / (precision + recall))
}

/// Corpus-level SLU outcome, plus how many records the tagger could
/// not process (excluded from both numerator and denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SluEvaluation {
    pub intent_accuracy: f64,
    pub slot_f1: f64,
    pub scored: usize,
    pub excluded: usize,
}

/// Tag references (pseudo-gold) and finals per record, then reduce.
///
/// `finals` maps record id to the final transcript's raw text and must
/// cover the corpus. Records where tagging fails on either side are
/// counted in `excluded` and skipped; everything failing would leave
/// the metrics undefined, which is an error.
pub fn evaluate_slu(
    corpus: &EvalCorpus,
    finals: &HashMap<String, String>,
    tagger: &dyn SluTagger,
) -> Result<SluEvaluation> {
    if corpus.is_empty() {
        return Err(HypoError::Metric(
            "SLU evaluation undefined over an empty corpus".into(),
        ));
    }
    for record in corpus.iter() {
        if !finals.contains_key(&record.id) {
            return Err(HypoError::Contract(format!(
                "no final transcript for record `{}`",
                record.id
            )));
        }
    }
    let tagged: Vec<Option<(SluAnnotation, SluAnnotation)>> = corpus
        .records()
        .par_iter()
        .map(|record| {
            let gold = match tagger.tag(record.reference.raw()) {
                Ok(annotation) => annotation,
                Err(e) => {
                    log::warn!("tagger failed on reference of `{}`: {e}", record.id);
                    return None;
                }
            };
            let pred = match tagger.tag(&finals[&record.id]) {
                Ok(annotation) => annotation,
                Err(e) => {
                    log::warn!("tagger failed on final of `{}`: {e}", record.id);
                    return None;
                }
            };
            Some((gold, pred))
        })
        .collect();

    let excluded = tagged.iter().filter(|t| t.is_none()).count();
    let pairs: Vec<(SluAnnotation, SluAnnotation)> = tagged.into_iter().flatten().collect();
    if pairs.is_empty() {
        return Err(HypoError::Metric(
            "tagger failed on every record; SLU metrics undefined".into(),
        ));
    }
    let gold_intents: Vec<String> = pairs.iter().map(|(g, _)| g.intent.clone()).collect();
    let pred_intents: Vec<String> = pairs.iter().map(|(_, p)| p.intent.clone()).collect();
    let counts: Vec<SlotCounts> = pairs.iter().map(|(g, p)| slot_counts(g, p)).collect();
    Ok(SluEvaluation {
        intent_accuracy: intent_accuracy(&gold_intents, &pred_intents)?,
        slot_f1: slot_micro_f1(&counts)?,
        scored: pairs.len(),
        excluded,
    })
}

// ---------------------------------------------------------------------------
// Taggers

/// Deterministic keyword-rule tagger for offline runs and tests.
///
/// The input is normalized first, so raw and normalized forms of the
/// same utterance always tag identically. Intent is decided by the
/// first rule whose keyword occurs among the tokens; slots are drawn
/// from token shape (digit runs), a weekday/relative-day word list,
/// and a small first-name lexicon.
#[derive(Debug, Clone)]
pub struct MockTagger {
    norm: NormConfig,
}

impl Default for MockTagger {
    fn default() -> Self {
        MockTagger {
            norm: NormConfig::default(),
        }
    }
}

const INTENT_RULES: &[(&str, &str)] = &[
    ("weather", "get_weather"),
    ("alarm", "set_alarm"),
    ("wake", "set_alarm"),
    ("timer", "set_timer"),
    ("play", "play_music"),
    ("music", "play_music"),
    ("song", "play_music"),
    ("call", "make_call"),
    ("dial", "make_call"),
    ("remind", "set_reminder"),
    ("reminder", "set_reminder"),
    ("email", "send_email"),
    ("light", "control_lights"),
    ("lights", "control_lights"),
    ("lamp", "control_lights"),
];

const DATE_WORDS: &[&str] = &[
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
    "today",
    "tomorrow",
    "tonight",
];

const PERSON_NAMES: &[&str] = &["bob", "alice", "mary", "john", "sam", "emma"];

impl SluTagger for MockTagger {
    fn name(&self) -> &str {
        "slu:mock"
    }

    fn tag(&self, text: &str) -> Result<SluAnnotation> {
        let tokens = normalize(text, &self.norm);
        let intent = INTENT_RULES
            .iter()
            .find(|(keyword, _)| tokens.iter().any(|t| t == keyword))
            .map_or("other", |(_, intent)| *intent)
            .to_string();
        let mut slots = Vec::new();
        for token in &tokens {
            if !token.is_empty() && token.chars().all(|c| c.is_ascii_digit()) {
                slots.push(("number".to_string(), token.clone()));
            } else if DATE_WORDS.contains(&token.as_str()) {
                slots.push(("date".to_string(), token.clone()));
            } else if PERSON_NAMES.contains(&token.as_str()) {
                slots.push(("person".to_string(), token.clone()));
            }
        }
        // Tokens are already normalized; the constructor re-normalizes
        // slot values, a no-op here by idempotence.
        Ok(SluAnnotation::new(intent, &slots, &self.norm))
    }
}

/// Tagger endpoint speaking `{text}` requests with
/// `{intent, slots: [{type, value}]}` responses.
pub struct HttpSluTagger {
    name: String,
    url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
    norm: NormConfig,
}

#[derive(Serialize)]
struct TagRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct TagResponse {
    intent: String,
    slots: Vec<TagSlot>,
}

#[derive(Deserialize)]
struct TagSlot {
    #[serde(rename = "type")]
    slot_type: String,
    value: String,
}

impl HttpSluTagger {
    pub fn new(url: &str, api_key: Option<&str>) -> Result<Self> {
        Self::with_retry(url, api_key, RetryPolicy::default())
    }

    pub fn with_retry(url: &str, api_key: Option<&str>, retry: RetryPolicy) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .map_err(|e| HypoError::Config(format!("http client: {e}")))?;
        Ok(HttpSluTagger {
            name: "slu:http".to_string(),
            url: url.to_string(),
            api_key: api_key.map(str::to_string),
            client,
            retry,
            norm: NormConfig::default(),
        })
    }
}

impl SluTagger for HttpSluTagger {
    fn name(&self) -> &str {
        &self.name
    }

    fn tag(&self, text: &str) -> Result<SluAnnotation> {
        let response: TagResponse = post_json(
            &self.client,
            &self.name,
            &self.url,
            self.api_key.as_deref(),
            &TagRequest { text },
            self.retry,
        )?;
        let raw_slots: Vec<(String, String)> = response
            .slots
            .into_iter()
            .map(|s| (s.slot_type, s.value))
            .collect();
        Ok(SluAnnotation::new(response.intent, &raw_slots, &self.norm))
    }
}
