//! The judge–editor correction agent.
//!
//! Every utterance carries a ranked n-best list from the recognizer. The
//! agent builds a prompt from those hypotheses, asks a completion provider
//! (temperature 0) for either a verdict or a rewrite, and turns the reply
//! into a normalized transcript:
//!
//! * **passthrough** — no call at all; the top-1 hypothesis is the output.
//! * **judge** — the provider must pick one candidate verbatim; replies that
//!   match no candidate are snapped to the nearest one and flagged.
//! * **editor** — the provider rewrites the top-1 draft freely.
//! * **jea** — judge and editor combined: all candidates are shown and the
//!   reply may keep, fuse, or rewrite them.
//!
//! Replies pass through repeated-phrase truncation before normalization, so
//! degenerate loops in either the recognizer or the provider cannot leak
//! into scoring.

mod providers;
mod templates;

pub use providers::{
    CachedCompletionProvider, CallBudget, CompletionProvider, CompletionRequest, EchoProvider,
    HttpCompletionProvider, ScriptedProvider,
};
pub use templates::{Template, TemplateSet};

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HypoError, Result};
use crate::metrics::wer::edit_counts;
use crate::model::{EvalCorpus, Transcript, UtteranceRecord};
use crate::textnorm::{normalize, NormConfig};
use crate::truncate::{truncate_repeated_phrase, TruncationConfig};

/// Which halves of the agent are active. Both off means passthrough; both on
/// is the full judge+editor pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentMode {
    pub judge: bool,
    pub editor: bool,
}

impl AgentMode {
    pub const PASSTHROUGH: AgentMode = AgentMode { judge: false, editor: false };
    pub const JUDGE: AgentMode = AgentMode { judge: true, editor: false };
    pub const EDITOR: AgentMode = AgentMode { judge: false, editor: true };
    pub const JEA: AgentMode = AgentMode { judge: true, editor: true };

    pub fn is_passthrough(self) -> bool {
        !self.judge && !self.editor
    }

    pub fn as_str(self) -> &'static str {
        match (self.judge, self.editor) {
            (false, false) => "passthrough",
            (true, false) => "judge",
            (false, true) => "editor",
            (true, true) => "jea",
        }
    }
}

impl fmt::Display for AgentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentMode {
    type Err = HypoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "passthrough" => Ok(AgentMode::PASSTHROUGH),
            "judge" => Ok(AgentMode::JUDGE),
            "editor" => Ok(AgentMode::EDITOR),
            "jea" => Ok(AgentMode::JEA),
            other => Err(HypoError::Config(format!(
                "unknown agent mode '{other}' (expected jea, judge, editor or passthrough)"
            ))),
        }
    }
}

/// Why a result does not carry a clean provider answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionFlag {
    /// The completion had no usable transcript line; top-1 was kept.
    ParseFallback,
    /// The provider failed after retries; top-1 was kept.
    ProviderFallback,
    /// Judge mode: the reply matched no candidate exactly and was snapped to
    /// the closest one by token edit distance.
    JudgeNearestMatch,
    /// The shared call budget ran out before this record; top-1 was kept.
    BudgetExhausted,
}

/// One corrected utterance.
///
/// Equality deliberately ignores `latency`: two runs of a deterministic
/// provider must compare equal even though wall-clock timings differ.
#[derive(Debug, Clone)]
pub struct CorrectionResult {
    pub utterance_id: String,
    pub mode: AgentMode,
    /// The provider's reply before any parsing (empty in passthrough and on
    /// provider failure).
    pub raw_completion: String,
    pub final_transcript: Transcript,
    pub provider_name: String,
    /// SHA-256 of the prompt template used ("" in passthrough).
    pub template_sha256: String,
    pub flags: Vec<CorrectionFlag>,
    pub latency: Duration,
}

impl PartialEq for CorrectionResult {
    fn eq(&self, other: &Self) -> bool {
        self.utterance_id == other.utterance_id
            && self.mode == other.mode
            && self.raw_completion == other.raw_completion
            && self.final_transcript == other.final_transcript
            && self.provider_name == other.provider_name
            && self.template_sha256 == other.template_sha256
            && self.flags == other.flags
    }
}

/// Builds the prompt for one record. Candidates are kept in rank order and
/// de-duplicated by normalized text (the first surface form wins); editor
/// mode embeds only the top-1 draft. Passthrough has no prompt.
pub fn build_prompt(
    record: &UtteranceRecord,
    mode: AgentMode,
    templates: &TemplateSet,
) -> Result<String> {
    build_prompt_with(record, mode, templates, &NormConfig::default())
}

fn build_prompt_with(
    record: &UtteranceRecord,
    mode: AgentMode,
    templates: &TemplateSet,
    norm: &NormConfig,
) -> Result<String> {
    if mode.is_passthrough() {
        return Err(HypoError::Config("passthrough mode does not use a prompt".into()));
    }
    let candidates = if mode.editor && !mode.judge {
        vec![record.hypotheses.top1()]
    } else {
        dedup_ranked(record, norm)
    };
    if candidates.is_empty() {
        // HypothesisSet::new rejects empty lists, so this is belt and braces.
        return Err(HypoError::Contract(format!(
            "utterance '{}' has no candidates to prompt with",
            record.id
        )));
    }
    let template = match (mode.judge, mode.editor) {
        (true, true) => &templates.combined,
        (true, false) => &templates.judge,
        (false, true) => &templates.editor,
        (false, false) => unreachable!("passthrough handled above"),
    };
    let block = if mode.editor && !mode.judge {
        candidates[0].raw().to_string()
    } else {
        candidates
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{}. {}", i + 1, t.raw()))
            .collect::<Vec<_>>()
            .join("\n")
    };
    Ok(template.render(&block, candidates.len()))
}

fn dedup_ranked<'a>(record: &'a UtteranceRecord, norm: &NormConfig) -> Vec<&'a Transcript> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for t in record.hypotheses.items() {
        // Records loaded through this crate are already normalized; re-derive
        // from raw so hand-built transcripts dedup the same way.
        let key = normalize(t.raw(), norm).join(" ");
        if seen.insert(key) {
            out.push(t);
        }
    }
    out
}

/// Phrases providers like to put on a line of their own, or to prefix the
/// answer with. Matched case-insensitively, with an optional trailing colon.
const PREAMBLE_PHRASES: &[&str] = &[
    "here is the corrected transcript",
    "here's the corrected transcript",
    "here is the transcript",
    "here's the transcript",
    "the corrected transcript is",
    "the corrected transcript",
    "corrected transcript",
    "final transcript",
    "the chosen candidate is",
    "chosen candidate",
    "selected candidate",
    "the answer is",
    "transcript",
    "correction",
    "answer",
    "output",
    "result",
    "choice",
];

/// Extracts the transcript line from a raw completion: code-fence markers and
/// pure preamble lines are dropped, the last nonempty line is taken, a known
/// leading label (`Corrected transcript: …`) is stripped, and symmetric
/// wrapping quotes are removed. Returns `None` when nothing usable remains —
/// parse failures are never retried, they fall back to top-1.
pub fn parse_completion(completion: &str) -> Option<String> {
    let mut last = None;
    for line in completion.lines() {
        let t = line.trim();
        if t.is_empty() || t.starts_with("```") || is_preamble_line(t) {
            continue;
        }
        last = Some(t);
    }
    let line = strip_wrapping_quotes(strip_label(last?)).trim();
    if line.is_empty() {
        None
    } else {
        Some(line.to_string())
    }
}

fn is_preamble_line(t: &str) -> bool {
    let lower = t.to_lowercase();
    let bare = lower.strip_suffix(':').unwrap_or(&lower).trim_end();
    PREAMBLE_PHRASES.iter().any(|p| bare == *p)
}

fn strip_label(t: &str) -> &str {
    if let Some(idx) = t.find(':') {
        let head = t[..idx].trim().to_lowercase();
        if PREAMBLE_PHRASES.iter().any(|p| head == *p) {
            return t[idx + 1..].trim();
        }
    }
    t
}

fn strip_wrapping_quotes(mut s: &str) -> &str {
    const PAIRS: [(char, char); 5] = [
        ('"', '"'),
        ('\'', '\''),
        ('\u{201C}', '\u{201D}'),
        ('\u{2018}', '\u{2019}'),
        ('`', '`'),
    ];
    loop {
        s = s.trim();
        let mut chars = s.chars();
        let (Some(first), Some(last)) = (chars.next(), s.chars().next_back()) else {
            return s;
        };
        if s.chars().count() < 2 || !PAIRS.contains(&(first, last)) {
            return s;
        }
        s = &s[first.len_utf8()..s.len() - last.len_utf8()];
    }
}

/// A configured correction agent. The free [`correct`] and [`run_batch`]
/// functions cover the common case (builtin templates, default
/// normalization); build an `Agent` to swap templates, cap provider calls, or
/// change the token budget per reply.
pub struct Agent {
    templates: TemplateSet,
    tcfg: TruncationConfig,
    norm: NormConfig,
    max_tokens: u32,
    budget: Option<Arc<CallBudget>>,
}

impl Agent {
    pub fn new(tcfg: TruncationConfig) -> Self {
        Agent {
            templates: TemplateSet::builtin(),
            tcfg,
            norm: NormConfig::default(),
            max_tokens: 256,
            budget: None,
        }
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_norm(mut self, norm: NormConfig) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    /// Caps the total number of provider calls. Records beyond the budget
    /// fall back to top-1 and are flagged. Which records hit the cap is only
    /// deterministic at `parallelism = 1`.
    pub fn with_budget(mut self, budget: Arc<CallBudget>) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    /// Corrects one utterance. Provider failures surface as errors (after the
    /// provider's own retries); unparseable replies fall back to top-1 with a
    /// flag instead, because a second identical request cannot parse better.
    pub fn correct(
        &self,
        record: &UtteranceRecord,
        mode: AgentMode,
        provider: &dyn CompletionProvider,
    ) -> Result<CorrectionResult> {
        if mode.is_passthrough() {
            return Ok(CorrectionResult {
                utterance_id: record.id.clone(),
                mode,
                raw_completion: String::new(),
                final_transcript: record.hypotheses.top1().clone(),
                provider_name: "passthrough".to_string(),
                template_sha256: String::new(),
                flags: Vec::new(),
                latency: Duration::ZERO,
            });
        }

        let prompt = build_prompt_with(record, mode, &self.templates, &self.norm)?;
        let template_sha256 = match (mode.judge, mode.editor) {
            (true, true) => self.templates.combined.sha256(),
            (true, false) => self.templates.judge.sha256(),
            _ => self.templates.editor.sha256(),
        }
        .to_string();

        if let Some(budget) = &self.budget {
            if !budget.try_acquire() {
                return Ok(self.fallback(record, mode, provider.name(), template_sha256, String::new(), CorrectionFlag::BudgetExhausted, Duration::ZERO));
            }
        }

        let request = CompletionRequest::new(&record.id, prompt, self.max_tokens);
        let start = Instant::now();
        let completion = provider.complete(&request)?;
        let latency = start.elapsed();

        let Some(line) = parse_completion(&completion) else {
            return Ok(self.fallback(record, mode, provider.name(), template_sha256, completion, CorrectionFlag::ParseFallback, latency));
        };

        let mut flags = Vec::new();
        let final_transcript = if mode.judge && !mode.editor {
            self.resolve_judge_choice(record, &line, &mut flags)
        } else {
            // Truncate on the reply's own whitespace tokens, then normalize.
            let raw_tokens: Vec<&str> = line.split_whitespace().collect();
            let kept = truncate_repeated_phrase(&raw_tokens, &self.tcfg);
            Transcript::new(kept.join(" "), &self.norm)
        };
        if final_transcript.is_empty() {
            // Normalization ate the whole line (e.g. pure punctuation).
            return Ok(self.fallback(record, mode, provider.name(), template_sha256, completion, CorrectionFlag::ParseFallback, latency));
        }

        Ok(CorrectionResult {
            utterance_id: record.id.clone(),
            mode,
            raw_completion: completion,
            final_transcript,
            provider_name: provider.name().to_string(),
            template_sha256,
            flags,
            latency,
        })
    }

    /// Judge replies must be one of the candidates. An exact match (after
    /// normalization) is taken as-is; otherwise the closest candidate by
    /// token edit distance wins, ties going to the better-ranked one.
    fn resolve_judge_choice(
        &self,
        record: &UtteranceRecord,
        line: &str,
        flags: &mut Vec<CorrectionFlag>,
    ) -> Transcript {
        let reply = normalize(line, &self.norm);
        let items = record.hypotheses.items();
        if let Some(exact) = items.iter().find(|t| t.tokens() == reply.as_slice()) {
            return exact.clone();
        }
        let nearest = items
            .iter()
            .min_by_key(|t| edit_counts(&reply, t.tokens()).total())
            .expect("hypothesis set is never empty");
        flags.push(CorrectionFlag::JudgeNearestMatch);
        nearest.clone()
    }

    #[allow(clippy::too_many_arguments)]
    fn fallback(
        &self,
        record: &UtteranceRecord,
        mode: AgentMode,
        provider_name: &str,
        template_sha256: String,
        raw_completion: String,
        flag: CorrectionFlag,
        latency: Duration,
    ) -> CorrectionResult {
        CorrectionResult {
            utterance_id: record.id.clone(),
            mode,
            raw_completion,
            final_transcript: record.hypotheses.top1().clone(),
            provider_name: provider_name.to_string(),
            template_sha256,
            flags: vec![flag],
            latency,
        }
    }

    /// Corrects a whole corpus on a bounded worker pool. Output order matches
    /// corpus order regardless of parallelism. Per-record provider failures
    /// become flagged top-1 fallbacks; only configuration problems abort.
    pub fn run_batch(
        &self,
        corpus: &EvalCorpus,
        mode: AgentMode,
        provider: &dyn CompletionProvider,
        parallelism: usize,
    ) -> Result<Vec<CorrectionResult>> {
        if parallelism == 0 {
            return Err(HypoError::Config("parallelism must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| HypoError::Config(format!("worker pool: {e}")))?;
        pool.install(|| {
            corpus
                .records()
                .par_iter()
                .map(|record| match self.correct(record, mode, provider) {
                    Ok(result) => Ok(result),
                    Err(e @ (HypoError::Config(_) | HypoError::Contract(_))) => Err(e),
                    Err(e) => {
                        log::warn!("utterance '{}': {e}; keeping top-1", record.id);
                        let template_sha256 = match (mode.judge, mode.editor) {
                            (true, true) => self.templates.combined.sha256().to_string(),
                            (true, false) => self.templates.judge.sha256().to_string(),
                            _ => self.templates.editor.sha256().to_string(),
                        };
                        Ok(self.fallback(
                            record,
                            mode,
                            provider.name(),
                            template_sha256,
                            String::new(),
                            CorrectionFlag::ProviderFallback,
                            Duration::ZERO,
                        ))
                    }
                })
                .collect()
        })
    }
}

/// One-shot correction with builtin templates and default normalization.
pub fn correct(
    record: &UtteranceRecord,
    mode: AgentMode,
    provider: &dyn CompletionProvider,
    tcfg: &TruncationConfig,
) -> Result<CorrectionResult> {
    Agent::new(tcfg.clone()).correct(record, mode, provider)
}

/// Batch correction with builtin templates and default normalization.
pub fn run_batch(
    corpus: &EvalCorpus,
    mode: AgentMode,
    provider: &dyn CompletionProvider,
    tcfg: &TruncationConfig,
    parallelism: usize,
) -> Result<Vec<CorrectionResult>> {
    Agent::new(tcfg.clone()).run_batch(corpus, mode, provider, parallelism)
}

#[derive(Serialize, Deserialize)]
struct ResultLine {
    utterance_id: String,
    mode: String,
    provider: String,
    template_sha256: String,
    raw_completion: String,
    final_raw: String,
    final_tokens: Vec<String>,
    flags: Vec<CorrectionFlag>,
    latency_ms: u64,
}

/// Writes results as JSON lines, one per utterance, in input order.
pub fn write_results(path: &Path, results: &[CorrectionResult]) -> Result<()> {
    let file = File::create(path).map_err(|e| HypoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in results {
        let line = ResultLine {
            utterance_id: r.utterance_id.clone(),
            mode: r.mode.as_str().to_string(),
            provider: r.provider_name.clone(),
            template_sha256: r.template_sha256.clone(),
            raw_completion: r.raw_completion.clone(),
            final_raw: r.final_transcript.raw().to_string(),
            final_tokens: r.final_transcript.tokens().to_vec(),
            flags: r.flags.clone(),
            latency_ms: r.latency.as_millis() as u64,
        };
        let json = serde_json::to_string(&line)
            .map_err(|e| HypoError::Contract(format!("encode result: {e}")))?;
        writeln!(w, "{json}").map_err(|e| HypoError::io(path, e))?;
    }
    w.flush().map_err(|e| HypoError::io(path, e))
}

/// Reads results back, checking that each stored token sequence still matches
/// what `cfg` produces from the stored raw text.
pub fn read_results(path: &Path, cfg: &NormConfig) -> Result<Vec<CorrectionResult>> {
    let file = File::open(path).map_err(|e| HypoError::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HypoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let parsed: ResultLine = serde_json::from_str(&line)
            .map_err(|e| HypoError::schema(path, lineno, e.to_string()))?;
        let mode = AgentMode::from_str(&parsed.mode)
            .map_err(|e| HypoError::schema(path, lineno, e.to_string()))?;
        let final_transcript = Transcript::new(parsed.final_raw, cfg);
        if final_transcript.tokens() != parsed.final_tokens.as_slice() {
            return Err(HypoError::schema(
                path,
                lineno,
                format!(
                    "stored tokens for '{}' do not match normalization of the raw text",
                    parsed.utterance_id
                ),
            ));
        }
        out.push(CorrectionResult {
            utterance_id: parsed.utterance_id,
            mode,
            raw_completion: parsed.raw_completion,
            final_transcript,
            provider_name: parsed.provider,
            template_sha256: parsed.template_sha256,
            flags: parsed.flags,
            latency: Duration::from_millis(parsed.latency_ms),
        });
    }
    Ok(out)
}
