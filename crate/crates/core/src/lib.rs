//! Correction and evaluation toolkit for n-best ASR transcripts.
//!
//! The pipeline: build an evaluation corpus from raw n-best decoder
//! dumps, run a judge/editor correction agent over the ranked
//! hypotheses of each utterance, prune repetition loops from the agent
//! output, and score the result against references with word error
//! rate, embedding/entailment similarity, and slot-filling metrics.

pub mod agent;
pub mod cache;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod net;
pub mod report;
pub mod textnorm;
pub mod truncate;

pub use agent::{AgentMode, CompletionProvider, CorrectionResult};
pub use error::{HypoError, Result};
pub use model::{EvalCorpus, HypothesisSet, Split, Transcript, UtteranceRecord};
pub use report::MetricReport;
pub use textnorm::NormConfig;
pub use truncate::TruncationConfig;
