//! Completion providers: the LLM boundary of the correction agent.
//!
//! Everything behind [`CompletionProvider`] is a black box that maps a prompt
//! to raw completion text. The HTTP provider speaks the OpenAI-style
//! chat-completions shape; the echo and scripted providers exist so the whole
//! pipeline can run (and be tested) offline.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::cache::{content_key, DiskCache};
use crate::error::{HypoError, Result};
use crate::model::EvalCorpus;
use crate::net::{post_json, RetryPolicy};

/// One completion call. Temperature is pinned to zero by the agent; it is a
/// field (not a constant) so the wire shape stays explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    /// Id of the utterance this prompt was built for. HTTP providers ignore
    /// it; table-backed mocks key on it.
    pub utterance_id: String,
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Option<Vec<String>>,
}

impl CompletionRequest {
    pub fn new(utterance_id: impl Into<String>, prompt: impl Into<String>, max_tokens: u32) -> Self {
        CompletionRequest {
            utterance_id: utterance_id.into(),
            prompt: prompt.into(),
            max_tokens,
            temperature: 0.0,
            stop: None,
        }
    }
}

/// A text-completion backend. Implementations must be shareable across the
/// batch worker threads.
pub trait CompletionProvider: Send + Sync {
    /// Stable name recorded in results (and used in cache keys).
    fn name(&self) -> &str;

    fn complete(&self, request: &CompletionRequest) -> Result<String>;
}

/// Replays each utterance's top-1 hypothesis as the "completion". Useful as a
/// no-op LLM: the corrected output should score exactly like the ASR baseline.
#[derive(Debug, Clone)]
pub struct EchoProvider {
    top1: HashMap<String, String>,
}

impl EchoProvider {
    pub fn from_corpus(corpus: &EvalCorpus) -> Self {
        let top1 = corpus
            .iter()
            .map(|r| (r.id.clone(), r.hypotheses.top1().raw().to_string()))
            .collect();
        EchoProvider { top1 }
    }
}

impl CompletionProvider for EchoProvider {
    fn name(&self) -> &str {
        "mock:echo"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        self.top1
            .get(&request.utterance_id)
            .cloned()
            .ok_or_else(|| HypoError::Provider {
                provider: self.name().to_string(),
                attempts: 1,
                message: format!("no echo entry for utterance '{}'", request.utterance_id),
            })
    }
}

/// Returns canned completions from a table keyed by utterance id. Missing ids
/// are provider errors, which lets tests exercise the fallback path.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    table: HashMap<String, String>,
}

impl ScriptedProvider {
    pub fn new(table: HashMap<String, String>) -> Self {
        ScriptedProvider { table }
    }

    pub fn insert(&mut self, id: impl Into<String>, completion: impl Into<String>) {
        self.table.insert(id.into(), completion.into());
    }
}

impl CompletionProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "mock:scripted"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        self.table
            .get(&request.utterance_id)
            .cloned()
            .ok_or_else(|| HypoError::Provider {
                provider: self.name().to_string(),
                attempts: 1,
                message: format!("no scripted completion for utterance '{}'", request.utterance_id),
            })
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop: Option<&'a [String]>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessageOwned,
}

#[derive(Deserialize)]
struct ChatMessageOwned {
    content: String,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

/// OpenAI-compatible `chat/completions` client. Transport failures are
/// retried with exponential backoff; HTTP 4xx fails fast.
pub struct HttpCompletionProvider {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: Option<String>,
    name: String,
    retry: RetryPolicy,
}

impl HttpCompletionProvider {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>) -> Self {
        let url = format!("{}/chat/completions", endpoint.trim_end_matches('/'));
        HttpCompletionProvider {
            client: reqwest::blocking::Client::new(),
            url,
            name: format!("llm:{model}"),
            model: model.to_string(),
            api_key,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

impl CompletionProvider for HttpCompletionProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let body = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage { role: "user", content: &request.prompt }],
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            stop: request.stop.as_deref(),
        };
        let resp: ChatResponse = post_json(
            &self.client,
            &self.name,
            &self.url,
            self.api_key.as_deref(),
            &body,
            self.retry,
        )?;
        let choice = resp.choices.into_iter().next().ok_or_else(|| HypoError::Provider {
            provider: self.name.clone(),
            attempts: 1,
            message: "response contained no choices".into(),
        })?;
        Ok(choice.message.content)
    }
}

/// Memoizes completions on disk, keyed by provider name and prompt. With
/// temperature pinned at zero a prompt maps to one completion, so replaying a
/// run never re-issues a call that already succeeded.
pub struct CachedCompletionProvider {
    inner: Box<dyn CompletionProvider>,
    cache: DiskCache,
}

impl CachedCompletionProvider {
    pub fn new(inner: Box<dyn CompletionProvider>, cache_path: &Path) -> Result<Self> {
        Ok(CachedCompletionProvider { inner, cache: DiskCache::open(cache_path)? })
    }
}

impl CompletionProvider for CachedCompletionProvider {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let key = content_key(&[
            "complete",
            self.inner.name(),
            &request.prompt,
            &request.max_tokens.to_string(),
        ]);
        if let Some(hit) = self.cache.get(&key) {
            let stored: String = serde_json::from_str(&hit).map_err(|e| {
                HypoError::Contract(format!("corrupt completion cache entry: {e}"))
            })?;
            return Ok(stored);
        }
        let fresh = self.inner.complete(request)?;
        let encoded = serde_json::to_string(&fresh)
            .map_err(|e| HypoError::Contract(format!("encode completion for cache: {e}")))?;
        self.cache.put(&key, &encoded)?;
        Ok(fresh)
    }
}

/// A shared call allowance. Each provider call takes one token; when the
/// budget is exhausted the agent stops calling out and falls back to top-1.
/// Decrements are atomic, so concurrent workers can never overspend.
#[derive(Debug)]
pub struct CallBudget {
    remaining: AtomicU64,
}

impl CallBudget {
    pub fn new(calls: u64) -> Self {
        CallBudget { remaining: AtomicU64::new(calls) }
    }

    /// Takes one call token. Returns false once the budget is spent.
    pub fn try_acquire(&self) -> bool {
        self.remaining
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
    }

    pub fn remaining(&self) -> u64 {
        self.remaining.load(Ordering::SeqCst)
    }
}
