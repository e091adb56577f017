//! Semantic-fidelity scores: sentence-embedding cosine similarity,
//! greedy token-embedding F1 (BERTScore-style, no IDF weighting or
//! baseline rescaling), and NLI entailment. All neural models sit
//! behind provider traits; deterministic offline mocks ship in-tree
//! and HTTP providers cover real endpoints.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::{content_key, DiskCache};
use crate::error::{HypoError, Result};
use crate::net::{post_json, RetryPolicy};

/// Sentence- and token-level text embeddings.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn embed_sentence(&self, text: &str) -> Result<Vec<f64>>;
    /// One vector per provider token; empty input gives an empty list.
    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>>;
}

/// Probability that `premise` entails `hypothesis`.
pub trait NliProvider: Send + Sync {
    fn name(&self) -> &str;
    fn entail_prob(&self, premise: &str, hypothesis: &str) -> Result<f64>;
}

/// The three semantic columns of a report, as percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticScores {
    pub q_emb: f64,
    pub bert_f1: f64,
    pub menli: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; errors on dimension mismatch or a zero-norm side.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(HypoError::Metric(format!(
            "embedding dimensions differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(HypoError::Metric("zero-norm embedding".into()));
    }
    Ok(dot(a, b) / (na * nb))
}

/// 100 × cosine of the two sentence embeddings. Unclipped: a provider
/// with signed similarities can push this below zero.
pub fn q_emb_score(
    reference: &str,
    hypothesis: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<f64> {
    let r = provider.embed_sentence(reference)?;
    let h = provider.embed_sentence(hypothesis)?;
    for (vec, text) in [(&r, reference), (&h, hypothesis)] {
        if norm(vec) == 0.0 {
            return Err(HypoError::Metric(format!(
                "zero-norm sentence embedding for text `{text}`"
            )));
        }
    }
    Ok(100.0 * cosine(&r, &h)?)
}

/// Greedy token-embedding matching. Recall averages each reference
/// token's best match in the hypothesis, precision the transpose, and
/// the score is the F1 of the two (as a percentage), 0 when P+R = 0.
pub fn bertscore_f1(
    reference: &str,
    hypothesis: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<f64> {
    let r = provider.embed_tokens(reference)?;
    let h = provider.embed_tokens(hypothesis)?;
    for (vecs, text) in [(&r, reference), (&h, hypothesis)] {
        if vecs.is_empty() {
            return Err(HypoError::Metric(format!(
                "no token embeddings for text `{text}`"
            )));
        }
    }
    let best_against = |from: &[Vec<f64>], to: &[Vec<f64>]| -> Result<f64> {
        let mut total = 0.0;
        for v in from {
            let mut best = f64::NEG_INFINITY;
            for w in to {
                best = best.max(cosine(v, w)?);
            }
            total += best;
        }
        Ok(total / from.len() as f64)
    };
    let recall = best_against(&r, &h)?;
    let precision = best_against(&h, &r)?;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(200.0 * precision * recall / (precision + recall))
}

/// 100 × P(hypothesis entails reference): the hypothesis is the NLI
/// premise and the reference the NLI hypothesis, i.e. the score asks
/// whether the reference's content follows from what was recognized.
pub fn nli_entail_score(
    reference: &str,
    hypothesis: &str,
    provider: &dyn NliProvider,
) -> Result<f64> {
    let p = provider.entail_prob(hypothesis, reference)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(HypoError::Metric(format!(
            "provider `{}` returned entailment probability {p} outside [0,1]",
            provider.name()
        )));
    }
    Ok(100.0 * p)
}

/// All three scores for one (reference, hypothesis) pair.
pub fn semantic_scores(
    reference: &str,
    hypothesis: &str,
    embedder: &dyn EmbeddingProvider,
    nli: &dyn NliProvider,
) -> Result<SemanticScores> {
    Ok(SemanticScores {
        q_emb: q_emb_score(reference, hypothesis, embedder)?,
        bert_f1: bertscore_f1(reference, hypothesis, embedder)?,
        menli: nli_entail_score(reference, hypothesis, nli)?,
    })
}

// ---------------------------------------------------------------------------
// Offline mock providers

/// Deterministic offline embedder: each whitespace token maps to a
/// pseudo-random unit-range vector seeded by its hash, and a sentence
/// embeds as the sum of its token vectors. Equal texts embed equally;
/// token overlap raises similarity. Word order is invisible to the
/// sentence embedding — fine for a mock standing in for a real model.
#[derive(Debug, Clone)]
pub struct HashEmbeddingProvider {
    dim: usize,
}

impl Default for HashEmbeddingProvider {
    fn default() -> Self {
        HashEmbeddingProvider { dim: 32 }
    }
}

impl HashEmbeddingProvider {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(HypoError::Config("embedding dimension must be > 0".into()));
        }
        Ok(HashEmbeddingProvider { dim })
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(token.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
        (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }
}

impl EmbeddingProvider for HashEmbeddingProvider {
    fn name(&self) -> &str {
        "embed:hash"
    }

    fn embed_sentence(&self, text: &str) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.dim];
        for token in text.split_whitespace() {
            for (slot, value) in acc.iter_mut().zip(self.token_vector(token)) {
                *slot += value;
            }
        }
        Ok(acc)
    }

    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>> {
        Ok(text
            .split_whitespace()
            .map(|t| self.token_vector(t))
            .collect())
    }
}

/// Offline stand-in for an NLI model: entailment probability is the
/// share of the hypothesis' token multiset covered by the premise.
/// Identical texts entail fully; an empty hypothesis is vacuously
/// entailed.
#[derive(Debug, Clone, Default)]
pub struct OverlapNliProvider;

impl NliProvider for OverlapNliProvider {
    fn name(&self) -> &str {
        "nli:overlap"
    }

    fn entail_prob(&self, premise: &str, hypothesis: &str) -> Result<f64> {
        let hyp_tokens: Vec<&str> = hypothesis.split_whitespace().collect();
        if hyp_tokens.is_empty() {
            return Ok(1.0);
        }
        let mut available: HashMap<&str, usize> = HashMap::new();
        for token in premise.split_whitespace() {
            *available.entry(token).or_insert(0) += 1;
        }
        let mut covered = 0usize;
        for token in &hyp_tokens {
            if let Some(count) = available.get_mut(token) {
                if *count > 0 {
                    *count -= 1;
                    covered += 1;
                }
            }
        }
        Ok(covered as f64 / hyp_tokens.len() as f64)
    }
}

// ---------------------------------------------------------------------------
// HTTP providers

/// Embedding endpoint speaking `{model, input: [texts]}` requests with
/// `{data: [{embedding: [..]}]}` responses. Token embeddings are
/// served by the same endpoint with one input entry per whitespace
/// token.
pub struct HttpEmbeddingProvider {
    name: String,
    url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

impl HttpEmbeddingProvider {
    pub fn new(url: &str, model: &str, api_key: Option<&str>) -> Result<Self> {
        Self::with_retry(url, model, api_key, RetryPolicy::default())
    }

    pub fn with_retry(
        url: &str,
        model: &str,
        api_key: Option<&str>,
        retry: RetryPolicy,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .map_err(|e| HypoError::Config(format!("http client: {e}")))?;
        Ok(HttpEmbeddingProvider {
            name: format!("embed:http:{model}"),
            url: url.to_string(),
            model: model.to_string(),
            api_key: api_key.map(str::to_string),
            client,
            retry,
        })
    }

    fn request(&self, input: Vec<&str>) -> Result<Vec<Vec<f64>>> {
        let expected = input.len();
        let response: EmbedResponse = post_json(
            &self.client,
            &self.name,
            &self.url,
            self.api_key.as_deref(),
            &EmbedRequest {
                model: &self.model,
                input,
            },
            self.retry,
        )?;
        if response.data.len() != expected {
            return Err(HypoError::Provider {
                provider: self.name.clone(),
                attempts: 1,
                message: format!(
                    "expected {expected} embeddings, got {}",
                    response.data.len()
                ),
            });
        }
        Ok(response.data.into_iter().map(|d| d.embedding).collect())
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed_sentence(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.request(vec![text])?.remove(0))
    }

    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        self.request(tokens)
    }
}

/// NLI endpoint speaking `{premise, hypothesis}` requests with
/// `{entail, neutral, contradict}` responses.
pub struct HttpNliProvider {
    name: String,
    url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
}

#[derive(Serialize)]
struct NliRequest<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Deserialize)]
struct NliResponse {
    entail: f64,
    #[allow(dead_code)]
    #[serde(default)]
    neutral: f64,
    #[allow(dead_code)]
    #[serde(default)]
    contradict: f64,
}

impl HttpNliProvider {
    pub fn new(url: &str, api_key: Option<&str>) -> Result<Self> {
        Self::with_retry(url, api_key, RetryPolicy::default())
    }

    pub fn with_retry(url: &str, api_key: Option<&str>, retry: RetryPolicy) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .map_err(|e| HypoError::Config(format!("http client: {e}")))?;
        Ok(HttpNliProvider {
            name: "nli:http".to_string(),
            url: url.to_string(),
            api_key: api_key.map(str::to_string),
            client,
            retry,
        })
    }
}

impl NliProvider for HttpNliProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn entail_prob(&self, premise: &str, hypothesis: &str) -> Result<f64> {
        let response: NliResponse = post_json(
            &self.client,
            &self.name,
            &self.url,
            self.api_key.as_deref(),
            &NliRequest {
                premise,
                hypothesis,
            },
            self.retry,
        )?;
        Ok(response.entail)
    }
}

// ---------------------------------------------------------------------------
// Caching wrappers

/// Wraps an embedder with an append-only disk cache keyed by provider
/// name and text, making repeat corpus scoring free and deterministic.
pub struct CachedEmbeddingProvider {
    inner: Box<dyn EmbeddingProvider>,
    cache: DiskCache,
}

impl CachedEmbeddingProvider {
    pub fn new(inner: Box<dyn EmbeddingProvider>, cache_path: &Path) -> Result<Self> {
        Ok(CachedEmbeddingProvider {
            inner,
            cache: DiskCache::open(cache_path)?,
        })
    }
}

impl EmbeddingProvider for CachedEmbeddingProvider {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn embed_sentence(&self, text: &str) -> Result<Vec<f64>> {
        let key = content_key(&["sentence", self.inner.name(), text]);
        let raw = self.cache.get_or_insert_with(&key, || {
            let vec = self.inner.embed_sentence(text)?;
            serde_json::to_string(&vec)
                .map_err(|e| HypoError::Contract(format!("serialize embedding: {e}")))
        })?;
        serde_json::from_str(&raw).map_err(|e| {
            HypoError::Contract(format!(
                "corrupt cached sentence embedding under key {key}: {e}"
            ))
        })
    }

    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>> {
        let key = content_key(&["tokens", self.inner.name(), text]);
        let raw = self.cache.get_or_insert_with(&key, || {
            let vecs = self.inner.embed_tokens(text)?;
            serde_json::to_string(&vecs)
                .map_err(|e| HypoError::Contract(format!("serialize embeddings: {e}")))
        })?;
        serde_json::from_str(&raw).map_err(|e| {
            HypoError::Contract(format!(
                "corrupt cached token embeddings under key {key}: {e}"
            ))
        })
    }
}

/// Disk-cached NLI provider, keyed by provider name and text pair.
pub struct CachedNliProvider {
    inner: Box<dyn NliProvider>,
    cache: DiskCache,
}

impl CachedNliProvider {
    pub fn new(inner: Box<dyn NliProvider>, cache_path: &Path) -> Result<Self> {
        Ok(CachedNliProvider {
            inner,
            cache: DiskCache::open(cache_path)?,
        })
    }
}

impl NliProvider for CachedNliProvider {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn entail_prob(&self, premise: &str, hypothesis: &str) -> Result<f64> {
        let key = content_key(&["nli", self.inner.name(), premise, hypothesis]);
        let raw = self.cache.get_or_insert_with(&key, || {
            Ok(self.inner.entail_prob(premise, hypothesis)?.to_string())
        })?;
        raw.parse::<f64>().map_err(|e| {
            HypoError::Contract(format!("corrupt cached probability under key {key}: {e}"))
        })
    }
}
