//! LLM clients: an OpenAI-compatible chat endpoint and an offline mock.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::Example;
use crate::http::{join, HttpError, JsonClient, RetryPolicy};
use crate::rng::shuffled_prefix;

pub const LLM_API_KEY_VAR: &str = "MMRAG_LLM_API_KEY";

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum GenerationError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("context length exceeded: {0}")]
    ContextLengthExceeded(String),
    #[error("invalid client spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(default)]
    pub stop: Vec<String>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            max_tokens: 256,
            temperature: 0.0,
            stop: Vec::new(),
        }
    }
}

/// Raw model output for one query. `raw_text` is kept exactly as returned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub query_id: String,
    pub raw_text: String,
    pub latency_ms: u64,
    pub client_name: String,
}

/// Everything a client may look at for one query.
#[derive(Debug, Clone, Copy)]
pub struct GenerationRequest<'a> {
    pub query: &'a Example,
    pub prompt: &'a str,
    /// Number of demonstrations in the prompt.
    pub k: usize,
}

pub trait LlmClient: Send + Sync {
    fn name(&self) -> &str;

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Completion, GenerationError>;

    /// True when identical prompts always produce identical output.
    fn is_deterministic(&self) -> bool;
}

/// Offline stand-in for an LLM, declared in config as `mock:oracle`,
/// `mock:corrupt:<seed>:<rate>` or `mock:fixed:<text>`.
#[derive(Debug, Clone, PartialEq)]
pub enum MockSpec {
    /// Answers with the gold output.
    Oracle,
    /// Answers with the gold output except on a seeded subset of exactly
    /// `round(rate * n)` of the `n` planned queries, where it answers
    /// `INVALID_<id>`.
    Corrupt { seed: u64, rate: f64 },
    /// Always answers `text`.
    Fixed { text: String },
}

impl FromStr for MockSpec {
    type Err = GenerationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| GenerationError::InvalidSpec(format!("{s:?}: {why}"));
        let rest = s
            .strip_prefix("mock:")
            .ok_or_else(|| bad("expected a mock: prefix"))?;
        let mut parts = rest.splitn(2, ':');
        match (parts.next(), parts.next()) {
            (Some("oracle"), None) => Ok(MockSpec::Oracle),
            (Some("fixed"), Some(text)) => Ok(MockSpec::Fixed {
                text: text.to_string(),
            }),
            (Some("corrupt"), Some(args)) => {
                let (seed, rate) = args
                    .split_once(':')
                    .ok_or_else(|| bad("expected <seed>:<rate>"))?;
                let seed = seed.parse().map_err(|_| bad("seed is not a u64"))?;
                let rate: f64 = rate.parse().map_err(|_| bad("rate is not a number"))?;
                check_rate(rate).map_err(|_| bad("rate must be in [0, 1]"))?;
                Ok(MockSpec::Corrupt { seed, rate })
            }
            _ => Err(bad(
                "expected oracle, corrupt:<seed>:<rate> or fixed:<text>",
            )),
        }
    }
}

impl fmt::Display for MockSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockSpec::Oracle => f.write_str("mock:oracle"),
            MockSpec::Corrupt { seed, rate } => write!(f, "mock:corrupt:{seed}:{rate}"),
            MockSpec::Fixed { text } => write!(f, "mock:fixed:{text}"),
        }
    }
}

fn check_rate(rate: f64) -> Result<(), GenerationError> {
    if (0.0..=1.0).contains(&rate) {
        Ok(())
    } else {
        Err(GenerationError::InvalidSpec(format!(
            "corruption rate {rate} outside [0, 1]"
        )))
    }
}

/// Mock client bound to a run plan (the ordered query ids of a run).
///
/// The corrupted queries are the first `round(rate * n)` entries of a seeded
/// permutation of the plan, so a lower rate corrupts a subset of what a
/// higher rate corrupts. `rate_by_k` overrides the rate per demonstration
/// count.
#[derive(Debug, Clone)]
pub struct MockClient {
    spec: MockSpec,
    name: String,
    rate_by_k: BTreeMap<usize, f64>,
    plan_len: usize,
    corruption_rank: HashMap<String, usize>,
}

impl MockClient {
    pub fn new(spec: MockSpec, plan: &[String]) -> Self {
        let corruption_rank = match &spec {
            MockSpec::Corrupt { seed, .. } => shuffled_prefix(plan.len(), plan.len(), *seed)
                .into_iter()
                .enumerate()
                .map(|(rank, i)| (plan[i].clone(), rank))
                .collect(),
            _ => HashMap::new(),
        };
        Self {
            name: spec.to_string(),
            spec,
            rate_by_k: BTreeMap::new(),
            plan_len: plan.len(),
            corruption_rank,
        }
    }

    pub fn with_rate_by_k(
        mut self,
        rate_by_k: BTreeMap<usize, f64>,
    ) -> Result<Self, GenerationError> {
        for rate in rate_by_k.values() {
            check_rate(*rate)?;
        }
        self.rate_by_k = rate_by_k;
        Ok(self)
    }

    pub fn spec(&self) -> &MockSpec {
        &self.spec
    }

    /// Number of planned queries corrupted at demonstration count `k`.
    pub fn corrupted_count(&self, k: usize) -> usize {
        match &self.spec {
            MockSpec::Corrupt { rate, .. } => {
                let rate = self.rate_by_k.get(&k).copied().unwrap_or(*rate);
                (rate * self.plan_len as f64).round() as usize
            }
            _ => 0,
        }
    }

    pub fn is_corrupted(&self, query_id: &str, k: usize) -> bool {
        self.corruption_rank
            .get(query_id)
            .is_some_and(|&rank| rank < self.corrupted_count(k))
    }

    /// Mock answer for `query` under this client's spec.
    pub fn answer(&self, query: &Example, k: usize) -> String {
        match &self.spec {
            MockSpec::Oracle => query.gold.clone(),
            MockSpec::Fixed { text } => text.clone(),
            MockSpec::Corrupt { .. } if self.is_corrupted(&query.id, k) => {
                format!("INVALID_{}", query.id)
            }
            MockSpec::Corrupt { .. } => query.gold.clone(),
        }
    }
}

impl LlmClient for MockClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Completion, GenerationError> {
        Ok(Completion {
            query_id: request.query.id.clone(),
            raw_text: self.answer(request.query, request.k),
            latency_ms: 0,
            client_name: self.name.clone(),
        })
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Client for `POST {endpoint}/v1/chat/completions`.
#[derive(Debug, Clone)]
pub struct RemoteLlm {
    endpoint: String,
    model: String,
    params: GenerationParams,
    client: JsonClient,
    retry: RetryPolicy,
}

impl RemoteLlm {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        params: GenerationParams,
    ) -> Result<Self, GenerationError> {
        let client = JsonClient::from_env(LLM_API_KEY_VAR, Duration::from_secs(300))
            .map_err(|e| GenerationError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            params,
            client,
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_client(mut self, client: JsonClient) -> Self {
        self.client = client;
        self
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": self.params.temperature,
            "max_tokens": self.params.max_tokens,
            "stop": self.params.stop,
        })
    }
}

fn is_context_overflow(body: &str) -> bool {
    let parsed: Option<Value> = serde_json::from_str(body).ok();
    let code = parsed
        .as_ref()
        .and_then(|v| v.pointer("/error/code"))
        .and_then(Value::as_str);
    if code == Some("context_length_exceeded") {
        return true;
    }
    let lowered = body.to_lowercase();
    lowered.contains("maximum context length") || lowered.contains("context length exceeded")
}

pub(crate) fn first_choice_text(value: &Value) -> Result<String, GenerationError> {
    let choices = value
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| GenerationError::MalformedResponse("missing choices array".into()))?;
    let first = choices
        .first()
        .ok_or_else(|| GenerationError::MalformedResponse("empty choices array".into()))?;
    first
        .pointer("/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| {
            GenerationError::MalformedResponse("choices[0].message.content is not a string".into())
        })
}

impl LlmClient for RemoteLlm {
    fn name(&self) -> &str {
        &self.model
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Completion, GenerationError> {
        let started = Instant::now();
        let url = join(&self.endpoint, "/v1/chat/completions");
        let value = self
            .client
            .post(&url, &self.request_body(request.prompt), &self.retry)
            .map_err(|e| match e {
                HttpError::Status { status, body }
                    if status < 500 && is_context_overflow(&body) =>
                {
                    GenerationError::ContextLengthExceeded(body)
                }
                HttpError::Malformed(m) => GenerationError::MalformedResponse(m),
                other => GenerationError::Transport(other.to_string()),
            })?;
        Ok(Completion {
            query_id: request.query.id.clone(),
            raw_text: first_choice_text(&value)?,
            latency_ms: started.elapsed().as_millis() as u64,
            client_name: self.model.clone(),
        })
    }

    fn is_deterministic(&self) -> bool {
        self.params.temperature == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("q{i:02}")).collect()
    }

    #[test]
    fn parse_mock_specs() {
        assert_eq!("mock:oracle".parse::<MockSpec>().unwrap(), MockSpec::Oracle);
        assert_eq!(
            "mock:corrupt:7:0.3".parse::<MockSpec>().unwrap(),
            MockSpec::Corrupt { seed: 7, rate: 0.3 }
        );
        assert_eq!(
            "mock:fixed:a: b".parse::<MockSpec>().unwrap(),
            MockSpec::Fixed {
                text: "a: b".into()
            }
        );
        for bad in [
            "oracle",
            "mock:corrupt:7",
            "mock:corrupt:x:0.1",
            "mock:corrupt:1:1.5",
            "mock:other",
        ] {
            assert!(bad.parse::<MockSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn oracle_returns_gold() {
        let client = MockClient::new(MockSpec::Oracle, &plan(1));
        let q = Example::new("q01", "text", "ddi-effect");
        let c = client
            .generate(&GenerationRequest {
                query: &q,
                prompt: "p",
                k: 1,
            })
            .unwrap();
        assert_eq!(c.raw_text, "ddi-effect");
        assert_eq!(c.query_id, "q01");
    }

    #[test]
    fn corrupt_seed7_rate03_pinned_subset() {
        // Pinned with an independent SplitMix64 / Fisher-Yates script.
        let ids = plan(10);
        let client = MockClient::new(MockSpec::Corrupt { seed: 7, rate: 0.3 }, &ids);
        let corrupted: Vec<&str> = ids
            .iter()
            .filter(|id| client.is_corrupted(id, 1))
            .map(String::as_str)
            .collect();
        assert_eq!(corrupted, ["q01", "q05", "q08"]);
        let again = MockClient::new(MockSpec::Corrupt { seed: 7, rate: 0.3 }, &ids);
        assert!(ids
            .iter()
            .all(|id| client.is_corrupted(id, 1) == again.is_corrupted(id, 1)));
        let q = Example::new("q05", "t", "gold");
        assert_eq!(client.answer(&q, 1), "INVALID_q05");
    }

    #[test]
    fn zero_rate_is_oracle() {
        let ids = plan(10);
        let client = MockClient::new(MockSpec::Corrupt { seed: 3, rate: 0.0 }, &ids);
        assert!(ids.iter().all(|id| !client.is_corrupted(id, 5)));
    }

    #[test]
    fn rate_by_k_nests_subsets() {
        let ids = plan(20);
        let client = MockClient::new(
            MockSpec::Corrupt {
                seed: 11,
                rate: 0.5,
            },
            &ids,
        )
        .with_rate_by_k([(1, 0.4), (5, 0.2), (10, 0.05)].into_iter().collect())
        .unwrap();
        assert_eq!(client.corrupted_count(1), 8);
        assert_eq!(client.corrupted_count(5), 4);
        assert_eq!(client.corrupted_count(10), 1);
        assert_eq!(client.corrupted_count(3), 10);
        for id in &ids {
            if client.is_corrupted(id, 5) {
                assert!(client.is_corrupted(id, 1));
            }
        }
    }

    #[test]
    fn first_choice_extraction() {
        let ok = json!({"choices": [{"message": {"role": "assistant", "content": " BRCA1 \n"}}]});
        assert_eq!(first_choice_text(&ok).unwrap(), " BRCA1 \n");
        let empty = json!({"choices": []});
        assert!(matches!(
            first_choice_text(&empty),
            Err(GenerationError::MalformedResponse(_))
        ));
    }

    #[test]
    fn overflow_detection() {
        assert!(is_context_overflow(
            r#"{"error":{"code":"context_length_exceeded","message":"x"}}"#
        ));
        assert!(is_context_overflow(
            "This model's maximum context length is 4096 tokens"
        ));
        assert!(!is_context_overflow(
            r#"{"error":{"code":"invalid_api_key"}}"#
        ));
    }
}
