//! OpenAI-compatible `/v1/embeddings` client.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{EmbedError, Embedder, EmbedderId, EmbeddingVector, Role};
use crate::http::{join, JsonClient, RetryPolicy};

pub const EMBED_API_KEY_VAR: &str = "MMRAG_EMBED_API_KEY";

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
}

/// Remote retriever behind an OpenAI-compatible embeddings endpoint.
/// Vectors are normalized locally whatever the server returns.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    id: EmbedderId,
    query_model: Option<String>,
    endpoint: String,
    client: JsonClient,
    retry: RetryPolicy,
    batch_size: usize,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        dims: usize,
    ) -> Result<Self, EmbedError> {
        let client = JsonClient::from_env(EMBED_API_KEY_VAR, Duration::from_secs(120))?;
        Ok(Self {
            id: EmbedderId::new(model, dims)?,
            query_model: None,
            endpoint: endpoint.into(),
            client,
            retry: RetryPolicy::default(),
            batch_size: 32,
        })
    }

    /// Embeds queries with a separate encoder (e.g. MedCPT's query model).
    pub fn with_query_model(mut self, model: impl Into<String>) -> Self {
        self.query_model = Some(model.into());
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn with_client(mut self, client: JsonClient) -> Self {
        self.client = client;
        self
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> &EmbedderId {
        &self.id
    }

    fn model_name(&self, role: Role) -> &str {
        match (role, &self.query_model) {
            (Role::Query, Some(m)) => m,
            _ => &self.id.name,
        }
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn embed_batch(&self, texts: &[&str], role: Role) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({ "model": self.model_name(role), "input": texts });
        let value =
            self.client
                .post(&join(&self.endpoint, "/v1/embeddings"), &body, &self.retry)?;
        let response: EmbeddingResponse = serde_json::from_value(value)
            .map_err(|e| EmbedError::MalformedResponse(e.to_string()))?;
        if response.data.len() != texts.len() {
            return Err(EmbedError::MalformedResponse(format!(
                "{} embeddings for {} inputs",
                response.data.len(),
                texts.len()
            )));
        }
        response
            .data
            .into_iter()
            .enumerate()
            .map(|(index, item)| {
                if item.embedding.len() != self.id.dims {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.id.dims,
                        got: item.embedding.len(),
                    });
                }
                EmbeddingVector::normalized(item.embedding).map_err(|e| EmbedError::AtIndex {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}
