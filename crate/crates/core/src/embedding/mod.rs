//! Sentence embeddings, similarity, and cached corpus embedding.

mod cache;
mod reference;
mod remote;

pub use cache::{CacheError, EmbeddingCache};
pub use reference::{reference_embed, ReferenceEmbedder, MIN_REFERENCE_DIMS};
pub use remote::RemoteEmbedder;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::http::HttpError;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("text has no tokens")]
    EmptyAfterTokenization,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("vector has a non-finite component")]
    NonFinite,
    #[error("invalid dims {0}")]
    InvalidDims(usize),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("item {index} of batch: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<EmbedError>,
    },
    #[error("example {id:?}: {source}")]
    AtExample {
        id: String,
        #[source]
        source: Box<EmbedError>,
    },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl From<HttpError> for EmbedError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Malformed(m) => EmbedError::MalformedResponse(m),
            other => EmbedError::Transport(other.to_string()),
        }
    }
}

/// A unit-length embedding. Constructors normalize, so every value of this
/// type has an L2 norm within 1e-6 of one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// L2-normalizes `values`. Rejects empty, zero and non-finite input.
    pub fn normalized(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::InvalidDims(0));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbedError::ZeroVector);
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    /// Wraps values that are already unit length (e.g. read back from a cache).
    pub(crate) fn from_unit(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::InvalidDims(0));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Self::normalized(values);
        }
        Ok(Self(values))
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Name and dimensionality of an embedder.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbedderId {
    pub name: String,
    pub dims: usize,
}

impl EmbedderId {
    pub fn new(name: impl Into<String>, dims: usize) -> Result<Self, EmbedError> {
        let name = name.into();
        if name.is_empty() {
            return Err(EmbedError::MalformedResponse(
                "embedder name is empty".into(),
            ));
        }
        if dims == 0 {
            return Err(EmbedError::InvalidDims(dims));
        }
        Ok(Self { name, dims })
    }
}

/// Cosine similarity of two unit vectors, clamped to [-1, 1].
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbedError> {
    if u.dims() != v.dims() {
        return Err(EmbedError::DimensionMismatch {
            expected: u.dims(),
            got: v.dims(),
        });
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Which side of a retrieval pair a text is embedded as. Most retrievers use
/// one encoder for both; some ship separate query and passage encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Passage,
    Query,
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> &EmbedderId;

    /// Model name used for `role`; also the cache namespace.
    fn model_name(&self, _role: Role) -> &str {
        &self.id().name
    }

    /// One unit vector per text, in input order.
    fn embed_batch(&self, texts: &[&str], role: Role) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn batch_size(&self) -> usize {
        64
    }
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn id(&self) -> &EmbedderId {
        (**self).id()
    }
    fn model_name(&self, role: Role) -> &str {
        (**self).model_name(role)
    }
    fn embed_batch(&self, texts: &[&str], role: Role) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed_batch(texts, role)
    }
    fn batch_size(&self) -> usize {
        (**self).batch_size()
    }
}

impl<E: Embedder + ?Sized> Embedder for Box<E> {
    fn id(&self) -> &EmbedderId {
        (**self).id()
    }
    fn model_name(&self, role: Role) -> &str {
        (**self).model_name(role)
    }
    fn embed_batch(&self, texts: &[&str], role: Role) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed_batch(texts, role)
    }
    fn batch_size(&self) -> usize {
        (**self).batch_size()
    }
}

/// Example ids of a corpus with their vectors, in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedCorpus {
    pub embedder: String,
    pub dims: usize,
    ids: Vec<String>,
    vectors: Vec<EmbeddingVector>,
}

impl EmbeddedCorpus {
    pub fn new(
        embedder: impl Into<String>,
        entries: Vec<(String, EmbeddingVector)>,
    ) -> Result<Self, EmbedError> {
        let dims = entries.first().map(|(_, v)| v.dims()).unwrap_or(0);
        let (ids, vectors): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        if let Some(bad) = vectors.iter().find(|v| v.dims() != dims) {
            return Err(EmbedError::DimensionMismatch {
                expected: dims,
                got: bad.dims(),
            });
        }
        Ok(Self {
            embedder: embedder.into(),
            dims,
            ids,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[EmbeddingVector] {
        &self.vectors
    }

    pub fn vector(&self, id: &str) -> Option<&EmbeddingVector> {
        self.ids
            .iter()
            .position(|i| i == id)
            .map(|p| &self.vectors[p])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.ids.iter().map(String::as_str).zip(&self.vectors)
    }
}

/// Hex SHA-256 of `text`, the content part of a cache key.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Embeds every example of `corpus` as `role`, serving hits from `cache` and
/// storing misses back into it.
pub fn embed_corpus_as(
    embedder: &dyn Embedder,
    corpus: &Corpus,
    cache: &EmbeddingCache,
    role: Role,
) -> Result<EmbeddedCorpus, EmbedError> {
    let model = embedder.model_name(role).to_string();
    let dims = embedder.id().dims;
    let mut slots: Vec<Option<EmbeddingVector>> = Vec::with_capacity(corpus.len());
    let mut misses = Vec::new();
    for (i, example) in corpus.iter().enumerate() {
        let hash = content_hash(&example.text);
        match cache.get(&model, &example.id, &hash) {
            Some(v) if v.dims() == dims => slots.push(Some(v)),
            _ => {
                slots.push(None);
                misses.push((i, hash));
            }
        }
    }
    log::debug!(
        "embedding {} of {} examples with {model} ({} cached)",
        misses.len(),
        corpus.len(),
        corpus.len() - misses.len()
    );

    let examples = corpus.examples();
    for chunk in misses.chunks(embedder.batch_size().max(1)) {
        let texts: Vec<&str> = chunk
            .iter()
            .map(|(i, _)| examples[*i].text.as_str())
            .collect();
        let vectors = embedder.embed_batch(&texts, role).map_err(|e| {
            let (index, source) = match e {
                EmbedError::AtIndex { index, source } => (index, *source),
                other => (0, other),
            };
            EmbedError::AtExample {
                id: examples[chunk[index.min(chunk.len() - 1)].0].id.clone(),
                source: Box::new(source),
            }
        })?;
        if vectors.len() != chunk.len() {
            return Err(EmbedError::MalformedResponse(format!(
                "embedder returned {} vectors for {} texts",
                vectors.len(),
                chunk.len()
            )));
        }
        for ((i, hash), vector) in chunk.iter().zip(vectors) {
            if vector.dims() != dims {
                return Err(EmbedError::AtExample {
                    id: examples[*i].id.clone(),
                    source: Box::new(EmbedError::DimensionMismatch {
                        expected: dims,
                        got: vector.dims(),
                    }),
                });
            }
            cache.insert(&model, &examples[*i].id, hash, &vector)?;
            slots[*i] = Some(vector);
        }
    }

    let entries = corpus
        .iter()
        .zip(slots)
        .map(|(e, v)| (e.id.clone(), v.expect("every slot filled")))
        .collect();
    EmbeddedCorpus::new(model, entries)
}

/// [`embed_corpus_as`] for training passages.
pub fn embed_corpus(
    embedder: &dyn Embedder,
    corpus: &Corpus,
    cache: &EmbeddingCache,
) -> Result<EmbeddedCorpus, EmbedError> {
    embed_corpus_as(embedder, corpus, cache, Role::Passage)
}
