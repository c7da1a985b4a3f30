//! Offline hashed bag-of-tokens embedder.
//!
//! Lowercase, split on runs of non-alphanumeric characters, hash each token
//! with FNV-1a 64 into one of `dims` buckets, count, L2-normalize. The output
//! depends only on the text and `dims`, so it is identical across processes
//! and platforms. It does not try to approximate a trained retriever.

use super::{EmbedError, Embedder, EmbedderId, EmbeddingVector, Role};
use crate::rng::fnv1a64;

pub const MIN_REFERENCE_DIMS: usize = 8;

pub fn reference_embed(text: &str, dims: usize) -> Result<EmbeddingVector, EmbedError> {
    if dims < MIN_REFERENCE_DIMS {
        return Err(EmbedError::InvalidDims(dims));
    }
    let lowered = text.to_lowercase();
    let mut counts = vec![0.0f64; dims];
    let mut any = false;
    for token in lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        counts[(fnv1a64(token) % dims as u64) as usize] += 1.0;
        any = true;
    }
    if !any {
        return Err(EmbedError::EmptyAfterTokenization);
    }
    EmbeddingVector::normalized(counts)
}

#[derive(Debug, Clone)]
pub struct ReferenceEmbedder {
    id: EmbedderId,
}

impl ReferenceEmbedder {
    pub fn new(dims: usize) -> Result<Self, EmbedError> {
        Self::named("reference", dims)
    }

    pub fn named(name: impl Into<String>, dims: usize) -> Result<Self, EmbedError> {
        if dims < MIN_REFERENCE_DIMS {
            return Err(EmbedError::InvalidDims(dims));
        }
        Ok(Self {
            id: EmbedderId::new(name, dims)?,
        })
    }
}

impl Embedder for ReferenceEmbedder {
    fn id(&self) -> &EmbedderId {
        &self.id
    }

    fn embed_batch(&self, texts: &[&str], _role: Role) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts
            .iter()
            .enumerate()
            .map(|(index, t)| {
                reference_embed(t, self.id.dims).map_err(|e| EmbedError::AtIndex {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::cosine;

    #[test]
    fn repeated_token_has_same_direction() {
        let once = reference_embed("aspirin", 64).unwrap();
        let twice = reference_embed("aspirin aspirin", 64).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(matches!(
            reference_embed("", 64),
            Err(EmbedError::EmptyAfterTokenization)
        ));
        assert!(matches!(
            reference_embed(" -- ,; ", 64),
            Err(EmbedError::EmptyAfterTokenization)
        ));
    }

    #[test]
    fn small_dims_rejected() {
        assert!(matches!(
            reference_embed("a", 4),
            Err(EmbedError::InvalidDims(4))
        ));
    }

    #[test]
    fn case_and_punctuation_insensitive() {
        assert_eq!(
            reference_embed("Drug-Interaction!", 32).unwrap(),
            reference_embed("drug interaction", 32).unwrap()
        );
    }

    #[test]
    fn two_token_cosine_matches_bag_of_tokens_oracle() {
        // "drug" and "interaction" hash to buckets 47 and 43 of 64, so the
        // count vectors are e47 + e43 and e47: cosine = 1/sqrt(2).
        let a = reference_embed("drug interaction", 64).unwrap();
        let b = reference_embed("drug", 64).unwrap();
        assert_eq!(fnv1a64("drug") % 64, 47);
        assert_eq!(fnv1a64("interaction") % 64, 43);
        let c = cosine(&a, &b).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "{c}");
    }

    #[test]
    fn batch_error_carries_index() {
        let e = ReferenceEmbedder::new(16).unwrap();
        match e.embed_batch(&["fine", "..."], Role::Passage) {
            Err(EmbedError::AtIndex { index: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
