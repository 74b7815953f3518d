//! Embedding-based greedy-matching score: precision is the mean over
//! hypothesis tokens of the best cosine similarity to any reference token,
//! recall the mirror image, F1 their harmonic mean.

use crate::error::{CoreError, Result};
use crate::model::Seq2SeqModel;
use crate::vocab::Vocabulary;

use super::rouge::PrecisionRecallF1;
use super::tokenize::EvalTokenizer;

/// Token-to-vector provider. Embedding happens per token batch so that
/// implementations may build a joint index over the pair being scored.
pub trait Embedder {
    /// One vector per token; all vectors of a call share a space.
    fn embed_all(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>>;
    fn id(&self) -> &str;
}

/// One-hot embedder over the tokens of each call; cosine similarity is 1
/// for equal tokens and 0 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct OneHotEmbedder;

impl Embedder for OneHotEmbedder {
    fn embed_all(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut index = std::collections::BTreeMap::new();
        for t in tokens {
            let next = index.len();
            index.entry(t.clone()).or_insert(next);
        }
        let dim = index.len();
        Ok(tokens
            .iter()
            .map(|t| {
                let mut v = vec![0.0; dim];
                v[index[t]] = 1.0;
                v
            })
            .collect())
    }

    fn id(&self) -> &str {
        "one-hot"
    }
}

/// The desk model's word embeddings; unknown tokens map to `<unk>`.
pub struct ModelEmbedder<'a> {
    pub vocab: &'a Vocabulary,
    pub model: &'a Seq2SeqModel,
}

impl Embedder for ModelEmbedder<'_> {
    fn embed_all(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>> {
        tokens
            .iter()
            .map(|t| {
                let id = self.vocab.id_of(t).unwrap_or_else(|| self.vocab.unk_id());
                Ok(self.model.word_embedding_row(id)?)
            })
            .collect()
    }

    fn id(&self) -> &str {
        "model-word-embeddings"
    }
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(CoreError::InvalidArgument(
            "zero-norm embedding vector".to_string(),
        ));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Greedy-matching embedding score between one hypothesis and one
/// reference.
pub fn embed_score(
    hypothesis: &str,
    reference: &str,
    embedder: &dyn Embedder,
    tokenizer: &dyn EvalTokenizer,
) -> Result<PrecisionRecallF1> {
    let hyp = tokenizer.tokenize(hypothesis);
    let refr = tokenizer.tokenize(reference);
    if hyp.is_empty() || refr.is_empty() {
        return Err(CoreError::InvalidArgument(
            "embed_score requires non-empty tokenizations".to_string(),
        ));
    }
    let mut all = hyp.clone();
    all.extend(refr.iter().cloned());
    let vectors = embedder.embed_all(&all)?;
    let (hyp_vecs, ref_vecs) = vectors.split_at(hyp.len());

    let mut sim = vec![vec![0.0; ref_vecs.len()]; hyp_vecs.len()];
    for (i, hv) in hyp_vecs.iter().enumerate() {
        for (j, rv) in ref_vecs.iter().enumerate() {
            if hv.len() != rv.len() {
                return Err(CoreError::ShapeMismatch(
                    "embedding dimensions differ".to_string(),
                ));
            }
            sim[i][j] = cosine(hv, rv)?;
        }
    }
    let precision = sim
        .iter()
        .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / hyp_vecs.len() as f64;
    let recall = (0..ref_vecs.len())
        .map(|j| {
            (0..hyp_vecs.len())
                .map(|i| sim[i][j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / ref_vecs.len() as f64;
    Ok(PrecisionRecallF1::from_pr(precision, recall))
}
