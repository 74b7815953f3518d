//! Corpus-level BLEU-4: pooled modified n-gram precisions, geometric mean,
//! brevity penalty, and successive-halving smoothing of zero counts.

use std::collections::HashMap;

use crate::error::{CoreError, Result};

use super::tokenize::EvalTokenizer;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Case-preserving corpus BLEU with n-gram orders 1-4. Zero match counts
/// are smoothed by successive halving of a unit count: the k-th zero order
/// scores `1 / (2^k * total)`. Returns 0 when the hypotheses are too short
/// to produce any n-gram of some order.
pub fn bleu4(
    hypotheses: &[String],
    references: &[String],
    tokenizer: &dyn EvalTokenizer,
) -> Result<f64> {
    if hypotheses.is_empty() {
        return Err(CoreError::EmptyDataset("bleu corpus".to_string()));
    }
    if hypotheses.len() != references.len() {
        return Err(CoreError::Misaligned(format!(
            "{} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    let hyp_tokens: Vec<Vec<String>> = hypotheses.iter().map(|h| tokenizer.tokenize(h)).collect();
    let ref_tokens: Vec<Vec<String>> = references.iter().map(|r| tokenizer.tokenize(r)).collect();

    let hyp_len: usize = hyp_tokens.iter().map(Vec::len).sum();
    let ref_len: usize = ref_tokens.iter().map(Vec::len).sum();

    let mut log_precision_sum = 0.0;
    let mut halvings = 1.0f64;
    for n in 1..=4 {
        let mut matches = 0u64;
        let mut total = 0u64;
        for (hyp, reference) in hyp_tokens.iter().zip(&ref_tokens) {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(hyp, n) {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matches += count.min(clip);
            }
            total += hyp.len().saturating_sub(n - 1) as u64;
        }
        if total == 0 {
            return Ok(0.0);
        }
        let precision = if matches > 0 {
            matches as f64 / total as f64
        } else {
            halvings *= 2.0;
            1.0 / (halvings * total as f64)
        };
        log_precision_sum += precision.ln();
    }

    let geo_mean = (log_precision_sum / 4.0).exp();
    let brevity = if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    Ok(100.0 * brevity * geo_mean)
}
