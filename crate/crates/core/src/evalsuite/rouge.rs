//! ROUGE-1/2/L precision, recall, and F1.

use std::collections::HashMap;

use crate::error::{CoreError, Result};

use super::tokenize::EvalTokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RougeVariant {
    N1,
    N2,
    L,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrecisionRecallF1 {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        PrecisionRecallF1 {
            precision,
            recall,
            f1,
        }
    }
}

fn clipped_ngram_overlap(hyp: &[String], reference: &[String], n: usize) -> (u64, u64, u64) {
    let mut ref_counts: HashMap<&[String], u64> = HashMap::new();
    if reference.len() >= n {
        for w in reference.windows(n) {
            *ref_counts.entry(w).or_insert(0) += 1;
        }
    }
    let mut hyp_counts: HashMap<&[String], u64> = HashMap::new();
    if hyp.len() >= n {
        for w in hyp.windows(n) {
            *hyp_counts.entry(w).or_insert(0) += 1;
        }
    }
    let matches: u64 = hyp_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    let hyp_total = hyp.len().saturating_sub(n - 1) as u64;
    let ref_total = reference.len().saturating_sub(n - 1) as u64;
    (matches, hyp_total, ref_total)
}

/// Longest common subsequence length, O(|a|*|b|) dynamic program.
pub fn lcs_length(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            row[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                row[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// Single-pair ROUGE. Variants 1 and 2 use clipped n-gram overlap counts;
/// variant L uses the LCS length against both lengths.
pub fn rouge(
    hypothesis: &str,
    reference: &str,
    variant: RougeVariant,
    tokenizer: &dyn EvalTokenizer,
) -> Result<PrecisionRecallF1> {
    let hyp = tokenizer.tokenize(hypothesis);
    let reference = tokenizer.tokenize(reference);
    if hyp.is_empty() || reference.is_empty() {
        return Err(CoreError::InvalidArgument(
            "rouge requires non-empty tokenizations".to_string(),
        ));
    }
    let prf = match variant {
        RougeVariant::N1 | RougeVariant::N2 => {
            let n = if variant == RougeVariant::N1 { 1 } else { 2 };
            let (matches, hyp_total, ref_total) = clipped_ngram_overlap(&hyp, &reference, n);
            let precision = if hyp_total > 0 {
                matches as f64 / hyp_total as f64
            } else {
                0.0
            };
            let recall = if ref_total > 0 {
                matches as f64 / ref_total as f64
            } else {
                0.0
            };
            PrecisionRecallF1::from_pr(precision, recall)
        }
        RougeVariant::L => {
            let lcs = lcs_length(&hyp, &reference) as f64;
            PrecisionRecallF1::from_pr(lcs / hyp.len() as f64, lcs / reference.len() as f64)
        }
    };
    Ok(prf)
}
