//! Training-data builders: the rand-summary auxiliary task, span-mask /
//! sentence-permutation corruption, denoising baseline datasets, and the
//! JSONL record format shared by every pipeline stage.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{LanguageTag, SentenceCorpus, MASK_TOKEN};
use crate::error::{CoreError, Result};
use crate::rng;

/// One auxiliary-task pair: a passage of contiguous sentences and the
/// random subset of them serving as the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxExample {
    pub passage: Vec<String>,
    pub rand_summary: Vec<String>,
    pub lang: LanguageTag,
}

impl AuxExample {
    /// Checks the structural invariants: passage length within bounds,
    /// summary size `max(1, round(fraction * k))`, and every summary
    /// sentence present verbatim in passage order.
    pub fn check_invariants(&self, len_range: (usize, usize), fraction: f64) -> Result<()> {
        let k = self.passage.len();
        if k < len_range.0 || k > len_range.1 {
            return Err(CoreError::InvalidArgument(format!(
                "passage length {k} outside [{}, {}]",
                len_range.0, len_range.1
            )));
        }
        let m = rand_summary_size(k, fraction);
        if self.rand_summary.len() != m {
            return Err(CoreError::InvalidArgument(format!(
                "summary has {} sentences, expected {m}",
                self.rand_summary.len()
            )));
        }
        let mut cursor = 0usize;
        for s in &self.rand_summary {
            match self.passage[cursor..].iter().position(|p| p == s) {
                Some(offset) => cursor += offset + 1,
                None => {
                    return Err(CoreError::InvalidArgument(format!(
                        "summary sentence {s:?} not found in passage order"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Flattens into the JSONL record format: passage and summary joined by
    /// single spaces, both sides tagged with the same language.
    pub fn to_record(&self) -> PairRecord {
        PairRecord {
            src: self.passage.join(" "),
            tgt: self.rand_summary.join(" "),
            src_lang: self.lang.code().to_string(),
            tgt_lang: self.lang.code().to_string(),
        }
    }
}

/// Passage sampling and summary-selection bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuxConfig {
    /// Passage length bounds in sentences.
    pub len_range: (usize, usize),
    /// Fraction of passage sentences selected as the target.
    pub fraction: f64,
}

impl Default for AuxConfig {
    fn default() -> Self {
        AuxConfig {
            len_range: (5, 25),
            fraction: 0.2,
        }
    }
}

/// Noise applied by [`corrupt`]: span masking and sentence permutation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Target fraction of tokens to mask.
    pub mask_ratio: f64,
    /// Mean sampled span length; spans are `1 + Poisson(mean - 1)`.
    pub span_length_mean: f64,
    /// Shuffle sentence order before masking.
    pub permute_sentences: bool,
    /// Replacement token for each masked span.
    pub mask_token: String,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            mask_ratio: 0.35,
            span_length_mean: 3.5,
            permute_sentences: true,
            mask_token: MASK_TOKEN.to_string(),
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "mask_ratio must be in (0, 1), got {}",
                self.mask_ratio
            )));
        }
        if self.span_length_mean < 1.0 {
            return Err(CoreError::InvalidArgument(format!(
                "span_length_mean must be >= 1, got {}",
                self.span_length_mean
            )));
        }
        Ok(())
    }
}

/// `m = max(1, round(fraction * k))`, round half up.
pub fn rand_summary_size(k: usize, fraction: f64) -> usize {
    ((fraction * k as f64).round() as usize).max(1)
}

/// Draws `k` uniform in `len_range` and returns `k` contiguous sentences
/// starting at a uniform valid index.
pub fn sample_passage<R: Rng>(
    corpus: &SentenceCorpus,
    len_range: (usize, usize),
    rng: &mut R,
) -> Result<Vec<String>> {
    let (min_len, max_len) = len_range;
    if min_len < 1 || max_len < min_len {
        return Err(CoreError::InvalidArgument(format!(
            "invalid passage length range [{min_len}, {max_len}]"
        )));
    }
    if corpus.len() < max_len {
        return Err(CoreError::CorpusTooShort {
            have: corpus.len(),
            need: max_len,
        });
    }
    let k = rng.random_range(min_len..=max_len);
    let start = rng.random_range(0..=corpus.len() - k);
    Ok(corpus.sentences()[start..start + k].to_vec())
}

/// Selects `max(1, round(fraction * k))` distinct sentences uniformly
/// without replacement, returned in passage order.
pub fn select_rand_summary<R: Rng>(
    passage: &[String],
    fraction: f64,
    rng: &mut R,
) -> Result<Vec<String>> {
    if passage.is_empty() {
        return Err(CoreError::InvalidArgument(
            "passage must be non-empty".to_string(),
        ));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    let m = rand_summary_size(passage.len(), fraction);
    let mut indices = rand::seq::index::sample(rng, passage.len(), m).into_vec();
    indices.sort_unstable();
    Ok(indices.into_iter().map(|i| passage[i].clone()).collect())
}

/// Generates `n_per_language` auxiliary examples from each corpus,
/// interleaved round-robin across languages. Every example draws from its
/// own derived stream, so the output is a pure function of
/// `(corpora, n, cfg, seed)` and can be partitioned across workers.
pub fn generate_aux_dataset(
    corpora: &[SentenceCorpus],
    n_per_language: usize,
    cfg: &AuxConfig,
    seed: u64,
) -> Result<Vec<AuxExample>> {
    if corpora.is_empty() {
        return Err(CoreError::EmptyDataset("no corpora given".to_string()));
    }
    for corpus in corpora {
        if corpus.len() < cfg.len_range.1 {
            return Err(CoreError::CorpusTooShort {
                have: corpus.len(),
                need: cfg.len_range.1,
            });
        }
    }
    let mut out = Vec::with_capacity(n_per_language * corpora.len());
    for i in 0..n_per_language {
        for (li, corpus) in corpora.iter().enumerate() {
            let mut rng = rng::stream(seed, "aux_example", li as u64, i as u64);
            let passage = sample_passage(corpus, cfg.len_range, &mut rng)?;
            let rand_summary = select_rand_summary(&passage, cfg.fraction, &mut rng)?;
            out.push(AuxExample {
                passage,
                rand_summary,
                lang: corpus.lang().clone(),
            });
        }
    }
    Ok(out)
}

/// Applies the denoising corruption: optional uniform sentence-order
/// permutation, then left-to-right span masking until `round(mask_ratio * n)`
/// tokens are covered. Each contiguous masked run collapses to a single mask
/// token. Returns `(corrupted, original)` token sequences; `original` keeps
/// the unpermuted order.
pub fn corrupt<R: Rng>(
    sentences: &[String],
    cfg: &NoiseConfig,
    rng: &mut R,
) -> Result<(Vec<String>, Vec<String>)> {
    cfg.validate()?;
    let per_sentence: Vec<Vec<String>> = sentences
        .iter()
        .map(|s| s.split_whitespace().map(str::to_string).collect())
        .collect();
    let original: Vec<String> = per_sentence.iter().flatten().cloned().collect();
    if original.is_empty() {
        return Err(CoreError::InvalidArgument(
            "corrupt: input has no tokens".to_string(),
        ));
    }

    let mut order: Vec<usize> = (0..per_sentence.len()).collect();
    if cfg.permute_sentences {
        order.shuffle(rng);
    }
    let seq: Vec<&String> = order
        .iter()
        .flat_map(|&si| per_sentence[si].iter())
        .collect();

    let n = seq.len();
    let budget = (cfg.mask_ratio * n as f64).round() as usize;
    let mut masked = vec![false; n];
    let mut remaining = budget;
    let span_dist = Poisson::new((cfg.span_length_mean - 1.0).max(f64::MIN_POSITIVE))
        .map_err(|e| CoreError::InvalidArgument(format!("span distribution: {e}")))?;
    while remaining > 0 {
        let unmasked: Vec<usize> = (0..n).filter(|&i| !masked[i]).collect();
        let start = unmasked[rng.random_range(0..unmasked.len())];
        let span = 1 + span_dist.sample(rng) as usize;
        let span = span.min(remaining);
        let mut pos = start;
        let mut left = span;
        while left > 0 && pos < n {
            if !masked[pos] {
                masked[pos] = true;
                remaining -= 1;
                left -= 1;
            }
            pos += 1;
        }
    }

    let mut corrupted = Vec::with_capacity(n);
    let mut in_mask_run = false;
    for (i, tok) in seq.iter().enumerate() {
        if masked[i] {
            if !in_mask_run {
                corrupted.push(cfg.mask_token.clone());
                in_mask_run = true;
            }
        } else {
            corrupted.push((*tok).clone());
            in_mask_run = false;
        }
    }
    Ok((corrupted, original))
}

/// Builds masking-and-denoising records over monolingual passages, the
/// monolingual denoising baseline. Round-robin across languages like
/// [`generate_aux_dataset`].
pub fn build_madmo_dataset(
    corpora: &[SentenceCorpus],
    n_per_language: usize,
    passage_len_range: (usize, usize),
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Vec<PairRecord>> {
    if corpora.is_empty() {
        return Err(CoreError::EmptyDataset("no corpora given".to_string()));
    }
    let mut out = Vec::with_capacity(n_per_language * corpora.len());
    for i in 0..n_per_language {
        for (li, corpus) in corpora.iter().enumerate() {
            let mut rng = rng::stream(seed, "madmo_example", li as u64, i as u64);
            let passage = sample_passage(corpus, passage_len_range, &mut rng)?;
            let (corrupted, original) = corrupt(&passage, noise, &mut rng)?;
            out.push(PairRecord {
                src: corrupted.join(" "),
                tgt: original.join(" "),
                src_lang: corpus.lang().code().to_string(),
                tgt_lang: corpus.lang().code().to_string(),
            });
        }
    }
    Ok(out)
}

/// Concatenates each aligned sentence pair (side `a` first, then `b`) and
/// corrupts the result. Returns `(corrupted, original)` token lists per
/// instance.
pub fn build_madpd_pairs<R: Rng>(
    side_a: &[String],
    side_b: &[String],
    cfg: &NoiseConfig,
    rng: &mut R,
) -> Result<Vec<(Vec<String>, Vec<String>)>> {
    if side_a.len() != side_b.len() {
        return Err(CoreError::Misaligned(format!(
            "parallel sides have {} and {} sentences",
            side_a.len(),
            side_b.len()
        )));
    }
    if side_a.is_empty() {
        return Err(CoreError::EmptyDataset("no parallel pairs".to_string()));
    }
    let mut out = Vec::with_capacity(side_a.len());
    for (a, b) in side_a.iter().zip(side_b) {
        let concatenated = format!("{a} {b}");
        out.push(corrupt(std::slice::from_ref(&concatenated), cfg, rng)?);
    }
    Ok(out)
}

/// Synthetic supervised task for the desk testbed: given a passage of
/// contiguous sentences, produce its first sentence.
pub fn first_sentence_task(
    corpus: &SentenceCorpus,
    n_examples: usize,
    passage_len_range: (usize, usize),
    seed: u64,
) -> Result<Vec<PairRecord>> {
    let mut out = Vec::with_capacity(n_examples);
    for i in 0..n_examples {
        let mut rng = rng::stream(seed, "first_sentence", 0, i as u64);
        let passage = sample_passage(corpus, passage_len_range, &mut rng)?;
        out.push(PairRecord {
            src: passage.join(" "),
            tgt: passage[0].clone(),
            src_lang: corpus.lang().code().to_string(),
            tgt_lang: corpus.lang().code().to_string(),
        });
    }
    Ok(out)
}

/// One line of the line-delimited dataset format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub src: String,
    pub tgt: String,
    pub src_lang: String,
    pub tgt_lang: String,
}

/// Writes records as one JSON object per line.
pub fn write_jsonl(path: &Path, records: &[PairRecord]) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")
            .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    }
    w.flush()
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    Ok(())
}

/// Reads a JSONL record file written by [`write_jsonl`].
pub fn read_jsonl(path: &Path) -> Result<Vec<PairRecord>> {
    let file =
        std::fs::File::open(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| CoreError::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_synthetic_corpus;
    use std::collections::{BTreeMap, BTreeSet};

    fn lang(code: &str) -> LanguageTag {
        LanguageTag::new(code).unwrap()
    }

    fn corpus(code: &str, n: usize) -> SentenceCorpus {
        generate_synthetic_corpus(&lang(code), 40, n, (3, 6), 13).unwrap()
    }

    fn numbered_corpus(n: usize) -> SentenceCorpus {
        let sents: Vec<String> = (0..n).map(|i| format!("sent {i}")).collect();
        SentenceCorpus::new(lang("aa"), sents, "numbered").unwrap()
    }

    #[test]
    fn passage_of_whole_corpus_when_range_is_exact() {
        let c = numbered_corpus(25);
        let mut r = rng::stream(1, "t", 0, 0);
        let p = sample_passage(&c, (25, 25), &mut r).unwrap();
        assert_eq!(p, c.sentences());
    }

    #[test]
    fn passages_are_contiguous_and_cover_all_lengths() {
        let c = numbered_corpus(200);
        let mut seen_lengths = BTreeSet::new();
        for i in 0..10_000u64 {
            let mut r = rng::stream(3, "t", 0, i);
            let p = sample_passage(&c, (5, 25), &mut r).unwrap();
            seen_lengths.insert(p.len());
            // Contiguity: each sentence is "sent <j>" with consecutive j.
            let first: usize = p[0].split_whitespace().nth(1).unwrap().parse().unwrap();
            for (off, s) in p.iter().enumerate() {
                assert_eq!(*s, format!("sent {}", first + off));
            }
        }
        assert_eq!(
            seen_lengths,
            (5..=25).collect::<BTreeSet<_>>(),
            "every k in 5..=25 should be observed"
        );
    }

    #[test]
    fn passage_sampling_is_deterministic() {
        let c = numbered_corpus(60);
        let mut r1 = rng::stream(9, "t", 0, 0);
        let mut r2 = rng::stream(9, "t", 0, 0);
        assert_eq!(
            sample_passage(&c, (5, 25), &mut r1).unwrap(),
            sample_passage(&c, (5, 25), &mut r2).unwrap()
        );
    }

    #[test]
    fn passage_rejects_short_corpus() {
        let c = numbered_corpus(10);
        let mut r = rng::stream(0, "t", 0, 0);
        let err = sample_passage(&c, (5, 25), &mut r).unwrap_err();
        assert!(matches!(err, CoreError::CorpusTooShort { .. }));
    }

    #[test]
    fn summary_size_matches_published_bounds() {
        // k=5 -> 1 and k=25 -> 5 reproduce the stated 1-5 output range.
        assert_eq!(rand_summary_size(5, 0.2), 1);
        assert_eq!(rand_summary_size(25, 0.2), 5);
        assert_eq!(rand_summary_size(7, 0.2), 1);
        assert_eq!(rand_summary_size(13, 0.2), 3);
    }

    #[test]
    fn summary_selection_is_uniform_for_k7() {
        // k=7, fraction 0.2 -> m=1 always; index frequencies within 3 sigma
        // of uniform 1/7.
        let passage: Vec<String> = (0..7).map(|i| format!("s{i}")).collect();
        let mut counts = BTreeMap::new();
        let draws = 10_000u64;
        for i in 0..draws {
            let mut r = rng::stream(5, "t", 0, i);
            let sel = select_rand_summary(&passage, 0.2, &mut r).unwrap();
            assert_eq!(sel.len(), 1);
            *counts.entry(sel[0].clone()).or_insert(0usize) += 1;
        }
        let n = draws as f64;
        let p = 1.0 / 7.0;
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert_eq!(counts.len(), 7, "every index should be selected");
        for (_, &c) in &counts {
            assert!(((c as f64) - n * p).abs() <= 3.0 * sigma);
        }
    }

    #[test]
    fn summary_preserves_passage_order() {
        let passage: Vec<String> = (0..25).map(|i| format!("s{i:02}")).collect();
        for i in 0..200u64 {
            let mut r = rng::stream(8, "t", 0, i);
            let sel = select_rand_summary(&passage, 0.2, &mut r).unwrap();
            let mut sorted = sel.clone();
            sorted.sort();
            assert_eq!(sel, sorted, "s%02d names sort in passage order");
        }
    }

    #[test]
    fn summary_rejects_bad_fraction() {
        let passage = vec!["a".to_string()];
        let mut r = rng::stream(0, "t", 0, 0);
        assert!(select_rand_summary(&passage, 0.0, &mut r).is_err());
        let mut r = rng::stream(0, "t", 0, 0);
        assert!(select_rand_summary(&passage, 1.5, &mut r).is_err());
    }

    #[test]
    fn aux_dataset_counts_and_interleaving() {
        let ca = corpus("aa", 80);
        let cb = corpus("bb", 80);
        let cfg = AuxConfig {
            len_range: (5, 10),
            fraction: 0.2,
        };
        let ds = generate_aux_dataset(&[ca, cb], 500, &cfg, 21).unwrap();
        assert_eq!(ds.len(), 1000);
        let mut per_lang = BTreeMap::new();
        for ex in &ds {
            *per_lang.entry(ex.lang.code().to_string()).or_insert(0) += 1;
        }
        assert_eq!(per_lang["aa"], 500);
        assert_eq!(per_lang["bb"], 500);
        // Round-robin interleaving.
        assert_eq!(ds[0].lang.code(), "aa");
        assert_eq!(ds[1].lang.code(), "bb");
        assert_eq!(ds[2].lang.code(), "aa");
    }

    #[test]
    fn aux_dataset_single_example_obeys_invariants() {
        let c = corpus("aa", 40);
        let cfg = AuxConfig::default();
        let ds = generate_aux_dataset(std::slice::from_ref(&c), 1, &cfg, 3).unwrap();
        assert_eq!(ds.len(), 1);
        ds[0].check_invariants(cfg.len_range, cfg.fraction).unwrap();
    }

    #[test]
    fn aux_dataset_is_pure_in_seed() {
        let c = corpus("aa", 60);
        let cfg = AuxConfig {
            len_range: (5, 12),
            fraction: 0.2,
        };
        let a = generate_aux_dataset(std::slice::from_ref(&c), 50, &cfg, 17).unwrap();
        let b = generate_aux_dataset(std::slice::from_ref(&c), 50, &cfg, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_identity_in_zero_mask_limit() {
        let sents = vec!["a b c".to_string(), "d e".to_string()];
        let cfg = NoiseConfig {
            mask_ratio: 1e-12,
            permute_sentences: false,
            ..NoiseConfig::default()
        };
        let mut r = rng::stream(0, "t", 0, 0);
        let (corrupted, original) = corrupt(&sents, &cfg, &mut r).unwrap();
        assert_eq!(corrupted, original);
        assert_eq!(original, vec!["a", "b", "c", "d", "e"]);
    }

    #[test]
    fn corrupt_masks_requested_fraction() {
        let tokens: Vec<String> = (0..10_000).map(|i| format!("t{i}")).collect();
        let sents = vec![tokens.join(" ")];
        let cfg = NoiseConfig {
            permute_sentences: false,
            ..NoiseConfig::default()
        };
        let mut r = rng::stream(4, "t", 0, 0);
        let (corrupted, original) = corrupt(&sents, &cfg, &mut r).unwrap();
        // Count masked positions: original tokens missing from the corrupted
        // stream. Unmasked tokens keep identity and order, so walk both.
        let kept: usize = corrupted.iter().filter(|t| **t != cfg.mask_token).count();
        let masked_fraction = 1.0 - kept as f64 / original.len() as f64;
        assert!(
            (masked_fraction - 0.35).abs() <= 0.02,
            "masked fraction {masked_fraction}"
        );
    }

    #[test]
    fn corrupt_observes_all_sentence_orderings() {
        let sents = vec!["a0".to_string(), "b0".to_string(), "c0".to_string()];
        let cfg = NoiseConfig {
            mask_ratio: 1e-12,
            permute_sentences: true,
            ..NoiseConfig::default()
        };
        let mut seen = BTreeSet::new();
        for i in 0..10_000u64 {
            let mut r = rng::stream(6, "t", 0, i);
            let (corrupted, _) = corrupt(&sents, &cfg, &mut r).unwrap();
            seen.insert(corrupted.join(" "));
        }
        assert_eq!(seen.len(), 6, "all 3! orderings should appear: {seen:?}");
    }

    #[test]
    fn corrupt_never_alters_unmasked_tokens() {
        let sents = vec!["a b c d e f g h i j".to_string()];
        let cfg = NoiseConfig {
            mask_ratio: 0.3,
            permute_sentences: false,
            ..NoiseConfig::default()
        };
        for i in 0..100u64 {
            let mut r = rng::stream(12, "t", 0, i);
            let (corrupted, original) = corrupt(&sents, &cfg, &mut r).unwrap();
            // Non-mask tokens must appear in original order as a subsequence.
            let mut it = original.iter();
            for tok in corrupted.iter().filter(|t| **t != cfg.mask_token) {
                assert!(it.any(|o| o == tok), "token {tok} broke order");
            }
        }
    }

    #[test]
    fn corrupt_rejects_empty_input() {
        let cfg = NoiseConfig::default();
        let mut r = rng::stream(0, "t", 0, 0);
        assert!(corrupt(&[], &cfg, &mut r).is_err());
        assert!(corrupt(&["   ".to_string()], &cfg, &mut r).is_err());
    }

    #[test]
    fn madpd_concatenates_in_pair_order() {
        let a = vec!["x".to_string()];
        let b = vec!["y".to_string()];
        let cfg = NoiseConfig {
            mask_ratio: 1e-12,
            permute_sentences: false,
            ..NoiseConfig::default()
        };
        let mut r = rng::stream(0, "t", 0, 0);
        let pairs = build_madpd_pairs(&a, &b, &cfg, &mut r).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].1, vec!["x", "y"]);
        assert_eq!(pairs[0].0, vec!["x", "y"]);
    }

    #[test]
    fn madpd_cardinality_and_multiset_containment() {
        let a: Vec<String> = (0..40).map(|i| format!("a{i} a{} a{}", i + 1, i + 2)).collect();
        let b: Vec<String> = (0..40).map(|i| format!("b{i} b{}", i + 1)).collect();
        let cfg = NoiseConfig {
            permute_sentences: false,
            ..NoiseConfig::default()
        };
        let mut r = rng::stream(2, "t", 0, 0);
        let pairs = build_madpd_pairs(&a, &b, &cfg, &mut r).unwrap();
        assert_eq!(pairs.len(), 40);
        for (corrupted, original) in &pairs {
            let mut pool: BTreeMap<&String, isize> = BTreeMap::new();
            for t in original {
                *pool.entry(t).or_insert(0) += 1;
            }
            for t in corrupted.iter().filter(|t| **t != cfg.mask_token) {
                let c = pool.entry(t).or_insert(0);
                *c -= 1;
                assert!(*c >= 0, "corrupted token {t} not in original multiset");
            }
        }
    }

    #[test]
    fn madpd_rejects_misaligned_sides() {
        let a = vec!["x".to_string()];
        let cfg = NoiseConfig::default();
        let mut r = rng::stream(0, "t", 0, 0);
        assert!(matches!(
            build_madpd_pairs(&a, &[], &cfg, &mut r).unwrap_err(),
            CoreError::Misaligned(_)
        ));
    }

    #[test]
    fn madmo_records_pair_corrupted_with_original() {
        let c = corpus("aa", 50);
        let noise = NoiseConfig {
            permute_sentences: false,
            ..NoiseConfig::default()
        };
        let ds = build_madmo_dataset(std::slice::from_ref(&c), 10, (3, 6), &noise, 9).unwrap();
        assert_eq!(ds.len(), 10);
        for rec in &ds {
            assert!(rec.src.contains(MASK_TOKEN) || rec.src == rec.tgt);
            assert_eq!(rec.src_lang, "aa");
            assert_eq!(rec.tgt_lang, "aa");
        }
    }

    #[test]
    fn first_sentence_task_targets_first_sentence() {
        let c = numbered_corpus(30);
        let ds = first_sentence_task(&c, 20, (3, 5), 7).unwrap();
        assert_eq!(ds.len(), 20);
        for rec in &ds {
            assert!(rec.src.starts_with(&rec.tgt));
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let recs = vec![
            PairRecord {
                src: "a b".to_string(),
                tgt: "a".to_string(),
                src_lang: "aa".to_string(),
                tgt_lang: "aa".to_string(),
            },
            PairRecord {
                src: "c d".to_string(),
                tgt: "d".to_string(),
                src_lang: "bb".to_string(),
                tgt_lang: "bb".to_string(),
            },
        ];
        write_jsonl(&path, &recs).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), recs);
    }
}
