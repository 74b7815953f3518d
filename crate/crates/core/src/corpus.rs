//! Monolingual corpus handling: language tags, sentence segmentation,
//! line-delimited file loading, and synthetic corpus generation.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng;

/// Special vocabulary entries that must never occur in corpus text.
pub const PAD_TOKEN: &str = "<pad>";
pub const EOS_TOKEN: &str = "<eos>";
pub const MASK_TOKEN: &str = "<mask>";
pub const UNK_TOKEN: &str = "<unk>";
pub const SEP_TOKEN: &str = "<s>";

/// A registered language with its reserved source/target tag tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageTag {
    code: String,
}

impl LanguageTag {
    /// Validates and wraps a language code ("en", "hi", synthetic "aa", ...).
    pub fn new(code: &str) -> Result<Self> {
        let ok = !code.is_empty()
            && code.len() <= 8
            && code
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit());
        if !ok {
            return Err(CoreError::InvalidLanguageCode(code.to_string()));
        }
        Ok(LanguageTag {
            code: code.to_string(),
        })
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    /// Source-side tag token, e.g. `<fen>`.
    pub fn from_token(&self) -> String {
        format!("<f{}>", self.code)
    }

    /// Target-side tag token, e.g. `<2en>`.
    pub fn to_token(&self) -> String {
        format!("<2{}>", self.code)
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code)
    }
}

impl TryFrom<String> for LanguageTag {
    type Error = CoreError;
    fn try_from(s: String) -> Result<Self> {
        LanguageTag::new(&s)
    }
}

impl From<LanguageTag> for String {
    fn from(t: LanguageTag) -> String {
        t.code
    }
}

/// Scans for reserved tokens: the special entries above or any `<fxx>`/`<2xx>`
/// language tag. Returns the first one found.
pub fn find_reserved_token(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b != b'<' {
            continue;
        }
        let rest = &text[i..];
        for special in [PAD_TOKEN, EOS_TOKEN, MASK_TOKEN, UNK_TOKEN, SEP_TOKEN] {
            if rest.starts_with(special) {
                return Some(special.to_string());
            }
        }
        let tail = &rest[1..];
        if let Some(stripped) = tail.strip_prefix(['f', '2']) {
            if let Some(end) = stripped.find('>') {
                let code = &stripped[..end];
                if (1..=8).contains(&code.len())
                    && code
                        .chars()
                        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
                {
                    return Some(rest[..end + 2 + 1].to_string());
                }
            }
        }
    }
    None
}

/// An ordered list of sentences in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceCorpus {
    lang: LanguageTag,
    sentences: Vec<String>,
    source_id: String,
}

impl SentenceCorpus {
    /// Builds a corpus from pre-segmented sentences; blank entries are rejected.
    pub fn new(lang: LanguageTag, sentences: Vec<String>, source_id: &str) -> Result<Self> {
        if sentences.is_empty() {
            return Err(CoreError::EmptyCorpus(source_id.to_string()));
        }
        for s in &sentences {
            if s.trim().is_empty() {
                return Err(CoreError::InvalidArgument(format!(
                    "blank sentence in corpus {source_id:?}"
                )));
            }
            if let Some(tok) = find_reserved_token(s) {
                return Err(CoreError::ReservedToken(tok));
            }
        }
        Ok(SentenceCorpus {
            lang,
            sentences,
            source_id: source_id.to_string(),
        })
    }

    pub fn lang(&self) -> &LanguageTag {
        &self.lang
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// The set of distinct whitespace-delimited tokens over all sentences.
    pub fn token_set(&self) -> std::collections::BTreeSet<String> {
        self.sentences
            .iter()
            .flat_map(|s| s.split_whitespace().map(str::to_string))
            .collect()
    }
}

/// Pluggable sentence segmenter; languages with non-terminal-punctuation
/// conventions can supply their own rule.
pub trait SentenceSegmenter: Send + Sync {
    fn segment(&self, text: &str) -> Vec<String>;
}

/// Default rule: split after terminal punctuation (`.`, `!`, `?`, the
/// Devanagari danda `।`, the ideographic stop `。`) followed by whitespace
/// or end of input. The punctuation stays with its sentence.
#[derive(Debug, Clone, Default)]
pub struct TerminalPunctSegmenter;

const TERMINALS: [char; 5] = ['.', '!', '?', '।', '。'];

impl SentenceSegmenter for TerminalPunctSegmenter {
    fn segment(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut current = String::new();
        let mut chars = text.chars().peekable();
        while let Some(c) = chars.next() {
            current.push(c);
            if TERMINALS.contains(&c) {
                // Only break if the terminal run has ended, so "..." or "?!"
                // stays inside one sentence.
                match chars.peek() {
                    None => {}
                    Some(&next) if next.is_whitespace() => {}
                    _ => continue,
                }
                let t = current.trim();
                if !t.is_empty() {
                    out.push(t.to_string());
                }
                current.clear();
            }
        }
        let t = current.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
        out
    }
}

/// Splits `text` into sentences with the default segmenter.
///
/// Joining the result with single spaces preserves the input's
/// non-whitespace content in order. Rejects text carrying reserved tokens.
pub fn segment_sentences(text: &str, _lang: &LanguageTag) -> Result<Vec<String>> {
    if let Some(tok) = find_reserved_token(text) {
        return Err(CoreError::ReservedToken(tok));
    }
    Ok(TerminalPunctSegmenter.segment(text))
}

/// Loads a UTF-8 line-delimited corpus file. Each line is a sentence or a
/// paragraph; paragraphs are segmented. Blank lines are dropped.
pub fn load_corpus(path: &Path, lang: &LanguageTag) -> Result<SentenceCorpus> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut sentences = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        sentences.extend(segment_sentences(line, lang)?);
    }
    if sentences.is_empty() {
        return Err(CoreError::EmptyCorpus(path.display().to_string()));
    }
    SentenceCorpus::new(lang.clone(), sentences, &path.display().to_string())
}

/// Generates a synthetic corpus whose tokens are disjoint per language
/// (each token is prefixed with the language code). Deterministic in `seed`.
pub fn generate_synthetic_corpus(
    lang: &LanguageTag,
    vocab_size: usize,
    n_sentences: usize,
    sentence_len_range: (usize, usize),
    seed: u64,
) -> Result<SentenceCorpus> {
    let (min_len, max_len) = sentence_len_range;
    if vocab_size < 10 {
        return Err(CoreError::InvalidArgument(format!(
            "vocab_size must be >= 10, got {vocab_size}"
        )));
    }
    if min_len < 1 || max_len < min_len {
        return Err(CoreError::InvalidArgument(format!(
            "invalid sentence length range [{min_len}, {max_len}]"
        )));
    }
    if n_sentences == 0 {
        return Err(CoreError::InvalidArgument(
            "n_sentences must be positive".to_string(),
        ));
    }
    let vocab: Vec<String> = (0..vocab_size)
        .map(|i| format!("{}{:03}", lang.code(), i))
        .collect();
    let mut rng = rng::stream(seed, "synthetic_corpus", hash_code(lang.code()), 0);
    let mut sentences = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let len = rng.random_range(min_len..=max_len);
        let sent: Vec<&str> = (0..len)
            .map(|_| vocab[rng.random_range(0..vocab.len())].as_str())
            .collect();
        sentences.push(sent.join(" "));
    }
    SentenceCorpus::new(
        lang.clone(),
        sentences,
        &format!("synthetic:{}:{}", lang.code(), seed),
    )
}

fn hash_code(code: &str) -> u64 {
    code.bytes().fold(0u64, |acc, b| acc * 131 + u64::from(b))
}

/// Synthetic token vocabulary for a language, matching
/// [`generate_synthetic_corpus`]'s construction.
pub fn synthetic_vocabulary(lang: &LanguageTag, vocab_size: usize) -> Vec<String> {
    (0..vocab_size)
        .map(|i| format!("{}{:03}", lang.code(), i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lang(code: &str) -> LanguageTag {
        LanguageTag::new(code).unwrap()
    }

    #[test]
    fn language_tag_renders_reserved_tokens() {
        let en = lang("en");
        assert_eq!(en.from_token(), "<fen>");
        assert_eq!(en.to_token(), "<2en>");
    }

    #[test]
    fn language_tag_rejects_bad_codes() {
        for bad in ["", "EN", "toolongcode", "e n", "é"] {
            assert!(LanguageTag::new(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn reserved_token_scanner_finds_tags_and_specials() {
        assert_eq!(find_reserved_token("a <fen> b"), Some("<fen>".to_string()));
        assert_eq!(find_reserved_token("a <2hi> b"), Some("<2hi>".to_string()));
        assert_eq!(
            find_reserved_token("x <mask> y"),
            Some("<mask>".to_string())
        );
        assert_eq!(find_reserved_token("a < b > c"), None);
        assert_eq!(find_reserved_token("2 < 3, f < g"), None);
    }

    #[test]
    fn segments_two_terminal_clauses() {
        let got = segment_sentences("A b. C d.", &lang("en")).unwrap();
        assert_eq!(got, vec!["A b.", "C d."]);
    }

    #[test]
    fn segments_empty_input_to_nothing() {
        let got = segment_sentences("", &lang("en")).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn segments_danda_and_ideographic_stop() {
        let got = segment_sentences("क ख। ग घ। 日本 です。 おはよう。", &lang("hi")).unwrap();
        assert_eq!(got.len(), 4);
        assert_eq!(got[0], "क ख।");
        assert_eq!(got[2], "日本 です。");
    }

    #[test]
    fn ellipsis_stays_in_one_sentence() {
        let got = segment_sentences("Wait... what? Ok.", &lang("en")).unwrap();
        assert_eq!(got, vec!["Wait...", "what?", "Ok."]);
    }

    #[test]
    fn segmentation_rejects_reserved_tokens() {
        let err = segment_sentences("hello <2hi> world.", &lang("en")).unwrap_err();
        assert!(matches!(err, CoreError::ReservedToken(_)));
    }

    #[test]
    fn thousand_sentence_document_round_trips() {
        // Built with known boundaries: sentence i is "s<i> tok." -> exactly
        // 1000 sentences back, order preserved.
        let doc: Vec<String> = (0..1000).map(|i| format!("s{i} tok.")).collect();
        let text = doc.join(" ");
        let got = segment_sentences(&text, &lang("en")).unwrap();
        assert_eq!(got.len(), 1000);
        assert_eq!(got, doc);
        // Non-whitespace round trip.
        let joined: String = got.join(" ");
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        assert_eq!(strip(&joined), strip(&text));
    }

    #[test]
    fn load_corpus_reads_three_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "one.\ntwo.\nthree.\n").unwrap();
        let c = load_corpus(&path, &lang("en")).unwrap();
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn load_corpus_drops_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "one.\n\ntwo.\n\nthree.\n").unwrap();
        let c = load_corpus(&path, &lang("en")).unwrap();
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn load_corpus_segments_paragraph_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "X. Y.\n").unwrap();
        let c = load_corpus(&path, &lang("en")).unwrap();
        assert_eq!(c.sentences(), ["X.", "Y."]);
    }

    #[test]
    fn load_corpus_missing_file_errors() {
        let err = load_corpus(Path::new("/nonexistent/f.txt"), &lang("en")).unwrap_err();
        assert!(matches!(err, CoreError::Io { .. }));
    }

    #[test]
    fn load_corpus_rejects_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "\n\n").unwrap();
        let err = load_corpus(&path, &lang("en")).unwrap_err();
        assert!(matches!(err, CoreError::EmptyCorpus(_)));
    }

    #[test]
    fn synthetic_corpus_is_deterministic() {
        let a = generate_synthetic_corpus(&lang("aa"), 50, 100, (4, 9), 7).unwrap();
        let b = generate_synthetic_corpus(&lang("aa"), 50, 100, (4, 9), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_corpora_have_disjoint_tokens() {
        let a = generate_synthetic_corpus(&lang("aa"), 50, 200, (4, 9), 7).unwrap();
        let b = generate_synthetic_corpus(&lang("bb"), 50, 200, (4, 9), 7).unwrap();
        assert!(a.token_set().is_disjoint(&b.token_set()));
    }

    #[test]
    fn synthetic_lengths_are_uniform_within_3_sigma() {
        let c = generate_synthetic_corpus(&lang("aa"), 50, 10_000, (4, 9), 11).unwrap();
        let mut counts = [0usize; 6];
        for s in c.sentences() {
            let len = s.split_whitespace().count();
            assert!((4..=9).contains(&len), "length {len} out of range");
            counts[len - 4] += 1;
        }
        let n = 10_000f64;
        let p = 1.0 / 6.0;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for (i, &cnt) in counts.iter().enumerate() {
            let dev = (cnt as f64 - n * p).abs();
            assert!(
                dev <= 3.0 * sigma,
                "length bin {} count {} deviates {:.1} > 3 sigma ({:.1})",
                i + 4,
                cnt,
                dev,
                3.0 * sigma
            );
        }
    }

    #[test]
    fn synthetic_corpus_validates_inputs() {
        assert!(generate_synthetic_corpus(&lang("aa"), 9, 10, (1, 2), 0).is_err());
        assert!(generate_synthetic_corpus(&lang("aa"), 10, 10, (0, 2), 0).is_err());
        assert!(generate_synthetic_corpus(&lang("aa"), 10, 10, (3, 2), 0).is_err());
        assert!(generate_synthetic_corpus(&lang("aa"), 10, 0, (1, 2), 0).is_err());
    }
}
