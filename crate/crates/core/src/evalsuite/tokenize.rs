//! Evaluation tokenizers. The default splits on whitespace and detaches
//! punctuation; language-specific tokenizers plug in through the trait.

/// Deterministic tokenizer boundary; implementations never emit empty
/// tokens and carry a provenance id recorded in every report.
pub trait EvalTokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;
    fn id(&self) -> &str;
}

const PUNCT_EXTRA: [char; 10] = ['।', '。', '、', '，', '．', '？', '！', '「', '」', '…'];

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || PUNCT_EXTRA.contains(&c)
}

/// Whitespace split with punctuation characters detached as their own
/// tokens; case is preserved.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespacePunctTokenizer;

impl EvalTokenizer for WhitespacePunctTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut word = String::new();
        for c in text.chars() {
            if c.is_whitespace() {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
            } else if is_punct(c) {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(c.to_string());
            } else {
                word.push(c);
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
        out
    }

    fn id(&self) -> &str {
        "whitespace-punct-v1"
    }
}
