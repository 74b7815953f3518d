//! Word-level vocabulary with reserved control tokens and per-language tags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{LanguageTag, SentenceCorpus, EOS_TOKEN, MASK_TOKEN, PAD_TOKEN, SEP_TOKEN, UNK_TOKEN};
use crate::error::{CoreError, Result};

/// Fixed ids of the control tokens; `Vocabulary::build` always lays them
/// out in this order.
pub const PAD_ID: u32 = 0;
pub const EOS_ID: u32 = 1;
pub const MASK_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const SEP_ID: u32 = 4;
const N_SPECIALS: usize = 5;

/// Token-id mapping. Ids 0..n_reserved are control tokens (pad, eos, mask,
/// unk, separator, then one `<fxx>`/`<2xx>` pair per registered language);
/// content tokens follow, ordered by descending corpus frequency with
/// lexicographic tie-break so construction is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, u32>,
    languages: Vec<LanguageTag>,
    n_reserved: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from corpora tokens (whitespace-delimited) plus
    /// reserved entries. `max_content` caps the content-token count; 0 means
    /// unlimited.
    pub fn build(
        corpora: &[SentenceCorpus],
        languages: &[LanguageTag],
        max_content: usize,
    ) -> Result<Self> {
        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        for corpus in corpora {
            for sent in corpus.sentences() {
                for tok in sent.split_whitespace() {
                    *freq.entry(tok).or_insert(0) += 1;
                }
            }
        }
        let mut content: Vec<(&str, u64)> = freq.into_iter().collect();
        content.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if max_content > 0 {
            content.truncate(max_content);
        }

        let mut tokens: Vec<String> = vec![
            PAD_TOKEN.to_string(),
            EOS_TOKEN.to_string(),
            MASK_TOKEN.to_string(),
            UNK_TOKEN.to_string(),
            SEP_TOKEN.to_string(),
        ];
        for lang in languages {
            tokens.push(lang.from_token());
            tokens.push(lang.to_token());
        }
        let n_reserved = tokens.len();
        tokens.extend(content.into_iter().map(|(t, _)| t.to_string()));

        let mut v = Vocabulary {
            tokens,
            index: BTreeMap::new(),
            languages: languages.to_vec(),
            n_reserved,
        };
        v.rebuild_index();
        Ok(v)
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    /// Restores the lookup index after deserialization.
    pub fn restore(mut self) -> Self {
        self.rebuild_index();
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_reserved(&self) -> usize {
        self.n_reserved
    }

    pub fn languages(&self) -> &[LanguageTag] {
        &self.languages
    }

    pub fn pad_id(&self) -> u32 {
        PAD_ID
    }

    pub fn eos_id(&self) -> u32 {
        EOS_ID
    }

    pub fn mask_id(&self) -> u32 {
        MASK_ID
    }

    pub fn unk_id(&self) -> u32 {
        UNK_ID
    }

    /// True for `<fxx>` / `<2xx>` language-tag ids.
    pub fn is_tag_id(&self, id: u32) -> bool {
        (N_SPECIALS..self.n_reserved).contains(&(id as usize))
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token_of(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Source tag id for a registered language.
    pub fn from_tag_id(&self, lang: &LanguageTag) -> Result<u32> {
        self.id_of(&lang.from_token())
            .ok_or_else(|| CoreError::UnknownLanguage(lang.code().to_string()))
    }

    /// Target tag id for a registered language.
    pub fn to_tag_id(&self, lang: &LanguageTag) -> Result<u32> {
        self.id_of(&lang.to_token())
            .ok_or_else(|| CoreError::UnknownLanguage(lang.code().to_string()))
    }

    /// True for control/tag ids that must never appear in payload text.
    pub fn is_reserved(&self, id: u32) -> bool {
        (id as usize) < self.n_reserved
    }

    /// Encodes whitespace-delimited text; unknown tokens map to `<unk>`.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.split_whitespace()
            .map(|t| self.id_of(t).unwrap_or_else(|| self.unk_id()))
            .collect()
    }

    /// Decodes ids to text, skipping control and tag tokens.
    pub fn decode(&self, ids: &[u32]) -> String {
        let words: Vec<&str> = ids
            .iter()
            .filter(|&&id| !self.is_reserved(id))
            .filter_map(|&id| self.token_of(id))
            .collect();
        words.join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_synthetic_corpus;

    fn lang(code: &str) -> LanguageTag {
        LanguageTag::new(code).unwrap()
    }

    fn small_vocab() -> Vocabulary {
        let ca = generate_synthetic_corpus(&lang("aa"), 20, 50, (3, 5), 1).unwrap();
        let cb = generate_synthetic_corpus(&lang("bb"), 20, 50, (3, 5), 2).unwrap();
        Vocabulary::build(&[ca, cb], &[lang("aa"), lang("bb")], 0).unwrap()
    }

    #[test]
    fn reserved_tokens_come_first() {
        let v = small_vocab();
        assert_eq!(v.token_of(v.pad_id()), Some(PAD_TOKEN));
        assert_eq!(v.token_of(v.eos_id()), Some(EOS_TOKEN));
        assert_eq!(v.token_of(v.mask_id()), Some(MASK_TOKEN));
        assert_eq!(v.token_of(v.unk_id()), Some(UNK_TOKEN));
        assert_eq!(v.n_reserved(), 5 + 2 * 2);
        assert!(v.is_reserved(v.from_tag_id(&lang("aa")).unwrap()));
        assert!(v.is_reserved(v.to_tag_id(&lang("bb")).unwrap()));
    }

    #[test]
    fn encode_decode_round_trip_for_known_tokens() {
        let v = small_vocab();
        let text = "aa001 aa002 aa003";
        let ids = v.encode(text);
        assert_eq!(v.decode(&ids), text);
    }

    #[test]
    fn unknown_tokens_become_unk() {
        let v = small_vocab();
        let ids = v.encode("zz999");
        assert_eq!(ids, vec![v.unk_id()]);
    }

    #[test]
    fn unknown_language_tag_errors() {
        let v = small_vocab();
        assert!(matches!(
            v.to_tag_id(&lang("zz")).unwrap_err(),
            CoreError::UnknownLanguage(_)
        ));
    }

    #[test]
    fn construction_is_deterministic() {
        let a = small_vocab();
        let b = small_vocab();
        assert_eq!(a, b);
    }
}
