//! WordPiece vocabularies: greedy longest-match-first encoding and a
//! likelihood-scored merge trainer.
//!
//! Non-initial pieces of a word carry a continuation prefix (`##` by
//! default). A vocabulary file holds one token per line; the line number is
//! the token id.

mod trainer;

pub use trainer::{min_vocab_size, train, TrainerConfig};

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::hashing::sha256_hex;

pub const DEFAULT_CONTINUATION_PREFIX: &str = "##";
pub const UNK: &str = "[UNK]";
/// Words longer than this many code points encode to a single `[UNK]`.
pub const DEFAULT_MAX_WORD_CHARS: usize = 100;

/// How text is cut into words before WordPiece segmentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pretokenizer {
    /// Split on Unicode whitespace only. Used for every compression measure.
    #[default]
    Whitespace,
    /// Whitespace split followed by isolating every punctuation character, as
    /// BERT-style tokenizers do.
    WhitespacePunctuation,
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c as u32, 0x00A1..=0x00BF | 0x2010..=0x2027 | 0x2030..=0x205E | 0x3001..=0x3003 | 0x3008..=0x3011 | 0xFF01..=0xFF0F)
}

impl Pretokenizer {
    /// Calls `f` on every word of `text`, in order.
    pub fn for_each_word<'a>(self, text: &'a str, mut f: impl FnMut(&'a str)) {
        for word in text.split_whitespace() {
            match self {
                Pretokenizer::Whitespace => f(word),
                Pretokenizer::WhitespacePunctuation => {
                    let mut start = 0;
                    for (i, c) in word.char_indices() {
                        if is_punctuation(c) {
                            if start < i {
                                f(&word[start..i]);
                            }
                            f(&word[i..i + c.len_utf8()]);
                            start = i + c.len_utf8();
                        }
                    }
                    if start < word.len() {
                        f(&word[start..]);
                    }
                }
            }
        }
    }

    pub fn words(self, text: &str) -> Vec<&str> {
        let mut out = Vec::new();
        self.for_each_word(text, |w| out.push(w));
        out
    }
}

/// An ordered WordPiece vocabulary. Token ids are positions in `tokens`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    continuation_prefix: String,
    specials: Vec<String>,
    unk_id: u32,
    max_word_chars: usize,
    max_token_chars: usize,
    pretokenizer: Pretokenizer,
}

/// Encoded form of one text unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub source_unit: String,
    pub tokens: Vec<u32>,
}

impl Vocabulary {
    /// Builds a vocabulary with `[UNK]` as the only special token.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        Self::with_options(
            tokens,
            DEFAULT_CONTINUATION_PREFIX,
            vec![UNK.to_string()],
            DEFAULT_MAX_WORD_CHARS,
        )
    }

    pub fn with_options(
        tokens: Vec<String>,
        continuation_prefix: &str,
        specials: Vec<String>,
        max_word_chars: usize,
    ) -> Result<Self> {
        if continuation_prefix.is_empty() {
            return Err(Error::InvalidVocabulary("empty continuation prefix".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.contains(['\n', '\r']) {
                return Err(Error::InvalidVocabulary(format!("token {i} is empty or spans lines")));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidVocabulary(format!("duplicate token {t:?}")));
            }
        }
        for s in &specials {
            if !index.contains_key(s) {
                return Err(Error::InvalidVocabulary(format!("special token {s:?} missing")));
            }
        }
        let unk_id = *specials
            .iter()
            .find(|s| s.as_str() == UNK)
            .and_then(|s| index.get(s))
            .ok_or_else(|| Error::InvalidVocabulary(format!("{UNK} missing")))?;
        let max_token_chars = tokens.iter().map(|t| t.chars().count()).max().unwrap_or(0);
        Ok(Vocabulary {
            tokens,
            index,
            continuation_prefix: continuation_prefix.to_string(),
            specials,
            unk_id,
            max_word_chars,
            max_token_chars,
            pretokenizer: Pretokenizer::Whitespace,
        })
    }

    /// The smallest valid vocabulary for an alphabet: `[UNK]`, every code
    /// point bare, then every code point with the continuation prefix.
    pub fn floor(alphabet: &BTreeSet<char>, continuation_prefix: &str, max_word_chars: usize) -> Result<Self> {
        let mut tokens = Vec::with_capacity(1 + 2 * alphabet.len());
        tokens.push(UNK.to_string());
        tokens.extend(alphabet.iter().map(|c| c.to_string()));
        tokens.extend(alphabet.iter().map(|c| format!("{continuation_prefix}{c}")));
        Self::with_options(tokens, continuation_prefix, vec![UNK.to_string()], max_word_chars)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn specials(&self) -> &[String] {
        &self.specials
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    pub fn max_word_chars(&self) -> usize {
        self.max_word_chars
    }

    pub fn pretokenizer(&self) -> Pretokenizer {
        self.pretokenizer
    }

    pub fn with_pretokenizer(mut self, pretokenizer: Pretokenizer) -> Self {
        self.pretokenizer = pretokenizer;
        self
    }

    pub fn is_continuation(&self, id: u32) -> bool {
        id != self.unk_id
            && self
                .token(id)
                .is_some_and(|t| t.starts_with(&self.continuation_prefix))
    }

    /// The first `n` tokens. Trained vocabularies are nested: truncating the
    /// result of a longer training gives the result of a shorter one.
    pub fn truncated(&self, n: usize) -> Result<Vocabulary> {
        let n = n.min(self.len());
        let v = Self::with_options(
            self.tokens[..n].to_vec(),
            &self.continuation_prefix,
            self.specials.clone(),
            self.max_word_chars,
        )?;
        Ok(v.with_pretokenizer(self.pretokenizer))
    }

    /// Carries the vocabulary along the fake-language bijection: word-initial
    /// tokens gain `marker`, continuation pieces and specials are unchanged,
    /// ids are preserved. Text transformed by `fake_text(_, marker)` then
    /// encodes to exactly the ids the original text encodes to.
    pub fn transported(&self, marker: &str) -> Result<Vocabulary> {
        let tokens = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if self.specials.contains(t) || self.is_continuation(i as u32) {
                    t.clone()
                } else {
                    format!("{marker}{t}")
                }
            })
            .collect();
        let v = Self::with_options(
            tokens,
            &self.continuation_prefix,
            self.specials.clone(),
            self.max_word_chars + marker.chars().count(),
        )?;
        Ok(v.with_pretokenizer(self.pretokenizer))
    }

    /// Appends the greedy longest-match-first segmentation of a single word.
    pub fn encode_word(&self, word: &str, out: &mut Vec<u32>) {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let n_chars = bounds.len() - 1;
        if n_chars == 0 {
            return;
        }
        if n_chars > self.max_word_chars {
            out.push(self.unk_id);
            return;
        }
        let mark = out.len();
        let mut buf = String::with_capacity(word.len() + self.continuation_prefix.len());
        let mut start = 0;
        while start < n_chars {
            let mut found = None;
            let mut end = n_chars.min(start + self.max_token_chars);
            while end > start {
                buf.clear();
                if start > 0 {
                    buf.push_str(&self.continuation_prefix);
                }
                buf.push_str(&word[bounds[start]..bounds[end]]);
                if let Some(&id) = self.index.get(buf.as_str()) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => {
                    out.push(id);
                    start = end;
                }
                None => {
                    out.truncate(mark);
                    out.push(self.unk_id);
                    return;
                }
            }
        }
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        self.pretokenizer.for_each_word(text, |w| self.encode_word(w, &mut out));
        out
    }

    pub fn encode_unit(&self, unit: &crate::corpus::Unit) -> TokenSequence {
        TokenSequence {
            source_unit: unit.id.clone(),
            tokens: self.encode(&unit.text),
        }
    }

    /// Token strings for `text`.
    pub fn tokenize(&self, text: &str) -> Vec<&str> {
        self.encode(text)
            .into_iter()
            .map(|id| self.tokens[id as usize].as_str())
            .collect()
    }

    /// Regroups pieces into words: each non-continuation token starts a new
    /// word, continuation tokens are appended with their prefix stripped.
    pub fn decode_words(&self, ids: &[u32]) -> Vec<String> {
        let mut words: Vec<String> = Vec::new();
        for &id in ids {
            let t = &self.tokens[id as usize];
            match (self.is_continuation(id), words.last_mut()) {
                (true, Some(w)) => w.push_str(&t[self.continuation_prefix.len()..]),
                _ => words.push(t.clone()),
            }
        }
        words
    }

    /// Total number of tokens over all units of `corpus`.
    pub fn token_count(&self, corpus: &Corpus) -> u64 {
        self.token_count_words(&WordCounts::new(corpus, self.pretokenizer))
    }

    pub fn token_count_words(&self, words: &WordCounts) -> u64 {
        let mut buf = Vec::new();
        words
            .iter()
            .map(|(w, count)| {
                buf.clear();
                self.encode_word(w, &mut buf);
                buf.len() as u64 * count
            })
            .sum()
    }

    /// File contents: one token per line, each line terminated by `\n`.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn parse(contents: &str) -> Result<Self> {
        let body = contents.strip_suffix('\n').unwrap_or(contents);
        if body.is_empty() {
            return Err(Error::InvalidVocabulary("empty vocabulary file".into()));
        }
        Self::from_tokens(body.split('\n').map(str::to_string).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let contents = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&contents)
    }

    /// SHA-256 of the file representation.
    pub fn content_hash(&self) -> String {
        sha256_hex(self.to_file_string().as_bytes())
    }
}

/// Word frequencies of a corpus in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordCounts {
    words: Vec<(String, u64)>,
}

impl WordCounts {
    pub fn new(corpus: &Corpus, pretokenizer: Pretokenizer) -> Self {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut words: Vec<(String, u64)> = Vec::new();
        for text in corpus.texts() {
            pretokenizer.for_each_word(text, |w| match index.get(w) {
                Some(&i) => words[i].1 += 1,
                None => {
                    index.insert(w, words.len());
                    words.push((w.to_string(), 1));
                }
            });
        }
        WordCounts { words }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.words.iter().map(|(w, c)| (w.as_str(), *c))
    }

    pub fn distinct(&self) -> usize {
        self.words.len()
    }

    pub fn total(&self) -> u64 {
        self.words.iter().map(|(_, c)| c).sum()
    }
}

/// Every non-whitespace code point in the corpus.
pub fn alphabet(corpus: &Corpus) -> BTreeSet<char> {
    corpus
        .texts()
        .flat_map(str::chars)
        .filter(|c| !c.is_whitespace())
        .collect()
}

/// Total token count of `corpus` under `vocab`.
pub fn token_count(vocab: &Vocabulary, corpus: &Corpus) -> u64 {
    vocab.token_count(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{fake_text, Unit};
    use proptest::prelude::*;

    fn fixture() -> Vocabulary {
        Vocabulary::from_tokens(
            ["[UNK]", "Ex", "##ception", "##al", "weather", "."]
                .map(String::from)
                .to_vec(),
        )
        .unwrap()
    }

    // Longest-match-first is not monotone under nested vocabularies: taking
    // the new bare token "ba" leaves "bac" without a continuation piece.
    #[test]
    fn greedy_matching_can_grow_token_count() {
        let c = Corpus::from_texts("x", ["ba bc babac"]).unwrap();
        let full = super::trainer::train(&c, 100, &super::trainer::TrainerConfig::default()).unwrap();
        let before = full.truncated(10).unwrap();
        let after = full.truncated(11).unwrap();
        assert_eq!(after.tokens()[10], "ba");
        assert_eq!(before.tokenize("babac"), ["b", "##abac"]);
        assert_eq!(after.tokenize("babac"), ["ba", "##b", "##a", "##c"]);
        assert_eq!((before.token_count(&c), after.token_count(&c)), (6, 7));
    }

    #[test]
    fn exceptional_weather_with_punctuation_split() {
        let v = fixture().with_pretokenizer(Pretokenizer::WhitespacePunctuation);
        assert_eq!(
            v.tokenize("Exceptional weather."),
            ["Ex", "##ception", "##al", "weather", "."]
        );
    }

    #[test]
    fn whitespace_only_keeps_punctuation_attached() {
        assert_eq!(
            fixture().tokenize("Exceptional weather."),
            ["Ex", "##ception", "##al", "[UNK]"]
        );
    }

    #[test]
    fn floor_vocabulary_is_per_character() {
        let alpha: BTreeSet<char> = "abcé".chars().collect();
        let v = Vocabulary::floor(&alpha, "##", 100).unwrap();
        assert_eq!(v.len(), 9);
        assert_eq!(v.tokenize("cab é"), ["c", "##a", "##b", "é"]);
    }

    #[test]
    fn out_of_alphabet_word_is_unk() {
        let alpha: BTreeSet<char> = "ab".chars().collect();
        let v = Vocabulary::floor(&alpha, "##", 100).unwrap();
        assert_eq!(v.tokenize("ab axb b"), ["a", "##b", "[UNK]", "b"]);
    }

    #[test]
    fn overlong_word_is_unk() {
        let alpha: BTreeSet<char> = "a".chars().collect();
        let v = Vocabulary::floor(&alpha, "##", 100).unwrap();
        assert_eq!(v.encode(&"a".repeat(100)).len(), 100);
        assert_eq!(v.tokenize(&"a".repeat(101)), ["[UNK]"]);
    }

    #[test]
    fn token_counts_by_hand() {
        let c = Corpus::from_texts("x", ["ab ab ab"]).unwrap();
        let alpha = alphabet(&c);
        let floor = Vocabulary::floor(&alpha, "##", 100).unwrap();
        assert_eq!(token_count(&floor, &c), 6);
        let mut tokens = floor.tokens().to_vec();
        tokens.push("ab".into());
        let merged = Vocabulary::from_tokens(tokens).unwrap();
        assert_eq!(token_count(&merged, &c), 3);
        assert!(merged.encode("").is_empty());
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let v = fixture();
        let s = v.to_file_string();
        let back = Vocabulary::parse(&s).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.to_file_string(), s);
    }

    #[test]
    fn rejects_bad_vocabularies() {
        assert!(Vocabulary::from_tokens(vec!["a".into()]).is_err());
        assert!(Vocabulary::from_tokens(vec!["[UNK]".into(), "a".into(), "a".into()]).is_err());
        assert!(Vocabulary::parse("").is_err());
    }

    #[test]
    fn transported_vocabulary_encodes_fake_text_identically() {
        let v = Vocabulary::from_tokens(
            ["[UNK]", "p", "u", "r", "##u", "##r", "##p", "##l", "##e", "pur", "##ple"]
                .map(String::from)
                .to_vec(),
        )
        .unwrap();
        let t = v.transported("0en0").unwrap();
        let text = "purple pure rule";
        assert_eq!(t.encode(&fake_text(text, "0en0")), v.encode(text));
        assert_eq!(t.token(9), Some("0en0pur"));
        assert_eq!(t.token(10), Some("##ple"));
    }

    #[test]
    fn encode_unit_keeps_source() {
        let alpha: BTreeSet<char> = "ab".chars().collect();
        let v = Vocabulary::floor(&alpha, "##", 100).unwrap();
        let seq = v.encode_unit(&Unit::new("u1", "ab"));
        assert_eq!(seq.source_unit, "u1");
        assert_eq!(seq.tokens.len(), 2);
    }

    proptest! {
        #[test]
        fn lossless_modulo_unk(words in proptest::collection::vec("[a-dé漢]{1,8}", 1..8), seps in proptest::collection::vec("[ \t]{1,3}", 8)) {
            let mut text = String::new();
            for (i, w) in words.iter().enumerate() {
                if i > 0 { text.push_str(&seps[i]); }
                text.push_str(w);
            }
            let c = Corpus::from_texts("x", ["ab abc dab", "éé 漢a"]).unwrap();
            let v = train(&c, 14, &TrainerConfig::default()).unwrap();
            let ids = v.encode(&text);
            prop_assert!(!ids.contains(&v.unk_id()));
            prop_assert_eq!(v.decode_words(&ids), words);
        }
    }
}
