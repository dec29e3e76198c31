use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{alphabet, Pretokenizer, Vocabulary, WordCounts, DEFAULT_CONTINUATION_PREFIX, DEFAULT_MAX_WORD_CHARS, UNK};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    /// Pairs seen fewer times than this are never merged.
    pub min_frequency: u64,
    pub continuation_prefix: String,
    /// Words longer than this never take part in merges (they encode to `[UNK]`).
    pub max_word_chars: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            min_frequency: 1,
            continuation_prefix: DEFAULT_CONTINUATION_PREFIX.to_string(),
            max_word_chars: DEFAULT_MAX_WORD_CHARS,
        }
    }
}

/// `|specials| + 2 * |distinct non-whitespace code points|`.
pub fn min_vocab_size(corpus: &Corpus) -> usize {
    1 + 2 * alphabet(corpus).len()
}

type Pair = (u32, u32);

/// Heap entry. The score `count / (freq_left * freq_right)` is compared
/// exactly by cross-multiplication; ties go to the smaller left id, then the
/// smaller right id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Candidate {
    count: u64,
    freq_left: u64,
    freq_right: u64,
    pair: Pair,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.count as u128 * other.freq_left as u128 * other.freq_right as u128;
        let rhs = other.count as u128 * self.freq_left as u128 * self.freq_right as u128;
        lhs.cmp(&rhs)
            .then_with(|| other.pair.cmp(&self.pair))
            .then_with(|| self.count.cmp(&other.count))
            .then_with(|| other.freq_left.cmp(&self.freq_left))
            .then_with(|| other.freq_right.cmp(&self.freq_right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Word {
    symbols: Vec<u32>,
    count: u64,
}

struct State {
    tokens: Vec<String>,
    token_ids: HashMap<String, u32>,
    words: Vec<Word>,
    symbol_freq: Vec<u64>,
    pair_count: HashMap<Pair, u64>,
    pair_words: HashMap<Pair, Vec<u32>>,
    symbol_pairs: Vec<HashSet<Pair>>,
    heap: BinaryHeap<Candidate>,
    min_frequency: u64,
    prefix_len: usize,
}

impl State {
    fn candidate(&self, pair: Pair) -> Option<Candidate> {
        let count = *self.pair_count.get(&pair)?;
        (count >= self.min_frequency && count > 0).then(|| Candidate {
            count,
            freq_left: self.symbol_freq[pair.0 as usize],
            freq_right: self.symbol_freq[pair.1 as usize],
            pair,
        })
    }

    fn push(&mut self, pair: Pair) {
        if let Some(c) = self.candidate(pair) {
            self.heap.push(c);
        }
    }

    fn rebuild_heap(&mut self) {
        let pairs: Vec<Pair> = self.pair_count.keys().copied().collect();
        self.heap.clear();
        for p in pairs {
            self.push(p);
        }
    }

    fn apply_delta(&mut self, pair: Pair, delta: i64) {
        let entry = self.pair_count.entry(pair).or_insert(0);
        *entry = (*entry as i64 + delta) as u64;
        if *entry == 0 {
            self.pair_count.remove(&pair);
            self.pair_words.remove(&pair);
        }
    }

    fn pop_best(&mut self) -> Option<Pair> {
        while let Some(c) = self.heap.pop() {
            if self.candidate(c.pair) == Some(c) {
                return Some(c.pair);
            }
        }
        None
    }

    /// Merges every occurrence of `pair`, returning whether a new token was
    /// appended to the vocabulary.
    fn merge(&mut self, pair: Pair) -> bool {
        let (left, right) = pair;
        let merged = format!(
            "{}{}",
            self.tokens[left as usize],
            &self.tokens[right as usize][self.prefix_len..]
        );
        let (new_id, is_new) = match self.token_ids.get(&merged) {
            Some(&id) => (id, false),
            None => {
                let id = self.tokens.len() as u32;
                self.token_ids.insert(merged.clone(), id);
                self.tokens.push(merged);
                self.symbol_freq.push(0);
                self.symbol_pairs.push(HashSet::new());
                (id, true)
            }
        };

        let mut word_ids = self.pair_words.get(&pair).cloned().unwrap_or_default();
        word_ids.sort_unstable();
        word_ids.dedup();

        let mut pair_delta: HashMap<Pair, i64> = HashMap::new();
        let mut new_pairs: Vec<(Pair, u32)> = Vec::new();
        for wi in word_ids {
            let word = &self.words[wi as usize];
            if !word.symbols.windows(2).any(|w| (w[0], w[1]) == pair) {
                continue;
            }
            let count = word.count;
            let mut next = Vec::with_capacity(word.symbols.len());
            let mut i = 0;
            while i < word.symbols.len() {
                if i + 1 < word.symbols.len() && (word.symbols[i], word.symbols[i + 1]) == pair {
                    next.push(new_id);
                    i += 2;
                } else {
                    next.push(word.symbols[i]);
                    i += 1;
                }
            }
            for w in word.symbols.windows(2) {
                *pair_delta.entry((w[0], w[1])).or_insert(0) -= count as i64;
            }
            for w in next.windows(2) {
                let p = (w[0], w[1]);
                *pair_delta.entry(p).or_insert(0) += count as i64;
                if p.0 == new_id || p.1 == new_id {
                    new_pairs.push((p, wi));
                }
            }
            let removed = word.symbols.len() - next.len();
            self.symbol_freq[left as usize] -= removed as u64 * count;
            self.symbol_freq[right as usize] -= removed as u64 * count;
            self.symbol_freq[new_id as usize] += removed as u64 * count;
            self.words[wi as usize].symbols = next;
        }

        let mut touched: Vec<Pair> = Vec::with_capacity(pair_delta.len());
        for (p, d) in pair_delta {
            if d != 0 {
                self.apply_delta(p, d);
                touched.push(p);
            }
        }
        for (p, wi) in new_pairs {
            if self.pair_count.contains_key(&p) {
                self.pair_words.entry(p).or_default().push(wi);
                self.symbol_pairs[p.0 as usize].insert(p);
                self.symbol_pairs[p.1 as usize].insert(p);
            }
        }
        self.pair_count.remove(&pair);
        self.pair_words.remove(&pair);

        for p in touched.iter().copied() {
            self.push(p);
        }
        for s in [left, right, new_id] {
            let pairs: Vec<Pair> = self.symbol_pairs[s as usize]
                .iter()
                .copied()
                .filter(|p| self.pair_count.contains_key(p))
                .collect();
            self.symbol_pairs[s as usize] = pairs.iter().copied().collect();
            for p in pairs {
                self.push(p);
            }
        }
        if self.heap.len() > 4 * self.pair_count.len() + 4096 {
            self.rebuild_heap();
        }
        is_new
    }
}

/// Trains a WordPiece vocabulary of (at most) `target_size` tokens.
///
/// Starts from the floor vocabulary (`[UNK]`, every code point bare and
/// continued) and repeatedly merges the adjacent pair with the highest
/// `freq(ab) / (freq(a) * freq(b))` until the target size is reached or no
/// pair is left. Deterministic for a fixed corpus and config.
pub fn train(corpus: &Corpus, target_size: usize, config: &TrainerConfig) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.continuation_prefix.is_empty() {
        return Err(Error::InvalidArgument("continuation prefix must not be empty".into()));
    }
    let alpha = alphabet(corpus);
    let floor = Vocabulary::floor(&alpha, &config.continuation_prefix, config.max_word_chars)?;
    if target_size < floor.len() {
        return Err(Error::BelowAlphabetFloor {
            target: target_size,
            floor: floor.len(),
        });
    }

    let word_counts = WordCounts::new(corpus, Pretokenizer::Whitespace);
    let prefix = &config.continuation_prefix;
    let mut words = Vec::with_capacity(word_counts.distinct());
    let mut symbol_freq = vec![0u64; floor.len()];
    for (w, count) in word_counts.iter() {
        let n_chars = w.chars().count();
        if n_chars > config.max_word_chars {
            continue;
        }
        let symbols: Vec<u32> = w
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let id = if i == 0 {
                    floor.id(c.encode_utf8(&mut [0; 4]))
                } else {
                    floor.id(&format!("{prefix}{c}"))
                };
                id.expect("alphabet covers the corpus")
            })
            .collect();
        for &s in &symbols {
            symbol_freq[s as usize] += count;
        }
        words.push(Word { symbols, count });
    }

    let mut state = State {
        token_ids: floor.tokens().iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect(),
        tokens: floor.tokens().to_vec(),
        symbol_pairs: vec![HashSet::new(); floor.len()],
        words,
        symbol_freq,
        pair_count: HashMap::new(),
        pair_words: HashMap::new(),
        heap: BinaryHeap::new(),
        min_frequency: config.min_frequency.max(1),
        prefix_len: prefix.len(),
    };
    for wi in 0..state.words.len() {
        let count = state.words[wi].count as i64;
        let pairs: Vec<Pair> = state.words[wi].symbols.windows(2).map(|w| (w[0], w[1])).collect();
        for p in pairs {
            state.apply_delta(p, count);
            state.pair_words.entry(p).or_default().push(wi as u32);
            state.symbol_pairs[p.0 as usize].insert(p);
            state.symbol_pairs[p.1 as usize].insert(p);
        }
    }
    state.rebuild_heap();

    while state.tokens.len() < target_size {
        let Some(pair) = state.pop_best() else { break };
        state.merge(pair);
    }

    Vocabulary::with_options(
        state.tokens,
        prefix,
        vec![UNK.to_string()],
        config.max_word_chars,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::from_texts("x", texts.iter().copied()).unwrap()
    }

    #[test]
    fn min_vocab_size_examples() {
        assert_eq!(min_vocab_size(&corpus(&["ab ab"])), 5);
        assert_eq!(min_vocab_size(&corpus(&["aaaa"])), 3);
    }

    #[test]
    fn single_merge_candidate() {
        let c = corpus(&["ab ab ab"]);
        let v = train(&c, 6, &TrainerConfig::default()).unwrap();
        assert_eq!(v.tokens(), ["[UNK]", "a", "b", "##a", "##b", "ab"]);
        assert_eq!(v.token_count(&c), 3);
    }

    #[test]
    fn floor_target_adds_no_merges() {
        let c = corpus(&["hello world"]);
        let n = min_vocab_size(&c);
        let v = train(&c, n, &TrainerConfig::default()).unwrap();
        assert_eq!(v.len(), n);
        assert!(matches!(
            train(&c, n - 1, &TrainerConfig::default()),
            Err(Error::BelowAlphabetFloor { .. })
        ));
    }

    #[test]
    fn stops_when_every_word_is_one_token() {
        let c = corpus(&["ab ab ab"]);
        let v = train(&c, 1000, &TrainerConfig::default()).unwrap();
        assert_eq!(v.len(), 6);
    }

    #[test]
    fn likelihood_score_prefers_exclusive_pairs() {
        // "x y" co-occur only with each other; "a" and "##b" are frequent
        // everywhere, so their pair scores lower despite a higher raw count.
        let c = corpus(&["xy ab ab ab ac ac ac cb cb cb"]);
        let n = min_vocab_size(&c);
        let v = train(&c, n + 1, &TrainerConfig::default()).unwrap();
        assert_eq!(v.tokens().last().unwrap(), "xy");
    }

    #[test]
    fn ties_break_on_smaller_ids() {
        let c = corpus(&["ab cd"]);
        let n = min_vocab_size(&c);
        let v = train(&c, n + 1, &TrainerConfig::default()).unwrap();
        assert_eq!(v.tokens().last().unwrap(), "ab");
    }

    #[test]
    fn min_frequency_blocks_rare_pairs() {
        let c = corpus(&["ab ab cd"]);
        let cfg = TrainerConfig {
            min_frequency: 2,
            ..TrainerConfig::default()
        };
        let v = train(&c, 100, &cfg).unwrap();
        assert_eq!(&v.tokens()[min_vocab_size(&c)..], ["ab"]);
    }

    #[test]
    fn repeated_symbol_merges() {
        let c = corpus(&["aaaa aaa"]);
        let v = train(&c, 100, &TrainerConfig::default()).unwrap();
        assert_eq!(v.tokenize("aaaa aaa"), ["aaaa", "aaa"]);
    }

    #[test]
    fn training_is_deterministic_and_nested() {
        let c = crate::corpus::synthetic::english_like(&crate::corpus::synthetic::EnglishLikeConfig {
            units: 300,
            lemmas: 400,
            seed: 9,
        });
        let cfg = TrainerConfig::default();
        let full = train(&c, 5000, &cfg).unwrap();
        assert_eq!(full.to_file_string(), train(&c, 5000, &cfg).unwrap().to_file_string());
        let floor = min_vocab_size(&c);
        for n in [floor, floor + 1, floor + 37, floor + 400] {
            assert_eq!(train(&c, n, &cfg).unwrap(), full.truncated(n).unwrap());
        }
        // saturated: every word is a single token
        assert_eq!(full.token_count(&c), c.word_count() as u64);
    }
}
