//! Deterministic synthetic corpora: an English-like verse corpus (the bundled
//! toy corpus is generated by [`english_like`]) and small random corpora over
//! arbitrary alphabets for property tests.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Unit};

const FUNCTION_WORDS: &[&str] = &[
    "the", "and", "of", "to", "in", "that", "he", "it", "his", "was", "for", "is", "with", "unto",
    "they", "be", "not", "i", "all", "him", "them", "shall", "a", "from", "said", "you", "my",
    "their", "which", "will", "upon", "as", "by", "but", "this", "have", "had", "were", "me",
    "when", "there", "who", "so", "are", "out", "we", "into", "your", "then", "now", "on", "at",
    "one", "what", "also", "her", "she", "no", "if", "our", "came", "men", "before", "these",
];

const ONSETS: &[&str] = &[
    "", "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "y",
    "th", "sh", "ch", "st", "br", "tr", "gr", "pl", "cr", "wh", "fl", "sp", "qu",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ea", "ou", "ai", "ee", "oo", "ie", "y"];
const CODAS: &[&str] = &[
    "", "", "n", "r", "s", "t", "d", "l", "m", "ng", "st", "nd", "rt", "ck", "th", "ll", "x",
];
const SUFFIXES: &[(&str, u32)] = &[
    ("", 60),
    ("s", 12),
    ("ed", 7),
    ("ing", 6),
    ("eth", 4),
    ("ly", 3),
    ("ness", 2),
    ("er", 3),
    ("'s", 3),
];

/// Parameters of the English-like generator.
#[derive(Debug, Clone)]
pub struct EnglishLikeConfig {
    pub units: usize,
    pub lemmas: usize,
    pub seed: u64,
}

impl Default for EnglishLikeConfig {
    fn default() -> Self {
        EnglishLikeConfig {
            units: 25_000,
            lemmas: 6_000,
            seed: 2021,
        }
    }
}

fn zipf_weights(n: usize, exponent: f64, offset: f64) -> Vec<f64> {
    (0..n).map(|r| 1.0 / (r as f64 + offset).powf(exponent)).collect()
}

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Generates verse-like English-looking text with Zipfian word frequencies,
/// inflectional suffixes, capitalised names and attached punctuation. Unit
/// ids follow the `BBCCCVVV` book/chapter/verse scheme.
pub fn english_like(config: &EnglishLikeConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut lemmas: Vec<(String, bool)> = Vec::with_capacity(config.lemmas);
    let mut seen = std::collections::HashSet::new();
    while lemmas.len() < config.lemmas {
        let syllables = match rng.gen_range(0..10) {
            0..=3 => 1,
            4..=7 => 2,
            _ => 3,
        };
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(pick(&mut rng, ONSETS));
            w.push_str(pick(&mut rng, NUCLEI));
            w.push_str(pick(&mut rng, CODAS));
        }
        if w.len() < 2 || FUNCTION_WORDS.contains(&w.as_str()) || !seen.insert(w.clone()) {
            continue;
        }
        let is_name = rng.gen_bool(0.08);
        lemmas.push((w, is_name));
    }
    let lemma_dist = WeightedIndex::new(zipf_weights(lemmas.len(), 1.05, 2.0)).unwrap();
    let function_dist = WeightedIndex::new(zipf_weights(FUNCTION_WORDS.len(), 0.9, 1.0)).unwrap();
    let suffix_dist = WeightedIndex::new(SUFFIXES.iter().map(|s| s.1)).unwrap();

    let mut units = Vec::with_capacity(config.units);
    let (mut book, mut chapter, mut verse) = (1u32, 1u32, 0u32);
    for _ in 0..config.units {
        verse += 1;
        if verse > rng.gen_range(20..45) {
            verse = 1;
            chapter += 1;
            if chapter > rng.gen_range(20..40) {
                chapter = 1;
                book += 1;
            }
        }
        let len = rng.gen_range(6..=32);
        let mut words: Vec<String> = Vec::with_capacity(len);
        for i in 0..len {
            let mut w = if rng.gen_bool(0.45) {
                FUNCTION_WORDS[function_dist.sample(&mut rng)].to_string()
            } else {
                let (lemma, is_name) = &lemmas[lemma_dist.sample(&mut rng)];
                if *is_name {
                    capitalize(lemma)
                } else {
                    format!("{lemma}{}", SUFFIXES[suffix_dist.sample(&mut rng)].0)
                }
            };
            if i == 0 {
                w = capitalize(&w);
            }
            if i + 1 < len && rng.gen_bool(0.07) {
                w.push(if rng.gen_bool(0.8) { ',' } else { ';' });
            }
            words.push(w);
        }
        let end = match rng.gen_range(0..20) {
            0 => '?',
            1 => '!',
            2 => ':',
            _ => '.',
        };
        words.last_mut().unwrap().push(end);
        units.push(Unit::new(
            format!("{book:02}{chapter:03}{verse:03}"),
            words.join(" "),
        ));
    }
    Corpus::new("eng-toy", units).expect("generator emits valid units")
}

/// Parameters of [`random_corpus`].
#[derive(Debug, Clone)]
pub struct RandomCorpusConfig {
    pub alphabet_size: usize,
    pub words: usize,
    pub seed: u64,
}

/// Code points used for random alphabets: Latin, Greek, Cyrillic and CJK
/// blocks, so that multi-byte characters are exercised.
fn alphabet_char(i: usize) -> char {
    let bases = [0x61u32, 0x3b1, 0x430, 0x4e00];
    let block = i % bases.len();
    let offset = (i / bases.len()) as u32;
    char::from_u32(bases[block] + offset).expect("valid code point")
}

/// A random corpus with a fixed alphabet size and total word count. Words are
/// drawn from a Zipf-distributed random lexicon so that frequent substrings
/// exist for merges to pick up.
pub fn random_corpus(config: &RandomCorpusConfig) -> Corpus {
    assert!(config.alphabet_size >= 1 && config.words >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let alphabet: Vec<char> = (0..config.alphabet_size).map(alphabet_char).collect();
    let lexicon_size = (config.words / 3).clamp(1, 2000);
    let lexicon: Vec<String> = (0..lexicon_size)
        .map(|_| {
            let len = 1 + (rng.gen::<f64>().powi(2) * 9.0) as usize;
            (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
        })
        .collect();
    let dist = WeightedIndex::new(zipf_weights(lexicon.len(), 1.0, 1.5)).unwrap();

    let mut units = Vec::new();
    let mut remaining = config.words;
    while remaining > 0 {
        let len = rng.gen_range(3..=15).min(remaining);
        let mut text = String::new();
        for j in 0..len {
            if j > 0 {
                text.push(' ');
            }
            text.push_str(&lexicon[dist.sample(&mut rng)]);
        }
        units.push(Unit::new(format!("u{}", units.len() + 1), text));
        remaining -= len;
    }
    // every alphabet symbol appears at least once
    let all: String = alphabet.iter().collect();
    units.push(Unit::new(format!("u{}", units.len() + 1), all));
    Corpus::new(format!("rand{}", config.alphabet_size), units).expect("generator emits valid units")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_like_is_deterministic() {
        let cfg = EnglishLikeConfig {
            units: 200,
            lemmas: 300,
            seed: 5,
        };
        let a = english_like(&cfg);
        assert_eq!(a, english_like(&cfg));
        assert_eq!(a.len(), 200);
        assert!(a.units()[0].text.chars().next().unwrap().is_uppercase());
    }

    #[test]
    fn random_corpus_uses_whole_alphabet() {
        let c = random_corpus(&RandomCorpusConfig {
            alphabet_size: 7,
            words: 120,
            seed: 3,
        });
        let chars: std::collections::BTreeSet<char> =
            c.texts().flat_map(str::chars).filter(|c| !c.is_whitespace()).collect();
        assert_eq!(chars.len(), 7);
        assert_eq!(c.word_count(), 121);
    }
}
