//! Verse-aligned corpora: loading, alignment, dev/test splitting and the
//! Fake-language transform.
//!
//! A corpus file holds one unit per line as `unit_id<TAB>text` (UTF-8). Unit
//! ids must be unique; texts may not be blank.

pub mod synthetic;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::hashing::FieldHasher;

/// Marker prepended to every word by [`fake_language`] unless configured otherwise.
pub const DEFAULT_FAKE_MARKER: &str = "0en0";

const FAKE_SUFFIX: &str = "-fake";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub id: String,
    pub text: String,
}

impl Unit {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Unit {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// One language edition: an ordered list of identified text units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    language_id: String,
    units: Vec<Unit>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Apply Unicode NFC normalization to every text. Off by default because
    /// normalization changes code-point counts and thus the alphabet floor.
    pub nfc: bool,
}

impl Corpus {
    /// Builds a corpus, checking id uniqueness and that no text is blank.
    /// An empty unit list is allowed here (e.g. an empty dev split); loaders
    /// reject it.
    pub fn new(language_id: impl Into<String>, units: Vec<Unit>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(units.len());
        for (i, unit) in units.iter().enumerate() {
            validate_unit(unit)?;
            if !seen.insert(unit.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: unit.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Corpus {
            language_id: language_id.into(),
            units,
        })
    }

    /// Builds a corpus from texts, numbering units from 1.
    pub fn from_texts<I, S>(language_id: impl Into<String>, texts: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let units = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Unit::new((i + 1).to_string(), t))
            .collect();
        Corpus::new(language_id, units)
    }

    /// Parses `id<TAB>text` lines. Blank lines are skipped; a trailing `\r`
    /// is stripped from every line.
    pub fn parse_tsv(language_id: impl Into<String>, bytes: &[u8], opts: LoadOptions) -> Result<Self> {
        let mut units = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
            let line_no = i + 1;
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            if raw.is_empty() {
                continue;
            }
            let line = std::str::from_utf8(raw).map_err(|_| Error::InvalidUtf8 { line: line_no })?;
            let (id, text) = line
                .split_once('\t')
                .ok_or(Error::MalformedLine { line: line_no })?;
            if id.is_empty() {
                return Err(Error::MalformedLine { line: line_no });
            }
            if seen.insert(id.to_string(), line_no).is_some() {
                return Err(Error::DuplicateId {
                    id: id.to_string(),
                    line: line_no,
                });
            }
            let text = if opts.nfc {
                text.nfc().collect::<String>()
            } else {
                text.to_string()
            };
            let unit = Unit::new(id, text);
            validate_unit(&unit)?;
            units.push(unit);
        }
        if units.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Corpus {
            language_id: language_id.into(),
            units,
        })
    }

    pub fn language_id(&self) -> &str {
        &self.language_id
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.units.iter().map(|u| u.id.as_str())
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.units.iter().map(|u| u.text.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&Unit> {
        self.units.iter().find(|u| u.id == id)
    }

    /// Number of whitespace-delimited words over all units.
    pub fn word_count(&self) -> usize {
        self.texts().map(|t| t.split_whitespace().count()).sum()
    }

    /// Renames the corpus without touching its units.
    pub fn with_language_id(mut self, language_id: impl Into<String>) -> Self {
        self.language_id = language_id.into();
        self
    }

    /// Keeps the first `n` units.
    pub fn truncated(&self, n: usize) -> Corpus {
        Corpus {
            language_id: self.language_id.clone(),
            units: self.units.iter().take(n).cloned().collect(),
        }
    }

    /// SHA-256 over the unit ids and texts (the language id is not included).
    pub fn content_hash(&self) -> String {
        let mut h = FieldHasher::new();
        for u in &self.units {
            h.field(&u.id).field(&u.text);
        }
        h.finish()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for u in &self.units {
            out.push_str(&u.id);
            out.push('\t');
            out.push_str(&u.text);
            out.push('\n');
        }
        out
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    fn select<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Corpus {
        let by_id: HashMap<&str, &Unit> = self.units.iter().map(|u| (u.id.as_str(), u)).collect();
        Corpus {
            language_id: self.language_id.clone(),
            units: ids.into_iter().filter_map(|id| by_id.get(id).map(|u| (*u).clone())).collect(),
        }
    }
}

fn validate_unit(unit: &Unit) -> Result<()> {
    if unit.id.is_empty() || unit.id.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidUnitId { id: unit.id.clone() });
    }
    if unit.text.contains(['\n', '\r']) {
        return Err(Error::LineBreakInText { id: unit.id.clone() });
    }
    if unit.text.trim().is_empty() {
        return Err(Error::EmptyUnit { id: unit.id.clone() });
    }
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>, language_id: &str) -> Result<Corpus> {
    load_corpus_with(path, language_id, LoadOptions::default())
}

pub fn load_corpus_with(path: impl AsRef<Path>, language_id: &str, opts: LoadOptions) -> Result<Corpus> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Corpus::parse_tsv(language_id, &bytes, opts)
}

/// Two corpora together with the unit ids they share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair {
    pub left: Corpus,
    pub right: Corpus,
    /// Shared ids in the left corpus' order.
    pub common_ids: Vec<String>,
    pub dropped_left: usize,
    pub dropped_right: usize,
}

pub fn align(left: &Corpus, right: &Corpus) -> Result<AlignedPair> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let right_ids: HashSet<&str> = right.ids().collect();
    let common_ids: Vec<String> = left
        .ids()
        .filter(|id| right_ids.contains(id))
        .map(str::to_string)
        .collect();
    if common_ids.is_empty() {
        return Err(Error::EmptyIntersection {
            left: left.language_id.clone(),
            right: right.language_id.clone(),
        });
    }
    let dropped_left = left.len() - common_ids.len();
    let dropped_right = right.len() - common_ids.len();
    if dropped_left + dropped_right > 0 {
        log::warn!(
            "aligning {} and {}: {} / {} units have no counterpart",
            left.language_id,
            right.language_id,
            dropped_left,
            dropped_right
        );
    }
    Ok(AlignedPair {
        left: left.clone(),
        right: right.clone(),
        common_ids,
        dropped_left,
        dropped_right,
    })
}

fn validate_marker(marker: &str) -> Result<()> {
    if marker.is_empty() {
        return Err(Error::InvalidMarker {
            marker: marker.to_string(),
            reason: "marker is empty",
        });
    }
    if marker.chars().any(char::is_whitespace) {
        return Err(Error::InvalidMarker {
            marker: marker.to_string(),
            reason: "marker contains whitespace",
        });
    }
    Ok(())
}

/// Prepends `marker` to every maximal run of non-whitespace characters.
/// Whitespace is copied verbatim.
pub fn fake_text(text: &str, marker: &str) -> String {
    let mut out = String::with_capacity(text.len() + marker.len() * 8);
    let mut in_word = false;
    for c in text.chars() {
        let ws = c.is_whitespace();
        if !ws && !in_word {
            out.push_str(marker);
        }
        in_word = !ws;
        out.push(c);
    }
    out
}

/// Inverse of [`fake_text`]. Returns the offending word if it lacks the marker.
pub fn unfake_text(text: &str, marker: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        let ws_len = rest.find(|c: char| !c.is_whitespace()).unwrap_or(rest.len());
        out.push_str(&rest[..ws_len]);
        rest = &rest[ws_len..];
        if rest.is_empty() {
            break;
        }
        let word_len = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let word = &rest[..word_len];
        match word.strip_prefix(marker) {
            Some(stripped) => out.push_str(stripped),
            None => return Err(word.to_string()),
        }
        rest = &rest[word_len..];
    }
    Ok(out)
}

/// Re-scripts a corpus by prefixing every word with `marker`. The result has
/// the same ids, the same whitespace and the same word count, and its
/// language id gains a `-fake` suffix.
pub fn fake_language(c: &Corpus, marker: &str) -> Result<Corpus> {
    validate_marker(marker)?;
    let mut units = Vec::with_capacity(c.len());
    for u in &c.units {
        if u.text.contains(marker) {
            return Err(Error::MarkerCollision {
                marker: marker.to_string(),
                id: u.id.clone(),
            });
        }
        units.push(Unit::new(u.id.clone(), fake_text(&u.text, marker)));
    }
    Ok(Corpus {
        language_id: format!("{}{FAKE_SUFFIX}", c.language_id),
        units,
    })
}

/// Undoes [`fake_language`].
pub fn invert_fake_language(c: &Corpus, marker: &str) -> Result<Corpus> {
    validate_marker(marker)?;
    let mut units = Vec::with_capacity(c.len());
    for u in &c.units {
        let text = unfake_text(&u.text, marker).map_err(|word| Error::MissingMarker {
            marker: marker.to_string(),
            id: u.id.clone(),
            word,
        })?;
        units.push(Unit::new(u.id.clone(), text));
    }
    let language_id = c
        .language_id
        .strip_suffix(FAKE_SUFFIX)
        .unwrap_or(&c.language_id)
        .to_string();
    Corpus::new(language_id, units)
}

/// Applies the fake transform (or its inverse) to the raw bytes of a corpus
/// file, leaving ids, line terminators and blank lines untouched.
pub fn fake_tsv_file_contents(contents: &str, marker: &str, invert: bool) -> Result<String> {
    validate_marker(marker)?;
    let mut out = String::with_capacity(contents.len() * 2);
    for (i, line) in contents.split_inclusive('\n').enumerate() {
        let body_len = line
            .strip_suffix("\r\n")
            .or_else(|| line.strip_suffix('\n'))
            .map_or(line.len(), str::len);
        let (body, terminator) = line.split_at(body_len);
        if body.is_empty() {
            out.push_str(line);
            continue;
        }
        let (id, text) = body.split_once('\t').ok_or(Error::MalformedLine { line: i + 1 })?;
        let converted = if invert {
            unfake_text(text, marker).map_err(|word| Error::MissingMarker {
                marker: marker.to_string(),
                id: id.to_string(),
                word,
            })?
        } else {
            if text.contains(marker) {
                return Err(Error::MarkerCollision {
                    marker: marker.to_string(),
                    id: id.to_string(),
                });
            }
            fake_text(text, marker)
        };
        out.push_str(id);
        out.push('\t');
        out.push_str(&converted);
        out.push_str(terminator);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
}

impl Split {
    /// Writes `<stem>.train.tsv`, `<stem>.dev.tsv` and `<stem>.test.tsv`
    /// next to `base`, returning the three paths.
    pub fn write(&self, base: impl AsRef<Path>) -> Result<[PathBuf; 3]> {
        let base = base.as_ref();
        let stem = base
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".to_string());
        let dir = base.parent().unwrap_or_else(|| Path::new(""));
        let paths = ["train", "dev", "test"].map(|part| dir.join(format!("{stem}.{part}.tsv")));
        self.train.write_tsv(&paths[0])?;
        self.dev.write_tsv(&paths[1])?;
        self.test.write_tsv(&paths[2])?;
        Ok(paths)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPair {
    pub left: Split,
    pub right: Split,
}

/// Draws `dev_n + test_n` shared ids (seeded) for dev and test; every other
/// unit of each side goes to train. Dev and test keep the left corpus' order.
pub fn split(pair: &AlignedPair, dev_n: usize, test_n: usize, seed: u64) -> Result<SplitPair> {
    let requested = dev_n + test_n;
    if requested >= pair.common_ids.len() {
        return Err(Error::InsufficientCommonIds {
            requested,
            available: pair.common_ids.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = rand::seq::index::sample(&mut rng, pair.common_ids.len(), requested).into_vec();
    let (dev_idx, test_idx) = drawn.split_at(dev_n);
    let mut dev_idx = dev_idx.to_vec();
    let mut test_idx = test_idx.to_vec();
    dev_idx.sort_unstable();
    test_idx.sort_unstable();
    let dev_ids: Vec<&str> = dev_idx.iter().map(|&i| pair.common_ids[i].as_str()).collect();
    let test_ids: Vec<&str> = test_idx.iter().map(|&i| pair.common_ids[i].as_str()).collect();
    let held_out: HashSet<&str> = dev_ids.iter().chain(test_ids.iter()).copied().collect();

    let side = |c: &Corpus| Split {
        train: Corpus {
            language_id: c.language_id.clone(),
            units: c
                .units
                .iter()
                .filter(|u| !held_out.contains(u.id.as_str()))
                .cloned()
                .collect(),
        },
        dev: c.select(dev_ids.iter().copied()),
        test: c.select(test_ids.iter().copied()),
    };
    Ok(SplitPair {
        left: side(&pair.left),
        right: side(&pair.right),
    })
}
