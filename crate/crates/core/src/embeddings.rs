//! Static subword embeddings trained with skip-gram and negative sampling.
//!
//! Each text unit is encoded with a WordPiece vocabulary and the resulting
//! token stream is trained on independently: context windows never cross unit
//! boundaries. Frequent tokens are subsampled and negatives are drawn from the
//! unigram distribution raised to 0.75. With `threads == 1` training is
//! bit-for-bit reproducible for a fixed seed; with more threads updates are
//! applied lock-free and the result depends on scheduling.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::wordpiece::Vocabulary;

/// Smallest dimension accepted; the singular value gap reads 40 values.
pub const MIN_DIM: usize = 40;

const MAGIC: &[u8; 4] = b"VCEM";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub dim: usize,
    /// Maximum window radius; the radius is drawn from `1..=window` per token.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly to zero over all epochs.
    pub learning_rate: f64,
    /// Subsampling threshold `t`; a token of relative frequency `f` is kept
    /// with probability `sqrt(t / f) + t / f`.
    pub subsample: f64,
    /// 1 for deterministic training.
    pub threads: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            subsample: 1e-4,
            threads: 1,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidEmbedConfig(m));
        if self.dim < MIN_DIM {
            return fail(format!("dim {} < {MIN_DIM}", self.dim));
        }
        if self.window == 0 || self.epochs == 0 || self.threads == 0 {
            return fail("window, epochs and threads must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate {}", self.learning_rate));
        }
        if !(self.subsample >= 0.0 && self.subsample.is_finite()) {
            return fail(format!("subsample threshold {}", self.subsample));
        }
        Ok(())
    }

    /// Thread count never affects results when it is 1.
    pub fn is_deterministic(&self) -> bool {
        self.threads == 1
    }
}

/// One row per vocabulary token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    language_id: String,
    vocab_size: usize,
    dim: usize,
    seed: u64,
    data: Vec<f32>,
}

/// Sidecar metadata written next to a matrix file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub format_version: u32,
    pub language_id: String,
    pub vocab_hash: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

impl EmbeddingMatrix {
    pub fn new(language_id: impl Into<String>, vocab_size: usize, dim: usize, seed: u64, data: Vec<f32>) -> Result<Self> {
        if data.len() != vocab_size * dim {
            return Err(Error::InvalidArgument(format!(
                "matrix data has {} values, expected {vocab_size} x {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(EmbeddingMatrix {
            language_id: language_id.into(),
            vocab_size,
            dim,
            seed,
            data,
        })
    }

    pub fn language_id(&self) -> &str {
        &self.language_id
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major values.
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.vocab_size as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the binary format. The language id is not part of it and must
    /// be supplied (usually from the sidecar).
    pub fn from_bytes(bytes: &[u8], language_id: impl Into<String>, path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::EmbeddingFormat {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(bad("missing VCEM header"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        if u32_at(4) != FORMAT_VERSION {
            return Err(bad("unsupported format version"));
        }
        let n = u64_at(8) as usize;
        let d = u64_at(16) as usize;
        let seed = u64_at(24);
        let expected = n
            .checked_mul(d)
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| bad("dimensions overflow"))?;
        if bytes.len() - HEADER_LEN != expected {
            return Err(bad("payload length does not match header"));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        EmbeddingMatrix::new(language_id, n, d, seed, data)
    }

    pub fn meta_path(path: &Path) -> PathBuf {
        path.with_extension("meta.json")
    }

    /// Writes the matrix and its `.meta.json` sidecar.
    pub fn save(&self, path: impl AsRef<Path>, vocab_hash: &str) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let meta = EmbeddingMeta {
            format_version: FORMAT_VERSION,
            language_id: self.language_id.clone(),
            vocab_hash: vocab_hash.to_string(),
            n: self.vocab_size,
            d: self.dim,
            seed: self.seed,
        };
        let meta_path = Self::meta_path(path);
        let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))
    }

    /// Reads a matrix; the language id comes from the sidecar when present.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Option<EmbeddingMeta>)> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let meta_path = Self::meta_path(path);
        let meta: Option<EmbeddingMeta> = match fs::read_to_string(&meta_path) {
            Ok(s) => Some(serde_json::from_str(&s).map_err(|e| Error::parse(meta_path.display().to_string(), e))?),
            Err(_) => None,
        };
        let language_id = meta.as_ref().map(|m| m.language_id.clone()).unwrap_or_default();
        let m = Self::from_bytes(&bytes, language_id, path)?;
        Ok((m, meta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEmbeddings {
    pub matrix: EmbeddingMatrix,
    /// Mean logistic loss per (center, target) update, one entry per epoch.
    pub epoch_loss: Vec<f64>,
    /// Number of (center, context) pairs available before subsampling.
    pub pairs_per_epoch: u64,
}

/// Row access shared by the dense single-threaded store and the lock-free
/// atomic store.
trait Rows {
    fn read(&self, row: usize, out: &mut [f32]);
    fn dot(&self, row: usize, x: &[f32]) -> f32;
    fn axpy(&mut self, row: usize, alpha: f32, x: &[f32]);
}

struct DenseRows<'a> {
    data: &'a mut [f32],
    dim: usize,
}

impl Rows for DenseRows<'_> {
    fn read(&self, row: usize, out: &mut [f32]) {
        out.copy_from_slice(&self.data[row * self.dim..(row + 1) * self.dim]);
    }

    fn dot(&self, row: usize, x: &[f32]) -> f32 {
        self.data[row * self.dim..(row + 1) * self.dim]
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum()
    }

    fn axpy(&mut self, row: usize, alpha: f32, x: &[f32]) {
        for (a, b) in self.data[row * self.dim..(row + 1) * self.dim].iter_mut().zip(x) {
            *a += alpha * b;
        }
    }
}

#[derive(Clone, Copy)]
struct SharedRows<'a> {
    data: &'a [AtomicU32],
    dim: usize,
}

impl Rows for SharedRows<'_> {
    fn read(&self, row: usize, out: &mut [f32]) {
        for (o, a) in out.iter_mut().zip(&self.data[row * self.dim..(row + 1) * self.dim]) {
            *o = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    fn dot(&self, row: usize, x: &[f32]) -> f32 {
        self.data[row * self.dim..(row + 1) * self.dim]
            .iter()
            .zip(x)
            .map(|(a, b)| f32::from_bits(a.load(Ordering::Relaxed)) * b)
            .sum()
    }

    fn axpy(&mut self, row: usize, alpha: f32, x: &[f32]) {
        for (a, b) in self.data[row * self.dim..(row + 1) * self.dim].iter().zip(x) {
            let v = f32::from_bits(a.load(Ordering::Relaxed)) + alpha * b;
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Everything the inner loop needs that is shared between workers.
struct Plan<'a> {
    streams: &'a [Vec<u32>],
    keep_prob: Vec<f32>,
    negatives: WeightedIndex<f64>,
    negative_ids: Vec<u32>,
    config: &'a EmbedConfig,
    total_work: f64,
}

struct Scratch {
    hidden: Vec<f32>,
    grad: Vec<f32>,
    out_row: Vec<f32>,
    kept: Vec<u32>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            hidden: vec![0.0; dim],
            grad: vec![0.0; dim],
            out_row: vec![0.0; dim],
            kept: Vec::new(),
        }
    }
}

impl Plan<'_> {
    /// Trains one unit; returns (loss sum, update count).
    #[allow(clippy::too_many_arguments)]
    fn train_stream<I: Rows, O: Rows>(
        &self,
        stream: &[u32],
        input: &mut I,
        output: &mut O,
        rng: &mut ChaCha8Rng,
        lr: f32,
        s: &mut Scratch,
    ) -> (f64, u64) {
        s.kept.clear();
        for &t in stream {
            let p = self.keep_prob[t as usize];
            if p >= 1.0 || rng.gen::<f32>() < p {
                s.kept.push(t);
            }
        }
        let mut loss = 0.0f64;
        let mut updates = 0u64;
        let window = self.config.window;
        for i in 0..s.kept.len() {
            let center = s.kept[i] as usize;
            let radius = rng.gen_range(1..=window);
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(s.kept.len() - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let context = s.kept[j] as usize;
                input.read(center, &mut s.hidden);
                s.grad.iter_mut().for_each(|g| *g = 0.0);
                for k in 0..=self.config.negatives {
                    let (target, label) = if k == 0 {
                        (context, 1.0f32)
                    } else {
                        let t = self.negative_ids[self.negatives.sample(rng)] as usize;
                        if t == context {
                            continue;
                        }
                        (t, 0.0)
                    };
                    let f = output.dot(target, &s.hidden);
                    let sig = sigmoid(f);
                    let p = if label > 0.0 { sig } else { 1.0 - sig };
                    loss -= f64::from(p.max(1e-7)).ln();
                    updates += 1;
                    let g = (label - sig) * lr;
                    output.read(target, &mut s.out_row);
                    for (gr, o) in s.grad.iter_mut().zip(&s.out_row) {
                        *gr += g * o;
                    }
                    output.axpy(target, g, &s.hidden);
                }
                input.axpy(center, 1.0, &s.grad);
            }
        }
        (loss, updates)
    }

    fn learning_rate(&self, processed: u64) -> f32 {
        let lr0 = self.config.learning_rate;
        let frac = 1.0 - processed as f64 / self.total_work;
        (lr0 * frac.max(1e-4)) as f32
    }
}

fn init_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains one embedding matrix for `vocab` over the units of `corpus`.
pub fn train_embeddings(corpus: &Corpus, vocab: &Vocabulary, config: &EmbedConfig, seed: u64) -> Result<TrainedEmbeddings> {
    config.validate()?;
    let streams: Vec<Vec<u32>> = corpus.texts().map(|t| vocab.encode(t)).collect();
    train_on_streams(corpus.language_id(), vocab.len(), &streams, config, seed)
}

/// Trains on pre-encoded token streams (one per unit).
pub fn train_on_streams(
    language_id: &str,
    vocab_size: usize,
    streams: &[Vec<u32>],
    config: &EmbedConfig,
    seed: u64,
) -> Result<TrainedEmbeddings> {
    config.validate()?;
    let pairs_per_epoch: u64 = streams
        .iter()
        .map(|s| {
            let n = s.len() as u64;
            (0..n).map(|i| i.min(config.window as u64) + (n - 1 - i).min(config.window as u64)).sum::<u64>()
        })
        .sum();
    if pairs_per_epoch == 0 {
        return Err(Error::NoTrainingPairs);
    }

    let mut counts = vec![0u64; vocab_size];
    for s in streams {
        for &t in s {
            counts[t as usize] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let keep_prob: Vec<f32> = counts
        .iter()
        .map(|&c| {
            if c == 0 || config.subsample == 0.0 {
                return 1.0;
            }
            let ratio = config.subsample / (c as f64 / total as f64);
            (ratio.sqrt() + ratio).min(1.0) as f32
        })
        .collect();
    let negative_ids: Vec<u32> = (0..vocab_size as u32).filter(|&t| counts[t as usize] > 0).collect();
    let negatives = WeightedIndex::new(negative_ids.iter().map(|&t| (counts[t as usize] as f64).powf(0.75)))
        .map_err(|e| Error::InvalidArgument(format!("negative sampling table: {e}")))?;

    let dim = config.dim;
    let mut init = init_rng(seed, 0);
    let half = 0.5 / dim as f32;
    let mut input: Vec<f32> = (0..vocab_size * dim).map(|_| init.gen_range(-half..half)).collect();
    let mut output = vec![0.0f32; vocab_size * dim];

    let plan = Plan {
        streams,
        keep_prob,
        negatives,
        negative_ids,
        config,
        total_work: (config.epochs as u64 * total) as f64,
    };

    let epoch_loss = if config.is_deterministic() {
        train_serial(&plan, &mut input, &mut output, seed)
    } else {
        train_parallel(&plan, &mut input, &mut output, seed)
    };

    let matrix = EmbeddingMatrix::new(language_id, vocab_size, dim, seed, input)?;
    Ok(TrainedEmbeddings {
        matrix,
        epoch_loss,
        pairs_per_epoch,
    })
}

fn train_serial(plan: &Plan, input: &mut [f32], output: &mut [f32], seed: u64) -> Vec<f64> {
    let dim = plan.config.dim;
    let mut rng = init_rng(seed, 1);
    let mut scratch = Scratch::new(dim);
    let mut input = DenseRows { data: input, dim };
    let mut output = DenseRows { data: output, dim };
    let mut processed = 0u64;
    let mut epoch_loss = Vec::with_capacity(plan.config.epochs);
    for _ in 0..plan.config.epochs {
        let (mut loss, mut updates) = (0.0, 0u64);
        for stream in plan.streams {
            let lr = plan.learning_rate(processed);
            let (l, u) = plan.train_stream(stream, &mut input, &mut output, &mut rng, lr, &mut scratch);
            loss += l;
            updates += u;
            processed += stream.len() as u64;
        }
        epoch_loss.push(if updates > 0 { loss / updates as f64 } else { 0.0 });
    }
    epoch_loss
}

fn train_parallel(plan: &Plan, input: &mut Vec<f32>, output: &mut Vec<f32>, seed: u64) -> Vec<f64> {
    let dim = plan.config.dim;
    let threads = plan.config.threads;
    let to_atomic = |v: &Vec<f32>| v.iter().map(|x| AtomicU32::new(x.to_bits())).collect::<Vec<_>>();
    let shared_in = to_atomic(input);
    let shared_out = to_atomic(output);
    let processed = AtomicU64::new(0);
    let mut epoch_loss = Vec::with_capacity(plan.config.epochs);
    let chunk = plan.streams.len().div_ceil(threads).max(1);
    for epoch in 0..plan.config.epochs {
        let results: Vec<(f64, u64)> = std::thread::scope(|scope| {
            let handles: Vec<_> = plan
                .streams
                .chunks(chunk)
                .enumerate()
                .map(|(w, shard)| {
                    let mut input = SharedRows { data: &shared_in, dim };
                    let mut output = SharedRows { data: &shared_out, dim };
                    let processed = &processed;
                    scope.spawn(move || {
                        let mut rng = init_rng(seed, 2 + (epoch * threads + w) as u64);
                        let mut scratch = Scratch::new(dim);
                        let (mut loss, mut updates) = (0.0, 0u64);
                        for stream in shard {
                            let lr = plan.learning_rate(processed.load(Ordering::Relaxed));
                            let (l, u) = plan.train_stream(stream, &mut input, &mut output, &mut rng, lr, &mut scratch);
                            loss += l;
                            updates += u;
                            processed.fetch_add(stream.len() as u64, Ordering::Relaxed);
                        }
                        (loss, updates)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let (loss, updates) = results.iter().fold((0.0, 0u64), |acc, r| (acc.0 + r.0, acc.1 + r.1));
        epoch_loss.push(if updates > 0 { loss / updates as f64 } else { 0.0 });
    }
    for (dst, src) in input.iter_mut().zip(&shared_in) {
        *dst = f32::from_bits(src.load(Ordering::Relaxed));
    }
    for (dst, src) in output.iter_mut().zip(&shared_out) {
        *dst = f32::from_bits(src.load(Ordering::Relaxed));
    }
    epoch_loss
}
