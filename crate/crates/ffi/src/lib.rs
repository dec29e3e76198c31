//! C ABI over `vocab-compat`.
//!
//! Objects are opaque heap handles released with their `*_free` function.
//! Every function returns a [`VcStatus`]; on failure a description is kept
//! per thread and can be read with [`vc_last_error_message`]. Strings are
//! NUL-terminated UTF-8. Array outputs take a caller buffer and capacity and
//! report the required length, returning `BufferTooSmall` when it does not
//! fit.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use vocab_compat::compression::{self, CompressionProfile, RatePoint};
use vocab_compat::corpus::{self, Corpus, LoadOptions};
use vocab_compat::embeddings::{self, EmbedConfig, EmbeddingMatrix};
use vocab_compat::spectral;
use vocab_compat::wordpiece::{self, TrainerConfig, Vocabulary};
use vocab_compat::{Error, ErrorKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Data = 4,
    Numeric = 5,
    Usage = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

pub struct VcCorpus(Corpus);
pub struct VcVocab(Vocabulary);
pub struct VcProfile(CompressionProfile);
pub struct VcEmbedding(EmbeddingMatrix);

/// Embedding hyperparameters; see `vc_embed_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VcEmbedConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub threads: usize,
}

impl From<VcEmbedConfig> for EmbedConfig {
    fn from(c: VcEmbedConfig) -> Self {
        EmbedConfig {
            dim: c.dim,
            window: c.window,
            negatives: c.negatives,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            subsample: c.subsample,
            threads: c.threads,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    let c = CString::new(s).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(VcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => VcStatus::Io,
            Error::InvalidUtf8 { .. } => VcStatus::InvalidUtf8,
            _ => match e.kind() {
                ErrorKind::Usage => VcStatus::Usage,
                ErrorKind::Data => VcStatus::Data,
                ErrorKind::Numeric => VcStatus::Numeric,
            },
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> VcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            VcStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| Failure(VcStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    p.as_mut()
        .ok_or_else(|| Failure(VcStatus::NullPointer, format!("{name} is null")))
}

unsafe fn string<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure(VcStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(VcStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(VcStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn fill<T: Copy>(src: &[T], dst: *mut T, cap: usize, out_len: *mut usize) -> FfiResult {
    *out(out_len, "out_len")? = src.len();
    if src.len() > cap {
        return Err(Failure(
            VcStatus::BufferTooSmall,
            format!("buffer holds {cap}, need {}", src.len()),
        ));
    }
    if !src.is_empty() {
        if dst.is_null() {
            return Err(Failure(VcStatus::NullPointer, "output buffer is null".into()));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`) and returns the full message length
/// excluding the terminator; 0 when there is no error.
#[no_mangle]
pub unsafe extern "C" fn vc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[no_mangle]
pub unsafe extern "C" fn vc_corpus_load(
    path: *const c_char,
    language_id: *const c_char,
    nfc: bool,
    out_corpus: *mut *mut VcCorpus,
) -> VcStatus {
    guard(|| {
        let path = string(path, "path")?;
        let lang = string(language_id, "language_id")?;
        let dst = out(out_corpus, "out_corpus")?;
        let c = corpus::load_corpus_with(Path::new(path), lang, LoadOptions { nfc })?;
        *dst = boxed(VcCorpus(c));
        Ok(())
    })
}

/// Parses `unit_id<TAB>text` lines from a memory buffer.
#[no_mangle]
pub unsafe extern "C" fn vc_corpus_from_tsv(
    data: *const u8,
    len: usize,
    language_id: *const c_char,
    out_corpus: *mut *mut VcCorpus,
) -> VcStatus {
    guard(|| {
        let bytes = slice(data, len, "data")?;
        let lang = string(language_id, "language_id")?;
        let dst = out(out_corpus, "out_corpus")?;
        let c = Corpus::parse_tsv(lang, bytes, LoadOptions::default())?;
        *dst = boxed(VcCorpus(c));
        Ok(())
    })
}

/// Fake-language copy of a corpus: every word gains `marker` as a prefix.
#[no_mangle]
pub unsafe extern "C" fn vc_corpus_fake(
    corpus: *const VcCorpus,
    marker: *const c_char,
    out_corpus: *mut *mut VcCorpus,
) -> VcStatus {
    guard(|| {
        let c = get(corpus, "corpus")?;
        let marker = string(marker, "marker")?;
        let dst = out(out_corpus, "out_corpus")?;
        *dst = boxed(VcCorpus(corpus::fake_language(&c.0, marker)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_corpus_len(corpus: *const VcCorpus, out_len: *mut usize) -> VcStatus {
    guard(|| {
        *out(out_len, "out_len")? = get(corpus, "corpus")?.0.len();
        Ok(())
    })
}

/// `1 + 2 * |alphabet|`.
#[no_mangle]
pub unsafe extern "C" fn vc_corpus_min_vocab_size(corpus: *const VcCorpus, out_size: *mut usize) -> VcStatus {
    guard(|| {
        *out(out_size, "out_size")? = wordpiece::min_vocab_size(&get(corpus, "corpus")?.0);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_corpus_free(corpus: *mut VcCorpus) {
    free(corpus)
}

/// Trains a vocabulary of at most `target_size` tokens with default settings.
#[no_mangle]
pub unsafe extern "C" fn vc_vocab_train(
    corpus: *const VcCorpus,
    target_size: usize,
    out_vocab: *mut *mut VcVocab,
) -> VcStatus {
    guard(|| {
        let c = get(corpus, "corpus")?;
        let dst = out(out_vocab, "out_vocab")?;
        let v = wordpiece::train(&c.0, target_size, &TrainerConfig::default())?;
        *dst = boxed(VcVocab(v));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_vocab_load(path: *const c_char, out_vocab: *mut *mut VcVocab) -> VcStatus {
    guard(|| {
        let path = string(path, "path")?;
        let dst = out(out_vocab, "out_vocab")?;
        *dst = boxed(VcVocab(Vocabulary::load(path)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_vocab_save(vocab: *const VcVocab, path: *const c_char) -> VcStatus {
    guard(|| {
        let v = get(vocab, "vocab")?;
        v.0.save(string(path, "path")?)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_vocab_len(vocab: *const VcVocab, out_len: *mut usize) -> VcStatus {
    guard(|| {
        *out(out_len, "out_len")? = get(vocab, "vocab")?.0.len();
        Ok(())
    })
}

/// Encodes `text` into token ids.
#[no_mangle]
pub unsafe extern "C" fn vc_vocab_encode(
    vocab: *const VcVocab,
    text: *const c_char,
    ids: *mut u32,
    capacity: usize,
    out_len: *mut usize,
) -> VcStatus {
    guard(|| {
        let v = get(vocab, "vocab")?;
        let encoded = v.0.encode(string(text, "text")?);
        fill(&encoded, ids, capacity, out_len)
    })
}

/// Total tokens when the whole corpus is encoded.
#[no_mangle]
pub unsafe extern "C" fn vc_vocab_token_count(
    vocab: *const VcVocab,
    corpus: *const VcCorpus,
    out_count: *mut u64,
) -> VcStatus {
    guard(|| {
        let v = get(vocab, "vocab")?;
        let c = get(corpus, "corpus")?;
        *out(out_count, "out_count")? = v.0.token_count(&c.0);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_vocab_free(vocab: *mut VcVocab) {
    free(vocab)
}

/// Trains once up to `n_max`; rates at any smaller size are then cheap.
#[no_mangle]
pub unsafe extern "C" fn vc_profile_build(
    corpus: *const VcCorpus,
    n_max: usize,
    out_profile: *mut *mut VcProfile,
) -> VcStatus {
    guard(|| {
        let c = get(corpus, "corpus")?;
        let dst = out(out_profile, "out_profile")?;
        let p = CompressionProfile::build(&c.0, n_max, &TrainerConfig::default())?;
        *dst = boxed(VcProfile(p));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_profile_n_min(profile: *const VcProfile, out_n: *mut usize) -> VcStatus {
    guard(|| {
        *out(out_n, "out_n")? = get(profile, "profile")?.0.n_min();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_profile_acr(profile: *const VcProfile, n: usize, out_rate: *mut f64) -> VcStatus {
    guard(|| {
        *out(out_rate, "out_rate")? = get(profile, "profile")?.0.acr(n)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_profile_rcr(profile: *const VcProfile, n: usize, out_rate: *mut f64) -> VcStatus {
    guard(|| {
        *out(out_rate, "out_rate")? = get(profile, "profile")?.0.rcr(n)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_profile_asymptote(profile: *const VcProfile, out_a: *mut f64) -> VcStatus {
    guard(|| {
        *out(out_a, "out_a")? = get(profile, "profile")?.0.asymptote();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_profile_free(profile: *mut VcProfile) {
    free(profile)
}

/// Least-squares beta from `len` samples `(sizes[i], rates[i])`.
#[no_mangle]
pub unsafe extern "C" fn vc_fit_beta(
    sizes: *const usize,
    rates: *const f64,
    len: usize,
    a: f64,
    n_min: usize,
    out_beta: *mut f64,
) -> VcStatus {
    guard(|| {
        let sizes = slice(sizes, len, "sizes")?;
        let rates = slice(rates, len, "rates")?;
        let samples: Vec<RatePoint> = sizes.iter().zip(rates).map(|(&n, &r)| RatePoint { n, r }).collect();
        *out(out_beta, "out_beta")? = compression::fit_beta(&samples, a, n_min)?.beta;
        Ok(())
    })
}

/// Smallest integer size whose modelled rate reaches `target_rate`.
#[no_mangle]
pub unsafe extern "C" fn vc_invert_model(
    beta: f64,
    a: f64,
    n_min: usize,
    target_rate: f64,
    out_size: *mut usize,
) -> VcStatus {
    guard(|| {
        *out(out_size, "out_size")? = compression::invert_model(beta, a, n_min, target_rate)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn vc_embed_config_default() -> VcEmbedConfig {
    let d = EmbedConfig::default();
    VcEmbedConfig {
        dim: d.dim,
        window: d.window,
        negatives: d.negatives,
        epochs: d.epochs,
        learning_rate: d.learning_rate,
        subsample: d.subsample,
        threads: d.threads,
    }
}

#[no_mangle]
pub unsafe extern "C" fn vc_embedding_train(
    corpus: *const VcCorpus,
    vocab: *const VcVocab,
    config: VcEmbedConfig,
    seed: u64,
    out_embedding: *mut *mut VcEmbedding,
) -> VcStatus {
    guard(|| {
        let c = get(corpus, "corpus")?;
        let v = get(vocab, "vocab")?;
        let dst = out(out_embedding, "out_embedding")?;
        let t = embeddings::train_embeddings(&c.0, &v.0, &config.into(), seed)?;
        *dst = boxed(VcEmbedding(t.matrix));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_embedding_load(path: *const c_char, out_embedding: *mut *mut VcEmbedding) -> VcStatus {
    guard(|| {
        let path = string(path, "path")?;
        let dst = out(out_embedding, "out_embedding")?;
        *dst = boxed(VcEmbedding(EmbeddingMatrix::load(path)?.0));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_embedding_save(embedding: *const VcEmbedding, path: *const c_char) -> VcStatus {
    guard(|| {
        let e = get(embedding, "embedding")?;
        e.0.save(string(path, "path")?, "")?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_embedding_shape(
    embedding: *const VcEmbedding,
    out_rows: *mut usize,
    out_cols: *mut usize,
) -> VcStatus {
    guard(|| {
        let e = get(embedding, "embedding")?;
        *out(out_rows, "out_rows")? = e.0.vocab_size();
        *out(out_cols, "out_cols")? = e.0.dim();
        Ok(())
    })
}

/// Descending singular values; there are `min(rows, cols)` of them.
#[no_mangle]
pub unsafe extern "C" fn vc_embedding_singular_values(
    embedding: *const VcEmbedding,
    values: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> VcStatus {
    guard(|| {
        let e = get(embedding, "embedding")?;
        let s = spectral::singular_values(&e.0)?;
        fill(&s, values, capacity, out_len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_embedding_free(embedding: *mut VcEmbedding) {
    free(embedding)
}

/// Singular value gap over the first `k` values of two descending spectra.
#[no_mangle]
pub unsafe extern "C" fn vc_svg(
    left: *const f64,
    left_len: usize,
    right: *const f64,
    right_len: usize,
    k: usize,
    out_gap: *mut f64,
) -> VcStatus {
    guard(|| {
        let l = slice(left, left_len, "left")?;
        let r = slice(right, right_len, "right")?;
        *out(out_gap, "out_gap")? = spectral::svg(l, r, k)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vc_pearson(x: *const f64, y: *const f64, len: usize, out_r: *mut f64) -> VcStatus {
    guard(|| {
        let x = slice(x, len, "x")?;
        let y = slice(y, len, "y")?;
        *out(out_r, "out_r")? = spectral::pearson(x, y)?;
        Ok(())
    })
}
