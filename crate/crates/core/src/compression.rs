//! Compression rates and the exponential compression model.
//!
//! For a corpus `c` and a WordPiece vocabulary of size `n`, the absolute
//! compression rate is `|tau_n(c)| / |tau_{n_min}(c)|` and the relative rate
//! scales it by `n_min / n`. The rate is bounded below by the asymptote `a`,
//! the rate reached once every whitespace word is a single token. The model
//! `r(n) = (1 - a) (n / n_min)^beta + a` is fitted by least squares without
//! intercept in log space and inverted to choose vocabulary sizes at
//! 0.1-spaced rate marks.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::wordpiece::{self, min_vocab_size, Pretokenizer, TrainerConfig, Vocabulary, WordCounts};

/// Upper end of the size range sampled for the curve fit.
pub const DEFAULT_N_MAX: usize = 100_000;
pub const DEFAULT_SAMPLE_COUNT: usize = 100;
/// Samples with `r <= a + USABLE_MARGIN` are left out of the regression.
pub const USABLE_MARGIN: f64 = 1e-9;

/// A `(vocabulary size, rate)` pair, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, f64)", into = "(usize, f64)")]
pub struct RatePoint {
    pub n: usize,
    pub r: f64,
}

impl From<(usize, f64)> for RatePoint {
    fn from((n, r): (usize, f64)) -> Self {
        RatePoint { n, r }
    }
}

impl From<RatePoint> for (usize, f64) {
    fn from(p: RatePoint) -> Self {
        (p.n, p.r)
    }
}

pub fn acr_from_counts(tokens: u64, floor_tokens: u64) -> Result<f64> {
    if floor_tokens == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(tokens as f64 / floor_tokens as f64)
}

pub fn rcr_from_acr(acr: f64, n_min: usize, n: usize) -> f64 {
    acr * n_min as f64 / n as f64
}

/// Token counts of one corpus under every prefix of a single long training
/// run. Because trained vocabularies are nested, the vocabulary of size `n`
/// is the first `n` tokens of the longest one, so one training serves every
/// size up to `n_max`.
#[derive(Debug, Clone)]
pub struct CompressionProfile {
    language_id: String,
    n_min: usize,
    floor_tokens: u64,
    words: WordCounts,
    vocab: Vocabulary,
}

impl CompressionProfile {
    pub fn build(corpus: &Corpus, n_max: usize, config: &TrainerConfig) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let n_min = min_vocab_size(corpus);
        let vocab = wordpiece::train(corpus, n_max.max(n_min), config)?;
        Self::from_vocabulary(corpus, vocab, n_min)
    }

    /// Wraps an already trained vocabulary whose first `n_min` tokens are the
    /// floor vocabulary of `corpus`.
    pub fn from_vocabulary(corpus: &Corpus, vocab: Vocabulary, n_min: usize) -> Result<Self> {
        let words = WordCounts::new(corpus, Pretokenizer::Whitespace);
        let floor_tokens = vocab.truncated(n_min)?.token_count_words(&words);
        if floor_tokens == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(CompressionProfile {
            language_id: corpus.language_id().to_string(),
            n_min,
            floor_tokens,
            words,
            vocab,
        })
    }

    pub fn language_id(&self) -> &str {
        &self.language_id
    }

    pub fn n_min(&self) -> usize {
        self.n_min
    }

    /// Size of the longest vocabulary trained; larger sizes behave like it.
    pub fn n_trained(&self) -> usize {
        self.vocab.len()
    }

    pub fn floor_tokens(&self) -> u64 {
        self.floor_tokens
    }

    pub fn vocabulary(&self, n: usize) -> Result<Vocabulary> {
        self.check_size(n)?;
        self.vocab.truncated(n)
    }

    fn check_size(&self, n: usize) -> Result<()> {
        if n < self.n_min {
            return Err(Error::BelowAlphabetFloor {
                target: n,
                floor: self.n_min,
            });
        }
        Ok(())
    }

    pub fn token_count(&self, n: usize) -> Result<u64> {
        Ok(self.vocabulary(n)?.token_count_words(&self.words))
    }

    pub fn acr(&self, n: usize) -> Result<f64> {
        if n == self.n_min {
            return Ok(1.0);
        }
        acr_from_counts(self.token_count(n)?, self.floor_tokens)
    }

    pub fn rcr(&self, n: usize) -> Result<f64> {
        Ok(rcr_from_acr(self.acr(n)?, self.n_min, n))
    }

    /// Word count over floor-token count.
    pub fn asymptote(&self) -> f64 {
        self.words.total() as f64 / self.floor_tokens as f64
    }

    /// Rate at the largest trained size.
    pub fn terminal(&self) -> Result<RatePoint> {
        let n = self.n_trained();
        Ok(RatePoint { n, r: self.acr(n)? })
    }

    /// `k` distinct sizes drawn uniformly from `[n_min, n_max]` (always
    /// including `n_min`), each with its measured rate, sorted by size.
    pub fn sample_curve(&self, k: usize, n_max: usize, seed: u64) -> Result<Vec<RatePoint>> {
        let sizes = sample_sizes(self.n_min, n_max, k, seed)?;
        sizes
            .into_par_iter()
            .map(|n| Ok(RatePoint { n, r: self.acr(n)? }))
            .collect()
    }

    /// Samples, fits and packages the curve for this corpus.
    pub fn fit_curve(&self, k: usize, n_max: usize, seed: u64) -> Result<CompressionCurve> {
        let samples = self.sample_curve(k, n_max, seed)?;
        CompressionCurve::fit(
            self.language_id.clone(),
            self.n_min,
            self.asymptote(),
            samples,
            Some(self.terminal()?),
        )
    }
}

fn sample_sizes(n_min: usize, n_max: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || n_max <= n_min || n_max - n_min < k - 1 {
        return Err(Error::SampleRangeTooSmall { k, n_min, n_max });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes: Vec<usize> = rand::seq::index::sample(&mut rng, n_max - n_min, k - 1)
        .into_iter()
        .map(|i| n_min + 1 + i)
        .collect();
    sizes.push(n_min);
    sizes.sort_unstable();
    Ok(sizes)
}

/// Absolute compression rate of `corpus` at vocabulary size `n`.
pub fn acr(corpus: &Corpus, n: usize, config: &TrainerConfig) -> Result<f64> {
    CompressionProfile::build(corpus, n, config)?.acr(n)
}

/// Relative compression rate of `corpus` at vocabulary size `n`.
pub fn rcr(corpus: &Corpus, n: usize, config: &TrainerConfig) -> Result<f64> {
    CompressionProfile::build(corpus, n, config)?.rcr(n)
}

/// Lower bound `a` of the absolute rate: words over floor tokens.
pub fn asymptote(corpus: &Corpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let floor = Vocabulary::floor(
        &wordpiece::alphabet(corpus),
        wordpiece::DEFAULT_CONTINUATION_PREFIX,
        wordpiece::DEFAULT_MAX_WORD_CHARS,
    )?;
    acr_from_counts(corpus.word_count() as u64, floor.token_count(corpus))
}

/// `k` sampled sizes with measured rates; see [`CompressionProfile::sample_curve`].
pub fn sample_curve(corpus: &Corpus, k: usize, n_max: usize, seed: u64, config: &TrainerConfig) -> Result<Vec<RatePoint>> {
    CompressionProfile::build(corpus, n_max, config)?.sample_curve(k, n_max, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub beta: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Least squares without intercept of `ln((r - a) / (1 - a))` on
/// `ln(n / n_min)`. Samples at `n_min` and samples at or below the asymptote
/// are excluded.
pub fn fit_beta(samples: &[RatePoint], a: f64, n_min: usize) -> Result<BetaFit> {
    let mut sum_uv = 0.0;
    let mut sum_uu = 0.0;
    let mut used = 0;
    let mut excluded = 0;
    for p in samples {
        if p.n <= n_min || !(p.r > a + USABLE_MARGIN) || !(a < 1.0) {
            excluded += 1;
            continue;
        }
        let u = (p.n as f64 / n_min as f64).ln();
        let v = ((p.r - a) / (1.0 - a)).ln();
        sum_uv += u * v;
        sum_uu += u * u;
        used += 1;
    }
    if used == 0 {
        return Err(Error::NoUsableSamples { excluded });
    }
    Ok(BetaFit {
        beta: sum_uv / sum_uu,
        used,
        excluded,
    })
}

/// The fitted model `r(n) = (1 - a) (n / n_min)^beta + a`.
pub fn model_acr(beta: f64, a: f64, n_min: usize, n: f64) -> f64 {
    (1.0 - a) * (n / n_min as f64).powf(beta) + a
}

/// Real-valued inverse of [`model_acr`], clamped to `>= n_min`.
pub fn invert_model_exact(beta: f64, a: f64, n_min: usize, target_r: f64) -> Result<f64> {
    if !(target_r > a) {
        return Err(Error::UnreachableRate {
            target: target_r,
            asymptote: a,
        });
    }
    if !(target_r <= 1.0) {
        return Err(Error::InvalidArgument(format!("target rate {target_r} exceeds 1")));
    }
    if !(beta < 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be negative, got {beta}")));
    }
    let n = n_min as f64 * ((target_r - a) / (1.0 - a)).powf(1.0 / beta);
    Ok(n.max(n_min as f64))
}

/// [`invert_model_exact`] rounded to the nearest vocabulary size.
pub fn invert_model(beta: f64, a: f64, n_min: usize, target_r: f64) -> Result<usize> {
    Ok(invert_model_exact(beta, a, n_min, target_r)?.round() as usize)
}

/// Rates 1.0, 0.9, ..., 0.1.
pub fn rate_marks() -> impl Iterator<Item = f64> {
    (1..=10).rev().map(|i| i as f64 / 10.0)
}

fn is_mark(r: f64) -> bool {
    ((r * 10.0).round() - r * 10.0).abs() < 1e-9
}

/// Sampled and fitted compression behaviour of one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionCurve {
    pub language_id: String,
    pub n_min: usize,
    #[serde(rename = "a")]
    pub asymptote_a: f64,
    pub beta: f64,
    pub samples: Vec<RatePoint>,
    /// Samples left out of the regression.
    pub excluded: usize,
    /// Largest trained size and its measured rate. Sizes beyond it do not
    /// change the tokenization.
    pub terminal: Option<RatePoint>,
}

impl CompressionCurve {
    /// Validates the samples and fits beta.
    pub fn fit(
        language_id: String,
        n_min: usize,
        asymptote_a: f64,
        mut samples: Vec<RatePoint>,
        terminal: Option<RatePoint>,
    ) -> Result<Self> {
        if !(asymptote_a > 0.0 && asymptote_a <= 1.0) {
            return Err(Error::InvalidCurve(format!("asymptote {asymptote_a} outside (0, 1]")));
        }
        samples.sort_by_key(|p| p.n);
        if let Some(first) = samples.first() {
            if first.n == n_min && first.r != 1.0 {
                return Err(Error::InvalidCurve(format!("rate at n_min is {}, not 1", first.r)));
            }
        }
        for w in samples.windows(2) {
            if w[1].r > w[0].r {
                return Err(Error::InvalidCurve(format!(
                    "rate increases from {} (n={}) to {} (n={})",
                    w[0].r, w[0].n, w[1].r, w[1].n
                )));
            }
        }
        if let Some(p) = samples.iter().find(|p| p.r < asymptote_a) {
            return Err(Error::InvalidCurve(format!(
                "rate {} at n={} is below the asymptote {asymptote_a}",
                p.r, p.n
            )));
        }
        let fit = fit_beta(&samples, asymptote_a, n_min)?;
        Ok(CompressionCurve {
            language_id,
            n_min,
            asymptote_a,
            beta: fit.beta,
            samples,
            excluded: fit.excluded,
            terminal,
        })
    }

    pub fn model(&self, n: f64) -> f64 {
        model_acr(self.beta, self.asymptote_a, self.n_min, n)
    }

    pub fn invert_exact(&self, r: f64) -> Result<f64> {
        invert_model_exact(self.beta, self.asymptote_a, self.n_min, r)
    }
}

/// Vocabulary sizes at the rate marks 1.0, 0.9, ... that lie above
/// `max(a, floor_r)`, via the inverse model.
///
/// Sizes are strictly increasing; when two marks round to the same size the
/// higher rate is kept. A mark whose size reaches the curve's terminal size
/// cannot be realised by a larger vocabulary and is dropped; if the floor
/// rate is not binding, the terminal point closes the list with its measured
/// (generally non-mark) rate.
pub fn select_sizes(curve: &CompressionCurve, floor_r: Option<f64>) -> Result<Vec<RatePoint>> {
    let a = curve.asymptote_a;
    let floor_r = floor_r.unwrap_or(a);
    if floor_r < a {
        return Err(Error::InvalidArgument(format!(
            "floor rate {floor_r} is below the asymptote {a}"
        )));
    }
    let limit = floor_r.max(a);
    let mut out: Vec<RatePoint> = Vec::new();
    for mark in rate_marks() {
        if mark <= limit + USABLE_MARGIN {
            break;
        }
        let n = if mark == 1.0 {
            curve.n_min
        } else if curve.beta < 0.0 {
            invert_model(curve.beta, a, curve.n_min, mark)?
        } else {
            break;
        };
        if curve.terminal.is_some_and(|t| n >= t.n) {
            break;
        }
        if out.last().is_none_or(|last| n > last.n) {
            out.push(RatePoint { n, r: mark });
        }
    }
    if out.is_empty() {
        return Err(Error::NoReachableMarks { asymptote: a });
    }
    if let Some(t) = curve.terminal {
        let last = *out.last().unwrap();
        if t.n > last.n && t.r >= floor_r - USABLE_MARGIN && t.r < last.r {
            out.push(t);
        }
    }
    Ok(out)
}

/// One `size_{rate}` entry per line, rates at marks with one decimal and
/// other rates with two.
pub fn format_selection(points: &[RatePoint]) -> String {
    let mut out = String::new();
    for p in points {
        if is_mark(p.r) {
            let _ = writeln!(out, "{}_{{{:.1}}}", p.n, p.r);
        } else {
            let _ = writeln!(out, "{}_{{{:.2}}}", p.n, p.r);
        }
    }
    out
}

/// `curve.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub schema_version: u32,
    #[serde(flatten)]
    pub curve: CompressionCurve,
    pub selected: Vec<RatePoint>,
}

impl CurveReport {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn new(curve: CompressionCurve, selected: Vec<RatePoint>) -> Self {
        CurveReport {
            schema_version: Self::SCHEMA_VERSION,
            curve,
            selected,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exact_samples(a: f64, beta: f64, n_min: usize, sizes: &[usize]) -> Vec<RatePoint> {
        sizes
            .iter()
            .map(|&n| RatePoint {
                n,
                r: model_acr(beta, a, n_min, n as f64),
            })
            .collect()
    }

    #[test]
    fn hand_counted_rates() {
        let c = Corpus::from_texts("x", ["ab ab ab"]).unwrap();
        let cfg = TrainerConfig::default();
        assert_eq!(acr(&c, 5, &cfg).unwrap(), 1.0);
        assert_eq!(acr(&c, 6, &cfg).unwrap(), 0.5);
        assert!((rcr(&c, 6, &cfg).unwrap() - 0.5 * 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(rcr(&c, 5, &cfg).unwrap(), 1.0);
        assert_eq!(asymptote(&c).unwrap(), 0.5);
        let single = Corpus::from_texts("x", ["a b c a"]).unwrap();
        assert_eq!(asymptote(&single).unwrap(), 1.0);
    }

    #[test]
    fn rcr_vanishes_for_large_vocabularies() {
        assert!(rcr_from_acr(0.3, 129, 10_000_000) < 1e-5);
    }

    #[test]
    fn exact_model_recovery() {
        let s = exact_samples(0.3, -0.5, 100, &[100, 150, 400, 1000, 7000]);
        let fit = fit_beta(&s, 0.3, 100).unwrap();
        assert!((fit.beta + 0.5).abs() < 1e-9);
        assert_eq!((fit.used, fit.excluded), (4, 1));
    }

    #[test]
    fn one_point_fit() {
        let a = 0.2;
        let s = [RatePoint { n: 200, r: a + (1.0 - a) * 0.5 }];
        assert!((fit_beta(&s, a, 100).unwrap().beta + 1.0).abs() < 1e-12);
    }

    #[test]
    fn samples_at_or_below_asymptote_are_excluded() {
        let s = [
            RatePoint { n: 100, r: 1.0 },
            RatePoint { n: 200, r: 0.3 },
            RatePoint { n: 300, r: 0.3 + 1e-12 },
        ];
        assert!(matches!(
            fit_beta(&s, 0.3, 100),
            Err(Error::NoUsableSamples { excluded: 3 })
        ));
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(invert_model(-1.0, 0.3, 100, 0.65).unwrap(), 200);
        assert_eq!(invert_model(-1.0, 0.3, 100, 1.0).unwrap(), 100);
        assert!(matches!(
            invert_model(-1.0, 0.3, 100, 0.3),
            Err(Error::UnreachableRate { .. })
        ));
    }

    #[test]
    fn sample_sizes_include_floor() {
        let s = sample_sizes(10, 20, 2, 4).unwrap();
        assert_eq!(s[0], 10);
        assert_eq!(s.len(), 2);
        let all = sample_sizes(10, 20, 11, 4).unwrap();
        assert_eq!(all, (10..=20).collect::<Vec<_>>());
        assert!(sample_sizes(10, 20, 12, 4).is_err());
        assert!(sample_sizes(10, 20, 1, 4).is_err());
    }

    fn eng_like_curve() -> CompressionCurve {
        // roughly the English row of the selected-size table
        let a = 0.288;
        let beta = -1.17;
        let sizes = [129, 150, 200, 300, 500, 1000, 3000];
        let mut samples = exact_samples(a, beta, 129, &sizes);
        samples[0].r = 1.0;
        CompressionCurve::fit(
            "eng".into(),
            129,
            a,
            samples,
            Some(RatePoint { n: 18865, r: a }),
        )
        .unwrap()
    }

    #[test]
    fn english_like_selection_has_nine_sizes() {
        let sel = select_sizes(&eng_like_curve(), None).unwrap();
        assert_eq!(sel.len(), 9);
        assert_eq!(sel[0], RatePoint { n: 129, r: 1.0 });
        assert_eq!(sel[8], RatePoint { n: 18865, r: 0.288 });
        assert!(sel.windows(2).all(|w| w[0].n < w[1].n && w[0].r > w[1].r));
        let block = format_selection(&sel);
        assert!(block.starts_with("129_{1.0}\n"));
        assert!(block.ends_with("18865_{0.29}\n"));
    }

    #[test]
    fn chinese_like_selection_has_five_sizes() {
        let a = 0.68;
        let mut samples = exact_samples(a, -2.0, 6189, &[6189, 7000, 9000, 15000, 30000]);
        samples[0].r = 1.0;
        let curve = CompressionCurve::fit(
            "zho".into(),
            6189,
            a,
            samples,
            Some(RatePoint { n: 33786, r: a }),
        )
        .unwrap();
        let sel = select_sizes(&curve, None).unwrap();
        assert_eq!(sel.len(), 5);
        assert_eq!(sel[0], RatePoint { n: 6189, r: 1.0 });
        assert_eq!(sel.iter().map(|p| p.r).collect::<Vec<_>>(), [1.0, 0.9, 0.8, 0.7, 0.68]);
    }

    #[test]
    fn high_asymptote_gives_single_size() {
        let curve = CompressionCurve {
            language_id: "x".into(),
            n_min: 50,
            asymptote_a: 0.96,
            beta: -1.0,
            samples: vec![],
            excluded: 0,
            terminal: None,
        };
        assert_eq!(select_sizes(&curve, None).unwrap(), [RatePoint { n: 50, r: 1.0 }]);
        let flat = CompressionCurve { asymptote_a: 1.0, ..curve };
        assert!(matches!(select_sizes(&flat, None), Err(Error::NoReachableMarks { .. })));
    }

    #[test]
    fn floor_rate_limits_marks_and_drops_terminal() {
        let sel = select_sizes(&eng_like_curve(), Some(0.45)).unwrap();
        assert_eq!(sel.last().unwrap().r, 0.5);
        assert!(select_sizes(&eng_like_curve(), Some(0.1)).is_err());
    }

    #[test]
    fn curve_rejects_increasing_rates() {
        let samples = vec![RatePoint { n: 10, r: 1.0 }, RatePoint { n: 20, r: 0.6 }, RatePoint { n: 30, r: 0.7 }];
        assert!(matches!(
            CompressionCurve::fit("x".into(), 10, 0.5, samples, None),
            Err(Error::InvalidCurve(_))
        ));
    }

    #[test]
    fn curve_json_shape() {
        let curve = eng_like_curve();
        let sel = select_sizes(&curve, None).unwrap();
        let json = serde_json::to_value(CurveReport::new(curve.clone(), sel.clone())).unwrap();
        for key in ["language_id", "n_min", "a", "beta", "samples", "selected"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["selected"][0], serde_json::json!([129, 1.0]));
        let back: CurveReport = serde_json::from_value(json).unwrap();
        assert_eq!(back.curve, curve);
        assert_eq!(back.selected, sel);
    }

    proptest! {
        #[test]
        fn round_trip_through_inverse(a in 0.05f64..0.9, beta in -2.0f64..-0.1, n_min in 10usize..5000, t in 0.0f64..1.0) {
            let r = a + (1.0 - a) * t.max(1e-6);
            let n = invert_model_exact(beta, a, n_min, r).unwrap();
            prop_assert!((model_acr(beta, a, n_min, n) - r).abs() < 1e-6);
        }
    }
}
