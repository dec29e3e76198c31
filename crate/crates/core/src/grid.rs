//! Vocabulary-size grids for a language pair.
//!
//! Every (language, size) job trains a tokenizer, encodes the corpus, trains
//! embeddings and stores the singular value spectrum in a content-addressed
//! cache. Cells are gaps between cached spectra, so an m x n grid needs only
//! m + n trainings.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compression::{rate_marks, select_sizes, CompressionCurve, CurveReport, USABLE_MARGIN};
use crate::corpus::{fake_language, load_corpus_with, Corpus, LoadOptions};
use crate::embeddings::{train_embeddings, EmbedConfig};
use crate::error::{Error, Result};
use crate::hashing::FieldHasher;
use crate::spectral::{singular_values, svg, DEFAULT_SVG_K};
use crate::wordpiece::{min_vocab_size, train, TrainerConfig, Vocabulary};

pub const CACHE_ENV: &str = "VC_CACHE_DIR";

/// One side of the pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanguageSpec {
    pub language_id: String,
    /// `unit_id<TAB>text` file.
    pub corpus: PathBuf,
    /// Explicit sizes; when absent they are selected from `curve`.
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
    /// `curve.json` from the `curve` command; enables the equal-ACR contour.
    #[serde(default)]
    pub curve: Option<PathBuf>,
    /// Turns the corpus into its fake language. The tokenizer is trained on
    /// the source corpus and transported along the marker bijection.
    #[serde(default)]
    pub fake_marker: Option<String>,
    #[serde(default)]
    pub nfc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_svg_k")]
    pub svg_k: usize,
    /// Rates for the contour; defaults to 1.0, 0.9, ..., 0.1.
    #[serde(default)]
    pub contour_marks: Option<Vec<f64>>,
    pub left: LanguageSpec,
    pub right: LanguageSpec,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub embed: EmbedConfig,
}

fn default_jobs() -> usize {
    1
}

fn default_svg_k() -> usize {
    DEFAULT_SVG_K
}

impl GridConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidGridConfig(e.to_string()))
    }

    /// Reads a TOML config; relative paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.out_dir);
        if let Some(c) = cfg.cache_dir.as_mut() {
            resolve(c);
        }
        for side in [&mut cfg.left, &mut cfg.right] {
            resolve(&mut side.corpus);
            if let Some(c) = side.curve.as_mut() {
                resolve(c);
            }
        }
        Ok(cfg)
    }

    /// `VC_CACHE_DIR`, then `cache_dir`, then `<out_dir>/cache`.
    pub fn resolved_cache_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(dir);
        }
        self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::InvalidGridConfig("jobs must be positive".into()));
        }
        if self.svg_k == 0 || self.svg_k > self.embed.dim {
            return Err(Error::InvalidGridConfig(format!(
                "svg_k {} must lie in 1..={}",
                self.svg_k, self.embed.dim
            )));
        }
        self.embed
            .validate()
            .map_err(|e| Error::InvalidGridConfig(e.to_string()))
    }
}

/// A side with its corpus loaded and sizes resolved.
#[derive(Debug, Clone)]
pub struct PreparedSide {
    pub language_id: String,
    /// Corpus the embeddings are trained on (the fake corpus for fake sides).
    pub corpus: Corpus,
    /// Corpus the tokenizer is trained on.
    pub source: Corpus,
    pub fake_marker: Option<String>,
    pub sizes: Vec<usize>,
    pub curve: Option<CompressionCurve>,
    pub n_min: usize,
}

fn load_curve(path: &Path) -> Result<CompressionCurve> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: CurveReport = serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
    Ok(report.curve)
}

impl PreparedSide {
    pub fn load(spec: &LanguageSpec) -> Result<Self> {
        let source = load_corpus_with(&spec.corpus, &spec.language_id, LoadOptions { nfc: spec.nfc })?;
        let curve = spec.curve.as_deref().map(load_curve).transpose()?;
        let sizes = match (&spec.sizes, &curve) {
            (Some(s), _) => s.clone(),
            (None, Some(c)) => select_sizes(c, None)?.into_iter().map(|p| p.n).collect(),
            (None, None) => {
                return Err(Error::InvalidGridConfig(format!(
                    "{}: give either sizes or a curve",
                    spec.language_id
                )))
            }
        };
        Self::new(&spec.language_id, source, spec.fake_marker.clone(), sizes, curve)
    }

    pub fn new(
        language_id: &str,
        source: Corpus,
        fake_marker: Option<String>,
        sizes: Vec<usize>,
        curve: Option<CompressionCurve>,
    ) -> Result<Self> {
        let corpus = match &fake_marker {
            Some(m) => fake_language(&source, m)?.with_language_id(language_id),
            None => source.clone().with_language_id(language_id),
        };
        let n_min = min_vocab_size(&source);
        if sizes.is_empty() {
            return Err(Error::InvalidGridConfig(format!("{language_id}: empty size list")));
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGridConfig(format!("{language_id}: sizes must be strictly increasing")));
        }
        if sizes[0] < n_min {
            return Err(Error::InvalidGridConfig(format!(
                "{language_id}: size {} is below the alphabet floor {n_min}",
                sizes[0]
            )));
        }
        Ok(PreparedSide {
            language_id: language_id.to_string(),
            corpus,
            source,
            fake_marker,
            sizes,
            curve,
            n_min,
        })
    }

    fn tokenizer_tag(&self) -> String {
        match &self.fake_marker {
            Some(m) => format!("transported:{m}"),
            None => "trained".to_string(),
        }
    }
}

/// Everything stored for one (language, size) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobArtifact {
    pub key: String,
    pub language_id: String,
    pub size: usize,
    /// Tokens actually in the vocabulary; below `size` when training saturated.
    pub vocab_size: usize,
    pub acr: f64,
    pub tokens: u64,
    pub floor_tokens: u64,
    pub epoch_loss: Vec<f64>,
    pub spectrum: Vec<f64>,
}

/// Cache key over everything that determines a job's outputs.
pub fn job_key(side: &PreparedSide, size: usize, seed: u64, trainer: &TrainerConfig, embed: &EmbedConfig) -> String {
    FieldHasher::new()
        .field("vocab-compat job v1")
        .field(side.source.content_hash())
        .field(&side.language_id)
        .field(side.tokenizer_tag())
        .field(size.to_string())
        .field(seed.to_string())
        .field(serde_json::to_string(trainer).expect("trainer config serializes"))
        .field(serde_json::to_string(embed).expect("embed config serializes"))
        .finish()
}

/// Runs one job without touching the cache.
pub fn compute_job(
    side: &PreparedSide,
    size: usize,
    seed: u64,
    trainer: &TrainerConfig,
    embed: &EmbedConfig,
) -> Result<(JobArtifact, Vocabulary, crate::embeddings::EmbeddingMatrix)> {
    let wrap = |e: Error| Error::Job {
        language_id: side.language_id.clone(),
        size,
        source: Box::new(e),
    };
    let source_vocab = train(&side.source, size, trainer).map_err(wrap)?;
    let vocab = match &side.fake_marker {
        Some(m) => source_vocab.transported(m).map_err(wrap)?,
        None => source_vocab,
    };
    let floor_tokens = vocab.truncated(side.n_min).map_err(wrap)?.token_count(&side.corpus);
    let tokens = vocab.token_count(&side.corpus);
    let trained = train_embeddings(&side.corpus, &vocab, embed, seed).map_err(wrap)?;
    let spectrum = singular_values(&trained.matrix).map_err(wrap)?;
    let artifact = JobArtifact {
        key: job_key(side, size, seed, trainer, embed),
        language_id: side.language_id.clone(),
        size,
        vocab_size: vocab.len(),
        acr: tokens as f64 / floor_tokens as f64,
        tokens,
        floor_tokens,
        epoch_loss: trained.epoch_loss,
        spectrum,
    };
    Ok((artifact, vocab, trained.matrix))
}

/// Content-addressed job store. Each entry is a directory written under a
/// temporary name and renamed into place, so readers never see partial
/// entries and the first completed writer wins.
#[derive(Debug, Clone)]
pub struct ArtifactCache {
    root: PathBuf,
}

impl ArtifactCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ArtifactCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry(&self, key: &str) -> PathBuf {
        self.root.join(key)
    }

    pub fn get(&self, key: &str) -> Result<Option<JobArtifact>> {
        let path = self.entry(key).join("job.json");
        match fs::read_to_string(&path) {
            Ok(text) => {
                let a: JobArtifact =
                    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
                Ok(Some(a))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn put(
        &self,
        artifact: &JobArtifact,
        vocab: &Vocabulary,
        matrix: &crate::embeddings::EmbeddingMatrix,
    ) -> Result<()> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let final_dir = self.entry(&artifact.key);
        let tmp = self.root.join(format!(
            ".{}.tmp-{}-{:?}",
            artifact.key,
            std::process::id(),
            std::thread::current().id()
        ));
        let _ = fs::remove_dir_all(&tmp);
        fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        vocab.save(tmp.join("vocab.txt"))?;
        matrix.save(tmp.join("embeddings.bin"), &vocab.content_hash())?;
        let json = serde_json::to_string_pretty(artifact).expect("artifact serializes");
        let job = tmp.join("job.json");
        fs::write(&job, json).map_err(|e| Error::io(&job, e))?;
        match fs::rename(&tmp, &final_dir) {
            Ok(()) => Ok(()),
            Err(_) if final_dir.join("job.json").exists() => {
                let _ = fs::remove_dir_all(&tmp);
                Ok(())
            }
            Err(e) => Err(Error::io(&final_dir, e)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub language_id: String,
    pub sizes: Vec<usize>,
    pub acr: Vec<f64>,
    pub vocab_sizes: Vec<usize>,
}

/// Sizes at which both fitted models give the same rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub r: f64,
    pub n_e: f64,
    pub n_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<ContourPoint>,
    /// Marks unreachable by at least one curve, or falling outside the axes.
    pub skipped: Vec<f64>,
}

/// Equal-ACR points for the given marks. A mark is reachable by a curve when
/// it is 1 (the alphabet floor) or lies strictly between the asymptote and 1
/// on a decreasing curve.
pub fn equal_acr_contour(e: &CompressionCurve, f: &CompressionCurve, marks: &[f64]) -> Contour {
    let invert = |c: &CompressionCurve, r: f64| -> Option<f64> {
        if r == 1.0 {
            return Some(c.n_min as f64);
        }
        if c.beta >= 0.0 || r <= c.asymptote_a + USABLE_MARGIN || r > 1.0 {
            return None;
        }
        c.invert_exact(r).ok()
    };
    let mut out = Contour {
        points: Vec::new(),
        skipped: Vec::new(),
    };
    for &r in marks {
        match (invert(e, r), invert(f, r)) {
            (Some(n_e), Some(n_f)) => out.points.push(ContourPoint { r, n_e, n_f }),
            _ => out.skipped.push(r),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatGrid {
    pub schema_version: u32,
    pub seed: u64,
    pub svg_k: usize,
    pub left: Axis,
    pub right: Axis,
    /// `cells[i][j]` is the gap between left size `i` and right size `j`.
    pub cells: Vec<Vec<f64>>,
    pub contour: Contour,
}

impl CompatGrid {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: CompatGrid = serde_json::from_str(text).map_err(|e| Error::parse("grid.json", e))?;
        if g.schema_version != Self::SCHEMA_VERSION {
            return Err(Error::parse("grid.json", format!("unsupported schema_version {}", g.schema_version)));
        }
        Ok(g)
    }

    /// Long form, one row per cell, left sizes outermost.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_e,n_f,acr_e,acr_f,svg\n");
        for (i, row) in self.cells.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    self.left.sizes[i], self.right.sizes[j], self.left.acr[i], self.right.acr[j], v
                );
            }
        }
        out
    }

    /// Binary greyscale PGM, `cell_px` pixels per cell. Columns follow the
    /// right sizes ascending, rows the left sizes with the largest on top.
    /// Black is the smallest gap; a constant grid renders mid-grey.
    pub fn to_pgm(&self, cell_px: usize) -> Vec<u8> {
        let cell_px = cell_px.max(1);
        let rows = self.cells.len();
        let cols = self.cells.first().map_or(0, Vec::len);
        let (lo, hi) = self
            .cells
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let level = |v: f64| -> u8 {
            if hi - lo <= 0.0 {
                128
            } else {
                ((v - lo) / (hi - lo) * 255.0).round() as u8
            }
        };
        let (w, h) = (cols * cell_px, rows * cell_px);
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        for y in 0..h {
            let i = rows - 1 - y / cell_px;
            for x in 0..w {
                out.push(level(self.cells[i][x / cell_px]));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Csv,
    Pgm,
}

pub const PGM_CELL_PX: usize = 16;

pub fn export_grid(grid: &CompatGrid, format: ExportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        ExportFormat::Json => grid.to_json().into_bytes(),
        ExportFormat::Csv => grid.to_csv().into_bytes(),
        ExportFormat::Pgm => grid.to_pgm(PGM_CELL_PX),
    };
    write_atomic(path, &bytes)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp-{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// A finished grid with job accounting.
#[derive(Debug, Clone)]
pub struct GridRun {
    pub grid: CompatGrid,
    /// Jobs executed in this run (cache misses).
    pub trainings: usize,
    /// Jobs served from the cache.
    pub cache_hits: usize,
}

/// Loads both corpora and runs the grid.
pub fn run_grid(config: &GridConfig) -> Result<GridRun> {
    config.validate()?;
    let left = PreparedSide::load(&config.left)?;
    let right = PreparedSide::load(&config.right)?;
    run_prepared(config, &left, &right)
}

/// Runs the grid on prepared sides, using the cache from
/// [`GridConfig::resolved_cache_dir`].
pub fn run_prepared(config: &GridConfig, left: &PreparedSide, right: &PreparedSide) -> Result<GridRun> {
    config.validate()?;
    let cache = ArtifactCache::new(config.resolved_cache_dir());

    // Unique jobs keyed by content; a key shared by both sides runs once.
    let mut jobs: BTreeMap<String, (&PreparedSide, usize)> = BTreeMap::new();
    for side in [left, right] {
        for &n in &side.sizes {
            jobs.entry(job_key(side, n, config.seed, &config.trainer, &config.embed))
                .or_insert((side, n));
        }
    }
    let trainings = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidGridConfig(e.to_string()))?;
    let results: Vec<Result<(String, JobArtifact)>> = pool.install(|| {
        jobs.par_iter()
            .map(|(key, (side, n))| {
                if let Some(a) = cache.get(key)? {
                    return Ok((key.clone(), a));
                }
                log::info!("training {} at size {n}", side.language_id);
                let (artifact, vocab, matrix) = compute_job(side, *n, config.seed, &config.trainer, &config.embed)?;
                trainings.fetch_add(1, Ordering::Relaxed);
                cache.put(&artifact, &vocab, &matrix)?;
                Ok((key.clone(), artifact))
            })
            .collect()
    });
    let mut artifacts: HashMap<String, JobArtifact> = HashMap::with_capacity(results.len());
    for r in results {
        let (k, a) = r?;
        artifacts.insert(k, a);
    }
    let trainings = trainings.into_inner();

    let lookup = |side: &PreparedSide, n: usize| -> &JobArtifact {
        &artifacts[&job_key(side, n, config.seed, &config.trainer, &config.embed)]
    };
    let axis = |side: &PreparedSide| Axis {
        language_id: side.language_id.clone(),
        sizes: side.sizes.clone(),
        acr: side.sizes.iter().map(|&n| lookup(side, n).acr).collect(),
        vocab_sizes: side.sizes.iter().map(|&n| lookup(side, n).vocab_size).collect(),
    };
    let mut cells = Vec::with_capacity(left.sizes.len());
    for &ne in &left.sizes {
        let se = &lookup(left, ne).spectrum;
        let row = right
            .sizes
            .iter()
            .map(|&nf| svg(se, &lookup(right, nf).spectrum, config.svg_k))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve(format!("non-finite cell {v}")));
        }
        cells.push(row);
    }

    let contour = match (&left.curve, &right.curve) {
        (Some(ce), Some(cf)) => {
            let marks: Vec<f64> = config.contour_marks.clone().unwrap_or_else(|| rate_marks().collect());
            let mut c = equal_acr_contour(ce, cf, &marks);
            let in_range = |n: f64, sizes: &[usize]| n >= sizes[0] as f64 && n <= *sizes.last().unwrap() as f64;
            let (inside, outside): (Vec<_>, Vec<_>) = c
                .points
                .into_iter()
                .partition(|p| in_range(p.n_e, &left.sizes) && in_range(p.n_f, &right.sizes));
            c.points = inside;
            c.skipped.extend(outside.iter().map(|p| p.r));
            c
        }
        _ => Contour {
            points: Vec::new(),
            skipped: Vec::new(),
        },
    };

    let grid = CompatGrid {
        schema_version: CompatGrid::SCHEMA_VERSION,
        seed: config.seed,
        svg_k: config.svg_k,
        left: axis(left),
        right: axis(right),
        cells,
        contour,
    };
    Ok(GridRun {
        grid,
        trainings,
        cache_hits: jobs.len() - trainings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::{model_acr, RatePoint};
    use crate::corpus::synthetic::{english_like, EnglishLikeConfig};
    use crate::corpus::DEFAULT_FAKE_MARKER;

    fn curve(a: f64, beta: f64, n_min: usize) -> CompressionCurve {
        CompressionCurve {
            language_id: "x".into(),
            n_min,
            asymptote_a: a,
            beta,
            samples: vec![RatePoint { n: n_min, r: 1.0 }],
            excluded: 0,
            terminal: None,
        }
    }

    fn small_config(dir: &Path) -> GridConfig {
        GridConfig {
            seed: 3,
            out_dir: dir.to_path_buf(),
            cache_dir: Some(dir.join("cache")),
            jobs: 2,
            svg_k: 40,
            contour_marks: None,
            left: LanguageSpec {
                language_id: "unused".into(),
                corpus: PathBuf::new(),
                sizes: None,
                curve: None,
                fake_marker: None,
                nfc: false,
            },
            right: LanguageSpec {
                language_id: "unused".into(),
                corpus: PathBuf::new(),
                sizes: None,
                curve: None,
                fake_marker: None,
                nfc: false,
            },
            trainer: TrainerConfig::default(),
            embed: EmbedConfig {
                dim: 40,
                epochs: 2,
                ..EmbedConfig::default()
            },
        }
    }

    fn toy() -> Corpus {
        english_like(&EnglishLikeConfig {
            units: 300,
            lemmas: 200,
            seed: 9,
        })
    }

    #[test]
    fn identical_curves_give_diagonal_contour() {
        let c = curve(0.3, -0.7, 100);
        let out = equal_acr_contour(&c, &c, &rate_marks().collect::<Vec<_>>());
        assert!(!out.points.is_empty());
        for p in &out.points {
            assert_eq!(p.n_e, p.n_f);
        }
        assert_eq!(out.skipped, vec![0.3, 0.2, 0.1]);
    }

    #[test]
    fn high_asymptote_side_limits_contour() {
        let e = curve(0.29, -0.5, 129);
        let f = curve(0.68, -0.9, 6189);
        let out = equal_acr_contour(&e, &f, &rate_marks().collect::<Vec<_>>());
        assert_eq!(out.points.iter().map(|p| p.r).collect::<Vec<_>>(), vec![1.0, 0.9, 0.8, 0.7]);
        for p in &out.points {
            let gap = model_acr(e.beta, e.asymptote_a, e.n_min, p.n_e) - model_acr(f.beta, f.asymptote_a, f.n_min, p.n_f);
            assert!(gap.abs() < 1e-6);
        }
        assert!(equal_acr_contour(&e, &f, &[]).points.is_empty());
    }

    #[test]
    fn self_grid_is_zero_and_cached() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let c = toy();
        let n = min_vocab_size(&c) + 40;
        let side = PreparedSide::new("eng", c, None, vec![n], None).unwrap();
        let run = run_prepared(&cfg, &side, &side).unwrap();
        assert_eq!(run.grid.cells, vec![vec![0.0]]);
        assert_eq!(run.trainings, 1);
        let again = run_prepared(&cfg, &side, &side).unwrap();
        assert_eq!((again.trainings, again.cache_hits), (0, 1));
        assert_eq!(again.grid, run.grid);
    }

    #[test]
    fn fake_diagonal_and_cell_independence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let c = toy();
        let n_min = min_vocab_size(&c);
        let sizes = vec![n_min + 20, n_min + 150];
        let left = PreparedSide::new("eng", c.clone(), None, sizes.clone(), None).unwrap();
        let right = PreparedSide::new("eng-fake", c, Some(DEFAULT_FAKE_MARKER.into()), sizes.clone(), None).unwrap();
        let run = run_prepared(&cfg, &left, &right).unwrap();
        assert_eq!(run.trainings, 4);
        let g = &run.grid;
        assert!(g.cells[0][0] < 1e-6 && g.cells[1][1] < 1e-6);
        assert!(g.cells[0][1] > g.cells[0][0] && g.cells[1][0] > g.cells[1][1]);
        assert_eq!(g.left.acr, g.right.acr);

        let (a, _, _) = compute_job(&left, sizes[1], cfg.seed, &cfg.trainer, &cfg.embed).unwrap();
        let (b, _, _) = compute_job(&right, sizes[0], cfg.seed, &cfg.trainer, &cfg.embed).unwrap();
        assert_eq!(svg(&a.spectrum, &b.spectrum, 40).unwrap(), g.cells[1][0]);
    }

    #[test]
    fn exports() {
        let g = CompatGrid {
            schema_version: 1,
            seed: 0,
            svg_k: 40,
            left: Axis {
                language_id: "e".into(),
                sizes: vec![10, 20],
                acr: vec![1.0, 0.5],
                vocab_sizes: vec![10, 20],
            },
            right: Axis {
                language_id: "f".into(),
                sizes: vec![5, 6, 7],
                acr: vec![1.0, 0.9, 0.8],
                vocab_sizes: vec![5, 6, 7],
            },
            cells: vec![vec![0.0, 1.0, 2.0], vec![3.0, 4.0, 5.0]],
            contour: Contour {
                points: vec![ContourPoint { r: 1.0, n_e: 10.0, n_f: 5.0 }],
                skipped: vec![0.5],
            },
        };
        assert_eq!(CompatGrid::from_json(&g.to_json()).unwrap(), g);
        let csv = g.to_csv();
        assert_eq!(csv.lines().count(), 1 + 6);
        assert_eq!(csv.lines().nth(4).unwrap(), "20,5,0.5,1,3");
        let pgm = g.to_pgm(2);
        let header = b"P5\n6 4\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        let px = &pgm[header.len()..];
        assert_eq!(px.len(), 24);
        // top row is the largest left size
        assert_eq!(&px[..6], &[153, 153, 204, 204, 255, 255]);
        assert_eq!(&px[18..], &[0, 0, 51, 51, 102, 102]);

        let mut flat = g.clone();
        flat.cells = vec![vec![2.5; 3]; 2];
        let pgm = flat.to_pgm(1);
        assert!(pgm[pgm.len() - 6..].iter().all(|&v| v == 128));
    }

    #[test]
    fn config_from_toml() {
        let cfg = GridConfig::from_toml(
            r#"
            seed = 5
            out_dir = "out"
            [left]
            language_id = "eng"
            corpus = "eng.tsv"
            sizes = [200, 400]
            [right]
            language_id = "eng-fake"
            corpus = "eng.tsv"
            sizes = [200, 400]
            fake_marker = "0en0"
            [embed]
            dim = 50
            "#,
        )
        .unwrap();
        assert_eq!(cfg.jobs, 1);
        assert_eq!(cfg.svg_k, 40);
        assert_eq!(cfg.embed.dim, 50);
        assert_eq!(cfg.embed.window, 5);
        assert!(GridConfig::from_toml("seed = 1").is_err());
    }

    #[test]
    fn invalid_sizes_rejected() {
        let c = toy();
        assert!(PreparedSide::new("e", c.clone(), None, vec![], None).is_err());
        assert!(PreparedSide::new("e", c.clone(), None, vec![500, 400], None).is_err());
        assert!(PreparedSide::new("e", c, None, vec![3], None).is_err());
    }
}
