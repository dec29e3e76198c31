//! Singular value spectra, the singular value gap between two embedding
//! matrices, and the compression/compatibility correlation.

use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Number of leading singular values compared by default.
pub const DEFAULT_SVG_K: usize = 40;
/// Singular values are floored here before taking logarithms.
pub const SIGMA_FLOOR: f64 = 1e-12;

const JACOBI_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix (row-major, `d x d`) by cyclic Jacobi
/// rotations, unsorted.
fn symmetric_eigenvalues(mut a: Vec<f64>, d: usize) -> Vec<f64> {
    let idx = |i: usize, j: usize| i * d + j;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..d {
            diag += a[idx(i, i)] * a[idx(i, i)];
            for j in i + 1..d {
                off += a[idx(i, j)] * a[idx(i, j)];
            }
        }
        if off <= JACOBI_TOL * JACOBI_TOL * diag || off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[idx(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[idx(p, p)];
                let aqq = a[idx(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = c * akp - s * akq;
                    a[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = c * apk - s * aqk;
                    a[idx(q, k)] = s * apk + c * aqk;
                }
                a[idx(p, q)] = 0.0;
                a[idx(q, p)] = 0.0;
            }
        }
    }
    (0..d).map(|i| a[idx(i, i)]).collect()
}

/// Singular values of a row-major `rows x cols` matrix, descending. There are
/// `min(rows, cols)` of them.
pub fn singular_values_of(data: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    if data.len() != rows * cols {
        return Err(Error::InvalidArgument(format!(
            "matrix has {} values, expected {rows} x {cols}",
            data.len()
        )));
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i / cols.max(1),
            col: i % cols.max(1),
        });
    }
    // Gram matrix over the smaller side.
    let (d, gram) = if cols <= rows {
        let mut g = vec![0.0; cols * cols];
        for r in 0..rows {
            let row = &data[r * cols..(r + 1) * cols];
            for i in 0..cols {
                let xi = row[i];
                if xi == 0.0 {
                    continue;
                }
                for j in i..cols {
                    g[i * cols + j] += xi * row[j];
                }
            }
        }
        (cols, g)
    } else {
        let mut g = vec![0.0; rows * rows];
        for i in 0..rows {
            for j in i..rows {
                let ri = &data[i * cols..(i + 1) * cols];
                let rj = &data[j * cols..(j + 1) * cols];
                g[i * rows + j] = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
            }
        }
        (rows, g)
    };
    let mut gram = gram;
    for i in 0..d {
        for j in 0..i {
            gram[i * d + j] = gram[j * d + i];
        }
    }
    let mut sigma: Vec<f64> = symmetric_eigenvalues(gram, d)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    Ok(sigma)
}

/// Singular values of an embedding matrix, descending.
pub fn singular_values(m: &EmbeddingMatrix) -> Result<Vec<f64>> {
    let data: Vec<f64> = m.as_slice().iter().map(|&v| f64::from(v)).collect();
    singular_values_of(&data, m.vocab_size(), m.dim())
}

/// Singular value gap over the first `k` values:
/// `sum_i (ln s1_i - ln s2_i)^2`, with values floored at [`SIGMA_FLOOR`].
pub fn svg(s1: &[f64], s2: &[f64], k: usize) -> Result<f64> {
    for s in [s1, s2] {
        if s.len() < k {
            return Err(Error::SpectrumTooShort { len: s.len(), k });
        }
    }
    Ok(s1[..k]
        .iter()
        .zip(&s2[..k])
        .map(|(a, b)| {
            let d = a.max(SIGMA_FLOOR).ln() - b.max(SIGMA_FLOOR).ln();
            d * d
        })
        .sum())
}

/// Gap between two matrices computed from their spectra.
pub fn svg_matrices(a: &EmbeddingMatrix, b: &EmbeddingMatrix, k: usize) -> Result<f64> {
    svg(&singular_values(a)?, &singular_values(b)?, k)
}

/// `ln(rate) / ln(reference_rate)`; both rates must lie in (0, 1).
pub fn compatibility_ratio(rate: f64, reference_rate: f64) -> Result<f64> {
    for r in [rate, reference_rate] {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::RateOutOfRange { rate: r });
        }
    }
    Ok(rate.ln() / reference_rate.ln())
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewObservations(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// One language's compression rates next to an external compatibility score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityRecord {
    pub language_id: String,
    pub score: f64,
    pub r_abs: f64,
    pub r_rel: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_abs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_rel: Option<f64>,
}

/// Reads records from CSV with a `language_id,score,r_abs,r_rel` header and
/// optional `ratio_abs,ratio_rel` columns.
pub fn parse_records_csv(text: &str) -> Result<Vec<CompatibilityRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::parse(format!("records row {}", i + 1), e)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub n: usize,
    pub pearson_abs: f64,
    pub pearson_rel: f64,
}

/// Correlates scores with compatibility ratios. Records carrying explicit
/// ratios use them; otherwise ratios are computed against the reference
/// record's rates.
pub fn correlate(records: &[CompatibilityRecord], reference: Option<&str>) -> Result<CorrelationResult> {
    let reference = match reference {
        Some(id) => Some(
            records
                .iter()
                .find(|r| r.language_id == id)
                .ok_or_else(|| Error::InvalidArgument(format!("reference language {id} not in records")))?,
        ),
        None => None,
    };
    let mut scores = Vec::new();
    let mut abs = Vec::new();
    let mut rel = Vec::new();
    for r in records {
        if reference.is_some_and(|x| x.language_id == r.language_id) {
            continue;
        }
        let ratio = |given: Option<f64>, rate: f64, pick: fn(&CompatibilityRecord) -> f64| -> Result<f64> {
            match (given, reference) {
                (Some(v), _) => Ok(v),
                (None, Some(reference)) => compatibility_ratio(rate, pick(reference)),
                (None, None) => Err(Error::InvalidArgument(format!(
                    "{} has no ratio and no reference language was given",
                    r.language_id
                ))),
            }
        };
        abs.push(ratio(r.ratio_abs, r.r_abs, |x| x.r_abs)?);
        rel.push(ratio(r.ratio_rel, r.r_rel, |x| x.r_rel)?);
        scores.push(r.score);
    }
    Ok(CorrelationResult {
        n: scores.len(),
        pearson_abs: pearson(&scores, &abs)?,
        pearson_rel: pearson(&scores, &rel)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn oracle(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let m = DMatrix::from_row_slice(rows, cols, data);
        let mut s: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    fn close(a: &[f64], b: &[f64], rel: f64) {
        assert_eq!(a.len(), b.len());
        let top = b[0];
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= rel * y.abs().max(1e-6 * top), "{x} vs {y}");
        }
    }

    #[test]
    fn diagonal_matrix() {
        let data = [3.0, 0.0, 0.0, -5.0, 0.0, 0.0];
        assert_eq!(singular_values_of(&data, 3, 2).unwrap(), vec![5.0, 3.0]);
    }

    #[test]
    fn matches_reference_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(rows, cols) in &[(50usize, 40usize), (300, 40), (120, 100), (7, 12)] {
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
            close(&singular_values_of(&data, rows, cols).unwrap(), &oracle(&data, rows, cols), 1e-8);
        }
    }

    #[test]
    fn rank_deficient_matrix() {
        let rows = 60;
        let cols = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let data: Vec<f64> = (0..rows * cols).map(|i| u[i / cols] * v[i % cols]).collect();
        let s = singular_values_of(&data, rows, cols).unwrap();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt() * v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((s[0] - norm).abs() < 1e-10 * norm);
        assert!(s[1..].iter().all(|&x| x < 1e-6 * norm));
    }

    #[test]
    fn svg_hand_values() {
        let e = std::f64::consts::E;
        assert_eq!(svg(&[1.0, 1.0], &[1.0, 1.0], 2).unwrap(), 0.0);
        let v = svg(&[e, 1.0, 9.0], &[1.0, e * e, 0.0], 2).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
        let floored = svg(&[0.0], &[1.0], 1).unwrap();
        assert!((floored - SIGMA_FLOOR.ln().powi(2)).abs() < 1e-9);
        assert!(matches!(svg(&[1.0], &[1.0, 2.0], 2), Err(Error::SpectrumTooShort { len: 1, k: 2 })));
    }

    #[test]
    fn ratio_and_pearson() {
        assert!((compatibility_ratio(0.5, 0.25).unwrap() - 0.5).abs() < 1e-15);
        assert!(compatibility_ratio(1.0, 0.5).is_err());
        assert!(compatibility_ratio(0.5, 0.0).is_err());
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(Error::TooFewObservations(1))));
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ZeroVariance("x"))));
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn correlate_with_reference() {
        let rec = |id: &str, score: f64, r: f64| CompatibilityRecord {
            language_id: id.into(),
            score,
            r_abs: r,
            r_rel: r,
            ratio_abs: None,
            ratio_rel: None,
        };
        let records = vec![rec("ref", 0.0, 0.3), rec("a", 1.0, 0.2), rec("b", 2.0, 0.4), rec("c", 3.0, 0.5)];
        let out = correlate(&records, Some("ref")).unwrap();
        assert_eq!(out.n, 3);
        let ratios: Vec<f64> = [0.2f64, 0.4, 0.5].iter().map(|r| r.ln() / 0.3f64.ln()).collect();
        let expected = pearson(&[1.0, 2.0, 3.0], &ratios).unwrap();
        assert!((out.pearson_abs - expected).abs() < 1e-15);
        assert!(correlate(&records, None).is_err());
    }

    #[test]
    fn records_csv() {
        let recs = parse_records_csv("language_id,score,r_abs,r_rel,ratio_abs\nx, 1.5,0.3,0.01,0.9\ny,2,0.4,0.02,\n").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].ratio_abs, Some(0.9));
        assert_eq!(recs[1].ratio_abs, None);
        assert_eq!(recs[1].ratio_rel, None);
        assert!(parse_records_csv("language_id,score\nx,abc\n").is_err());
    }

    proptest! {
        #[test]
        fn svg_is_symmetric_and_nonnegative(
            a in proptest::collection::vec(0.0f64..10.0, 5),
            b in proptest::collection::vec(0.0f64..10.0, 5),
        ) {
            let ab = svg(&a, &b, 5).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, svg(&b, &a, 5).unwrap());
            prop_assert_eq!(svg(&a, &a, 5).unwrap(), 0.0);
        }

        #[test]
        fn singular_values_invariant_to_scaling(seed in 0u64..1000, scale in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..20 * 6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let scaled: Vec<f64> = data.iter().map(|x| x * scale).collect();
            let s = singular_values_of(&data, 20, 6).unwrap();
            let t = singular_values_of(&scaled, 20, 6).unwrap();
            for (x, y) in s.iter().zip(&t) {
                prop_assert!((x * scale - y).abs() <= 1e-9 * y.max(1e-9));
            }
        }
    }
}
