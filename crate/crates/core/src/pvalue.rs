//! Randomized conformal p-values.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::rng::TieBreakStream;
use crate::score::{condition_score, test_score, Condition, ScoreOptions, ScoreParams};

/// `(#{V_i < v} + u (1 + #{V_i = v})) / (n + 1)`.
pub fn conformal_pvalue(cal_scores: &[f64], test_score: f64, u: f64) -> f64 {
    let below = cal_scores.iter().filter(|&&s| s < test_score).count();
    let equal = cal_scores.iter().filter(|&&s| s == test_score).count();
    (below as f64 + u * (1 + equal) as f64) / (cal_scores.len() + 1) as f64
}

/// The same formula evaluated at the score of the true response. Only
/// meaningful where the truth is known, e.g. in simulation diagnostics.
pub fn oracle_pvalue(cal_scores: &[f64], true_test_score: f64, u: f64) -> f64 {
    conformal_pvalue(cal_scores, true_test_score, u)
}

/// Calibration scores sorted once so each p-value costs two binary searches.
#[derive(Debug, Clone)]
pub struct SortedScores(Vec<f64>);

impl SortedScores {
    pub fn new(mut scores: Vec<f64>) -> Self {
        scores.sort_by(f64::total_cmp);
        Self(scores)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn pvalue(&self, test_score: f64, u: f64) -> f64 {
        let below = self.0.partition_point(|&s| s < test_score);
        let not_above = self.0.partition_point(|&s| s <= test_score);
        (below as f64 + u * (1 + not_above - below) as f64) / (self.0.len() + 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PValueOptions {
    pub score: ScoreOptions,
    /// Drop in-target calibration samples. Their scores sit above every
    /// response-free test score, so they only inflate the denominator.
    pub exclude_inside_calibration: bool,
}

/// `m × K` p-values, row-major by test sample, with the uniforms used.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueMatrix {
    m: usize,
    k: usize,
    values: Vec<f64>,
    u: Vec<f64>,
    params: Vec<ScoreParams>,
    calibration_sizes: Vec<usize>,
    calibration_digest: String,
    clamped: usize,
}

impl PValueMatrix {
    /// Matrix from raw entries; zeros are clamped to the smallest positive
    /// double.
    pub fn from_values(m: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        let u = vec![f64::NAN; values.len()];
        Self::assemble(m, k, values, u, Vec::new(), Vec::new(), String::new())
    }

    fn assemble(
        m: usize,
        k: usize,
        mut values: Vec<f64>,
        u: Vec<f64>,
        params: Vec<ScoreParams>,
        calibration_sizes: Vec<usize>,
        calibration_digest: String,
    ) -> Result<Self> {
        if m == 0 || k == 0 || values.len() != m * k {
            return Err(Error::invalid(format!(
                "p-value matrix needs m, K >= 1 and m*K entries (m={m}, K={k}, len={})",
                values.len()
            )));
        }
        let mut clamped = 0;
        for v in &mut values {
            if !(*v >= 0.0 && *v <= 1.0) {
                return Err(Error::invalid(format!("p-value {v} outside [0, 1]")));
            }
            if *v == 0.0 {
                *v = f64::MIN_POSITIVE;
                clamped += 1;
            }
        }
        Ok(Self {
            m,
            k,
            values,
            u,
            params,
            calibration_sizes,
            calibration_digest,
            clamped,
        })
    }

    /// Side-by-side concatenation of matrices with the same number of rows.
    pub fn hstack(parts: &[PValueMatrix]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::invalid("nothing to stack"))?;
        let m = first.m;
        if parts.iter().any(|p| p.m != m) {
            return Err(Error::invalid("stacked p-value matrices must have equal row counts"));
        }
        let k: usize = parts.iter().map(|p| p.k).sum();
        let mut values = Vec::with_capacity(m * k);
        let mut u = Vec::with_capacity(m * k);
        for j in 0..m {
            for p in parts {
                values.extend_from_slice(&p.values[j * p.k..(j + 1) * p.k]);
                u.extend_from_slice(&p.u[j * p.k..(j + 1) * p.k]);
            }
        }
        let mut hasher = Sha256::new();
        for p in parts {
            hasher.update(p.calibration_digest.as_bytes());
        }
        Ok(Self {
            m,
            k,
            values,
            u,
            params: parts.iter().flat_map(|p| p.params.iter().copied()).collect(),
            calibration_sizes: parts.iter().flat_map(|p| p.calibration_sizes.iter().copied()).collect(),
            calibration_digest: hex::encode(hasher.finalize()),
            clamped: parts.iter().map(|p| p.clamped).sum(),
        })
    }

    pub fn num_samples(&self) -> usize {
        self.m
    }

    pub fn num_conditions(&self) -> usize {
        self.k
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.k + k]
    }

    pub fn u(&self, j: usize, k: usize) -> f64 {
        self.u[j * self.k + k]
    }

    /// Row-major entries, index `j * K + k`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.m).map(|j| self.get(j, k)).collect()
    }

    pub fn params(&self) -> &[ScoreParams] {
        &self.params
    }

    /// Calibration scores retained per column.
    pub fn calibration_sizes(&self) -> &[usize] {
        &self.calibration_sizes
    }

    /// SHA-256 over every column's calibration scores.
    pub fn calibration_digest(&self) -> &str {
        &self.calibration_digest
    }

    /// Entries that were exactly zero before clamping.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Writes `j, k, p, u`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        w.write_record(["j", "k", "p", "u"])
            .map_err(|e| Error::io(path, e.into()))?;
        for j in 0..self.m {
            for k in 0..self.k {
                w.write_record([
                    j.to_string(),
                    k.to_string(),
                    self.get(j, k).to_string(),
                    self.u(j, k).to_string(),
                ])
                .map_err(|e| Error::io(path, e.into()))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Builds the p-value matrix: one column per condition, `M` per column from
/// calibration plus test predictions, tie-breaking uniforms keyed by
/// `(j, k)`.
pub fn pvalue_matrix(
    cal_preds: &Matrix,
    cal_responses: &Matrix,
    test_preds: &Matrix,
    conditions: &[Condition],
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<PValueMatrix> {
    let n = cal_preds.rows();
    if cal_responses.rows() != n {
        return Err(Error::DimensionMismatch {
            context: "calibration responses",
            expected: n,
            got: cal_responses.rows(),
        });
    }
    let m = test_preds.rows();
    let big_k = conditions.len();
    if m == 0 || big_k == 0 {
        return Err(Error::invalid("need at least one test sample and one condition"));
    }
    let mut values = vec![0.0; m * big_k];
    let mut us = vec![0.0; m * big_k];
    let mut params = Vec::with_capacity(big_k);
    let mut sizes = Vec::with_capacity(big_k);
    let mut hasher = Sha256::new();

    for (k, cond) in conditions.iter().enumerate() {
        let d = cond.dim();
        for (context, mat) in [
            ("calibration predictions", cal_preds),
            ("test predictions", test_preds),
            ("calibration responses", cal_responses),
        ] {
            if mat.cols() != d {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: d,
                    got: mat.cols(),
                });
            }
        }
        let p = ScoreParams::fit(cal_preds.iter_rows().chain(test_preds.iter_rows()), cond, options.score)?;
        let mut scores = Vec::with_capacity(n);
        for i in 0..n {
            let inside = cond.contains(cal_responses.row(i))?;
            if inside && options.exclude_inside_calibration {
                continue;
            }
            scores.push(condition_score(cal_preds.row(i), cond, inside, &p)?);
        }
        for s in &scores {
            hasher.update(s.to_le_bytes());
        }
        let sorted = SortedScores::new(scores);
        for j in 0..m {
            let v = test_score(test_preds.row(j), cond, &p)?;
            let u = ties.u(j, k);
            values[j * big_k + k] = sorted.pvalue(v, u);
            us[j * big_k + k] = u;
        }
        sizes.push(sorted.len());
        params.push(p);
    }
    PValueMatrix::assemble(m, big_k, values, us, params, sizes, hex::encode(hasher.finalize()))
}
