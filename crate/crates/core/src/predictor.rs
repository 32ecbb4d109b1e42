//! Point predictors and externally supplied predictions.
//!
//! Every model is multi-output: a response matrix with `d` columns is fitted
//! with one factorization of the (kernel) normal equations and `d` solves.
//! Responses are centered before solving, which is the same as an
//! unpenalized intercept.

use std::collections::HashSet;
use std::path::Path;

use faer::prelude::*;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::data::{FeatureSet, LabeledSet, Matrix};
use crate::error::{Error, Result};

/// Pivot ratio below which a factorization counts as singular.
const RANK_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorConfig {
    Ridge {
        lambda: f64,
        #[serde(default = "yes")]
        fit_intercept: bool,
    },
    /// `gamma = None` picks `1 / (p * var(features))`.
    KernelRidgeRbf {
        lambda: f64,
        #[serde(default)]
        gamma: Option<f64>,
    },
    MultiOutputRidge {
        lambda: f64,
    },
}

fn yes() -> bool {
    true
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig::KernelRidgeRbf {
            lambda: 1.0,
            gamma: None,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PredictorConfig::Ridge { lambda, .. } | PredictorConfig::MultiOutputRidge { lambda } => {
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return Err(Error::invalid(format!("ridge penalty must be >= 0, got {lambda}")));
                }
            }
            PredictorConfig::KernelRidgeRbf { lambda, gamma } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::invalid(format!(
                        "kernel ridge penalty must be > 0, got {lambda}"
                    )));
                }
                if let Some(g) = gamma {
                    if !(g > 0.0 && g.is_finite()) {
                        return Err(Error::invalid(format!("RBF bandwidth must be > 0, got {g}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Fits on all response columns of `train`.
    pub fn fit(&self, train: &LabeledSet) -> Result<FittedModel> {
        fit(self, train.features(), train.responses())
    }
}

#[derive(Debug, Clone)]
enum Fitted {
    Linear {
        /// p × d
        coef: Mat<f64>,
        intercept: Vec<f64>,
    },
    Kernel {
        train: Mat<f64>,
        train_sq_norms: Vec<f64>,
        gamma: f64,
        /// n × d
        alpha: Mat<f64>,
        offset: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    inner: Fitted,
    feature_dim: usize,
    response_dim: usize,
}

/// Closed-form fit of `config` on `features` (n × p) and `responses` (n × d).
pub fn fit(config: &PredictorConfig, features: &Matrix, responses: &Matrix) -> Result<FittedModel> {
    config.validate()?;
    let n = features.rows();
    if n == 0 {
        return Err(Error::invalid("cannot fit a predictor on zero rows"));
    }
    if responses.rows() != n {
        return Err(Error::DimensionMismatch {
            context: "training responses",
            expected: n,
            got: responses.rows(),
        });
    }
    let p = features.cols();
    let d = responses.cols();
    let inner = match *config {
        PredictorConfig::Ridge { lambda, fit_intercept } => fit_linear(features, responses, lambda, fit_intercept)?,
        PredictorConfig::MultiOutputRidge { lambda } => fit_linear(features, responses, lambda, true)?,
        PredictorConfig::KernelRidgeRbf { lambda, gamma } => {
            let gamma = match gamma {
                Some(g) => g,
                None => default_gamma(features),
            };
            fit_kernel(features, responses, lambda, gamma)?
        }
    };
    Ok(FittedModel {
        inner,
        feature_dim: p,
        response_dim: d,
    })
}

/// `1 / (p * var)`, with the variance taken over every feature entry. Falls
/// back to `1 / p` for constant features.
pub fn default_gamma(features: &Matrix) -> f64 {
    let p = features.cols().max(1) as f64;
    let vals = features.as_slice();
    if vals.is_empty() {
        return 1.0 / p;
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    if var > 0.0 {
        1.0 / (p * var)
    } else {
        1.0 / p
    }
}

fn to_mat(m: &Matrix) -> Mat<f64> {
    Mat::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j))
}

fn column_means(m: &Matrix) -> Vec<f64> {
    let n = m.rows().max(1) as f64;
    let mut out = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Solves `a x = rhs` for symmetric positive definite `a`, reporting
/// numerically singular systems as rank deficient.
fn spd_solve(a: &Mat<f64>, rhs: &Mat<f64>, what: &str) -> Result<Mat<f64>> {
    let llt = a
        .cholesky(Side::Lower)
        .map_err(|_| Error::RankDeficient(format!("{what}: matrix is not positive definite")))?;
    let l = llt.compute_l();
    let max_diag = (0..a.nrows()).map(|i| a.read(i, i).abs()).fold(0.0, f64::max);
    let min_pivot = (0..l.nrows())
        .map(|i| l.read(i, i) * l.read(i, i))
        .fold(f64::INFINITY, f64::min);
    // negated so a NaN pivot also counts as deficient
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if a.nrows() > 0 && !(min_pivot > RANK_TOL * max_diag.max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient(format!(
            "{what}: pivot ratio {:.3e}",
            min_pivot / max_diag
        )));
    }
    Ok(llt.solve(rhs))
}

fn fit_linear(features: &Matrix, responses: &Matrix, lambda: f64, intercept: bool) -> Result<Fitted> {
    let (n, p, d) = (features.rows(), features.cols(), responses.cols());
    let (x_mean, y_mean) = if intercept {
        (column_means(features), column_means(responses))
    } else {
        (vec![0.0; p], vec![0.0; d])
    };
    let x = Mat::from_fn(n, p, |i, j| features.get(i, j) - x_mean[j]);
    let y = Mat::from_fn(n, d, |i, j| responses.get(i, j) - y_mean[j]);
    let mut gram = x.transpose() * &x;
    for i in 0..p {
        gram.write(i, i, gram.read(i, i) + lambda);
    }
    let xty = x.transpose() * &y;
    let coef = if p == 0 {
        Mat::zeros(0, d)
    } else {
        spd_solve(&gram, &xty, "ridge normal equations")?
    };
    let intercept = (0..d)
        .map(|k| y_mean[k] - (0..p).map(|j| x_mean[j] * coef.read(j, k)).sum::<f64>())
        .collect();
    Ok(Fitted::Linear { coef, intercept })
}

fn sq_norms(x: &Mat<f64>) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| (0..x.ncols()).map(|j| x.read(i, j) * x.read(i, j)).sum())
        .collect()
}

/// `exp(-gamma |a_i - b_j|^2)` for every row pair.
fn rbf_kernel(a: &Mat<f64>, a_sq: &[f64], b: &Mat<f64>, b_sq: &[f64], gamma: f64) -> Mat<f64> {
    let cross = a * b.transpose();
    Mat::from_fn(a.nrows(), b.nrows(), |i, j| {
        let dist = (a_sq[i] + b_sq[j] - 2.0 * cross.read(i, j)).max(0.0);
        (-gamma * dist).exp()
    })
}

fn fit_kernel(features: &Matrix, responses: &Matrix, lambda: f64, gamma: f64) -> Result<Fitted> {
    let (n, d) = (features.rows(), responses.cols());
    let train = to_mat(features);
    let train_sq_norms = sq_norms(&train);
    let offset = column_means(responses);
    let y = Mat::from_fn(n, d, |i, k| responses.get(i, k) - offset[k]);
    let mut kernel = rbf_kernel(&train, &train_sq_norms, &train, &train_sq_norms, gamma);
    for i in 0..n {
        kernel.write(i, i, kernel.read(i, i) + lambda);
    }
    let alpha = spd_solve(&kernel, &y, "kernel system")?;
    Ok(Fitted::Kernel {
        train,
        train_sq_norms,
        gamma,
        alpha,
        offset,
    })
}

impl FittedModel {
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn response_dim(&self) -> usize {
        self.response_dim
    }

    /// Predictions for each row of `features`, one column per response.
    pub fn predict(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                context: "prediction features",
                expected: self.feature_dim,
                got: features.cols(),
            });
        }
        let x = to_mat(features);
        let (raw, shift) = match &self.inner {
            Fitted::Linear { coef, intercept } => (&x * coef, intercept),
            Fitted::Kernel {
                train,
                train_sq_norms,
                gamma,
                alpha,
                offset,
            } => {
                let k = rbf_kernel(&x, &sq_norms(&x), train, train_sq_norms, *gamma);
                (&k * alpha, offset)
            }
        };
        let d = self.response_dim;
        let mut data = Vec::with_capacity(features.rows() * d);
        for i in 0..features.rows() {
            for (k, s) in shift.iter().enumerate() {
                data.push(raw.read(i, k) + s);
            }
        }
        Matrix::new(features.rows(), d, data)
    }

    pub fn predict_set(&self, test: &FeatureSet) -> Result<PredictionTable> {
        PredictionTable::new(self.predict(test.features())?)
    }

    /// Linear coefficients (p × d, row-major) and intercepts; `None` for
    /// kernel models.
    pub fn linear_coefficients(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.inner {
            Fitted::Linear { coef, intercept } => {
                let mut flat = Vec::with_capacity(coef.nrows() * coef.ncols());
                for i in 0..coef.nrows() {
                    for k in 0..coef.ncols() {
                        flat.push(coef.read(i, k));
                    }
                }
                Some((flat, intercept.clone()))
            }
            Fitted::Kernel { .. } => None,
        }
    }
}

/// Predictions for the test candidates; row `j` belongs to test sample `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    values: Matrix,
}

impl PredictionTable {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 {
            return Err(Error::invalid("prediction table must have at least one row"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }
}

/// Reads `id, yhat_1..yhat_d`. Rows may appear in any order but the ids must
/// be exactly `0..m-1`; the table is returned in id order.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionTable> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::data(path, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::data(path, "missing id column"))?;
    let mut value_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(pos, h)| h.strip_prefix("yhat_")?.parse().ok().map(|k: usize| (k, pos)))
        .collect();
    value_cols.sort_unstable();
    if value_cols.is_empty() {
        return Err(Error::data(path, "no yhat_ columns in header"));
    }
    if value_cols.iter().map(|c| c.0).ne(1..=value_cols.len()) {
        return Err(Error::data(path, "yhat_* columns must be numbered 1..d without gaps"));
    }

    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut seen = HashSet::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(path, e.to_string()))?;
        let raw_id = rec[id_col].trim();
        let id: usize = raw_id
            .parse()
            .map_err(|_| Error::data(path, format!("row {}: bad id {raw_id:?}", r + 1)))?;
        if !seen.insert(id) {
            return Err(Error::data(path, format!("duplicate id {id}")));
        }
        let mut vals = Vec::with_capacity(value_cols.len());
        for &(k, pos) in &value_cols {
            let raw = rec[pos].trim();
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::data(path, format!("row {}: yhat_{k} is not a number", r + 1)))?;
            if !v.is_finite() {
                return Err(Error::data(path, format!("row {}: yhat_{k} is not finite", r + 1)));
            }
            vals.push(v);
        }
        rows.push((id, vals));
    }
    let m = rows.len();
    if let Some(bad) = rows.iter().find(|(id, _)| *id >= m) {
        return Err(Error::data(
            path,
            format!("ids must be 0..{}, found {}", m.saturating_sub(1), bad.0),
        ));
    }
    rows.sort_by_key(|r| r.0);
    let flat: Vec<Vec<f64>> = rows.into_iter().map(|r| r.1).collect();
    let values = Matrix::from_rows(&flat).map_err(|e| Error::data(path, e.to_string()))?;
    PredictionTable::new(values).map_err(|e| Error::data(path, e.to_string()))
}

/// Writes predictions in the format read by [`load_predictions`].
pub fn write_predictions(path: impl AsRef<Path>, table: &PredictionTable) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let mut header = vec!["id".to_owned()];
    header.extend((1..=table.dim()).map(|k| format!("yhat_{k}")));
    w.write_record(&header).map_err(|e| Error::io(path, e.into()))?;
    for (j, row) in table.values.iter_rows().enumerate() {
        let mut rec = vec![j.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
