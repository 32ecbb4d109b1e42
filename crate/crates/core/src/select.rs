//! Benjamini–Hochberg selection over (candidate, condition) pairs and the
//! end-to-end selection pipelines for interval and region targets.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureSet, LabeledSet, Matrix};
use crate::error::{Error, Result};
use crate::predictor::PredictorConfig;
use crate::pvalue::{pvalue_matrix, PValueMatrix, PValueOptions};
use crate::region::RegionSpec;
use crate::rng::TieBreakStream;
use crate::target::TargetSpec;

pub use crate::score::Condition;

/// Either an interval union for scalar responses or a list of regions for
/// vector responses; a response is in the target if it is in any member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Intervals(TargetSpec),
    Regions(Vec<RegionSpec>),
}

impl Target {
    pub fn validate(&self) -> Result<()> {
        if let Target::Regions(regions) = self {
            let first = regions
                .first()
                .ok_or_else(|| Error::invalid("need at least one region"))?;
            for r in regions {
                r.validate()?;
                if r.dim() != first.dim() {
                    return Err(Error::DimensionMismatch {
                        context: "region dimensions",
                        expected: first.dim(),
                        got: r.dim(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn response_dim(&self) -> usize {
        match self {
            Target::Intervals(_) => 1,
            Target::Regions(r) => r.first().map_or(0, RegionSpec::dim),
        }
    }

    /// One p-value column per interval, shell or ball.
    pub fn conditions(&self) -> Vec<Condition> {
        match self {
            Target::Intervals(t) => Condition::from_target(t),
            Target::Regions(r) => region_conditions(r),
        }
    }

    pub fn contains(&self, y: &[f64]) -> Result<bool> {
        match self {
            Target::Intervals(t) => {
                if y.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        context: "interval response",
                        expected: 1,
                        got: y.len(),
                    });
                }
                Ok(t.contains(y[0]))
            }
            Target::Regions(rs) => {
                for r in rs {
                    if r.contains(y)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    /// Membership of every row of `responses`.
    pub fn membership(&self, responses: &Matrix) -> Result<Vec<bool>> {
        responses.iter_rows().map(|y| self.contains(y)).collect()
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Intervals(t) => write!(f, "{t}"),
            Target::Regions(rs) => {
                for (i, r) in rs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " U ")?;
                    }
                    match r {
                        RegionSpec::Shell { r_inner, r_outer, .. } => write!(f, "shell({r_inner}, {r_outer})")?,
                        RegionSpec::BallUnion(b) => write!(f, "balls({})", b.len())?,
                        RegionSpec::CentroidBall { radius, .. } => write!(f, "centroid_ball({radius})")?,
                    }
                }
                Ok(())
            }
        }
    }
}

/// Selection for any target with precomputed predictions.
pub fn select_target(
    cal_preds: &Matrix,
    cal_responses: &Matrix,
    test_preds: &Matrix,
    target: &Target,
    q: f64,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Selection> {
    match target {
        Target::Intervals(t) => mccs_with_predictions(cal_preds, cal_responses, test_preds, t, q, options, ties),
        Target::Regions(r) => mrcs_with_predictions(cal_preds, cal_responses, test_preds, r, q, options, ties),
    }
}

pub(crate) fn check_level(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("FDR level q must lie in (0, 1), got {q}")));
    }
    Ok(())
}

/// Largest `l` with `p_(l) <= q l / N`, or 0.
fn cut_index(pvalues: &[f64], q: f64) -> usize {
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    (1..=sorted.len())
        .rev()
        .find(|&l| sorted[l - 1] <= q * l as f64 / n)
        .unwrap_or(0)
}

/// Step-up BH: indices (ascending) of p-values at or below `q l* / N`.
pub fn bh(pvalues: &[f64], q: f64) -> Result<Vec<usize>> {
    check_level(q)?;
    if pvalues.is_empty() {
        return Err(Error::invalid("BH needs at least one p-value"));
    }
    let l = cut_index(pvalues, q);
    if l == 0 {
        return Ok(Vec::new());
    }
    let cutoff = q * l as f64 / pvalues.len() as f64;
    Ok((0..pvalues.len()).filter(|&i| pvalues[i] <= cutoff).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    /// `(j, k)` pairs, sorted.
    pub pairs: Vec<(usize, usize)>,
    /// Distinct test indices among `pairs`, sorted.
    pub samples: Vec<usize>,
    pub cut_index: usize,
    /// `q l* / NUM`; 0 when nothing is selected.
    pub cutoff: f64,
    /// Number of hypotheses, `m K`.
    pub num_tests: usize,
}

impl SelectionResult {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn contains_pair(&self, j: usize, k: usize) -> bool {
        self.pairs.binary_search(&(j, k)).is_ok()
    }

    /// Writes `j, k, p, selected` for every matrix entry, with a leading
    /// `method` column when `method` is given.
    pub fn write_csv(&self, path: impl AsRef<Path>, pvalues: &PValueMatrix, method: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let mut header = vec!["j", "k", "p", "selected"];
        if method.is_some() {
            header.insert(0, "method");
        }
        w.write_record(&header).map_err(|e| Error::io(path, e.into()))?;
        for j in 0..pvalues.num_samples() {
            for k in 0..pvalues.num_conditions() {
                let mut rec = vec![
                    j.to_string(),
                    k.to_string(),
                    pvalues.get(j, k).to_string(),
                    u8::from(self.contains_pair(j, k)).to_string(),
                ];
                if let Some(m) = method {
                    rec.insert(0, m.to_owned());
                }
                w.write_record(&rec).map_err(|e| Error::io(path, e.into()))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// `cut_index`, `cutoff` and counts, as written to `result.json`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "cut_index": self.cut_index,
            "cutoff": self.cutoff,
            "counts": {
                "pairs": self.pairs.len(),
                "samples": self.samples.len(),
                "tests": self.num_tests,
            },
            "samples": self.samples,
        })
    }
}

/// BH over all `m K` entries of the matrix jointly.
pub fn global_bh(matrix: &PValueMatrix, q: f64) -> Result<SelectionResult> {
    check_level(q)?;
    let values = matrix.values();
    let big_k = matrix.num_conditions();
    let l = cut_index(values, q);
    let cutoff = if l == 0 {
        0.0
    } else {
        q * l as f64 / values.len() as f64
    };
    let pairs: Vec<(usize, usize)> = if l == 0 {
        Vec::new()
    } else {
        (0..values.len())
            .filter(|&i| values[i] <= cutoff)
            .map(|i| (i / big_k, i % big_k))
            .collect()
    };
    let samples: BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
    Ok(SelectionResult {
        pairs,
        samples: samples.into_iter().collect(),
        cut_index: l,
        cutoff,
        num_tests: values.len(),
    })
}

/// P-values and the selection made from them.
#[derive(Debug, Clone)]
pub struct Selection {
    pub pvalues: PValueMatrix,
    pub result: SelectionResult,
}

/// Global BH over arbitrary conditions with precomputed predictions.
pub fn select_conditions(
    cal_preds: &Matrix,
    cal_responses: &Matrix,
    test_preds: &Matrix,
    conditions: &[Condition],
    q: f64,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Selection> {
    check_level(q)?;
    let pvalues = pvalue_matrix(cal_preds, cal_responses, test_preds, conditions, options, ties)?;
    let result = global_bh(&pvalues, q)?;
    Ok(Selection { pvalues, result })
}

fn require_dim(responses: &Matrix, want: usize, context: &'static str) -> Result<()> {
    if responses.cols() != want {
        return Err(Error::DimensionMismatch {
            context,
            expected: want,
            got: responses.cols(),
        });
    }
    Ok(())
}

/// Interval-union selection from predictions for calibration and test rows.
pub fn mccs_with_predictions(
    cal_preds: &Matrix,
    cal_responses: &Matrix,
    test_preds: &Matrix,
    target: &TargetSpec,
    q: f64,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Selection> {
    require_dim(cal_responses, 1, "univariate responses")?;
    select_conditions(
        cal_preds,
        cal_responses,
        test_preds,
        &Condition::from_target(target),
        q,
        options,
        ties,
    )
}

/// Fits the predictor on `train`, then selects test rows whose responses
/// are claimed to lie in `target`.
#[allow(clippy::too_many_arguments)]
pub fn mccs(
    train: &LabeledSet,
    cal: &LabeledSet,
    test: &FeatureSet,
    target: &TargetSpec,
    q: f64,
    predictor: &PredictorConfig,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Selection> {
    require_dim(train.responses(), 1, "univariate responses")?;
    let model = predictor.fit(train)?;
    let cal_preds = model.predict(cal.features())?;
    let test_preds = model.predict(test.features())?;
    mccs_with_predictions(&cal_preds, cal.responses(), &test_preds, target, q, options, ties)
}

/// Columns for a list of regions: ball unions contribute one per ball.
pub fn region_conditions(regions: &[RegionSpec]) -> Vec<Condition> {
    regions.iter().flat_map(Condition::from_region).collect()
}

pub fn mrcs_with_predictions(
    cal_preds: &Matrix,
    cal_responses: &Matrix,
    test_preds: &Matrix,
    regions: &[RegionSpec],
    q: f64,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Selection> {
    if regions.is_empty() {
        return Err(Error::invalid("need at least one region"));
    }
    for r in regions {
        r.validate()?;
        require_dim(cal_responses, r.dim(), "region dimension vs responses")?;
    }
    select_conditions(
        cal_preds,
        cal_responses,
        test_preds,
        &region_conditions(regions),
        q,
        options,
        ties,
    )
}

/// Region selection for vector responses.
#[allow(clippy::too_many_arguments)]
pub fn mrcs(
    train: &LabeledSet,
    cal: &LabeledSet,
    test: &FeatureSet,
    regions: &[RegionSpec],
    q: f64,
    predictor: &PredictorConfig,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Selection> {
    if let Some(r) = regions.first() {
        require_dim(train.responses(), r.dim(), "region dimension vs responses")?;
    }
    let model = predictor.fit(train)?;
    let cal_preds = model.predict(cal.features())?;
    let test_preds = model.predict(test.features())?;
    mrcs_with_predictions(&cal_preds, cal.responses(), &test_preds, regions, q, options, ties)
}
