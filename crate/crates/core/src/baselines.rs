//! Comparison procedures: per-condition conformal BH combined by
//! intersection or union, their Bonferroni-split variants, and the
//! indicator-regression method.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureSet, LabeledSet, Matrix};
use crate::error::{Error, Result};
use crate::predictor::PredictorConfig;
use crate::pvalue::{pvalue_matrix, PValueMatrix, PValueOptions};
use crate::region::{euclidean, RegionSpec};
use crate::rng::TieBreakStream;
use crate::score::Condition;
use crate::select::{bh, check_level, select_conditions, Target};
use crate::target::{Interval, TargetSpec};

/// Single threshold condition `y > c` or `y < c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Greater(f64),
    Less(f64),
}

impl Threshold {
    pub fn interval(self) -> Result<Interval> {
        match self {
            Threshold::Greater(c) => Interval::above(c),
            Threshold::Less(c) => Interval::below(c),
        }
    }
}

/// One-column conformal BH on a single condition, from predictions.
pub fn select_single(
    cal_preds: &Matrix,
    cal_responses: &Matrix,
    test_preds: &Matrix,
    condition: Condition,
    q: f64,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Vec<usize>> {
    Ok(
        select_conditions(cal_preds, cal_responses, test_preds, &[condition], q, options, ties)?
            .result
            .samples,
    )
}

/// Conformal BH for `y > c` or `y < c` with precomputed predictions.
pub fn cfbh_single_with_predictions(
    cal_preds: &Matrix,
    cal_responses: &Matrix,
    test_preds: &Matrix,
    threshold: Threshold,
    q: f64,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Vec<usize>> {
    let cond = Condition::Interval(threshold.interval()?);
    select_single(cal_preds, cal_responses, test_preds, cond, q, options, ties)
}

#[allow(clippy::too_many_arguments)]
pub fn cfbh_single(
    train: &LabeledSet,
    cal: &LabeledSet,
    test: &FeatureSet,
    threshold: Threshold,
    q: f64,
    predictor: &PredictorConfig,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Vec<usize>> {
    let model = predictor.fit(train)?;
    cfbh_single_with_predictions(
        &model.predict(cal.features())?,
        cal.responses(),
        &model.predict(test.features())?,
        threshold,
        q,
        options,
        ties,
    )
}

pub fn combine_int(a: &[usize], b: &[usize]) -> Vec<usize> {
    let b: BTreeSet<usize> = b.iter().copied().collect();
    let out: BTreeSet<usize> = a.iter().copied().filter(|x| b.contains(x)).collect();
    out.into_iter().collect()
}

pub fn combine_uni(a: &[usize], b: &[usize]) -> Vec<usize> {
    let out: BTreeSet<usize> = a.iter().chain(b).copied().collect();
    out.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    #[serde(rename = "int")]
    Int,
    #[serde(rename = "uni")]
    Uni,
    #[serde(rename = "int-b")]
    IntB,
    #[serde(rename = "uni-b")]
    UniB,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Int => "int",
            BaselineKind::Uni => "uni",
            BaselineKind::IntB => "int-b",
            BaselineKind::UniB => "uni-b",
        }
    }
}

/// Conditions tested one column at a time by a baseline.
///
/// `Int` needs a target made of one bounded interval `(c1, c2)` and tests
/// `y > c1` and `y < c2`. `Uni` tests each interval or ball of the target.
pub fn branch_conditions(kind: BaselineKind, target: &Target) -> Result<Vec<Condition>> {
    match kind {
        BaselineKind::Int | BaselineKind::IntB => {
            let (c1, c2) = int_bounds(target)?;
            Ok(vec![
                Condition::Interval(Threshold::Greater(c1).interval()?),
                Condition::Interval(Threshold::Less(c2).interval()?),
            ])
        }
        BaselineKind::Uni | BaselineKind::UniB => Ok(target.conditions()),
    }
}

/// One p-value column per branch, each with its own `M` and its own
/// tie-breaking salt. Shared by a baseline and its Bonferroni variant.
pub fn branch_pvalues(
    kind: BaselineKind,
    cal_preds: &Matrix,
    cal_responses: &Matrix,
    test_preds: &Matrix,
    target: &Target,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<PValueMatrix> {
    let parts: Result<Vec<PValueMatrix>> = branch_conditions(kind, target)?
        .into_iter()
        .enumerate()
        .map(|(b, cond)| {
            pvalue_matrix(
                cal_preds,
                cal_responses,
                test_preds,
                &[cond],
                options,
                &ties.salted(b as u64 + 1),
            )
        })
        .collect();
    PValueMatrix::hstack(&parts?)
}

/// Samples selected by a baseline and the `(j, branch)` claims behind them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BranchSelection {
    pub samples: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
}

/// Runs BH on each branch column and combines: intersection for `Int`,
/// union for `Uni`. The `-B` variants use `q / branches` per branch.
pub fn select_branches(kind: BaselineKind, pvalues: &PValueMatrix, q: f64) -> Result<BranchSelection> {
    check_level(q)?;
    let branches = pvalues.num_conditions();
    let level = match kind {
        BaselineKind::IntB | BaselineKind::UniB => q / branches as f64,
        _ => q,
    };
    let per_branch: Result<Vec<Vec<usize>>> = (0..branches).map(|b| bh(&pvalues.column(b), level)).collect();
    let per_branch = per_branch?;
    let samples = match kind {
        BaselineKind::Int | BaselineKind::IntB => per_branch
            .iter()
            .skip(1)
            .fold(per_branch[0].clone(), |acc, s| combine_int(&acc, s)),
        BaselineKind::Uni | BaselineKind::UniB => per_branch.iter().fold(Vec::new(), |acc, s| combine_uni(&acc, s)),
    };
    let mut pairs: Vec<(usize, usize)> = match kind {
        BaselineKind::Int | BaselineKind::IntB => samples
            .iter()
            .flat_map(|&j| (0..branches).map(move |b| (j, b)))
            .collect(),
        BaselineKind::Uni | BaselineKind::UniB => per_branch
            .iter()
            .enumerate()
            .flat_map(|(b, s)| s.iter().map(move |&j| (j, b)))
            .collect(),
    };
    pairs.sort_unstable();
    Ok(BranchSelection { samples, pairs })
}

/// Runs a baseline with precomputed predictions and returns the selected
/// test indices.
#[allow(clippy::too_many_arguments)]
pub fn run_baseline_with_predictions(
    kind: BaselineKind,
    cal_preds: &Matrix,
    cal_responses: &Matrix,
    test_preds: &Matrix,
    target: &Target,
    q: f64,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Vec<usize>> {
    check_level(q)?;
    let pv = branch_pvalues(kind, cal_preds, cal_responses, test_preds, target, options, ties)?;
    Ok(select_branches(kind, &pv, q)?.samples)
}

fn int_bounds(target: &Target) -> Result<(f64, f64)> {
    if let Target::Intervals(t) = target {
        if let [iv] = t.intervals() {
            if let (Some(a), Some(b)) = (iv.lower(), iv.upper()) {
                return Ok((a, b));
            }
        }
    }
    Err(Error::invalid(format!(
        "the intersection baseline needs a single bounded interval, got {target}"
    )))
}

#[allow(clippy::too_many_arguments)]
pub fn run_baseline(
    kind: BaselineKind,
    train: &LabeledSet,
    cal: &LabeledSet,
    test: &FeatureSet,
    target: &Target,
    q: f64,
    predictor: &PredictorConfig,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Vec<usize>> {
    let model = predictor.fit(train)?;
    run_baseline_with_predictions(
        kind,
        &model.predict(cal.features())?,
        cal.responses(),
        &model.predict(test.features())?,
        target,
        q,
        options,
        ties,
    )
}

/// Polynomial whose sign is positive exactly inside an interval union.
///
/// Overlapping members are merged first. With the finite endpoints
/// `e_1 <= ... <= e_E` of the merged intervals, `f(t) = s * prod(t - e_i)`
/// where `s = +1` if the union is unbounded above and `-1` otherwise. For
/// `(a, b) U (c, d)` this is `-(t - a)(b - t)(t - c)(d - t)`. A union that
/// covers the whole line gives `f = 1`.
pub fn interval_indicator(target: &TargetSpec, t: f64) -> f64 {
    let merged = target.merged();
    let mut value = 1.0;
    for &(lo, hi) in &merged {
        if lo.is_finite() {
            value *= t - lo;
        }
        if hi.is_finite() {
            value *= t - hi;
        }
    }
    let unbounded_above = merged.last().is_some_and(|iv| iv.1.is_infinite());
    if unbounded_above {
        value
    } else {
        -value
    }
}

/// Sign-coded membership for regions.
///
/// Pairwise disjoint balls use `-prod(|u - h_i|^2 - r_i^2)`. When balls
/// overlap the product changes sign inside the intersection, so the
/// transform falls back to `max_i(r_i^2 - |u - h_i|^2)`. A shell maps to
/// `(rho^2 - r_in^2)(r_out^2 - rho^2)`; several regions combine by `max`.
pub fn region_indicator(region: &RegionSpec, u: &[f64]) -> Result<f64> {
    if u.len() != region.dim() {
        return Err(Error::DimensionMismatch {
            context: "indicator point",
            expected: region.dim(),
            got: u.len(),
        });
    }
    Ok(match region {
        RegionSpec::Shell {
            center,
            r_inner,
            r_outer,
        } => {
            let rho2 = euclidean(u, center).powi(2);
            (rho2 - r_inner * r_inner) * (r_outer * r_outer - rho2)
        }
        RegionSpec::CentroidBall { center, radius } => radius * radius - euclidean(u, center).powi(2),
        RegionSpec::BallUnion(balls) => {
            let disjoint = balls.iter().enumerate().all(|(i, a)| {
                balls[i + 1..]
                    .iter()
                    .all(|b| euclidean(&a.center, &b.center) >= a.radius + b.radius)
            });
            if disjoint {
                -balls
                    .iter()
                    .map(|b| euclidean(u, &b.center).powi(2) - b.radius * b.radius)
                    .product::<f64>()
            } else {
                balls
                    .iter()
                    .map(|b| b.radius * b.radius - euclidean(u, &b.center).powi(2))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    })
}

/// Transformed response `z` with `z > 0` exactly when `y` is in the
/// target (away from boundaries, where `z = 0`).
pub fn indicator_transform(target: &Target, y: &[f64]) -> Result<f64> {
    match target {
        Target::Intervals(t) => {
            if y.len() != 1 {
                return Err(Error::DimensionMismatch {
                    context: "indicator response",
                    expected: 1,
                    got: y.len(),
                });
            }
            Ok(interval_indicator(t, y[0]))
        }
        Target::Regions(rs) => {
            if let [one] = rs.as_slice() {
                return region_indicator(one, y);
            }
            let mut best = f64::NEG_INFINITY;
            for r in rs {
                best = best.max(region_indicator(r, y)?);
            }
            Ok(best)
        }
    }
}

/// `z` for every row of `responses`, as a column.
pub fn transform_responses(target: &Target, responses: &Matrix) -> Result<Matrix> {
    let z: Result<Vec<f64>> = responses.iter_rows().map(|y| indicator_transform(target, y)).collect();
    let z = z?;
    if let Some(bad) = z.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("indicator transform overflowed ({bad})")));
    }
    Matrix::column_vector(z)
}

/// p-values for `z > 0` given predictions of `z`.
pub fn ind_pvalues(
    cal_z_preds: &Matrix,
    cal_z: &Matrix,
    test_z_preds: &Matrix,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<PValueMatrix> {
    let cond = Condition::Interval(Threshold::Greater(0.0).interval()?);
    pvalue_matrix(
        cal_z_preds,
        cal_z,
        test_z_preds,
        &[cond],
        options,
        &ties.salted(IND_SALT),
    )
}

/// Ind from predictions of `z`: conformal BH for `z > 0`.
pub fn run_ind_with_predictions(
    cal_z_preds: &Matrix,
    cal_z: &Matrix,
    test_z_preds: &Matrix,
    q: f64,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Vec<usize>> {
    let pv = ind_pvalues(cal_z_preds, cal_z, test_z_preds, options, ties)?;
    bh(&pv.column(0), q)
}

const IND_SALT: u64 = 1 << 32;

/// Regresses `z = indicator_transform(y)` on the features with the given
/// predictor family, then selects `z > 0`.
#[allow(clippy::too_many_arguments)]
pub fn run_ind(
    train: &LabeledSet,
    cal: &LabeledSet,
    test: &FeatureSet,
    target: &Target,
    q: f64,
    predictor: &PredictorConfig,
    options: &PValueOptions,
    ties: &TieBreakStream,
) -> Result<Vec<usize>> {
    let z_train = LabeledSet::new(
        train.features().clone(),
        transform_responses(target, train.responses())?,
    )?;
    let cal_z = transform_responses(target, cal.responses())?;
    let model = predictor.fit(&z_train)?;
    run_ind_with_predictions(
        &model.predict(cal.features())?,
        &cal_z,
        &model.predict(test.features())?,
        q,
        options,
        ties,
    )
}
