//! Nonconformity scores that rank every in-target response above every
//! out-of-target response, given the same prediction.
//!
//! A score sees the response only through a membership bit, so a test score
//! can be evaluated without the response by fixing that bit (the branch).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{euclidean, Ball, Boundary, RegionSpec};
use crate::target::{Interval, TargetSpec};

/// One column of the p-value matrix: a single interval or a single region
/// piece. Ball unions are split into one condition per ball.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Interval(Interval),
    Region(RegionSpec),
}

impl Condition {
    pub fn from_target(target: &TargetSpec) -> Vec<Condition> {
        target.intervals().iter().copied().map(Condition::Interval).collect()
    }

    /// Shells and centroid balls map to one condition; a ball union to one
    /// per ball.
    pub fn from_region(region: &RegionSpec) -> Vec<Condition> {
        match region {
            RegionSpec::BallUnion(balls) => balls
                .iter()
                .map(|b| Condition::Region(RegionSpec::BallUnion(vec![b.clone()])))
                .collect(),
            other => vec![Condition::Region(other.clone())],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Condition::Interval(_) => 1,
            Condition::Region(r) => r.dim(),
        }
    }

    pub fn contains(&self, y: &[f64]) -> Result<bool> {
        match self {
            Condition::Interval(iv) => {
                check_len(y, 1, "interval response")?;
                Ok(iv.contains(y[0]))
            }
            Condition::Region(r) => r.contains(y),
        }
    }

    /// Largest distance from `pred` to any boundary of the condition.
    pub fn boundary_gap(&self, pred: &[f64]) -> Result<f64> {
        match self {
            Condition::Interval(iv) => {
                check_len(pred, 1, "interval prediction")?;
                let x = pred[0];
                let a = iv.lower().map_or(0.0, |a| (a - x).abs());
                let b = iv.upper().map_or(0.0, |b| (x - b).abs());
                Ok(a.max(b))
            }
            Condition::Region(r @ RegionSpec::Shell { .. }) => Ok(r
                .boundary_distance(pred, Boundary::Inner)?
                .max(r.boundary_distance(pred, Boundary::Outer)?)),
            Condition::Region(r) => {
                let (c, rad) = single_ball(r)?;
                check_len(pred, c.len(), "region prediction")?;
                Ok((euclidean(pred, c) - rad).abs())
            }
        }
    }
}

fn check_len(v: &[f64], want: usize, context: &'static str) -> Result<()> {
    if v.len() != want {
        return Err(Error::DimensionMismatch {
            context,
            expected: want,
            got: v.len(),
        });
    }
    Ok(())
}

fn single_ball(r: &RegionSpec) -> Result<(&[f64], f64)> {
    match r {
        RegionSpec::CentroidBall { center, radius } => Ok((center, *radius)),
        RegionSpec::BallUnion(balls) if balls.len() == 1 => {
            let Ball { center, radius } = &balls[0];
            Ok((center, *radius))
        }
        RegionSpec::BallUnion(_) => Err(Error::invalid(
            "ball unions are scored one ball at a time; split with Condition::from_region",
        )),
        RegionSpec::Shell { .. } => Err(Error::invalid("shell is not a single ball")),
    }
}

/// Which membership bit the response-free test score assumes. Conditions
/// with a single boundary (one-sided intervals, balls) always use `Outside`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestBranch {
    Inside,
    #[default]
    Outside,
}

/// How multivariate scores turn geometry into a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionRule {
    /// Signed radial distance, the multivariate analogue of the interval
    /// scores: outside a shell `max(r_in - rho, rho - r_out)`, outside a ball
    /// `rho - r`, where `rho = |pred - center|`.
    #[default]
    Radial,
    /// Unsigned sphere distances: shell outside `-max(d_in, d_out)`, ball
    /// outside `+d`.
    Unsigned,
}

/// Score options shared by every condition of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreOptions {
    pub test_branch: TestBranch,
    pub region_rule: RegionRule,
    /// Inside scores become the constant `M`, dropping the prediction term.
    pub omit_inside_offset: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub m: f64,
    pub test_branch: TestBranch,
    pub region_rule: RegionRule,
    pub omit_inside_offset: bool,
}

impl ScoreParams {
    pub fn new(m: f64, options: ScoreOptions) -> Self {
        Self {
            m,
            test_branch: options.test_branch,
            region_rule: options.region_rule,
            omit_inside_offset: options.omit_inside_offset,
        }
    }

    /// Params with `M` computed from `preds`.
    pub fn fit<'a>(
        preds: impl IntoIterator<Item = &'a [f64]>,
        condition: &Condition,
        options: ScoreOptions,
    ) -> Result<Self> {
        Ok(Self::new(compute_m(preds, condition)?, options))
    }
}

/// `2 s + 1` with `s` the largest boundary gap over `preds`.
pub fn compute_m<'a>(preds: impl IntoIterator<Item = &'a [f64]>, condition: &Condition) -> Result<f64> {
    let mut s: Option<f64> = None;
    for p in preds {
        let g = condition.boundary_gap(p)?;
        s = Some(s.map_or(g, |s: f64| s.max(g)));
    }
    let s = s.ok_or_else(|| Error::invalid("compute_m needs at least one prediction"))?;
    Ok(2.0 * s + 1.0)
}

/// Score for a bounded interval `(lo, hi)`.
pub fn conjunctive_score(pred: f64, iv: &Interval, inside: bool, params: &ScoreParams) -> Result<f64> {
    let (Some(lo), Some(hi)) = (iv.lower(), iv.upper()) else {
        return Err(Error::invalid(format!("{iv} is unbounded; use one_sided_score")));
    };
    Ok(if inside {
        if params.omit_inside_offset {
            params.m
        } else {
            params.m - (pred - lo).min(hi - pred)
        }
    } else {
        (lo - pred).max(pred - hi)
    })
}

/// Score for `(-inf, c)` (`M 1{inside} + pred`) or `(c, +inf)`
/// (`M 1{inside} - pred`).
pub fn one_sided_score(pred: f64, iv: &Interval, inside: bool, params: &ScoreParams) -> Result<f64> {
    let base = match (iv.lower(), iv.upper()) {
        (None, Some(_)) => pred,
        (Some(_), None) => -pred,
        _ => return Err(Error::invalid(format!("{iv} is bounded; use conjunctive_score"))),
    };
    Ok(if inside {
        if params.omit_inside_offset {
            params.m
        } else {
            params.m + base
        }
    } else {
        base
    })
}

/// Score for a shell or a single ball.
pub fn region_score(pred: &[f64], region: &RegionSpec, inside: bool, params: &ScoreParams) -> Result<f64> {
    if pred.len() != region.dim() {
        return Err(Error::DimensionMismatch {
            context: "region prediction",
            expected: region.dim(),
            got: pred.len(),
        });
    }
    let m = params.m;
    let radial = params.region_rule == RegionRule::Radial;
    let value = match region {
        RegionSpec::Shell {
            center,
            r_inner,
            r_outer,
        } => {
            let rho = euclidean(pred, center);
            let (d_in, d_out) = ((rho - r_inner).abs(), (rho - r_outer).abs());
            match (inside, radial) {
                (true, _) if params.omit_inside_offset => m,
                (true, true) => m - (rho - r_inner).min(r_outer - rho),
                (true, false) => m - d_in.min(d_out),
                (false, true) => (r_inner - rho).max(rho - r_outer),
                (false, false) => -d_in.max(d_out),
            }
        }
        other => {
            let (center, r) = single_ball(other)?;
            let rho = euclidean(pred, center);
            let d = (rho - r).abs();
            match (inside, radial) {
                (true, _) if params.omit_inside_offset => m,
                (true, true) => m + rho - r,
                (true, false) => m - d,
                (false, true) => rho - r,
                (false, false) => d,
            }
        }
    };
    Ok(value)
}

/// Score of any condition with a known membership bit.
pub fn condition_score(pred: &[f64], condition: &Condition, inside: bool, params: &ScoreParams) -> Result<f64> {
    match condition {
        Condition::Interval(iv) => {
            check_len(pred, 1, "interval prediction")?;
            if iv.is_bounded() {
                conjunctive_score(pred[0], iv, inside, params)
            } else {
                one_sided_score(pred[0], iv, inside, params)
            }
        }
        Condition::Region(r) => region_score(pred, r, inside, params),
    }
}

/// Response-free score for a test candidate, using `params.test_branch` for
/// two-boundary conditions and the outside branch otherwise.
pub fn test_score(pred: &[f64], condition: &Condition, params: &ScoreParams) -> Result<f64> {
    let two_sided = match condition {
        Condition::Interval(iv) => iv.is_bounded(),
        Condition::Region(r) => matches!(r, RegionSpec::Shell { .. }),
    };
    let inside = two_sided && params.test_branch == TestBranch::Inside;
    condition_score(pred, condition, inside, params)
}
