//! False discovery proportion, power and their Monte Carlo summaries.

use serde::Serialize;

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::select::{Condition, Target};

/// `#{selected, not inside} / max(1, |selected|)`.
pub fn fdp_from_membership(selected: &[usize], inside: &[bool]) -> f64 {
    let false_hits = selected.iter().filter(|&&j| !inside[j]).count();
    false_hits as f64 / selected.len().max(1) as f64
}

/// `#{selected, inside} / max(1, #inside)`.
pub fn power_from_membership(selected: &[usize], inside: &[bool]) -> f64 {
    let hits = selected.iter().filter(|&&j| inside[j]).count();
    let positives = inside.iter().filter(|&&b| b).count();
    hits as f64 / positives.max(1) as f64
}

fn check_indices(selected: &[usize], m: usize) -> Result<()> {
    if let Some(&j) = selected.iter().find(|&&j| j >= m) {
        return Err(Error::invalid(format!(
            "selected index {j} out of range for {m} test samples"
        )));
    }
    Ok(())
}

/// Sample-level false discovery proportion against the true responses.
pub fn fdp(selected: &[usize], truth: &Matrix, target: &Target) -> Result<f64> {
    check_indices(selected, truth.rows())?;
    Ok(fdp_from_membership(selected, &target.membership(truth)?))
}

pub fn power(selected: &[usize], truth: &Matrix, target: &Target) -> Result<f64> {
    check_indices(selected, truth.rows())?;
    Ok(power_from_membership(selected, &target.membership(truth)?))
}

/// Fraction of selected `(j, k)` claims with `y_j` outside condition `k`.
pub fn fdp_pair(pairs: &[(usize, usize)], truth: &Matrix, conditions: &[Condition]) -> Result<f64> {
    let mut false_hits = 0;
    for &(j, k) in pairs {
        let cond = conditions
            .get(k)
            .ok_or_else(|| Error::invalid(format!("condition index {k} out of range")))?;
        check_indices(&[j], truth.rows())?;
        if !cond.contains(truth.row(j))? {
            false_hits += 1;
        }
    }
    Ok(false_hits as f64 / pairs.len().max(1) as f64)
}

/// Fraction of selected pairs whose sample lies outside the whole target.
/// Never exceeds [`fdp_pair`], because a response outside the union is
/// outside every member.
pub fn fdp_pair_outside_target(pairs: &[(usize, usize)], truth: &Matrix, target: &Target) -> Result<f64> {
    let inside = target.membership(truth)?;
    let j: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    check_indices(&j, truth.rows())?;
    Ok(fdp_from_membership(&j, &inside))
}

/// Mean and standard error over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// `sd / sqrt(R)` with the `R - 1` sample standard deviation; 0 when
    /// `R = 1`.
    pub se: f64,
    pub count: usize,
    /// Set when only one replication was available, so `se` means nothing.
    pub single_replication: bool,
}

pub fn aggregate(values: &[f64]) -> Result<Summary> {
    let r = values.len();
    if r == 0 {
        return Err(Error::invalid("cannot aggregate zero replications"));
    }
    let mean = values.iter().sum::<f64>() / r as f64;
    let se = if r > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
        (var / r as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary {
        mean,
        se,
        count: r,
        single_replication: r == 1,
    })
}
