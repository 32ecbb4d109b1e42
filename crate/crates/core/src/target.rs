//! Univariate selection targets: finite unions of open intervals.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Open interval `(lower, upper)`. `None` marks an unbounded side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(Option<f64>, Option<f64>)", into = "(Option<f64>, Option<f64>)")]
pub struct Interval {
    lower: Option<f64>,
    upper: Option<f64>,
}

impl Interval {
    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Result<Self> {
        if lower.into_iter().chain(upper).any(|v| !v.is_finite()) {
            return Err(Error::invalid("interval bounds must be finite; use None for unbounded"));
        }
        match (lower, upper) {
            (None, None) => Err(Error::invalid("interval unbounded on both sides")),
            (Some(a), Some(b)) if a >= b => Err(Error::invalid(format!("interval ({a}, {b}) is empty"))),
            _ => Ok(Self { lower, upper }),
        }
    }

    /// `(lower, upper)`.
    pub fn bounded(lower: f64, upper: f64) -> Result<Self> {
        Self::new(Some(lower), Some(upper))
    }

    /// `(-inf, upper)`.
    pub fn below(upper: f64) -> Result<Self> {
        Self::new(None, Some(upper))
    }

    /// `(lower, +inf)`.
    pub fn above(lower: f64) -> Result<Self> {
        Self::new(Some(lower), None)
    }

    pub fn lower(&self) -> Option<f64> {
        self.lower
    }

    pub fn upper(&self) -> Option<f64> {
        self.upper
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_some() && self.upper.is_some()
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower.is_none_or(|a| y > a) && self.upper.is_none_or(|b| y < b)
    }
}

impl TryFrom<(Option<f64>, Option<f64>)> for Interval {
    type Error = Error;

    fn try_from((lower, upper): (Option<f64>, Option<f64>)) -> Result<Self> {
        Interval::new(lower, upper)
    }
}

impl From<Interval> for (Option<f64>, Option<f64>) {
    fn from(iv: Interval) -> Self {
        (iv.lower, iv.upper)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lower {
            Some(a) => write!(f, "({a}, ")?,
            None => write!(f, "(-inf, ")?,
        }
        match self.upper {
            Some(b) => write!(f, "{b})"),
            None => write!(f, "+inf)"),
        }
    }
}

/// Union of `K >= 1` open intervals. Members may overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct TargetSpec {
    intervals: Vec<Interval>,
}

impl TargetSpec {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::invalid("target needs at least one interval"));
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, y: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(y))
    }

    /// Disjoint open intervals `(lo, hi)` covering the same set, sorted left to
    /// right, with unbounded sides as infinities. Intervals that only touch at
    /// an endpoint stay separate because the shared endpoint is excluded from
    /// both. A union covering the whole line comes back as `(-inf, +inf)`.
    pub fn merged(&self) -> Vec<(f64, f64)> {
        let mut ivs: Vec<(f64, f64)> = self
            .intervals
            .iter()
            .map(|iv| (iv.lower.unwrap_or(f64::NEG_INFINITY), iv.upper.unwrap_or(f64::INFINITY)))
            .collect();
        ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(ivs.len());
        for (lo, hi) in ivs {
            match out.last_mut() {
                Some(last) if lo < last.1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        out
    }
}

impl TryFrom<Vec<Interval>> for TargetSpec {
    type Error = Error;

    fn try_from(v: Vec<Interval>) -> Result<Self> {
        TargetSpec::new(v)
    }
}

impl From<TargetSpec> for Vec<Interval> {
    fn from(t: TargetSpec) -> Self {
        t.intervals
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, " U ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn two_boxes() -> TargetSpec {
        TargetSpec::new(vec![
            Interval::bounded(0.0, 1.0).unwrap(),
            Interval::bounded(2.0, 3.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn membership_examples() {
        let t = two_boxes();
        assert!(t.contains(0.5));
        assert!(!t.contains(1.0));
        let below = TargetSpec::new(vec![Interval::below(2.0).unwrap()]).unwrap();
        assert!(below.contains(-1e6));
    }

    #[test]
    fn rejects_degenerate_intervals() {
        assert!(Interval::new(None, None).is_err());
        assert!(Interval::bounded(1.0, 1.0).is_err());
        assert!(Interval::bounded(2.0, 1.0).is_err());
        assert!(Interval::bounded(f64::NEG_INFINITY, 1.0).is_err());
        assert!(TargetSpec::new(vec![]).is_err());
    }

    #[test]
    fn merge_keeps_touching_intervals_apart() {
        let t = TargetSpec::new(vec![
            Interval::bounded(1.0, 2.0).unwrap(),
            Interval::bounded(0.0, 1.0).unwrap(),
            Interval::above(1.5).unwrap(),
        ])
        .unwrap();
        let m = t.merged();
        assert_eq!(m, vec![(0.0, 1.0), (1.0, f64::INFINITY)]);
    }

    #[test]
    fn serde_uses_null_for_unbounded() {
        let t = TargetSpec::new(vec![
            Interval::below(2.0).unwrap(),
            Interval::bounded(3.0, 4.0).unwrap(),
        ])
        .unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, "[[null,2.0],[3.0,4.0]]");
        let back: TargetSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<TargetSpec>("[[null,null]]").is_err());
    }

    fn arb_interval() -> impl Strategy<Value = Interval> {
        (-10.0f64..10.0, 0.01f64..5.0, 0u8..3).prop_map(|(a, w, kind)| match kind {
            0 => Interval::bounded(a, a + w).unwrap(),
            1 => Interval::below(a).unwrap(),
            _ => Interval::above(a).unwrap(),
        })
    }

    proptest! {
        #[test]
        fn membership_ignores_order_and_grows_with_union(
            ivs in prop::collection::vec(arb_interval(), 1..5),
            extra in arb_interval(),
            y in -20.0f64..20.0,
        ) {
            let t = TargetSpec::new(ivs.clone()).unwrap();
            let mut rev = ivs.clone();
            rev.reverse();
            prop_assert_eq!(t.contains(y), TargetSpec::new(rev).unwrap().contains(y));

            let mut more = ivs;
            more.push(extra);
            if t.contains(y) {
                prop_assert!(TargetSpec::new(more).unwrap().contains(y));
            }
        }

        #[test]
        fn merged_union_has_same_membership(
            ivs in prop::collection::vec(arb_interval(), 1..5),
            y in -20.0f64..20.0,
        ) {
            let t = TargetSpec::new(ivs).unwrap();
            let merged = t.merged();
            prop_assert_eq!(t.contains(y), merged.iter().any(|&(lo, hi)| y > lo && y < hi));
            for w in merged.windows(2) {
                prop_assert!(w[0].1 <= w[1].0);
            }
        }
    }
}
