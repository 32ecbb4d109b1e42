//! Multivariate selection targets built from Euclidean spheres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("ball center must have dimension >= 1"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("ball center must be finite"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        euclidean(y, &self.center) < self.radius
    }
}

/// Target region for vector-valued responses. All interiors are open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    /// `r_inner < |y - center| < r_outer`.
    Shell {
        center: Vec<f64>,
        r_inner: f64,
        r_outer: f64,
    },
    /// Inside at least one ball.
    BallUnion(Vec<Ball>),
    /// Ball around the centroid of a reference point cloud.
    CentroidBall { center: Vec<f64>, radius: f64 },
}

/// Which sphere of a region a boundary distance refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Inner,
    Outer,
    Ball(usize),
}

impl RegionSpec {
    pub fn shell(center: Vec<f64>, r_inner: f64, r_outer: f64) -> Result<Self> {
        Ball::new(center.clone(), r_outer)?;
        if !(r_inner > 0.0 && r_inner < r_outer) {
            return Err(Error::invalid(format!(
                "shell radii must satisfy 0 < r_inner < r_outer, got ({r_inner}, {r_outer})"
            )));
        }
        Ok(RegionSpec::Shell {
            center,
            r_inner,
            r_outer,
        })
    }

    pub fn ball_union(balls: Vec<Ball>) -> Result<Self> {
        let first = balls
            .first()
            .ok_or_else(|| Error::invalid("ball union must contain at least one ball"))?;
        let d = first.dim();
        if let Some(b) = balls.iter().find(|b| b.dim() != d) {
            return Err(Error::DimensionMismatch {
                context: "ball union centers",
                expected: d,
                got: b.dim(),
            });
        }
        Ok(RegionSpec::BallUnion(balls))
    }

    pub fn centroid_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Ball::new(center.clone(), radius)?;
        Ok(RegionSpec::CentroidBall { center, radius })
    }

    /// Re-checks invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            RegionSpec::Shell {
                center,
                r_inner,
                r_outer,
            } => RegionSpec::shell(center.clone(), *r_inner, *r_outer).map(drop),
            RegionSpec::BallUnion(balls) => {
                for b in balls {
                    Ball::new(b.center.clone(), b.radius)?;
                }
                RegionSpec::ball_union(balls.clone()).map(drop)
            }
            RegionSpec::CentroidBall { center, radius } => RegionSpec::centroid_ball(center.clone(), *radius).map(drop),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RegionSpec::Shell { center, .. } | RegionSpec::CentroidBall { center, .. } => center.len(),
            RegionSpec::BallUnion(balls) => balls[0].dim(),
        }
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "region point",
                expected: self.dim(),
                got: y.len(),
            });
        }
        Ok(())
    }

    pub fn contains(&self, y: &[f64]) -> Result<bool> {
        self.check_dim(y)?;
        Ok(match self {
            RegionSpec::Shell {
                center,
                r_inner,
                r_outer,
            } => {
                let r = euclidean(y, center);
                *r_inner < r && r < *r_outer
            }
            RegionSpec::BallUnion(balls) => balls.iter().any(|b| b.contains(y)),
            RegionSpec::CentroidBall { center, radius } => euclidean(y, center) < *radius,
        })
    }

    /// Unsigned distance from `point` to the chosen bounding sphere,
    /// `| |point - c| - r |`.
    pub fn boundary_distance(&self, point: &[f64], which: Boundary) -> Result<f64> {
        self.check_dim(point)?;
        let (center, radius) = match (self, which) {
            (RegionSpec::Shell { center, r_inner, .. }, Boundary::Inner) => (center, *r_inner),
            (RegionSpec::Shell { center, r_outer, .. }, Boundary::Outer) => (center, *r_outer),
            (RegionSpec::CentroidBall { center, radius }, Boundary::Outer | Boundary::Ball(0)) => (center, *radius),
            (RegionSpec::BallUnion(balls), Boundary::Ball(k)) => {
                let b = balls
                    .get(k)
                    .ok_or_else(|| Error::invalid(format!("ball index {k} out of range ({} balls)", balls.len())))?;
                (&b.center, b.radius)
            }
            (RegionSpec::BallUnion(balls), Boundary::Outer) if balls.len() == 1 => (&balls[0].center, balls[0].radius),
            _ => return Err(Error::invalid(format!("region has no {which:?} boundary"))),
        };
        Ok(sphere_distance(point, center, radius))
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn sphere_distance(point: &[f64], center: &[f64], radius: f64) -> f64 {
    (euclidean(point, center) - radius).abs()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn shell_membership() {
        let shell = RegionSpec::shell(vec![2.0, 2.0], 0.6, 1.0).unwrap();
        assert!(shell.contains(&[2.8, 2.0]).unwrap());
        assert!(!shell.contains(&[2.5, 2.0]).unwrap());
        assert!(shell.contains(&[2.0]).is_err());
    }

    #[test]
    fn ball_union_membership() {
        let r = RegionSpec::ball_union(vec![
            Ball::new(vec![0.0, 0.0], 1.0).unwrap(),
            Ball::new(vec![3.0, 0.0], 1.0).unwrap(),
        ])
        .unwrap();
        assert!(r.contains(&[3.2, 0.0]).unwrap());
        assert!(!r.contains(&[1.5, 0.0]).unwrap());
        // boundary is outside
        assert!(!r.contains(&[1.0, 0.0]).unwrap());
    }

    #[test]
    fn boundary_distances() {
        let shell = RegionSpec::shell(vec![0.0, 0.0], 0.6, 1.0).unwrap();
        let inner = shell.boundary_distance(&[0.8, 0.0], Boundary::Inner).unwrap();
        let outer = shell.boundary_distance(&[0.8, 0.0], Boundary::Outer).unwrap();
        assert!((inner - 0.2).abs() < 1e-12);
        assert!((outer - 0.2).abs() < 1e-12);

        let balls = RegionSpec::ball_union(vec![Ball::new(vec![0.0, 0.0], 1.0).unwrap()]).unwrap();
        assert_eq!(balls.boundary_distance(&[0.0, 0.0], Boundary::Ball(0)).unwrap(), 1.0);
        assert!(balls.boundary_distance(&[0.0, 0.0], Boundary::Inner).is_err());
        assert!(balls.boundary_distance(&[0.0, 0.0], Boundary::Ball(3)).is_err());
    }

    #[test]
    fn invalid_regions_rejected() {
        assert!(RegionSpec::shell(vec![0.0], 1.0, 1.0).is_err());
        assert!(RegionSpec::shell(vec![0.0], 0.0, 1.0).is_err());
        assert!(RegionSpec::ball_union(vec![]).is_err());
        assert!(RegionSpec::ball_union(vec![
            Ball::new(vec![0.0], 1.0).unwrap(),
            Ball::new(vec![0.0, 1.0], 1.0).unwrap()
        ])
        .is_err());
        assert!(Ball::new(vec![0.0], -1.0).is_err());
    }

    proptest! {
        #[test]
        fn shell_membership_matches_radius_bracket(
            p in prop::collection::vec(-3.0f64..3.0, 3),
            r_in in 0.1f64..1.5,
            width in 0.1f64..1.5,
        ) {
            let shell = RegionSpec::shell(vec![0.0; 3], r_in, r_in + width).unwrap();
            let norm = euclidean(&p, &[0.0; 3]);
            prop_assert_eq!(shell.contains(&p).unwrap(), r_in < norm && norm < r_in + width);
        }

        #[test]
        fn boundary_distance_is_one_lipschitz(
            a in prop::collection::vec(-3.0f64..3.0, 4),
            b in prop::collection::vec(-3.0f64..3.0, 4),
            c in prop::collection::vec(-1.0f64..1.0, 4),
            r in 0.1f64..2.0,
        ) {
            let ball = RegionSpec::centroid_ball(c.clone(), r).unwrap();
            let da = ball.boundary_distance(&a, Boundary::Outer).unwrap();
            let db = ball.boundary_distance(&b, Boundary::Outer).unwrap();
            prop_assert!((da - db).abs() <= euclidean(&a, &b) + 1e-12);
            prop_assert!(da >= 0.0);
        }

        #[test]
        fn boundary_distance_vanishes_on_sphere(
            dir in prop::collection::vec(-1.0f64..1.0, 3),
            r in 0.1f64..5.0,
        ) {
            let n = euclidean(&dir, &[0.0; 3]);
            prop_assume!(n > 1e-3);
            let on: Vec<f64> = dir.iter().map(|v| v / n * r).collect();
            let ball = RegionSpec::centroid_ball(vec![0.0; 3], r).unwrap();
            prop_assert!(ball.boundary_distance(&on, Boundary::Outer).unwrap() < 1e-12);
        }
    }
}
