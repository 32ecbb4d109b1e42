//! Synthetic data, quantile-based interval targets and sphere regions.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{LabeledSet, Matrix};
use crate::error::{Error, Result};
use crate::region::{Ball, RegionSpec};
use crate::rng::{substream, Purpose};
use crate::target::{Interval, TargetSpec};

/// Univariate generator. Settings 1-3 add Gaussian noise with standard
/// deviation `noise`; 4-6 reuse the same mean functions with Laplace noise of
/// scale `noise`.
///
/// | setting | mean                                               |
/// |---------|----------------------------------------------------|
/// | 1, 4    | `sum_j beta_j x_j`, `beta_j ~ N(0, 1)`             |
/// | 2, 5    | `exp(x_1) + sin(pi x_2)`                           |
/// | 3, 6    | `sum_{i=0,1,2} exp(x_{2i+1}) + sin(pi x_{2i+2})`   |
///
/// Features are `Unif(-10, 10)^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingSpec {
    pub setting: u8,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Fixed coefficients for settings 1 and 4; drawn per replication when
    /// absent.
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
}

fn default_p() -> usize {
    10
}

fn default_noise() -> f64 {
    0.5
}

impl SettingSpec {
    pub fn new(setting: u8) -> Self {
        Self {
            setting,
            p: default_p(),
            noise: default_noise(),
            beta: None,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let min_p = match self.setting {
            1 | 4 => 1,
            2 | 5 => 2,
            3 | 6 => 6,
            s => return Err(Error::invalid(format!("setting must be 1..=6, got {s}"))),
        };
        if self.p < min_p {
            return Err(Error::invalid(format!(
                "setting {} needs p >= {min_p}, got {}",
                self.setting, self.p
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::invalid(format!("noise level must be >= 0, got {}", self.noise)));
        }
        if let Some(b) = &self.beta {
            if b.len() != self.p {
                return Err(Error::DimensionMismatch {
                    context: "setting coefficients",
                    expected: self.p,
                    got: b.len(),
                });
            }
        }
        Ok(())
    }

    fn laplace(&self) -> bool {
        self.setting >= 4
    }
}

/// Mean function of a univariate setting.
pub fn setting_mean(setting: u8, x: &[f64], beta: &[f64]) -> f64 {
    let wave = |i: usize| x[i].exp() + (std::f64::consts::PI * x[i + 1]).sin();
    match setting {
        1 | 4 => x.iter().zip(beta).map(|(a, b)| a * b).sum(),
        2 | 5 => wave(0),
        _ => wave(0) + wave(2) + wave(4),
    }
}

/// Laplace(0, scale) by inverting the CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.gen::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

/// Draws `n` rows for replication `replication` of `spec`.
pub fn gen_univariate(spec: &SettingSpec, n: usize, master_seed: u64, replication: u64) -> Result<LabeledSet> {
    spec.validate()?;
    let beta = match &spec.beta {
        Some(b) => b.clone(),
        None => {
            let mut rng = substream(master_seed, replication, Purpose::Coefficients);
            (0..spec.p).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    };
    let mut rng = substream(master_seed, replication, Purpose::Data);
    gen_univariate_with(spec, n, &beta, &mut rng)
}

/// Generator core with explicit coefficients and random source.
pub fn gen_univariate_with(spec: &SettingSpec, n: usize, beta: &[f64], rng: &mut ChaCha8Rng) -> Result<LabeledSet> {
    spec.validate()?;
    let p = spec.p;
    let mut xs = Vec::with_capacity(n * p);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let start = xs.len();
        for _ in 0..p {
            xs.push(rng.gen_range(-10.0..10.0));
        }
        let mu = setting_mean(spec.setting, &xs[start..], beta);
        let eps = if spec.laplace() {
            sample_laplace(rng, spec.noise)
        } else {
            spec.noise * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        };
        ys.push(mu + eps);
    }
    LabeledSet::new(Matrix::new(n, p, xs)?, Matrix::new(n, 1, ys)?)
}

/// Multivariate generator: `x ~ Unif(-1, 1)^d_x`, response `i` is
/// `2 x_j - 0.5 x_{j+1} + x_{j+2} + 1.5` with `j = i mod d_x` (indices wrap),
/// plus Gaussian noise with variance `sigma^2` and correlation `rho` between
/// every pair of responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MvSpec {
    #[serde(default = "default_dx")]
    pub d_x: usize,
    pub d_y: usize,
    #[serde(default = "default_noise")]
    pub sigma: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_dx() -> usize {
    5
}

fn default_rho() -> f64 {
    0.3
}

impl MvSpec {
    pub fn new(d_y: usize) -> Self {
        Self {
            d_x: default_dx(),
            d_y,
            sigma: default_noise(),
            rho: default_rho(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_x < 1 || self.d_y < 1 {
            return Err(Error::invalid("d_x and d_y must be >= 1"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        let lower = if self.d_y > 1 {
            -1.0 / (self.d_y as f64 - 1.0)
        } else {
            f64::NEG_INFINITY
        };
        if !(self.rho > lower && self.rho < 1.0) {
            return Err(Error::invalid(format!(
                "noise covariance is not positive definite: rho = {} outside ({lower}, 1)",
                self.rho
            )));
        }
        Ok(())
    }

    /// Lower Cholesky factor of the correlation part, row-major `d_y × d_y`.
    fn correlation_factor(&self) -> Vec<f64> {
        let d = self.d_y;
        let corr = |i: usize, j: usize| if i == j { 1.0 } else { self.rho };
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
                if i == j {
                    l[i * d + i] = (corr(i, i) - s).sqrt();
                } else {
                    l[i * d + j] = (corr(i, j) - s) / l[j * d + j];
                }
            }
        }
        l
    }
}

/// Noise-free response `i` at features `x`.
pub fn mv_mean(x: &[f64], i: usize) -> f64 {
    let d = x.len();
    let j = i % d;
    2.0 * x[j] - 0.5 * x[(j + 1) % d] + x[(j + 2) % d] + 1.5
}

pub fn gen_multivariate(spec: &MvSpec, n: usize, master_seed: u64, replication: u64) -> Result<LabeledSet> {
    let mut rng = substream(master_seed, replication, Purpose::Data);
    gen_multivariate_with(spec, n, &mut rng)
}

pub fn gen_multivariate_with(spec: &MvSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<LabeledSet> {
    spec.validate()?;
    let (dx, dy) = (spec.d_x, spec.d_y);
    let l = spec.correlation_factor();
    let mut xs = Vec::with_capacity(n * dx);
    let mut ys = Vec::with_capacity(n * dy);
    let mut z = vec![0.0; dy];
    for _ in 0..n {
        let start = xs.len();
        for _ in 0..dx {
            xs.push(rng.gen_range(-1.0..1.0));
        }
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let x = &xs[start..];
        for i in 0..dy {
            let noise: f64 = (0..=i).map(|k| l[i * dy + k] * z[k]).sum();
            ys.push(mv_mean(x, i) + spec.sigma * noise);
        }
    }
    LabeledSet::new(Matrix::new(n, dx, xs)?, Matrix::new(n, dy, ys)?)
}

/// Value at rank `ceil(level * n)` (1-based, clamped to `1..=n`) of the
/// sorted sample.
pub fn nearest_rank_quantile(sorted: &[f64], level: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::invalid("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::invalid(format!("quantile level {level} outside [0, 1]")));
    }
    let n = sorted.len();
    let rank = ((level * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}

/// Interval union described by quantile levels of a reference sample;
/// `None` marks an unbounded side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantilePattern(pub Vec<(Option<f64>, Option<f64>)>);

impl QuantilePattern {
    pub fn conjunctive() -> Self {
        Self(vec![(Some(0.2), Some(0.8))])
    }

    pub fn disjunctive() -> Self {
        Self(vec![(None, Some(0.3)), (Some(0.7), None)])
    }

    /// Interval patterns of the six benchmark tasks. Tasks 4-6 contain
    /// overlapping intervals on purpose.
    pub fn task(task: u8) -> Result<Self> {
        let b = |a: f64, c: f64| (Some(a), Some(c));
        let below = |c: f64| (None, Some(c));
        let above = |a: f64| (Some(a), None);
        Ok(Self(match task {
            1 => vec![below(0.3), b(0.6, 0.8)],
            2 => vec![b(0.2, 0.4), above(0.7)],
            3 => vec![below(0.2), b(0.35, 0.5), b(0.7, 0.85)],
            4 => vec![below(0.3), b(0.2, 0.5), above(0.75)],
            5 => vec![below(0.2), b(0.4, 0.7), above(0.6)],
            6 => vec![below(0.2), b(0.35, 0.55), above(0.7), above(0.8)],
            t => return Err(Error::invalid(format!("task must be 1..=6, got {t}"))),
        }))
    }

    /// Thresholds at nearest-rank quantiles of `responses`.
    pub fn instantiate(&self, responses: &[f64]) -> Result<TargetSpec> {
        if responses.len() < 2 {
            return Err(Error::invalid("need at least two responses to place thresholds"));
        }
        let mut sorted = responses.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |l: Option<f64>| l.map(|l| nearest_rank_quantile(&sorted, l)).transpose();
        let intervals = self
            .0
            .iter()
            .map(|&(lo, hi)| Interval::new(q(lo)?, q(hi)?))
            .collect::<Result<Vec<_>>>()?;
        TargetSpec::new(intervals)
    }
}

/// Target for benchmark task `task` from training responses.
pub fn make_task_target(task: u8, responses: &[f64]) -> Result<TargetSpec> {
    QuantilePattern::task(task)?.instantiate(responses)
}

/// Shell around `(2, ..., 2)` with radii `0.6 base` and `base`.
pub fn make_shell_region(d: usize, base_radius: f64) -> Result<RegionSpec> {
    RegionSpec::shell(vec![2.0; d], 0.6 * base_radius, base_radius)
}

/// `num_spheres` balls: ball `i` (from 0) is centered at
/// `(2, ..., 2) + i * u_i` with `u_i ~ Unif[-0.5, 0.5]^d`, and radii ramp
/// linearly from `0.8 base` to `base`.
pub fn make_multisphere_region(d: usize, num_spheres: usize, base_radius: f64, seed: u64) -> Result<RegionSpec> {
    if d < 1 || num_spheres < 1 {
        return Err(Error::invalid("need d >= 1 and at least one sphere"));
    }
    let mut rng = substream(seed, 0, Purpose::Regions);
    let balls = (0..num_spheres)
        .map(|i| {
            let center: Vec<f64> = (0..d).map(|_| 2.0 + i as f64 * rng.gen_range(-0.5..0.5)).collect();
            let frac = if num_spheres == 1 {
                0.0
            } else {
                i as f64 / (num_spheres - 1) as f64
            };
            Ball::new(center, base_radius * (0.8 + 0.2 * frac))
        })
        .collect::<Result<Vec<_>>>()?;
    RegionSpec::ball_union(balls)
}

/// Ball of the given radius around the mean of `points`.
pub fn centroid_ball_region(points: &[Vec<f64>], radius: f64) -> Result<RegionSpec> {
    let first = points
        .first()
        .ok_or_else(|| Error::invalid("centroid of an empty point set"))?;
    let d = first.len();
    let mut center = vec![0.0; d];
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                context: "centroid points",
                expected: d,
                got: p.len(),
            });
        }
        for (c, v) in center.iter_mut().zip(p) {
            *c += v;
        }
    }
    center.iter_mut().for_each(|c| *c /= points.len() as f64);
    RegionSpec::centroid_ball(center, radius)
}

/// Uniformly random train/calibration/test split with sizes
/// `floor(0.8 n)`, `floor(0.1 n)` and the remainder.
pub fn split_8_1_1(data: &LabeledSet, seed: u64, replication: u64) -> Result<(LabeledSet, LabeledSet, LabeledSet)> {
    let mut rng = substream(seed, replication, Purpose::Split);
    split_with(data, &mut rng)
}

pub fn split_with(data: &LabeledSet, rng: &mut ChaCha8Rng) -> Result<(LabeledSet, LabeledSet, LabeledSet)> {
    let n = data.len();
    if n < 10 {
        return Err(Error::invalid(format!("need at least 10 rows to split, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = n * 8 / 10;
    let n_cal = n / 10;
    Ok((
        data.subset(&idx[..n_train]),
        data.subset(&idx[n_train..n_train + n_cal]),
        data.subset(&idx[n_train + n_cal..]),
    ))
}
