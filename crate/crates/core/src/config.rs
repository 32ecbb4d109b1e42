//! Experiment configuration: a single JSON document with unknown keys
//! rejected. Every default the method leaves open (dataset size, quantile
//! masses, kernel parameters) lives here.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::BaselineKind;
use crate::error::{Error, Result};
use crate::predictor::PredictorConfig;
use crate::pvalue::PValueOptions;
use crate::region::RegionSpec;
use crate::score::{RegionRule, ScoreOptions, TestBranch};
use crate::simgen::{MvSpec, QuantilePattern, SettingSpec};
use crate::target::TargetSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Select,
    Simulate,
    Replicate,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mccs")]
    Mccs,
    /// Same global BH pipeline as `mccs`, named for region targets.
    #[serde(rename = "mrcs")]
    Mrcs,
    #[serde(rename = "int")]
    Int,
    #[serde(rename = "uni")]
    Uni,
    #[serde(rename = "int-b")]
    IntB,
    #[serde(rename = "uni-b")]
    UniB,
    #[serde(rename = "ind")]
    Ind,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mccs => "mccs",
            Method::Mrcs => "mrcs",
            Method::Int => "int",
            Method::Uni => "uni",
            Method::IntB => "int-b",
            Method::UniB => "uni-b",
            Method::Ind => "ind",
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            Method::Int => Some(BaselineKind::Int),
            Method::Uni => Some(BaselineKind::Uni),
            Method::IntB => Some(BaselineKind::IntB),
            Method::UniB => Some(BaselineKind::UniB),
            _ => None,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(name.to_ascii_lowercase()))
            .map_err(|_| Error::Config(format!("unknown method {name:?}")))
    }
}

/// Fixed target presets on quantiles of the reference responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `(q_0.2, q_0.8)`.
    Conjunctive,
    /// `(-inf, q_0.3) U (q_0.7, inf)`.
    Disjunctive,
    Task1,
    Task2,
    Task3,
    Task4,
    Task5,
    Task6,
}

impl Preset {
    pub fn pattern(self) -> QuantilePattern {
        let task = match self {
            Preset::Conjunctive => return QuantilePattern::conjunctive(),
            Preset::Disjunctive => return QuantilePattern::disjunctive(),
            Preset::Task1 => 1,
            Preset::Task2 => 2,
            Preset::Task3 => 3,
            Preset::Task4 => 4,
            Preset::Task5 => 5,
            Preset::Task6 => 6,
        };
        QuantilePattern::task(task).expect("task ids 1..=6 are valid")
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Conjunctive => "conjunctive",
            Preset::Disjunctive => "disjunctive",
            Preset::Task1 => "task1",
            Preset::Task2 => "task2",
            Preset::Task3 => "task3",
            Preset::Task4 => "task4",
            Preset::Task5 => "task5",
            Preset::Task6 => "task6",
        }
    }
}

/// How a target is specified. Quantile-based targets are placed on the
/// training responses (calibration responses when no training set is
/// given), separately in every replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetKind {
    Intervals(TargetSpec),
    Quantiles(QuantilePattern),
    Preset(Preset),
    Regions(Vec<RegionSpec>),
    /// Shell around `(2, ..., 2)` with radii `0.6 base` and `base`.
    Shell {
        base_radius: f64,
    },
    /// Union of `count` balls near `(2, ..., 2)`, placed from the master
    /// seed.
    Spheres {
        count: usize,
        base_radius: f64,
    },
}

impl TargetKind {
    fn default_name(&self) -> String {
        match self {
            TargetKind::Intervals(_) => "intervals".into(),
            TargetKind::Quantiles(_) => "quantiles".into(),
            TargetKind::Preset(p) => p.name().into(),
            TargetKind::Regions(_) => "regions".into(),
            TargetKind::Shell { .. } => "shell".into(),
            TargetKind::Spheres { count, .. } => format!("spheres{count}"),
        }
    }

    fn is_regional(&self) -> bool {
        matches!(
            self,
            TargetKind::Regions(_) | TargetKind::Shell { .. } | TargetKind::Spheres { .. }
        )
    }

    /// Whether the target is one bounded interval, as the intersection
    /// baselines require.
    fn is_single_bounded(&self) -> bool {
        let pattern = match self {
            TargetKind::Intervals(t) => {
                return matches!(t.intervals(), [iv] if iv.is_bounded());
            }
            TargetKind::Quantiles(p) => p.clone(),
            TargetKind::Preset(p) => p.pattern(),
            _ => return false,
        };
        matches!(pattern.0.as_slice(), [(Some(_), Some(_))])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTarget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub target: TargetKind,
}

impl NamedTarget {
    pub fn new(name: impl Into<String>, target: TargetKind) -> Self {
        Self {
            name: Some(name.into()),
            target,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.target.default_name())
    }
}

/// User-supplied CSV files. Either a training set or both prediction files
/// must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    pub calibration: PathBuf,
    /// Features, optionally followed by true responses for evaluation.
    pub test: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_predictions: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_predictions: Option<PathBuf>,
}

/// Exactly one of `univariate`, `multivariate` or `files`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub univariate: Option<SettingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multivariate: Option<MvSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<FileSource>,
    /// Rows generated per replication before the 8:1:1 split.
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    1000
}

impl DataConfig {
    pub fn univariate(spec: SettingSpec, n: usize) -> Self {
        Self {
            univariate: Some(spec),
            multivariate: None,
            files: None,
            n,
        }
    }

    pub fn multivariate(spec: MvSpec, n: usize) -> Self {
        Self {
            univariate: None,
            multivariate: Some(spec),
            files: None,
            n,
        }
    }

    pub fn files(files: FileSource) -> Self {
        Self {
            univariate: None,
            multivariate: None,
            files: Some(files),
            n: default_n(),
        }
    }
}

/// A single level or a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QLevels {
    Single(f64),
    Grid(Vec<f64>),
}

impl QLevels {
    pub fn levels(&self) -> Vec<f64> {
        match self {
            QLevels::Single(q) => vec![*q],
            QLevels::Grid(g) => g.clone(),
        }
    }
}

/// `0.05, 0.10, ..., 0.50`.
pub fn default_sweep_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreFlags {
    pub test_branch: TestBranch,
    pub region_rule: RegionRule,
    pub omit_inside_offset: bool,
    pub exclude_inside_calibration: bool,
    /// One tie-breaking uniform per test sample instead of one per pair.
    pub shared_tie_break: bool,
}

impl ScoreFlags {
    pub fn pvalue_options(&self) -> PValueOptions {
        PValueOptions {
            score: ScoreOptions {
                test_branch: self.test_branch,
                region_rule: self.region_rule,
                omit_inside_offset: self.omit_inside_offset,
            },
            exclude_inside_calibration: self.exclude_inside_calibration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputFlags {
    /// Write `pvalues.csv`.
    pub pvalues: bool,
    /// Write `selection.csv`. Always on in select mode.
    pub selection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub data: DataConfig,
    #[serde(default)]
    pub targets: Vec<NamedTarget>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<QLevels>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; all cores when absent. Never changes results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub predictor: PredictorConfig,
    #[serde(default)]
    pub scores: ScoreFlags,
    #[serde(default)]
    pub outputs: OutputFlags,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Mccs]
}

fn default_replications() -> usize {
    1
}

impl ExperimentConfig {
    /// Config with defaults for everything but the mode and data source.
    pub fn new(mode: Mode, data: DataConfig) -> Self {
        Self {
            mode,
            data,
            targets: Vec::new(),
            methods: default_methods(),
            q: None,
            replications: default_replications(),
            seed: 0,
            workers: None,
            predictor: PredictorConfig::default(),
            scores: ScoreFlags::default(),
            outputs: OutputFlags::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths are taken from the file's
    /// directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let (Some(files), Some(dir)) = (cfg.data.files.as_mut(), path.parent()) {
            files.rebase(dir);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The q levels a run evaluates; sweep mode falls back to the default
    /// grid.
    pub fn q_levels(&self) -> Result<Vec<f64>> {
        match (&self.q, self.mode) {
            (Some(q), _) => Ok(q.levels()),
            (None, Mode::Sweep) => Ok(default_sweep_grid()),
            (None, Mode::Simulate) => Ok(Vec::new()),
            (None, _) => Err(Error::Config("q is required in select and replicate modes".into())),
        }
    }

    /// SHA-256 of the canonical JSON form, ignoring the worker count.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        let d = &self.data;
        let sources = [d.univariate.is_some(), d.multivariate.is_some(), d.files.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if sources != 1 {
            return cfg_err("data needs exactly one of univariate, multivariate or files".into());
        }
        if let Some(s) = &d.univariate {
            s.validate().map_err(config_error)?;
        }
        if let Some(s) = &d.multivariate {
            s.validate().map_err(config_error)?;
        }
        if d.files.is_none() && d.n < 10 {
            return cfg_err(format!("data.n must be >= 10, got {}", d.n));
        }
        if let Some(f) = &d.files {
            if self.mode != Mode::Select {
                return cfg_err("file data is only supported in select mode".into());
            }
            let preds = f.calibration_predictions.is_some() as u8 + f.test_predictions.is_some() as u8;
            if preds == 1 {
                return cfg_err("give both calibration_predictions and test_predictions, or neither".into());
            }
            if f.train.is_none() && preds == 0 {
                return cfg_err("file data needs a training set or prediction files".into());
            }
            if f.train.is_none() && self.methods.contains(&Method::Ind) {
                return cfg_err("ind refits the predictor and needs a training set".into());
            }
        }
        if self.mode == Mode::Simulate {
            if d.files.is_some() {
                return cfg_err("simulate mode needs a generator".into());
            }
            return Ok(());
        }
        if self.replications == 0 {
            return cfg_err("replications must be >= 1".into());
        }
        if self.workers == Some(0) {
            return cfg_err("workers must be >= 1".into());
        }
        self.predictor.validate().map_err(config_error)?;
        let levels = self.q_levels()?;
        if levels.is_empty() {
            return cfg_err("q grid is empty".into());
        }
        if let Some(q) = levels.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return cfg_err(format!("q must lie in (0, 1), got {q}"));
        }
        if self.mode == Mode::Select && levels.len() != 1 {
            return cfg_err("select mode takes a single q".into());
        }
        if self.methods.is_empty() {
            return cfg_err("methods must not be empty".into());
        }
        let mut seen = HashSet::new();
        if let Some(m) = self.methods.iter().find(|m| !seen.insert(**m)) {
            return cfg_err(format!("method {} listed twice", m.name()));
        }
        if self.targets.is_empty() {
            return cfg_err("at least one target is required".into());
        }
        let mut names = HashSet::new();
        for t in &self.targets {
            let label = t.label();
            if !names.insert(label.clone()) {
                return cfg_err(format!("target name {label:?} used twice"));
            }
            self.validate_target(t)?;
        }
        Ok(())
    }

    fn validate_target(&self, t: &NamedTarget) -> Result<()> {
        let label = t.label();
        let d = &self.data;
        let response_dim = d
            .multivariate
            .as_ref()
            .map(|m| m.d_y)
            .or(d.univariate.as_ref().map(|_| 1));
        if t.target.is_regional() {
            if response_dim == Some(1) {
                return Err(Error::Config(format!(
                    "target {label:?} is a region but responses are scalar"
                )));
            }
        } else if response_dim.is_some_and(|d| d > 1) {
            return Err(Error::Config(format!(
                "target {label:?} is an interval union but responses have dimension > 1"
            )));
        }
        match &t.target {
            TargetKind::Intervals(_) | TargetKind::Preset(_) => {}
            TargetKind::Quantiles(p) => {
                if p.0.is_empty() {
                    return Err(Error::Config(format!("target {label:?} has no intervals")));
                }
                let bad = |l: &Option<f64>| l.is_some_and(|l| !(l > 0.0 && l < 1.0));
                if p.0.iter().any(|(a, b)| bad(a) || bad(b)) {
                    return Err(Error::Config(format!(
                        "target {label:?}: quantile levels must lie in (0, 1)"
                    )));
                }
            }
            TargetKind::Regions(rs) => {
                if rs.is_empty() {
                    return Err(Error::Config(format!("target {label:?} has no regions")));
                }
                for r in rs {
                    r.validate().map_err(config_error)?;
                    if response_dim.is_some_and(|d| d != r.dim()) {
                        return Err(Error::Config(format!(
                            "target {label:?} dimension differs from the responses"
                        )));
                    }
                }
            }
            TargetKind::Shell { base_radius } | TargetKind::Spheres { base_radius, .. } => {
                if !(*base_radius > 0.0 && base_radius.is_finite()) {
                    return Err(Error::Config(format!("target {label:?}: base_radius must be positive")));
                }
                if matches!(t.target, TargetKind::Spheres { count: 0, .. }) {
                    return Err(Error::Config(format!("target {label:?}: count must be >= 1")));
                }
            }
        }
        for m in &self.methods {
            if matches!(m, Method::Int | Method::IntB) && !t.target.is_single_bounded() {
                return Err(Error::Config(format!(
                    "method {} needs a single bounded interval, target {label:?} is not one",
                    m.name()
                )));
            }
        }
        Ok(())
    }
}

impl FileSource {
    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let Some(p) = self.train.as_mut() {
            fix(p);
        }
        fix(&mut self.calibration);
        fix(&mut self.test);
        if let Some(p) = self.calibration_predictions.as_mut() {
            fix(p);
        }
        if let Some(p) = self.test_predictions.as_mut() {
            fix(p);
        }
    }
}

fn config_error(e: Error) -> Error {
    Error::Config(e.to_string())
}
