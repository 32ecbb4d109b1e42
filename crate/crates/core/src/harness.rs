//! Replication loop: generate, split, fit, select with every method at every
//! q, score against the truth, then aggregate and write report files.
//!
//! Each replication draws from substreams keyed by `(seed, replication)`, so
//! results do not depend on the worker count or on scheduling.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::baselines::{
    branch_conditions, branch_pvalues, ind_pvalues, select_branches, transform_responses, BaselineKind,
};
use crate::config::{ExperimentConfig, Method, Mode, TargetKind};
use crate::data::{FeatureSet, LabeledSet, Matrix};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, fdp, fdp_pair, power};
use crate::predictor::load_predictions;
use crate::pvalue::{pvalue_matrix, PValueMatrix};
use crate::rng::TieBreakStream;
use crate::select::{bh, global_bh, Condition, Target};
use crate::simgen::{gen_multivariate, gen_univariate, make_multisphere_region, make_shell_region, split_8_1_1};
use crate::VERSION;

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub replication: usize,
    pub target: String,
    pub method: Method,
    pub q: f64,
    pub fdp_sample: f64,
    pub fdp_pair: f64,
    pub power: f64,
    pub num_selected: usize,
}

/// Everything one method produced for one target at one q.
#[derive(Debug, Clone)]
pub struct Detail {
    pub replication: usize,
    pub target: String,
    pub method: Method,
    pub q: f64,
    pub pvalues: PValueMatrix,
    pub samples: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    /// Global BH only.
    pub cut_index: Option<usize>,
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ReplicationOutput {
    pub metrics: Vec<MetricRow>,
    pub details: Vec<Detail>,
}

/// Inputs of one replication after splitting and loading.
struct Instance {
    train: Option<LabeledSet>,
    cal: LabeledSet,
    test_features: Matrix,
    truth: Option<Matrix>,
    given_preds: Option<(Matrix, Matrix)>,
}

fn load_instance(cfg: &ExperimentConfig, rep: usize) -> Result<Instance> {
    let d = &cfg.data;
    let generated = if let Some(spec) = &d.univariate {
        Some(gen_univariate(spec, d.n, cfg.seed, rep as u64)?)
    } else if let Some(spec) = &d.multivariate {
        Some(gen_multivariate(spec, d.n, cfg.seed, rep as u64)?)
    } else {
        None
    };
    if let Some(data) = generated {
        let (train, cal, test) = split_8_1_1(&data, cfg.seed, rep as u64)?;
        let (features, responses) = test.into_parts();
        return Ok(Instance {
            train: Some(train),
            cal,
            test_features: features,
            truth: Some(responses),
            given_preds: None,
        });
    }
    let files = d.files.as_ref().ok_or_else(|| Error::Config("no data source".into()))?;
    let train = files.train.as_ref().map(LabeledSet::read_csv).transpose()?;
    let cal = LabeledSet::read_csv(&files.calibration)?;
    let (test, truth) = FeatureSet::read_csv(&files.test)?;
    let given_preds = match (&files.calibration_predictions, &files.test_predictions) {
        (Some(c), Some(t)) => {
            let (cp, tp) = (load_predictions(c)?.into_matrix(), load_predictions(t)?.into_matrix());
            for (path, preds, rows) in [(c, &cp, cal.len()), (t, &tp, test.len())] {
                if preds.rows() != rows {
                    return Err(Error::data(
                        path,
                        format!("{} predictions for {rows} rows", preds.rows()),
                    ));
                }
            }
            Some((cp, tp))
        }
        _ => None,
    };
    if let Some(train) = &train {
        if train.feature_dim() != cal.features().cols() || test.features().cols() != cal.features().cols() {
            return Err(Error::data(
                &files.test,
                "train, calibration and test feature counts differ",
            ));
        }
    }
    if let Some(t) = &truth {
        if t.cols() != cal.response_dim() {
            return Err(Error::data(
                &files.test,
                "test responses and calibration responses differ in dimension",
            ));
        }
    }
    Ok(Instance {
        train,
        cal,
        test_features: test.features().clone(),
        truth,
        given_preds,
    })
}

/// Builds the concrete target of one replication.
pub fn resolve_target(kind: &TargetKind, reference: &Matrix, seed: u64) -> Result<Target> {
    let dim = reference.cols();
    let target = match kind {
        TargetKind::Intervals(t) => Target::Intervals(t.clone()),
        TargetKind::Quantiles(p) => Target::Intervals(p.instantiate(&reference.column(0))?),
        TargetKind::Preset(p) => Target::Intervals(p.pattern().instantiate(&reference.column(0))?),
        TargetKind::Regions(rs) => Target::Regions(rs.clone()),
        TargetKind::Shell { base_radius } => Target::Regions(vec![make_shell_region(dim, *base_radius)?]),
        TargetKind::Spheres { count, base_radius } => {
            Target::Regions(vec![make_multisphere_region(dim, *count, *base_radius, seed)?])
        }
    };
    target.validate()?;
    if target.response_dim() != dim {
        return Err(Error::DimensionMismatch {
            context: "target dimension",
            expected: dim,
            got: target.response_dim(),
        });
    }
    Ok(target)
}

fn hcat(parts: &[&Matrix]) -> Result<Matrix> {
    let rows = parts[0].rows();
    let cols: usize = parts.iter().map(|p| p.cols()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for p in parts {
            data.extend_from_slice(p.row(i));
        }
    }
    Matrix::new(rows, cols, data)
}

fn take_columns(m: &Matrix, start: usize, len: usize) -> Result<Matrix> {
    let mut data = Vec::with_capacity(m.rows() * len);
    for row in m.iter_rows() {
        data.extend_from_slice(&row[start..start + len]);
    }
    Matrix::new(m.rows(), len, data)
}

/// p-values of one method on one target, ready for BH at any q.
enum Prepared {
    Global(PValueMatrix, Vec<Condition>),
    Branches(BaselineKind, PValueMatrix, Vec<Condition>),
    Ind(PValueMatrix),
}

struct Chosen {
    samples: Vec<usize>,
    pairs: Vec<(usize, usize)>,
    cut_index: Option<usize>,
    cutoff: Option<f64>,
}

impl Prepared {
    fn pvalues(&self) -> &PValueMatrix {
        match self {
            Prepared::Global(p, _) | Prepared::Branches(_, p, _) | Prepared::Ind(p) => p,
        }
    }

    fn select(&self, q: f64) -> Result<Chosen> {
        Ok(match self {
            Prepared::Global(pv, _) => {
                let r = global_bh(pv, q)?;
                Chosen {
                    samples: r.samples,
                    pairs: r.pairs,
                    cut_index: Some(r.cut_index),
                    cutoff: Some(r.cutoff),
                }
            }
            Prepared::Branches(kind, pv, _) => {
                let r = select_branches(*kind, pv, q)?;
                Chosen {
                    samples: r.samples,
                    pairs: r.pairs,
                    cut_index: None,
                    cutoff: None,
                }
            }
            Prepared::Ind(pv) => {
                let samples = bh(&pv.column(0), q)?;
                Chosen {
                    pairs: samples.iter().map(|&j| (j, 0)).collect(),
                    samples,
                    cut_index: None,
                    cutoff: None,
                }
            }
        })
    }

    fn fdp_pair(&self, chosen: &Chosen, truth: &Matrix, sample_level: f64) -> Result<f64> {
        match self {
            Prepared::Global(_, c) | Prepared::Branches(_, _, c) => fdp_pair(&chosen.pairs, truth, c),
            Prepared::Ind(_) => Ok(sample_level),
        }
    }
}

/// Runs every target and method of `cfg` on replication `rep`.
pub fn run_replication(cfg: &ExperimentConfig, rep: usize, keep_details: bool) -> Result<ReplicationOutput> {
    let inst = load_instance(cfg, rep)?;
    let reference = inst.train.as_ref().unwrap_or(&inst.cal).responses();
    let targets: Vec<(String, Target)> = cfg
        .targets
        .iter()
        .map(|t| Ok((t.label(), resolve_target(&t.target, reference, cfg.seed)?)))
        .collect::<Result<_>>()?;

    // one fit per replication: responses first, then one transformed column
    // per target for the indicator method
    let with_ind = cfg.methods.contains(&Method::Ind);
    let d = inst.cal.response_dim();
    let mut fit_columns: Vec<Matrix> = Vec::new();
    let mut cal_z: Vec<Matrix> = Vec::new();
    if let Some(train) = &inst.train {
        if inst.given_preds.is_none() {
            fit_columns.push(train.responses().clone());
        }
        if with_ind {
            for (_, t) in &targets {
                fit_columns.push(transform_responses(t, train.responses())?);
                cal_z.push(transform_responses(t, inst.cal.responses())?);
            }
        }
    }
    let fitted = if fit_columns.is_empty() {
        None
    } else {
        let train = inst.train.as_ref().expect("fit columns come from the training set");
        let refs: Vec<&Matrix> = fit_columns.iter().collect();
        let model = crate::predictor::fit(&cfg.predictor, train.features(), &hcat(&refs)?)?;
        Some((model.predict(inst.cal.features())?, model.predict(&inst.test_features)?))
    };
    let (cal_preds, test_preds, z_offset) = match (&inst.given_preds, &fitted) {
        (Some((c, t)), _) => (c.clone(), t.clone(), 0),
        (None, Some((c, t))) => (take_columns(c, 0, d)?, take_columns(t, 0, d)?, d),
        (None, None) => return Err(Error::Config("nothing to predict with".into())),
    };

    let opts = cfg.scores.pvalue_options();
    let ties = TieBreakStream::new(cfg.seed, rep as u64).shared(cfg.scores.shared_tie_break);
    let levels = cfg.q_levels()?;
    let mut out = ReplicationOutput::default();
    for (t_idx, (name, target)) in targets.iter().enumerate() {
        for &method in &cfg.methods {
            let prepared = match method {
                Method::Mccs | Method::Mrcs => {
                    let conds = target.conditions();
                    let pv = pvalue_matrix(&cal_preds, inst.cal.responses(), &test_preds, &conds, &opts, &ties)?;
                    Prepared::Global(pv, conds)
                }
                Method::Ind => {
                    let (c, t) = fitted.as_ref().expect("ind always fits");
                    let col = z_offset + t_idx;
                    let pv = ind_pvalues(
                        &take_columns(c, col, 1)?,
                        &cal_z[t_idx],
                        &take_columns(t, col, 1)?,
                        &opts,
                        &ties,
                    )?;
                    Prepared::Ind(pv)
                }
                _ => {
                    let kind = method.baseline().expect("remaining methods are baselines");
                    let pv = branch_pvalues(
                        kind,
                        &cal_preds,
                        inst.cal.responses(),
                        &test_preds,
                        target,
                        &opts,
                        &ties,
                    )?;
                    Prepared::Branches(kind, pv, branch_conditions(kind, target)?)
                }
            };
            for &q in &levels {
                let chosen = prepared.select(q)?;
                if let Some(truth) = &inst.truth {
                    let fdp_sample = fdp(&chosen.samples, truth, target)?;
                    out.metrics.push(MetricRow {
                        replication: rep,
                        target: name.clone(),
                        method,
                        q,
                        fdp_sample,
                        fdp_pair: prepared.fdp_pair(&chosen, truth, fdp_sample)?,
                        power: power(&chosen.samples, truth, target)?,
                        num_selected: chosen.samples.len(),
                    });
                }
                if keep_details {
                    out.details.push(Detail {
                        replication: rep,
                        target: name.clone(),
                        method,
                        q,
                        pvalues: prepared.pvalues().clone(),
                        samples: chosen.samples,
                        pairs: chosen.pairs,
                        cut_index: chosen.cut_index,
                        cutoff: chosen.cutoff,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

fn guarded<T>(rep: usize, f: &(impl Fn(usize) -> Result<T> + Sync)) -> Result<T> {
    match catch_unwind(AssertUnwindSafe(|| f(rep))) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e @ (Error::Config(_) | Error::Data { .. } | Error::Io { .. }))) => Err(e),
        Ok(Err(e)) => Err(Error::Replication {
            index: rep,
            message: e.to_string(),
        }),
        Err(payload) => Err(Error::Replication {
            index: rep,
            message: panic_message(payload),
        }),
    }
}

/// Runs `f` for replications `0..r`, in parallel when the `parallel`
/// feature is on, and returns the results in replication order. The first
/// failing replication (by index) is reported.
pub fn map_replications<T: Send>(
    r: usize,
    workers: Option<usize>,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = run_all(r, workers, &f)?;
    results.into_iter().collect()
}

#[cfg(feature = "parallel")]
fn run_all<T: Send>(
    r: usize,
    workers: Option<usize>,
    f: &(impl Fn(usize) -> Result<T> + Sync),
) -> Result<Vec<Result<T>>> {
    use rayon::prelude::*;
    if workers == Some(1) {
        return Ok((0..r).map(|rep| guarded(rep, f)).collect());
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..r).into_par_iter().map(|rep| guarded(rep, f)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_all<T: Send>(
    r: usize,
    _workers: Option<usize>,
    f: &(impl Fn(usize) -> Result<T> + Sync),
) -> Result<Vec<Result<T>>> {
    Ok((0..r).map(|rep| guarded(rep, f)).collect())
}

/// Metrics of every replication, ordered by replication, then target,
/// method and q as listed in the config.
pub fn replicate(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    let per_rep = map_replications(cfg.replications, cfg.workers, |rep| {
        run_replication(cfg, rep, false).map(|o| o.metrics)
    })?;
    Ok(per_rep.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub target: String,
    pub method: Method,
    pub q: f64,
    pub replications: usize,
    pub fdr_estimate: f64,
    /// Standard error of `fdr_estimate`.
    pub se: f64,
    pub power_estimate: f64,
    pub power_se: f64,
    pub fdp_pair_estimate: f64,
    pub fdp_pair_se: f64,
    pub mean_selected: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool_version: String,
    pub config_digest: String,
    pub mode: Mode,
    pub seed: u64,
    pub replications: usize,
    pub rows: Vec<SummaryRow>,
}

impl Report {
    pub fn row(&self, target: &str, method: Method, q: f64) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.target == target && r.method == method && r.q == q)
    }
}

/// Mean and standard error per `(target, method, q)`, in first-seen order.
pub fn summarize(cfg: &ExperimentConfig, rows: &[MetricRow]) -> Result<Report> {
    let mut order: Vec<(String, Method, u64)> = Vec::new();
    let mut groups: HashMap<(String, Method, u64), Vec<&MetricRow>> = HashMap::new();
    for r in rows {
        let key = (r.target.clone(), r.method, r.q.to_bits());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    let mut out = Vec::with_capacity(order.len());
    for key in order {
        let g = &groups[&key];
        let col = |f: fn(&MetricRow) -> f64| g.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let fdr = aggregate(&col(|r| r.fdp_sample))?;
        let pow = aggregate(&col(|r| r.power))?;
        let pair = aggregate(&col(|r| r.fdp_pair))?;
        let sel = aggregate(&col(|r| r.num_selected as f64))?;
        out.push(SummaryRow {
            target: key.0,
            method: key.1,
            q: f64::from_bits(key.2),
            replications: fdr.count,
            fdr_estimate: fdr.mean,
            se: fdr.se,
            power_estimate: pow.mean,
            power_se: pow.se,
            fdp_pair_estimate: pair.mean,
            fdp_pair_se: pair.se,
            mean_selected: sel.mean,
            warning: fdr
                .single_replication
                .then(|| "single replication: standard errors are reported as 0".to_string()),
        });
    }
    Ok(Report {
        tool_version: VERSION.to_string(),
        config_digest: cfg.digest(),
        mode: cfg.mode,
        seed: cfg.seed,
        replications: cfg.replications,
        rows: out,
    })
}

/// Files written by [`run`].
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub report: Option<Report>,
}

/// Executes the config and writes its report files into `out_dir`.
///
/// * simulate: `data.csv`, `train.csv`, `calibration.csv`, `test.csv`
/// * select: `selection.csv`, `result.json`, plus metrics when the test file
///   carries responses
/// * replicate, sweep: `metrics.csv`, `summary.json`
///
/// `pvalues.csv` and `selection.csv` are optional elsewhere. Every mode
/// also writes `manifest.json` with the tool version and config digest.
pub fn run(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<RunOutcome> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut outcome = RunOutcome::default();
    let path = |name: &str| out_dir.join(name);

    if cfg.mode == Mode::Simulate {
        let d = &cfg.data;
        let data = match (&d.univariate, &d.multivariate) {
            (Some(s), _) => gen_univariate(s, d.n, cfg.seed, 0)?,
            (_, Some(s)) => gen_multivariate(s, d.n, cfg.seed, 0)?,
            _ => return Err(Error::Config("simulate mode needs a generator".into())),
        };
        let (train, cal, test) = split_8_1_1(&data, cfg.seed, 0)?;
        for (name, set) in [
            ("data.csv", &data),
            ("train.csv", &train),
            ("calibration.csv", &cal),
            ("test.csv", &test),
        ] {
            set.write_csv(path(name))?;
            outcome.files.push(path(name));
        }
    } else {
        let keep = cfg.mode == Mode::Select || cfg.outputs.pvalues || cfg.outputs.selection;
        let per_rep = map_replications(cfg.replications, cfg.workers, |rep| run_replication(cfg, rep, keep))?;
        let metrics: Vec<MetricRow> = per_rep.iter().flat_map(|o| o.metrics.iter().cloned()).collect();
        let details: Vec<&Detail> = per_rep.iter().flat_map(|o| o.details.iter()).collect();
        if !metrics.is_empty() {
            write_metrics(&path("metrics.csv"), &metrics)?;
            let report = summarize(cfg, &metrics)?;
            write_json(&path("summary.json"), &report)?;
            outcome.files.extend([path("metrics.csv"), path("summary.json")]);
            outcome.report = Some(report);
        }
        if cfg.mode == Mode::Select || cfg.outputs.selection {
            write_selection(&path("selection.csv"), &details)?;
            outcome.files.push(path("selection.csv"));
        }
        if cfg.outputs.pvalues {
            write_pvalues(&path("pvalues.csv"), &details)?;
            outcome.files.push(path("pvalues.csv"));
        }
        if cfg.mode == Mode::Select {
            write_json(&path("result.json"), &select_result(cfg, &details))?;
            outcome.files.push(path("result.json"));
        }
    }
    let manifest = serde_json::json!({
        "tool_version": VERSION,
        "config_digest": cfg.digest(),
        "mode": cfg.mode,
        "files": outcome.files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy()).collect::<Vec<_>>(),
    });
    write_json(&path("manifest.json"), &manifest)?;
    std::fs::write(path("config.json"), cfg.to_json()).map_err(|e| Error::io(path("config.json"), e))?;
    outcome.files.extend([path("manifest.json"), path("config.json")]);
    Ok(outcome)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_selection(path: &Path, details: &[&Detail]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["replication", "target", "method", "q", "j", "k", "p", "selected"])
        .map_err(err)?;
    for d in details {
        let pv = &d.pvalues;
        for j in 0..pv.num_samples() {
            for k in 0..pv.num_conditions() {
                let selected = d.pairs.binary_search(&(j, k)).is_ok();
                w.write_record([
                    d.replication.to_string(),
                    d.target.clone(),
                    d.method.name().to_string(),
                    d.q.to_string(),
                    j.to_string(),
                    k.to_string(),
                    pv.get(j, k).to_string(),
                    (selected as u8).to_string(),
                ])
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_pvalues(path: &Path, details: &[&Detail]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["replication", "target", "method", "j", "k", "p", "u"])
        .map_err(err)?;
    // p-values do not depend on q; write each (replication, target, method) once
    let mut last: Option<(usize, &str, Method)> = None;
    for d in details {
        let key = (d.replication, d.target.as_str(), d.method);
        if last == Some(key) {
            continue;
        }
        last = Some(key);
        let pv = &d.pvalues;
        for j in 0..pv.num_samples() {
            for k in 0..pv.num_conditions() {
                w.write_record([
                    d.replication.to_string(),
                    d.target.clone(),
                    d.method.name().to_string(),
                    j.to_string(),
                    k.to_string(),
                    pv.get(j, k).to_string(),
                    pv.u(j, k).to_string(),
                ])
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn select_result(cfg: &ExperimentConfig, details: &[&Detail]) -> serde_json::Value {
    let results: Vec<serde_json::Value> = details
        .iter()
        .map(|d| {
            serde_json::json!({
                "target": d.target,
                "method": d.method,
                "q": d.q,
                "cut_index": d.cut_index,
                "cutoff": d.cutoff,
                "counts": {
                    "samples": d.samples.len(),
                    "pairs": d.pairs.len(),
                    "tests": d.pvalues.values().len(),
                    "clamped": d.pvalues.clamped(),
                },
                "selected": d.samples,
                "calibration_digest": d.pvalues.calibration_digest(),
            })
        })
        .collect();
    serde_json::json!({
        "tool_version": VERSION,
        "config_digest": cfg.digest(),
        "results": results,
    })
}
