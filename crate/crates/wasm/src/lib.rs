//! Browser entry points. Every function returns a JSON string so the page
//! needs nothing beyond `JSON.parse`.

use mccs_core::config::{DataConfig, ExperimentConfig, Method, Mode, NamedTarget, Preset, TargetKind};
use mccs_core::harness::{replicate, summarize};
use mccs_core::predictor::PredictorConfig;
use mccs_core::pvalue::PValueOptions;
use mccs_core::rng::TieBreakStream;
use mccs_core::score::{compute_m, test_score, Condition, RegionRule, ScoreOptions, ScoreParams};
use mccs_core::select::mccs_with_predictions;
use mccs_core::simgen::{gen_univariate, make_multisphere_region, split_8_1_1, SettingSpec};
use mccs_core::{Error, RegionSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Json = Result<String, String>;

fn js(err: Error) -> String {
    err.to_string()
}

fn parse_preset(name: &str) -> Result<Preset, String> {
    serde_json::from_value(serde_json::Value::String(name.to_ascii_lowercase()))
        .map_err(|_| format!("unknown preset {name:?}"))
}

#[derive(Serialize)]
struct Point {
    pred: f64,
    y: f64,
    inside: bool,
    selected: bool,
}

#[derive(Serialize)]
struct SelectionView {
    /// `[lower, upper]`, `null` for an infinite end.
    intervals: Vec<[Option<f64>; 2]>,
    points: Vec<Point>,
    num_selected: usize,
    fdp: f64,
    power: f64,
}

/// Generates one dataset, fits the default predictor and runs global BH
/// selection on the test third.
pub fn select_json(setting: u8, preset: &str, q: f64, n: usize, seed: u64) -> Json {
    let data = gen_univariate(&SettingSpec::new(setting), n, seed, 0).map_err(js)?;
    let (train, cal, test) = split_8_1_1(&data, seed, 0).map_err(js)?;
    let target = parse_preset(preset)?
        .pattern()
        .instantiate(&train.responses().column(0))
        .map_err(js)?;
    let model = PredictorConfig::default().fit(&train).map_err(js)?;
    let cal_preds = model.predict(cal.features()).map_err(js)?;
    let test_preds = model.predict(test.features()).map_err(js)?;
    let selection = mccs_with_predictions(
        &cal_preds,
        cal.responses(),
        &test_preds,
        &target,
        q,
        &PValueOptions::default(),
        &TieBreakStream::new(seed, 0),
    )
    .map_err(js)?;

    let chosen = &selection.result.samples;
    let points: Vec<Point> = (0..test.len())
        .map(|j| {
            let y = test.responses().get(j, 0);
            Point {
                pred: test_preds.get(j, 0),
                y,
                inside: target.contains(y),
                selected: chosen.binary_search(&j).is_ok(),
            }
        })
        .collect();
    let false_sel = points.iter().filter(|p| p.selected && !p.inside).count();
    let inside = points.iter().filter(|p| p.inside).count();
    let true_sel = chosen.len() - false_sel;
    let view = SelectionView {
        intervals: target.intervals().iter().map(|iv| [iv.lower(), iv.upper()]).collect(),
        num_selected: chosen.len(),
        fdp: false_sel as f64 / chosen.len().max(1) as f64,
        power: true_sel as f64 / inside.max(1) as f64,
        points,
    };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

/// Monte Carlo FDR and power of global BH over the q grid `0.05..0.5`.
pub fn fdr_curve_json(setting: u8, preset: &str, n: usize, replications: usize, seed: u64) -> Json {
    let preset = parse_preset(preset)?;
    let mut cfg = ExperimentConfig::new(Mode::Sweep, DataConfig::univariate(SettingSpec::new(setting), n));
    cfg.targets = vec![NamedTarget::new(preset.name(), TargetKind::Preset(preset))];
    cfg.methods = vec![Method::Mccs];
    cfg.replications = replications;
    cfg.seed = seed;
    cfg.workers = Some(1);
    cfg.validate().map_err(js)?;
    let rows = replicate(&cfg).map_err(js)?;
    let report = summarize(&cfg, &rows).map_err(js)?;
    Ok(serde_json::to_string(&report.rows).expect("rows serialize"))
}

#[derive(Serialize)]
struct ScoreField {
    centers: Vec<Vec<f64>>,
    radii: Vec<f64>,
    /// Grid bounds `[x_min, x_max, y_min, y_max]`.
    bounds: [f64; 4],
    resolution: usize,
    /// Row-major, `resolution^2` values: the smallest test score over the
    /// balls at each prediction.
    scores: Vec<f64>,
    inside: Vec<bool>,
}

/// Response-free test scores over a square grid of 2-D predictions around
/// a random union of `num_balls` balls. `rule` is `radial` or `unsigned`.
pub fn score_field_json(num_balls: usize, radius: f64, resolution: usize, rule: &str, seed: u64) -> Json {
    let region_rule = match rule {
        "radial" => RegionRule::Radial,
        "unsigned" => RegionRule::Unsigned,
        other => return Err(format!("unknown rule {other:?}")),
    };
    if resolution < 2 {
        return Err("need resolution >= 2".into());
    }
    let region = make_multisphere_region(2, num_balls, radius, seed).map_err(js)?;
    let RegionSpec::BallUnion(balls) = &region else {
        return Err("expected a ball union".into());
    };
    let mid: Vec<f64> = (0..2)
        .map(|i| balls.iter().map(|b| b.center[i]).sum::<f64>() / balls.len() as f64)
        .collect();
    let reach = balls
        .iter()
        .map(|b| ((b.center[0] - mid[0]).hypot(b.center[1] - mid[1])) + b.radius)
        .fold(0.0, f64::max);
    let half = 1.6 * reach;
    let step = 2.0 * half / (resolution - 1) as f64;
    let (x0, y1) = (mid[0] - half, mid[1] + half);
    let grid: Vec<[f64; 2]> = (0..resolution)
        .flat_map(|r| (0..resolution).map(move |c| [x0 + c as f64 * step, y1 - r as f64 * step]))
        .collect();
    let options = ScoreOptions {
        region_rule,
        ..ScoreOptions::default()
    };
    let conditions = Condition::from_region(&region);
    let mut scores = vec![f64::INFINITY; grid.len()];
    for cond in &conditions {
        let m = compute_m(grid.iter().map(|p| p.as_slice()), cond).map_err(js)?;
        let params = ScoreParams::new(m, options);
        for (s, p) in scores.iter_mut().zip(&grid) {
            *s = s.min(test_score(p, cond, &params).map_err(js)?);
        }
    }
    let inside = grid
        .iter()
        .map(|p| region.contains(p))
        .collect::<Result<_, _>>()
        .map_err(js)?;
    let field = ScoreField {
        centers: balls.iter().map(|b| b.center.clone()).collect(),
        radii: balls.iter().map(|b| b.radius).collect(),
        bounds: [mid[0] - half, mid[0] + half, mid[1] - half, mid[1] + half],
        resolution,
        scores,
        inside,
    };
    Ok(serde_json::to_string(&field).expect("field serializes"))
}

fn to_js(out: Json) -> Result<String, JsError> {
    out.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn select_demo(setting: u8, preset: &str, q: f64, n: usize, seed: u64) -> Result<String, JsError> {
    to_js(select_json(setting, preset, q, n, seed))
}

#[wasm_bindgen]
pub fn fdr_curve(setting: u8, preset: &str, n: usize, replications: usize, seed: u64) -> Result<String, JsError> {
    to_js(fdr_curve_json(setting, preset, n, replications, seed))
}

#[wasm_bindgen]
pub fn region_score_field(
    num_balls: usize,
    radius: f64,
    resolution: usize,
    rule: &str,
    seed: u64,
) -> Result<String, JsError> {
    to_js(score_field_json(num_balls, radius, resolution, rule, seed))
}
