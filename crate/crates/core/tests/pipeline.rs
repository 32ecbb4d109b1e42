use mccs_core::config::{
    DataConfig, ExperimentConfig, FileSource, Method, Mode, NamedTarget, Preset, QLevels, TargetKind,
};
use mccs_core::harness::run;
use mccs_core::predictor::{write_predictions, PredictionTable, PredictorConfig};
use mccs_core::pvalue::PValueOptions;
use mccs_core::rng::TieBreakStream;
use mccs_core::select::mccs;
use mccs_core::simgen::SettingSpec;
use mccs_core::{Error, FeatureSet, LabeledSet, Target};

fn simulate(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Mode::Simulate, DataConfig::univariate(SettingSpec::new(1), 400));
    cfg.seed = 11;
    run(&cfg, dir).unwrap();
    cfg
}

fn read_json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn select_from_files_matches_the_library_call() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let target_json = r#"{"intervals": [[-5.0, 5.0]]}"#;
    let kind: TargetKind = serde_json::from_str(target_json).unwrap();

    let mut cfg = ExperimentConfig::new(
        Mode::Select,
        DataConfig::files(FileSource {
            train: Some(dir.path().join("train.csv")),
            calibration: dir.path().join("calibration.csv"),
            test: dir.path().join("test.csv"),
            calibration_predictions: None,
            test_predictions: None,
        }),
    );
    cfg.targets = vec![NamedTarget::new("box", kind)];
    cfg.q = Some(QLevels::Single(0.2));
    cfg.seed = 5;
    let out = dir.path().join("select");
    run(&cfg, &out).unwrap();

    let train = LabeledSet::read_csv(dir.path().join("train.csv")).unwrap();
    let cal = LabeledSet::read_csv(dir.path().join("calibration.csv")).unwrap();
    let (test, _) = FeatureSet::read_csv(dir.path().join("test.csv")).unwrap();
    let Target::Intervals(spec) = serde_json::from_str::<Target>(target_json).unwrap() else {
        unreachable!()
    };
    let direct = mccs(
        &train,
        &cal,
        &test,
        &spec,
        0.2,
        &PredictorConfig::default(),
        &PValueOptions::default(),
        &TieBreakStream::new(5, 0),
    )
    .unwrap();

    let result = read_json(&out.join("result.json"));
    let selected: Vec<usize> = serde_json::from_value(result["results"][0]["selected"].clone()).unwrap();
    assert_eq!(selected, direct.result.samples);
    assert_eq!(result["results"][0]["cut_index"], direct.result.cut_index);

    // selection.csv marks exactly the selected pairs
    let mut reader = csv::Reader::from_path(out.join("selection.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        &headers,
        vec!["replication", "target", "method", "q", "j", "k", "p", "selected"]
    );
    let marked: Vec<usize> = reader
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[7] == "1")
        .map(|r| r[4].parse().unwrap())
        .collect();
    assert_eq!(marked, direct.result.samples);
    // the test file carries responses, so metrics are written too
    assert!(out.join("metrics.csv").exists());
}

#[test]
fn select_with_external_predictions() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let train = LabeledSet::read_csv(dir.path().join("train.csv")).unwrap();
    let cal = LabeledSet::read_csv(dir.path().join("calibration.csv")).unwrap();
    let (test, _) = FeatureSet::read_csv(dir.path().join("test.csv")).unwrap();
    let model = PredictorConfig::default().fit(&train).unwrap();
    write_predictions(
        dir.path().join("cal_pred.csv"),
        &PredictionTable::new(model.predict(cal.features()).unwrap()).unwrap(),
    )
    .unwrap();
    write_predictions(dir.path().join("test_pred.csv"), &model.predict_set(&test).unwrap()).unwrap();

    let files = |preds: bool| FileSource {
        train: (!preds).then(|| dir.path().join("train.csv")),
        calibration: dir.path().join("calibration.csv"),
        test: dir.path().join("test.csv"),
        calibration_predictions: preds.then(|| dir.path().join("cal_pred.csv")),
        test_predictions: preds.then(|| dir.path().join("test_pred.csv")),
    };
    let boxed: TargetKind = serde_json::from_str(r#"{"intervals": [[-5.0, 5.0]]}"#).unwrap();
    let mut selected = Vec::new();
    for preds in [false, true] {
        let mut cfg = ExperimentConfig::new(Mode::Select, DataConfig::files(files(preds)));
        cfg.targets = vec![NamedTarget::new("box", boxed.clone())];
        cfg.q = Some(QLevels::Single(0.3));
        let out = dir.path().join(format!("out{preds}"));
        run(&cfg, &out).unwrap();
        selected.push(read_json(&out.join("result.json"))["results"][0]["selected"].clone());
    }
    assert_eq!(selected[0], selected[1]);
    assert!(!selected[0].as_array().unwrap().is_empty());

    // presets resolve against calibration responses when no train set is given
    let mut cfg = ExperimentConfig::new(Mode::Select, DataConfig::files(files(true)));
    cfg.targets = vec![NamedTarget::new("disj", TargetKind::Preset(Preset::Disjunctive))];
    cfg.q = Some(QLevels::Single(0.3));
    run(&cfg, dir.path().join("preset")).unwrap();

    let mut cfg = ExperimentConfig::new(Mode::Select, DataConfig::files(files(true)));
    cfg.targets = vec![NamedTarget::new("box", boxed)];
    cfg.q = Some(QLevels::Single(0.3));
    cfg.methods = vec![Method::Ind];
    assert!(run(&cfg, dir.path().join("bad")).unwrap_err().is_config());
}

#[test]
fn replicate_report_contract() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Mode::Replicate, DataConfig::univariate(SettingSpec::new(1), 300));
    cfg.targets = vec![NamedTarget::new("conj", TargetKind::Preset(Preset::Conjunctive))];
    cfg.methods = vec![Method::Mccs, Method::Int];
    cfg.q = Some(QLevels::Single(0.3));
    cfg.replications = 5;
    cfg.outputs.pvalues = true;
    cfg.outputs.selection = true;
    run(&cfg, dir.path()).unwrap();

    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["tool_version"], mccs_core::VERSION);
    assert_eq!(summary["config_digest"], cfg.digest());
    let row = &summary["rows"][0];
    for key in ["fdr_estimate", "power_estimate", "se"] {
        assert!(row[key].is_number(), "{key}");
    }
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "replication,target,method,q,fdp_sample,fdp_pair,power,num_selected"
    );
    assert_eq!(lines.count(), 5 * 2);
    for f in ["pvalues.csv", "selection.csv", "manifest.json", "config.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    // the written config reproduces the digest
    let back = ExperimentConfig::from_file(dir.path().join("config.json")).unwrap();
    assert_eq!(back.digest(), cfg.digest());
}

#[test]
fn sweep_emits_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Mode::Sweep, DataConfig::univariate(SettingSpec::new(4), 200));
    cfg.targets = vec![NamedTarget::new("t4", TargetKind::Preset(Preset::Task4))];
    cfg.replications = 3;
    let outcome = run(&cfg, dir.path()).unwrap();
    let report = outcome.report.unwrap();
    let qs: Vec<f64> = report.rows.iter().map(|r| r.q).collect();
    let expected: Vec<f64> = (1..=10).map(|i| i as f64 / 20.0).collect();
    assert_eq!(qs, expected);
}

#[test]
fn errors_are_classified() {
    let err =
        ExperimentConfig::from_json(r#"{"mode": "replicate", "data": {"univariate": {"setting": 1}}, "bogus": 1}"#)
            .unwrap_err();
    assert!(err.is_config());

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cal.csv"), "x_1,y_1\n1.0,oops\n").unwrap();
    std::fs::write(dir.path().join("test.csv"), "x_1\n1.0\n").unwrap();
    let mut cfg = ExperimentConfig::new(
        Mode::Select,
        DataConfig::files(FileSource {
            train: Some(dir.path().join("cal.csv")),
            calibration: dir.path().join("cal.csv"),
            test: dir.path().join("test.csv"),
            calibration_predictions: None,
            test_predictions: None,
        }),
    );
    cfg.targets = vec![NamedTarget::new(
        "t",
        serde_json::from_str(r#"{"intervals": [[0.0, 1.0]]}"#).unwrap(),
    )];
    cfg.q = Some(QLevels::Single(0.1));
    let err = run(&cfg, dir.path().join("out")).unwrap_err();
    assert!(matches!(err, Error::Data { .. }), "{err}");
}
