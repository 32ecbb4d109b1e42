use std::path::Path;
use std::process::{Command, Output};

fn mccs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mccs")).args(args).output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

const REPLICATE: &[&str] = &[
    "replicate",
    "--setting",
    "1",
    "-n",
    "300",
    "--target",
    "conjunctive",
    "--target",
    "disjunctive",
    "--methods",
    "mccs,uni-b",
    "--q",
    "0.2,0.3",
    "-r",
    "6",
    "--seed",
    "42",
];

#[test]
fn replicate_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let out = dir.path().join(name);
        let mut args = REPLICATE.to_vec();
        let out_s = out_arg(&out);
        args.extend(["--workers", workers, "--out", &out_s]);
        let res = mccs(&args);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        outputs.push(std::fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    // 6 replications x 2 targets x 2 methods x 2 levels
    assert_eq!(String::from_utf8_lossy(&outputs[0]).lines().count(), 1 + 48);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.json");
    std::fs::write(
        &cfg_path,
        r#"{
            "mode": "replicate",
            "data": {"univariate": {"setting": 2}, "n": 300},
            "targets": [{"name": "t5", "target": {"preset": "task5"}}],
            "q": 0.3,
            "replications": 2,
            "seed": 3
        }"#,
    )
    .unwrap();
    let res = mccs(&[
        "replicate",
        "-c",
        cfg_path.to_str().unwrap(),
        "-r",
        "4",
        "--q",
        "0.1",
        "--print-config",
    ]);
    assert!(res.status.success());
    let resolved: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(resolved["replications"], 4);
    assert_eq!(resolved["q"], 0.1);
    assert_eq!(resolved["seed"], 3);
    assert_eq!(resolved["data"]["univariate"]["setting"], 2);

    let out = dir.path().join("out");
    let res = mccs(&[
        "sweep",
        "-c",
        cfg_path.to_str().unwrap(),
        "--q",
        "0.1,0.2,0.3",
        "-o",
        &out_arg(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "sweep");
    assert_eq!(summary["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_then_select() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let res = mccs(&[
        "simulate",
        "--setting",
        "4",
        "-n",
        "500",
        "--seed",
        "9",
        "-o",
        &out_arg(&data),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let file = |f: &str| data.join(f).to_str().unwrap().to_string();

    let out = dir.path().join("sel");
    let res = mccs(&[
        "select",
        "--train",
        &file("train.csv"),
        "--calibration",
        &file("calibration.csv"),
        "--test",
        &file("test.csv"),
        "--target",
        r#"{"intervals": [[null, -1.0], [1.0, null]]}"#,
        "--q",
        "0.2",
        "-o",
        &out_arg(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let result: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("result.json")).unwrap()).unwrap();
    assert!(result["results"][0]["selected"].is_array());
    assert!(out.join("selection.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir.path().join("out"));

    // no data source
    assert_eq!(mccs(&["replicate", "--q", "0.1", "-o", &out]).status.code(), Some(2));
    // q outside (0, 1)
    let res = mccs(&[
        "replicate",
        "--setting",
        "1",
        "--target",
        "conjunctive",
        "--q",
        "1.5",
        "-o",
        &out,
    ]);
    assert_eq!(res.status.code(), Some(2));
    // unknown method
    let res = mccs(&[
        "replicate",
        "--setting",
        "1",
        "--target",
        "conjunctive",
        "--q",
        "0.1",
        "-m",
        "svm",
        "-o",
        &out,
    ]);
    assert_eq!(res.status.code(), Some(2));
    // unknown config key
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"mode": "replicate", "data": {"univariate": {"setting": 1}}, "extra": true}"#,
    )
    .unwrap();
    assert_eq!(
        mccs(&["replicate", "-c", cfg.to_str().unwrap(), "-o", &out])
            .status
            .code(),
        Some(2)
    );

    // missing and malformed data files
    let missing = dir.path().join("missing.csv");
    let missing = missing.to_str().unwrap();
    let res = mccs(&[
        "select",
        "--calibration",
        missing,
        "--test",
        missing,
        "--train",
        missing,
        "--target",
        "conjunctive",
        "--q",
        "0.1",
        "-o",
        &out,
    ]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x_1,y_1\n1.0,2.0\nnot-a-number,1.0\n").unwrap();
    let bad = bad.to_str().unwrap();
    let res = mccs(&[
        "select",
        "--calibration",
        bad,
        "--test",
        bad,
        "--train",
        bad,
        "--target",
        "conjunctive",
        "--q",
        "0.1",
        "-o",
        &out,
    ]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn shipped_configs_resolve() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&path).unwrap();
            let mode = serde_json::from_str::<serde_json::Value>(&text).unwrap()["mode"]
                .as_str()
                .unwrap()
                .to_string();
            let res = mccs(&[&mode, "-c", path.to_str().unwrap(), "--print-config"]);
            assert!(
                res.status.success(),
                "{}: {}",
                path.display(),
                String::from_utf8_lossy(&res.stderr)
            );
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
