use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mccs_core::config::{
    DataConfig, ExperimentConfig, FileSource, Method, Mode, NamedTarget, Preset, QLevels, TargetKind,
};
use mccs_core::harness::{run, RunOutcome};
use mccs_core::simgen::SettingSpec;
use mccs_core::Error;

/// FDR-controlled selection of test samples whose responses fall in a
/// multi-condition target region.
#[derive(Parser)]
#[command(name = "mccs", version = mccs_core::VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select test samples from user CSVs.
    Select(Opts),
    /// Write one generated dataset and its 8:1:1 split.
    Simulate(Opts),
    /// Monte Carlo FDR and power study.
    Replicate(Opts),
    /// Replicate over a q grid (0.05..0.5 unless --q is given).
    Sweep(Opts),
}

#[derive(Args)]
struct Opts {
    /// JSON experiment config; the flags below override its keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, default_value = "mccs-out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short = 'r', long)]
    replications: Option<usize>,
    /// Worker threads. Results do not depend on it.
    #[arg(short = 'j', long)]
    workers: Option<usize>,
    /// Comma-separated FDR levels.
    #[arg(short, long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    /// Comma-separated methods: mccs, mrcs, int, uni, int-b, uni-b, ind.
    #[arg(short, long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Target preset (conjunctive, disjunctive, task1..task6) or a JSON
    /// target such as '{"intervals": [[0, 1], [2, 3]]}'. Repeatable.
    #[arg(short, long)]
    target: Vec<String>,

    /// Generate data from univariate setting 1..6.
    #[arg(long)]
    setting: Option<u8>,
    /// Noise scale of the generated data.
    #[arg(long, requires = "setting")]
    noise: Option<f64>,
    /// Rows generated per replication.
    #[arg(short, long)]
    n: Option<usize>,

    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, requires = "test")]
    calibration: Option<PathBuf>,
    #[arg(long, requires = "calibration")]
    test: Option<PathBuf>,
    #[arg(long, requires = "test_predictions")]
    calibration_predictions: Option<PathBuf>,
    #[arg(long, requires = "calibration_predictions")]
    test_predictions: Option<PathBuf>,

    /// Also write pvalues.csv.
    #[arg(long)]
    pvalues: bool,
    /// Also write selection.csv.
    #[arg(long)]
    selection: bool,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

fn parse_target(text: &str) -> Result<NamedTarget, Error> {
    let text = text.trim();
    if text.starts_with('{') {
        let kind: TargetKind = serde_json::from_str(text).map_err(|e| Error::Config(format!("target {text}: {e}")))?;
        return Ok(NamedTarget {
            name: None,
            target: kind,
        });
    }
    let preset: Preset = serde_json::from_value(serde_json::Value::String(text.to_ascii_lowercase()))
        .map_err(|_| Error::Config(format!("unknown target preset {text:?}")))?;
    Ok(NamedTarget::new(preset.name(), TargetKind::Preset(preset)))
}

fn resolve(mode: Mode, opts: &Opts) -> Result<ExperimentConfig, Error> {
    let files = opts.calibration.as_ref().map(|cal| FileSource {
        train: opts.train.clone(),
        calibration: cal.clone(),
        test: opts.test.clone().expect("clap enforces --test"),
        calibration_predictions: opts.calibration_predictions.clone(),
        test_predictions: opts.test_predictions.clone(),
    });
    if files.is_none() && opts.train.is_some() {
        return Err(Error::Config("--train needs --calibration and --test".into()));
    }
    let flag_data = match (files, opts.setting) {
        (Some(_), Some(_)) => return Err(Error::Config("give either --setting or data files, not both".into())),
        (Some(f), None) => Some(DataConfig::files(f)),
        (None, Some(s)) => {
            let mut spec = SettingSpec::new(s);
            if let Some(noise) = opts.noise {
                spec = spec.with_noise(noise);
            }
            Some(DataConfig::univariate(spec, 1000))
        }
        (None, None) => None,
    };

    let mut cfg = match (&opts.config, flag_data) {
        (Some(path), data) => {
            let mut cfg = ExperimentConfig::from_file(path)?;
            if let Some(data) = data {
                cfg.data = DataConfig { n: cfg.data.n, ..data };
            }
            cfg.mode = mode;
            cfg
        }
        (None, Some(data)) => ExperimentConfig::new(mode, data),
        (None, None) => {
            return Err(Error::Config(
                "no data source: pass --config, --setting, or --calibration/--test".into(),
            ))
        }
    };

    if let Some(n) = opts.n {
        cfg.data.n = n;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(r) = opts.replications {
        cfg.replications = r;
    }
    if let Some(w) = opts.workers {
        cfg.workers = Some(w);
    }
    if let Some(q) = &opts.q {
        cfg.q = Some(match q.as_slice() {
            [single] => QLevels::Single(*single),
            grid => QLevels::Grid(grid.to_vec()),
        });
    }
    if let Some(methods) = &opts.methods {
        cfg.methods = methods
            .iter()
            .map(|m| Method::parse(m.trim()))
            .collect::<Result<_, _>>()?;
    }
    if !opts.target.is_empty() {
        cfg.targets = opts.target.iter().map(|t| parse_target(t)).collect::<Result<_, _>>()?;
    }
    cfg.outputs.pvalues |= opts.pvalues;
    cfg.outputs.selection |= opts.selection;
    cfg.validate()?;
    Ok(cfg)
}

fn report(outcome: &RunOutcome) {
    if let Some(report) = &outcome.report {
        println!(
            "{:<16} {:<6} {:>5} {:>8} {:>8} {:>8} {:>8} {:>9}",
            "target", "method", "q", "fdr", "se", "power", "se", "selected"
        );
        for row in &report.rows {
            println!(
                "{:<16} {:<6} {:>5.2} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>9.1}{}",
                row.target,
                row.method.name(),
                row.q,
                row.fdr_estimate,
                row.se,
                row.power_estimate,
                row.power_se,
                row.mean_selected,
                row.warning.as_deref().map(|w| format!("  ({w})")).unwrap_or_default(),
            );
        }
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Data { .. } | Error::DimensionMismatch { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, opts) = match &cli.command {
        Command::Select(o) => (Mode::Select, o),
        Command::Simulate(o) => (Mode::Simulate, o),
        Command::Replicate(o) => (Mode::Replicate, o),
        Command::Sweep(o) => (Mode::Sweep, o),
    };
    let result = resolve(mode, opts).and_then(|cfg| {
        if opts.print_config {
            println!("{}", cfg.to_json());
            return Ok(None);
        }
        run(&cfg, &opts.out).map(Some)
    });
    match result {
        Ok(Some(outcome)) => {
            report(&outcome);
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("mccs: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
