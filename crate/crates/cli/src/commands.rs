use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use calrisk::adversarial::{adversarial_profile_with, default_base_pattern};
use calrisk::calibrate::{apply_calibrator, binary_targets, fit_isotonic, fit_platt, Calibrator};
use calrisk::metrics::{csr, ece};
use calrisk::ranking::{cw_roc_curve, roc_curve};
use calrisk::synthetic::{run_experiment, summary_table, AggregateReport, SUMMARY_COLUMNS};
use calrisk::{
    CalRiskError, CalibrationMode, Distribution, EvaluationSet, ExperimentSpec, PredictionRecord,
    RiskReport, DEFAULT_EPSILON,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::input::{parse_predictions, predictions_csv, write_atomic};
use crate::report::{align, build_report, ranking_summary, render_csv, render_text, risk_table, Provenance};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "calrisk", version, about = "Calibration risk metrics for classifier confidence scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a prediction CSV.
    Eval(EvalArgs),
    /// Run the synthetic calibration experiments.
    Synth(SynthArgs),
    /// Write a profile with ECE < 1/N and CSR > lambda.
    Adversarial(AdversarialArgs),
    /// Fit a calibrator on one split and compare risk on the other.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Isotonic,
    Platt,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    /// Directory for per-class ROC and cw-ROC point files.
    #[arg(long)]
    pub roc_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Distribution id or `all`.
    #[arg(long)]
    pub dist: String,
    /// Calibration mode id or `all`.
    #[arg(long)]
    pub mode: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, env = "CALRISK_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    pub format: TableFormat,
}

#[derive(Debug, Args)]
pub struct AdversarialArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "CALRISK_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Fraction of rows used for fitting.
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long, env = "CALRISK_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = CompareFormat::Text)]
    pub format: CompareFormat,
}

/// What a command wants printed: stdout text plus stderr warnings.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub warnings: Vec<String>,
}

fn check_bins(bins: usize) -> CliResult<()> {
    if bins == 0 {
        return Err(CliError::Usage("--bins must be at least 1".into()));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> CliResult<()> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(CliError::Usage(format!("--epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    Ok(())
}

fn curve_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("x,y\n");
    for (x, y) in points {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

fn write_curves(set: &EvaluationSet, dir: &Path) -> CliResult<usize> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = 0;
    for k in 0..set.k() {
        let (roc, cwroc) = match (roc_curve(set, k), cw_roc_curve(set, k)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(CalRiskError::DegenerateClass(_)), _) | (Err(CalRiskError::MissingClassConfidences { .. }), _) => {
                continue
            }
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        };
        write_atomic(&dir.join(format!("class_{k}_roc.csv")), curve_csv(&roc.points).as_bytes())?;
        write_atomic(&dir.join(format!("class_{k}_cwroc.csv")), curve_csv(&cwroc.points).as_bytes())?;
        written += 2;
    }
    Ok(written)
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<Output> {
    check_bins(args.bins)?;
    check_epsilon(args.epsilon)?;
    let parsed = parse_predictions(&args.input, args.epsilon)?;
    let set = &parsed.set;
    let doc = build_report(
        set,
        args.bins,
        Provenance {
            command: "eval".into(),
            input: Some(args.input.display().to_string()),
            epsilon: args.epsilon,
            m_bins: args.bins,
            seed: None,
            n: set.len(),
            k: set.k(),
        },
    )?;
    let mut warnings = parsed.warnings();
    if let Some(dir) = &args.roc_out {
        if write_curves(set, dir)? == 0 {
            warnings.push("no class has a defined ROC curve; nothing written to --roc-out".into());
        }
    }
    let stdout = match args.format {
        ReportFormat::Json => serde_json::to_string_pretty(&doc).expect("report serializes") + "\n",
        ReportFormat::Csv => render_csv(&doc),
        ReportFormat::Text => render_text(&doc),
    };
    Ok(Output { stdout, warnings })
}

fn pick<T: Copy>(value: &str, all: &[T], parse: impl Fn(&str) -> calrisk::Result<T>, what: &str) -> CliResult<Vec<T>> {
    if value == "all" {
        return Ok(all.to_vec());
    }
    parse(value).map(|v| vec![v]).map_err(|_| CliError::Usage(format!("unknown {what} id '{value}'")))
}

pub fn synth_reports(args: &SynthArgs) -> CliResult<Vec<AggregateReport>> {
    check_bins(args.bins)?;
    let dists = pick(&args.dist, Distribution::ALL, str::parse, "distribution")?;
    let modes = pick(&args.mode, CalibrationMode::ALL, str::parse, "calibration mode")?;
    if args.n == 0 || args.reps == 0 {
        return Err(CliError::Usage("--n and --reps must be positive".into()));
    }
    let mut reports = Vec::with_capacity(dists.len() * modes.len());
    for &d in &dists {
        for &m in &modes {
            let spec = ExperimentSpec::new(d, m, args.n, args.reps).seed(args.seed).bins(args.bins);
            reports.push(run_experiment(&spec)?);
        }
    }
    Ok(reports)
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<Output> {
    let mut reports = synth_reports(args)?;
    reports.sort_by(|a, b| (a.distribution, a.mode, a.n).cmp(&(b.distribution, b.mode, b.n)));
    let stdout = match args.format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &reports {
                w.serialize(r).map_err(|e| CliError::Usage(e.to_string()))?;
            }
            String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
        }
        TableFormat::Text => {
            let mut rows = vec![SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect()];
            rows.extend(summary_table(&reports));
            align(&rows)
        }
    };
    Ok(Output {
        stdout,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialSummary {
    pub n: usize,
    pub lambda: f64,
    pub delta: f64,
    pub ece: f64,
    pub csr: f64,
    pub ece_bound: f64,
}

/// Profile records after a seeded shuffle and a seeded swap of the two
/// class names; neither changes ECE or CSR.
pub fn adversarial_records(args: &AdversarialArgs) -> CliResult<(EvaluationSet, AdversarialSummary)> {
    check_bins(args.bins)?;
    if args.n < 2 {
        return Err(CliError::Usage(format!("--n must be at least 2, got {}", args.n)));
    }
    let base = default_base_pattern(args.n - 1, args.bins);
    let profile = adversarial_profile_with(&base, args.lambda, args.bins, DEFAULT_EPSILON)?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut records: Vec<PredictionRecord> = profile.set.records().to_vec();
    records.shuffle(&mut rng);
    if rng.random_bool(0.5) {
        for r in &mut records {
            r.true_label = 1 - r.true_label;
            r.pred_label = 1 - r.pred_label;
        }
    }
    let set = EvaluationSet::new(records, 2)?;
    let summary = AdversarialSummary {
        n: set.len(),
        lambda: args.lambda,
        delta: profile.delta,
        ece: ece(&set, args.bins)?,
        csr: csr(&set)?,
        ece_bound: 1.0 / set.len() as f64,
    };
    Ok((set, summary))
}

pub fn cmd_adversarial(args: &AdversarialArgs) -> CliResult<Output> {
    let (set, s) = adversarial_records(args)?;
    write_atomic(&args.out, predictions_csv(set.records(), 2).as_bytes())?;
    let stdout = format!(
        "n = {}\nlambda = {}\ndelta = {}\nECE = {}\nCSR = {}\nECE < 1/n: {}\nCSR > lambda: {}\n",
        s.n,
        s.lambda,
        s.delta,
        s.ece,
        s.csr,
        s.ece < s.ece_bound,
        s.csr > s.lambda
    );
    Ok(Output {
        stdout,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationComparison {
    pub method: String,
    pub fit_rows: usize,
    pub eval_rows: usize,
    pub calibrator: Calibrator,
    pub raw: RiskReport,
    pub calibrated: RiskReport,
    pub raw_auc_macro: Option<f64>,
    pub calibrated_auc_macro: Option<f64>,
    pub raw_cw_auc_macro: Option<f64>,
    pub calibrated_cw_auc_macro: Option<f64>,
    pub seed: u64,
}

/// Number of fitting rows for `n` rows at fraction `split`.
pub fn fit_size(n: usize, split: f64) -> usize {
    (split * n as f64).floor() as usize
}

pub fn calibrate_sets(args: &CalibrateArgs) -> CliResult<(EvaluationSet, CalibrationComparison, Vec<String>)> {
    check_bins(args.bins)?;
    check_epsilon(args.epsilon)?;
    if !(args.split > 0.0 && args.split < 1.0) {
        return Err(CliError::Usage(format!("--split must lie in (0, 1), got {}", args.split)));
    }
    let parsed = parse_predictions(&args.input, args.epsilon)?;
    let mut warnings = parsed.warnings();
    let set = parsed.set;
    if set.k() != 2 {
        return Err(CliError::UnsupportedMulticlass(set.k()));
    }
    let n = set.len();
    let n_fit = fit_size(n, args.split);
    if n_fit < 2 || n_fit >= n {
        return Err(CliError::DegenerateSplit(format!(
            "{n} rows at split {} leave {n_fit} to fit and {} to evaluate",
            args.split,
            n - n_fit.min(n)
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(args.seed));
    let fit = set.select(&order[..n_fit])?;
    let eval = set.select(&order[n_fit..])?;

    let (scores, targets) = binary_targets(&fit)?;
    let calibrator = match args.method {
        Method::Isotonic => {
            let map = fit_isotonic(&scores, &targets)?;
            if map.is_constant() {
                warnings.push("fit split has a single class; isotonic map is constant".into());
            }
            Calibrator::Isotonic(map)
        }
        Method::Platt => match fit_platt(&scores, &targets) {
            Ok(m) => Calibrator::Platt(m),
            Err(CalRiskError::DegenerateTargets) => {
                return Err(CliError::DegenerateSplit("fit split has a single class".into()))
            }
            Err(e) => return Err(e.into()),
        },
    };
    let calibrated = apply_calibrator(&calibrator, &eval)?;

    let (_, raw_macro) = ranking_summary(&eval)?;
    let (_, cal_macro) = ranking_summary(&calibrated)?;
    let comparison = CalibrationComparison {
        method: match args.method {
            Method::Isotonic => "isotonic".into(),
            Method::Platt => "platt".into(),
        },
        fit_rows: fit.len(),
        eval_rows: eval.len(),
        calibrator,
        raw: calrisk::risk_report(&eval, args.bins)?,
        calibrated: calrisk::risk_report(&calibrated, args.bins)?,
        raw_auc_macro: raw_macro.as_ref().map(|m| m.auc),
        calibrated_auc_macro: cal_macro.as_ref().map(|m| m.auc),
        raw_cw_auc_macro: raw_macro.as_ref().map(|m| m.cw_auc),
        calibrated_cw_auc_macro: cal_macro.as_ref().map(|m| m.cw_auc),
        seed: args.seed,
    };
    Ok((calibrated, comparison, warnings))
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> CliResult<Output> {
    let (calibrated, cmp, warnings) = calibrate_sets(args)?;
    write_atomic(&args.out, predictions_csv(calibrated.records(), 2).as_bytes())?;
    let stdout = match args.format {
        CompareFormat::Json => serde_json::to_string_pretty(&cmp).expect("comparison serializes") + "\n",
        CompareFormat::Text => {
            let mut out = format!(
                "{} fitted on {} rows, evaluated on {} rows (seed {})\n",
                cmp.method, cmp.fit_rows, cmp.eval_rows, cmp.seed
            );
            let label = format!("{}", cmp.method);
            out.push_str(&risk_table(&[("raw", &cmp.raw), (&label, &cmp.calibrated)], "scores"));
            let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
            out.push_str(&format!(
                "AUC (macro): raw {} -> {}\ncwAUC (macro): raw {} -> {}\n",
                f(cmp.raw_auc_macro),
                f(cmp.calibrated_auc_macro),
                f(cmp.raw_cw_auc_macro),
                f(cmp.calibrated_cw_auc_macro)
            ));
            out
        }
    };
    Ok(Output { stdout, warnings })
}

pub fn run(cli: &Cli) -> CliResult<Output> {
    match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Adversarial(a) => cmd_adversarial(a),
        Command::Calibrate(a) => cmd_calibrate(a),
    }
}
