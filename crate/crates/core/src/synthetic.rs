//! Synthetic confidence profiles with controlled calibration.
//!
//! Each sample draws a confidence `c` from a [`Distribution`], a predicted
//! class uniformly from {0, 1}, and a correctness flag from
//! `Bernoulli(p(c))` where `p` is the [`CalibrationMode`]. The true label
//! equals the prediction when correct and the other class otherwise.
//!
//! Repetition `r` of an experiment draws from ChaCha8 stream `r` keyed by
//! the master seed. Distinct streams of the same key never overlap, so
//! repetitions are independent and can run in any order.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution as _, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CalRiskError, Result};
use crate::metrics::{risk_report, RiskReport};
use crate::ranking::{macro_average, per_class_auc};
use crate::record::{clip_confidences, EvaluationSet, PredictionRecord, DEFAULT_EPSILON};

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $id:literal, $label:literal;)+ }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant,)+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant,)+];

            pub fn id(self) -> &'static str {
                match self {
                    $($name::$variant => $id,)+
                }
            }

            /// Display name used in tables.
            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.id())
            }
        }
    };
}

named_enum! {
    /// Confidence score distributions.
    Distribution {
        Uniform => "uniform", "Uniform";
        SkewHigh => "skew_high", "Skew High";
        SkewLow => "skew_low", "Skew Low";
        Bimodal => "bimodal", "Bimodal";
        TightHi => "tight_hi", "Tight Hi";
        TightLo => "tight_lo", "Tight Lo";
        NormalTrunc => "normal_trunc", "Normal";
        LogUniformLow => "log_uniform_low", "Log-Uniform Low";
        LogUniformHigh => "log_uniform_high", "Log-Uniform High";
        Bell => "bell", "Bell";
    }
}

named_enum! {
    /// Maps a confidence `c` to the probability that the prediction is correct.
    CalibrationMode {
        RandomHalf => "random_half", "Random 0.5";
        Perfect => "perfect", "Perfect";
        UnderconfAffine => "underconf_affine", "Underconf 0.2+0.8c";
        UnderconfSqrt => "underconf_sqrt", "Underconf sqrt(c)";
        RandomOver => "random_over", "Random over c";
        OverconfSqrtComplement => "overconf_sqrt_complement", "Overconf 1-sqrt(1-c)";
        OverconfHalf => "overconf_half", "Overconf 0.5c";
        RandomUnder => "random_under", "Random under c";
    }
}

impl FromStr for Distribution {
    type Err = CalRiskError;

    fn from_str(s: &str) -> Result<Self> {
        Distribution::ALL
            .iter()
            .copied()
            .find(|d| d.id() == s)
            .ok_or_else(|| CalRiskError::InvalidArgument(format!("unknown distribution '{s}'")))
    }
}

impl FromStr for CalibrationMode {
    type Err = CalRiskError;

    fn from_str(s: &str) -> Result<Self> {
        CalibrationMode::ALL
            .iter()
            .copied()
            .find(|m| m.id() == s)
            .ok_or_else(|| CalRiskError::InvalidArgument(format!("unknown calibration mode '{s}'")))
    }
}

const LOG_LOW_MIN: f64 = 1e-4;
const LOG_LOW_MAX: f64 = 1.0 - 1e-6;
const LOG_HIGH_MIN: f64 = 1e-6;
const LOG_HIGH_MAX: f64 = 0.9;

fn beta(a: f64, b: f64) -> Beta<f64> {
    Beta::new(a, b).expect("valid beta parameters")
}

impl Distribution {
    /// One draw in [0, 1).
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        let value = match self {
            Distribution::Uniform => rng.random::<f64>(),
            Distribution::SkewHigh => beta(3.0, 0.5).sample(rng),
            Distribution::SkewLow => beta(0.5, 3.0).sample(rng),
            Distribution::Bimodal => {
                if rng.random_bool(0.5) {
                    beta(0.5, 3.0).sample(rng)
                } else {
                    beta(3.0, 0.5).sample(rng)
                }
            }
            Distribution::TightHi => rng.random_range(0.8..1.0),
            Distribution::TightLo => rng.random_range(0.0..0.2),
            Distribution::NormalTrunc => {
                let normal = Normal::new(0.7, 0.1).expect("valid normal parameters");
                loop {
                    let x = normal.sample(rng);
                    if (0.0..1.0).contains(&x) {
                        break x;
                    }
                }
            }
            Distribution::LogUniformLow => rng
                .random_range(LOG_LOW_MIN.ln()..LOG_LOW_MAX.ln())
                .exp(),
            Distribution::LogUniformHigh => {
                1.0 - rng.random_range(LOG_HIGH_MIN.ln()..LOG_HIGH_MAX.ln()).exp()
            }
            Distribution::Bell => beta(5.0, 5.0).sample(rng),
        };
        // Beta draws can round to exactly 1.0
        value.min(1.0 - f64::EPSILON / 2.0)
    }
}

impl CalibrationMode {
    /// Probability that a prediction with confidence `c` is correct.
    /// The two random modes draw a fresh `u` per call.
    pub fn p_correct<R: Rng + ?Sized>(self, c: f64, rng: &mut R) -> f64 {
        match self {
            CalibrationMode::RandomHalf => 0.5,
            CalibrationMode::Perfect => c,
            CalibrationMode::UnderconfAffine => 0.2 + 0.8 * c,
            CalibrationMode::UnderconfSqrt => c.sqrt(),
            CalibrationMode::RandomOver => c + (1.0 - c) * rng.random::<f64>(),
            CalibrationMode::OverconfSqrtComplement => 1.0 - (1.0 - c).sqrt(),
            CalibrationMode::OverconfHalf => 0.5 * c,
            CalibrationMode::RandomUnder => c * rng.random::<f64>(),
        }
    }
}

fn sample_with<R: Rng + ?Sized>(dist: Distribution, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| dist.sample(rng)).collect()
}

fn labels_with<R: Rng + ?Sized>(
    confs: &[f64],
    mode: CalibrationMode,
    epsilon: f64,
    rng: &mut R,
) -> Result<EvaluationSet> {
    let records = confs
        .iter()
        .map(|&c| {
            let pred = usize::from(rng.random_bool(0.5));
            let p = mode.p_correct(c, rng).clamp(0.0, 1.0);
            let correct = rng.random::<f64>() < p;
            let truth = if correct { pred } else { 1 - pred };
            PredictionRecord::new(truth, pred, c)
        })
        .collect();
    clip_confidences(records, 2, epsilon)
}

/// `n` i.i.d. confidences, deterministic in `seed`.
pub fn sample_confidences(dist: Distribution, n: usize, seed: u64) -> Vec<f64> {
    sample_with(dist, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Binary predictions for `confs` under `mode`, clipped with `epsilon`.
pub fn generate_labels(
    confs: &[f64],
    mode: CalibrationMode,
    seed: u64,
    epsilon: f64,
) -> Result<EvaluationSet> {
    labels_with(confs, mode, epsilon, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Generator for repetition `rep` of an experiment keyed by `master_seed`.
pub fn repetition_rng(master_seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(rep);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub distribution: Distribution,
    pub mode: CalibrationMode,
    pub n: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub m_bins: usize,
    pub epsilon: f64,
}

impl ExperimentSpec {
    pub fn new(distribution: Distribution, mode: CalibrationMode, n: usize, reps: usize) -> Self {
        Self {
            distribution,
            mode,
            n,
            reps,
            master_seed: 42,
            m_bins: 15,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn bins(mut self, m_bins: usize) -> Self {
        self.m_bins = m_bins;
        self
    }

    /// The evaluation set of repetition `rep`.
    pub fn repetition(&self, rep: usize) -> Result<EvaluationSet> {
        let mut rng = repetition_rng(self.master_seed, rep as u64);
        let confs = sample_with(self.distribution, self.n, &mut rng);
        labels_with(&confs, self.mode, self.epsilon, &mut rng)
    }
}

/// Per-repetition indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub risk: RiskReport,
    /// Macro AUC and cwAUC; `None` if both classes are degenerate.
    pub auc: Option<f64>,
    pub cw_auc: Option<f64>,
}

/// Means over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub distribution: Distribution,
    pub mode: CalibrationMode,
    pub n: usize,
    pub reps: usize,
    pub mean_acc: f64,
    pub mean_cwa: f64,
    /// Over repetitions where gain is defined.
    pub mean_gain: f64,
    pub mean_csr: f64,
    pub mean_sigma_csr: f64,
    pub mean_p_risk: f64,
    pub mean_p_risk_one_sided: f64,
    pub mean_ece: f64,
    pub mean_brier: f64,
    pub mean_auc: f64,
    pub mean_cw_auc: f64,
    /// Share of repetitions with `CSR > 1 + σ_CSR`.
    pub frac_over_1sigma: f64,
    /// Share of repetitions with `CSR > 1 + 3·σ_CSR`.
    pub frac_over_3sigma: f64,
}

pub fn run_repetition(spec: &ExperimentSpec, rep: usize) -> Result<RepetitionResult> {
    let set = spec.repetition(rep)?;
    let risk = risk_report(&set, spec.m_bins)?;
    let (auc, cw_auc) = match macro_average(&per_class_auc(&set)?) {
        Ok(m) => (Some(m.auc), Some(m.cw_auc)),
        Err(CalRiskError::NoValidClasses) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(RepetitionResult { risk, auc, cw_auc })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Reduces repetition results in index order.
pub fn aggregate(spec: &ExperimentSpec, results: &[RepetitionResult]) -> AggregateReport {
    let frac = |k: f64| {
        results.iter().filter(|r| r.risk.exceeds_sigma(k)).count() as f64 / results.len() as f64
    };
    AggregateReport {
        distribution: spec.distribution,
        mode: spec.mode,
        n: spec.n,
        reps: results.len(),
        mean_acc: mean(results.iter().map(|r| r.risk.acc)),
        mean_cwa: mean(results.iter().map(|r| r.risk.cwa)),
        mean_gain: mean(results.iter().filter_map(|r| r.risk.gain)),
        mean_csr: mean(results.iter().map(|r| r.risk.csr)),
        mean_sigma_csr: mean(results.iter().map(|r| r.risk.sigma_csr)),
        mean_p_risk: mean(results.iter().map(|r| r.risk.p_risk)),
        mean_p_risk_one_sided: mean(results.iter().map(|r| r.risk.p_risk_one_sided)),
        mean_ece: mean(results.iter().map(|r| r.risk.ece)),
        mean_brier: mean(results.iter().map(|r| r.risk.brier)),
        mean_auc: mean(results.iter().filter_map(|r| r.auc)),
        mean_cw_auc: mean(results.iter().filter_map(|r| r.cw_auc)),
        frac_over_1sigma: frac(1.0),
        frac_over_3sigma: frac(3.0),
    }
}

/// Runs all repetitions in parallel; the result only depends on `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AggregateReport> {
    if spec.n < 1 || spec.reps < 1 {
        return Err(CalRiskError::InvalidArgument(
            "experiment needs n >= 1 and reps >= 1".into(),
        ));
    }
    let results = (0..spec.reps)
        .into_par_iter()
        .map(|rep| run_repetition(spec, rep))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(spec, &results))
}

/// Column headers of [`summary_table`].
pub const SUMMARY_COLUMNS: &[&str] = &[
    "distribution",
    "mode",
    "N",
    "reps",
    "Acc",
    "cwA",
    "gain",
    "CSR",
    "sigma_CSR",
    ">1sigma",
    ">3sigma",
    "P_risk",
    "P_risk_one_sided",
    "ECE",
    "Brier",
    "AUC",
    "cwAUC",
];

/// Rows sorted by distribution, mode, then `n`.
pub fn summary_table(reports: &[AggregateReport]) -> Vec<Vec<String>> {
    let mut sorted: Vec<&AggregateReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        (a.distribution, a.mode, a.n).cmp(&(b.distribution, b.mode, b.n))
    });
    sorted
        .into_iter()
        .map(|r| {
            vec![
                r.distribution.id().to_string(),
                r.mode.id().to_string(),
                r.n.to_string(),
                r.reps.to_string(),
                format!("{:.4}", r.mean_acc),
                format!("{:.4}", r.mean_cwa),
                format!("{:.2}%", 100.0 * r.mean_gain),
                format!("{:.4}", r.mean_csr),
                format!("{:.4}", r.mean_sigma_csr),
                format!("{:.2}%", 100.0 * r.frac_over_1sigma),
                format!("{:.2}%", 100.0 * r.frac_over_3sigma),
                format!("{:.2}%", 100.0 * r.mean_p_risk),
                format!("{:.2}%", 100.0 * r.mean_p_risk_one_sided),
                format!("{:.4}", r.mean_ece),
                format!("{:.4}", r.mean_brier),
                format!("{:.4}", r.mean_auc),
                format!("{:.4}", r.mean_cw_auc),
            ]
        })
        .collect()
}
