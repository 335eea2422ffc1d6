//! Calibration-risk metrics for classifiers with confidence scores.
//!
//! The core quantity is the calibrated size ratio (CSR), the mean of
//! `1/(1 − conf)` over incorrect predictions, with its null standard
//! deviation and the Gaussian risk probability `P_risk`. Around it sit
//! confidence-weighted accuracy and confusion metrics, ROC and cw-ROC
//! curves, a synthetic experiment harness and two binary calibrators.

pub mod adversarial;
pub mod calibrate;
pub mod confusion;
pub mod error;
pub mod metrics;
pub mod normal;
pub mod ranking;
pub mod record;
pub mod synthetic;

pub use adversarial::{adversarial_profile, adversarial_profile_with, AdversarialProfile};
pub use calibrate::{
    apply_calibrator, fit_isotonic, fit_platt, Calibrator, IsotonicMap, PlattMap, ScoreMap,
};
pub use confusion::{all_cw_counts, cw_counts, cw_metrics, CwCounts, CwMetricRow};
pub use error::{CalRiskError, Result};
pub use metrics::{risk_report, RiskReport};
pub use normal::normal_cdf;
pub use ranking::{AucGap, CurveSeries, MacroAuc};
pub use record::{clip_confidences, EvaluationSet, PredictionRecord, DEFAULT_EPSILON};
pub use synthetic::{AggregateReport, CalibrationMode, Distribution, ExperimentSpec};
