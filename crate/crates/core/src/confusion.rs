//! Confidence-weighted confusion counts and the metrics built on them.
//!
//! Each sample contributes its predicted-class confidence instead of a
//! unit count, so the classical structural relations between TP, FP, FN
//! and TN carry over unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{CalRiskError, Result};
use crate::record::EvaluationSet;

const IDENTITY_TOLERANCE: f64 = 1e-12;

/// One-vs-rest confidence masses for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwCounts {
    pub class_id: usize,
    pub cw_tp: f64,
    pub cw_fp: f64,
    pub cw_fn: f64,
    pub cw_tn: f64,
    pub cw_p: f64,
    pub cw_n: f64,
    /// `N·c̄`, the total confidence mass of the set.
    pub total_mass: f64,
}

impl CwCounts {
    /// Largest violation of the four structural relations, scaled by the
    /// total mass.
    pub fn structural_residual(&self) -> f64 {
        let scale = self.total_mass.max(1.0);
        [
            self.cw_p - (self.cw_tp + self.cw_fn),
            self.cw_n - (self.cw_fp + self.cw_tn),
            self.cw_p + self.cw_n - self.total_mass,
            self.cw_tp + self.cw_fp + self.cw_fn + self.cw_tn - self.total_mass,
        ]
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()))
            / scale
    }
}

/// Per-class confidence-weighted metrics; `None` marks a zero denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwMetricRow {
    pub class_id: usize,
    pub cw_precision: Option<f64>,
    pub cw_recall: Option<f64>,
    pub cw_specificity: Option<f64>,
    pub cw_f1: Option<f64>,
    pub cw_mcc: Option<f64>,
    pub cw_acc: Option<f64>,
}

pub fn cw_counts(set: &EvaluationSet, class_id: usize) -> Result<CwCounts> {
    if class_id >= set.k() {
        return Err(CalRiskError::LabelOutOfRange {
            index: 0,
            label: class_id,
            k: set.k(),
        });
    }
    let mut c = CwCounts {
        class_id,
        cw_tp: 0.0,
        cw_fp: 0.0,
        cw_fn: 0.0,
        cw_tn: 0.0,
        cw_p: 0.0,
        cw_n: 0.0,
        total_mass: 0.0,
    };
    for r in set.iter() {
        let w = r.conf;
        let actual = r.true_label == class_id;
        let predicted = r.pred_label == class_id;
        let correct = r.is_correct();
        if correct && actual {
            c.cw_tp += w;
        }
        if !correct && actual {
            c.cw_fn += w;
        }
        if !correct && predicted {
            c.cw_fp += w;
        }
        if !predicted && !actual {
            c.cw_tn += w;
        }
        if actual {
            c.cw_p += w;
        } else {
            c.cw_n += w;
        }
        c.total_mass += w;
    }
    Ok(c)
}

/// Counts for every class, in class order.
pub fn all_cw_counts(set: &EvaluationSet) -> Vec<CwCounts> {
    (0..set.k())
        .map(|k| cw_counts(set, k).expect("class index below k"))
        .collect()
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

pub fn cw_metrics(counts: &CwCounts) -> CwMetricRow {
    let CwCounts {
        cw_tp: tp,
        cw_fp: fp,
        cw_fn: fn_,
        cw_tn: tn,
        ..
    } = *counts;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, counts.cw_p);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) => ratio(2.0 * p * r, p + r),
        _ => None,
    };
    let mcc_den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    CwMetricRow {
        class_id: counts.class_id,
        cw_precision: precision,
        cw_recall: recall,
        cw_specificity: ratio(tn, counts.cw_n),
        cw_f1: f1,
        cw_mcc: ratio(tp * tn - fp * fn_, mcc_den),
        cw_acc: ratio(tp + tn, counts.total_mass),
    }
}

/// `Σ_k cwTP^(k) / Σ_k cwP^(k)`.
pub fn cwa_from_counts(all_counts: &[CwCounts]) -> Result<f64> {
    let first = all_counts.first().ok_or(CalRiskError::InconsistentCounts)?;
    let mass = first.total_mass;
    if all_counts
        .iter()
        .any(|c| (c.total_mass - mass).abs() > IDENTITY_TOLERANCE * mass.max(1.0))
    {
        return Err(CalRiskError::InconsistentCounts);
    }
    let tp: f64 = all_counts.iter().map(|c| c.cw_tp).sum();
    let p: f64 = all_counts.iter().map(|c| c.cw_p).sum();
    Ok(tp / p)
}

/// `|Σ_k cwAcc^(k) − (K − 2) − 2·cwA|` over all `K` rows.
pub fn macro_identity_check(all_counts: &[CwCounts], cwa_value: f64) -> f64 {
    let k = all_counts.len() as f64;
    let sum: f64 = all_counts
        .iter()
        .map(|c| (c.cw_tp + c.cw_tn) / c.total_mass)
        .sum();
    (sum - (k - 2.0) - 2.0 * cwa_value).abs()
}
