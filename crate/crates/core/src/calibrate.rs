//! Binary post-hoc calibrators: isotonic regression and Platt scaling.
//!
//! Both are fitted on the class-1 score against the target `true_label == 1`
//! and applied to the same score. The class-0 score goes through the
//! mirrored map `s ↦ 1 − φ(1 − s)`, so each class score is transformed
//! monotonically and the predicted labels never change.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{CalRiskError, Result};
use crate::record::EvaluationSet;

const PLATT_GRAD_TOL: f64 = 1e-10;
const PLATT_MAX_ITER: usize = 100;
const PLATT_MIN_STEP: f64 = 1e-10;
const PLATT_RIDGE: f64 = 1e-12;

/// A monotone map from a score to a probability.
pub trait ScoreMap {
    fn map(&self, score: f64) -> f64;
}

/// Nondecreasing step function, right-continuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicMap {
    /// Smallest fitting score of each pooled block, ascending.
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl IsotonicMap {
    /// True when all training targets were equal.
    pub fn is_constant(&self) -> bool {
        self.values.len() == 1
    }
}

impl ScoreMap for IsotonicMap {
    fn map(&self, score: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= score);
        self.values[idx.saturating_sub(1)]
    }
}

/// `s ↦ 1/(1 + exp(a·s + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattMap {
    pub a: f64,
    pub b: f64,
}

impl ScoreMap for PlattMap {
    fn map(&self, score: f64) -> f64 {
        let f = self.a * score + self.b;
        if f >= 0.0 {
            let e = (-f).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + f.exp())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Calibrator {
    Isotonic(IsotonicMap),
    Platt(PlattMap),
}

impl ScoreMap for Calibrator {
    fn map(&self, score: f64) -> f64 {
        match self {
            Calibrator::Isotonic(m) => m.map(score),
            Calibrator::Platt(m) => m.map(score),
        }
    }
}

fn check_inputs(scores: &[f64], targets: &[bool]) -> Result<()> {
    if scores.len() != targets.len() {
        return Err(CalRiskError::InvalidArgument(format!(
            "{} scores but {} targets",
            scores.len(),
            targets.len()
        )));
    }
    if scores.len() < 2 {
        return Err(CalRiskError::InvalidArgument(
            "calibration needs at least 2 samples".into(),
        ));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(CalRiskError::InvalidConfidence {
            index: i,
            value: scores[i],
        });
    }
    Ok(())
}

/// Pool-adjacent-violators fit of `targets` on `scores`. Equal scores are
/// pooled into one block first.
pub fn fit_isotonic(scores: &[f64], targets: &[bool]) -> Result<IsotonicMap> {
    check_inputs(scores, targets)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));

    // (start score, target sum, weight); equal scores share a block
    let mut ties: Vec<(f64, f64, f64)> = Vec::new();
    for &i in &order {
        let y = if targets[i] { 1.0 } else { 0.0 };
        match ties.last_mut() {
            Some(b) if b.0 == scores[i] => {
                b.1 += y;
                b.2 += 1.0;
            }
            _ => ties.push((scores[i], y, 1.0)),
        }
    }
    let mut merged: Vec<(f64, f64, f64)> = Vec::with_capacity(ties.len());
    for b in ties {
        merged.push(b);
        while merged.len() > 1 {
            let n = merged.len();
            let (_, s1, w1) = merged[n - 1];
            let (_, s0, w0) = merged[n - 2];
            if s0 / w0 < s1 / w1 {
                break;
            }
            merged.pop();
            let last = merged.last_mut().expect("block exists");
            last.1 += s1;
            last.2 += w1;
        }
    }
    let map = IsotonicMap {
        breakpoints: merged.iter().map(|b| b.0).collect(),
        values: merged.iter().map(|b| b.1 / b.2).collect(),
    };
    debug_assert!(map.values.windows(2).all(|w| w[0] <= w[1]));
    Ok(map)
}

fn platt_loss(scores: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(targets)
        .map(|(&s, &t)| {
            let f = a * s + b;
            if f >= 0.0 {
                t * f + (-f).exp().ln_1p()
            } else {
                (t - 1.0) * f + f.exp().ln_1p()
            }
        })
        .sum()
}

/// Logistic fit with smoothed targets, by damped Newton iterations.
pub fn fit_platt(scores: &[f64], targets: &[bool]) -> Result<PlattMap> {
    check_inputs(scores, targets)?;
    let n_pos = targets.iter().filter(|&&t| t).count();
    let n_neg = targets.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(CalRiskError::DegenerateTargets);
    }
    let hi = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let lo = 1.0 / (n_neg as f64 + 2.0);
    let t: Vec<f64> = targets.iter().map(|&y| if y { hi } else { lo }).collect();

    let mut a = 0.0;
    let mut b = ((n_neg as f64 + 1.0) / (n_pos as f64 + 1.0)).ln();
    let mut loss = platt_loss(scores, &t, a, b);
    for _ in 0..PLATT_MAX_ITER {
        let (mut g_a, mut g_b) = (0.0, 0.0);
        let (mut h_aa, mut h_ab, mut h_bb) = (PLATT_RIDGE, 0.0, PLATT_RIDGE);
        for (&s, &ti) in scores.iter().zip(&t) {
            let p = PlattMap { a, b }.map(s);
            let d = ti - p;
            let w = p * (1.0 - p);
            g_a += d * s;
            g_b += d;
            h_aa += w * s * s;
            h_ab += w * s;
            h_bb += w;
        }
        if g_a.abs().max(g_b.abs()) <= PLATT_GRAD_TOL {
            break;
        }
        let det = h_aa * h_bb - h_ab * h_ab;
        let da = -(h_bb * g_a - h_ab * g_b) / det;
        let db = -(-h_ab * g_a + h_aa * g_b) / det;
        let slope = g_a * da + g_b * db;

        let mut step = 1.0;
        let mut moved = false;
        while step >= PLATT_MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nl = platt_loss(scores, &t, na, nb);
            if nl <= loss + 1e-4 * step * slope {
                a = na;
                b = nb;
                loss = nl;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            break;
        }
    }
    Ok(PlattMap { a, b })
}

/// Class-1 scores and `true_label == 1` targets of a binary set, in input order.
pub fn binary_targets(set: &EvaluationSet) -> Result<(Vec<f64>, Vec<bool>)> {
    if set.k() != 2 {
        return Err(CalRiskError::InvalidArgument(format!(
            "calibrators are binary only, got K = {}",
            set.k()
        )));
    }
    let mut scores = Vec::with_capacity(set.len());
    for r in set.records() {
        scores.push(set.class_score(r, 1)?);
    }
    let targets = set.records().iter().map(|r| r.true_label == 1).collect();
    Ok((scores, targets))
}

/// Replaces the class scores with mapped values and re-clips. The output
/// always carries explicit class confidences.
pub fn apply_calibrator<M: ScoreMap + ?Sized>(map: &M, set: &EvaluationSet) -> Result<EvaluationSet> {
    binary_targets(set)?;
    set.remap(|r| {
        let s1 = set.class_score(r, 1).expect("binary set");
        let s0 = set.class_score(r, 0).expect("binary set");
        let scores = vec![1.0 - map.map(1.0 - s0), map.map(s1)];
        (scores[r.pred_label], Some(scores))
    })
}

/// Number of pairs with strictly different scores.
pub fn strictly_ordered_pairs(scores: &[f64]) -> usize {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut tied = 0usize;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && sorted[j].total_cmp(&sorted[i]) == Ordering::Equal {
            j += 1;
        }
        tied += (j - i) * (j - i - 1) / 2;
        i = j;
    }
    n * n.saturating_sub(1) / 2 - tied
}
