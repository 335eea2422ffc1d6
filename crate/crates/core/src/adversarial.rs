//! Confidence profiles with near-zero ECE and arbitrarily large CSR.
//!
//! Start from `n − 1` samples whose confidences equal their group's
//! accuracy, so every bin is calibrated whatever binning is used, then add
//! one incorrect sample at confidence `1 − δ` with `δ < 1/(n·λ)`.

use crate::error::{CalRiskError, Result};
use crate::metrics::{csr, ece};
use crate::record::{clip, clip_confidences, PredictionRecord, DEFAULT_EPSILON};
use crate::EvaluationSet;

/// A constructed profile plus the parameters that produced it.
#[derive(Debug, Clone)]
pub struct AdversarialProfile {
    pub set: EvaluationSet,
    /// Gap below one of the injected incorrect sample.
    pub delta: f64,
    /// Index (input order) of the injected sample.
    pub injected: usize,
    /// Base samples whose calibrated confidence was 0 or 1 before clipping.
    pub clipped: usize,
}

/// Correctness pattern for `count` base samples split into at most
/// `m_bins` groups; group `g` of `G` has accuracy close to `(g + 1)/G`,
/// with at least one correct and, in groups of two or more, one incorrect
/// sample.
pub fn default_base_pattern(count: usize, m_bins: usize) -> Vec<(bool, usize)> {
    let groups = m_bins.max(1).min(count.max(1));
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    for g in 0..groups {
        let end = (g + 1) * count / groups;
        let size = end - start;
        let target = ((size * (g + 1)) as f64 / groups as f64).round() as usize;
        // keep group confidence strictly inside (0, 1) so nothing clips
        let correct = if size >= 2 { target.clamp(1, size - 1) } else { size };
        out.extend((0..size).map(|j| (j < correct, g)));
        start = end;
    }
    out
}

/// Builds the profile with the default base pattern and ε.
pub fn adversarial_profile(n: usize, lambda: f64, m_bins: usize) -> Result<EvaluationSet> {
    if n < 2 {
        return Err(CalRiskError::InvalidArgument(format!(
            "adversarial profile needs n >= 2, got {n}"
        )));
    }
    let base = default_base_pattern(n - 1, m_bins);
    adversarial_profile_with(&base, lambda, m_bins, DEFAULT_EPSILON).map(|p| p.set)
}

/// Builds the profile on an explicit base of `(correct, group)` pairs.
///
/// Each group's confidence is its accuracy. The result is checked with
/// [`ece`] and [`csr`]; when clipping at `epsilon` prevents
/// `ECE < 1/n` and `CSR > λ`, a [`CalRiskError::ClippingConflict`] reports
/// the largest feasible λ.
pub fn adversarial_profile_with(
    base: &[(bool, usize)],
    lambda: f64,
    m_bins: usize,
    epsilon: f64,
) -> Result<AdversarialProfile> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(CalRiskError::InvalidArgument(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if m_bins < 1 {
        return Err(CalRiskError::InvalidBins);
    }
    if base.is_empty() {
        return Err(CalRiskError::InvalidArgument(
            "adversarial profile needs n >= 2".into(),
        ));
    }
    let n = base.len() + 1;
    let n_f = n as f64;

    let n_groups = base.iter().map(|&(_, g)| g).max().unwrap_or(0) + 1;
    let mut sizes = vec![0usize; n_groups];
    let mut hits = vec![0usize; n_groups];
    for &(ok, g) in base {
        sizes[g] += 1;
        if ok {
            hits[g] += 1;
        }
    }

    let mut records = Vec::with_capacity(n);
    let mut clipped = 0;
    for (j, &(ok, g)) in base.iter().enumerate() {
        let conf = hits[g] as f64 / sizes[g] as f64;
        if clip(conf, epsilon) != conf {
            clipped += 1;
        }
        let pred = j % 2;
        let truth = if ok { pred } else { 1 - pred };
        records.push(PredictionRecord::new(truth, pred, conf));
    }

    let delta = (1.0 / (2.0 * n_f * lambda)).min(0.5);
    let max_lambda = 1.0 / (2.0 * n_f * epsilon * (clipped.max(1) as f64));
    let conflict = CalRiskError::ClippingConflict {
        lambda,
        epsilon,
        max_lambda,
    };
    if delta <= epsilon * clipped.max(1) as f64 {
        return Err(conflict);
    }
    let injected = records.len();
    let pred = injected % 2;
    records.push(PredictionRecord::new(1 - pred, pred, 1.0 - delta));

    let set = clip_confidences(records, 2, epsilon)?;
    let achieved_ece = ece(&set, m_bins)?;
    let achieved_csr = csr(&set)?;
    if !(achieved_ece < 1.0 / n_f && achieved_csr > lambda) {
        return Err(conflict);
    }
    Ok(AdversarialProfile {
        set,
        delta,
        injected,
        clipped,
    })
}
