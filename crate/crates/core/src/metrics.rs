//! Scalar risk and usefulness metrics over an [`EvaluationSet`].
//!
//! * CSR (Calibrated Size Ratio): `(1/N)·Σ_{wrong} 1/(1 − conf)`. Its
//!   expectation is 1 when confidences are calibrated, above 1 when the
//!   model is overconfident.
//! * σ_CSR: `sqrt((1/N²)·Σ conf/(1 − conf))`, the spread of CSR under the
//!   calibrated null.
//! * P_risk: `Φ((CSR − 1)/σ_CSR)`.
//! * cwA: share of the total confidence mass placed on correct predictions.

use serde::{Deserialize, Serialize};

use crate::error::{CalRiskError, Result};
use crate::normal::normal_cdf;
use crate::record::EvaluationSet;

fn check_below_one(set: &EvaluationSet) -> Result<()> {
    match set.records().iter().find(|r| r.conf >= 1.0) {
        Some(r) => Err(CalRiskError::DivisionByZeroRisk(r.conf)),
        None => Ok(()),
    }
}

/// Calibrated Size Ratio. Zero when every prediction is correct.
pub fn csr(set: &EvaluationSet) -> Result<f64> {
    check_below_one(set)?;
    let sum: f64 = set
        .iter()
        .filter(|r| !r.is_correct())
        .map(|r| 1.0 / (1.0 - r.conf))
        .sum();
    Ok(sum / set.len() as f64)
}

/// Standard deviation of CSR under perfect limitwise calibration.
/// Uses every record, correct or not.
pub fn sigma_csr(set: &EvaluationSet) -> Result<f64> {
    check_below_one(set)?;
    let odds: f64 = set.iter().map(|r| r.conf / (1.0 - r.conf)).sum();
    let n = set.len() as f64;
    Ok((odds / (n * n)).sqrt())
}

/// Returns `(z, Φ(z))` with `z = (csr − 1)/σ`.
pub fn p_risk(csr_value: f64, sigma: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0) {
        return Err(CalRiskError::DegenerateSigma(sigma));
    }
    let z = (csr_value - 1.0) / sigma;
    Ok((z, normal_cdf(z)))
}

/// `Φ(z)` when `CSR > 1` and 0 otherwise: only excess over the null mean
/// counts as evidence of overconfidence.
pub fn p_risk_one_sided(csr_value: f64, sigma: f64) -> Result<f64> {
    let (_, p) = p_risk(csr_value, sigma)?;
    Ok(if csr_value > 1.0 { p } else { 0.0 })
}

/// Plain accuracy p̄.
pub fn accuracy(set: &EvaluationSet) -> f64 {
    let correct: f64 = set.iter().map(|r| r.correct_indicator()).sum();
    correct / set.len() as f64
}

/// Mean confidence c̄.
pub fn mean_confidence(set: &EvaluationSet) -> f64 {
    set.iter().map(|r| r.conf).sum::<f64>() / set.len() as f64
}

/// E[conf | wrong].
pub fn mean_confidence_wrong(set: &EvaluationSet) -> Result<f64> {
    let (sum, count) = set
        .iter()
        .filter(|r| !r.is_correct())
        .fold((0.0, 0usize), |(s, c), r| (s + r.conf, c + 1));
    if count == 0 {
        return Err(CalRiskError::NoErrors);
    }
    Ok(sum / count as f64)
}

/// Confidence-weighted accuracy, `Σ conf·1[correct] / Σ conf`.
pub fn cwa(set: &EvaluationSet) -> f64 {
    let (num, den) = set.iter().fold((0.0, 0.0), |(num, den), r| {
        (num + r.conf * r.correct_indicator(), den + r.conf)
    });
    num / den
}

/// cwA through its covariance form, `p̄ + Cov(conf, correct)/c̄`.
pub fn cwa_covariance_form(set: &EvaluationSet) -> f64 {
    let n = set.len() as f64;
    let p_bar = accuracy(set);
    let c_bar = mean_confidence(set);
    let cross = set
        .iter()
        .map(|r| r.conf * r.correct_indicator())
        .sum::<f64>()
        / n;
    let cov = cross - c_bar * p_bar;
    p_bar + cov / c_bar
}

/// Share of the gap to perfect accuracy closed by confidence weighting.
pub fn gain(acc: f64, cwa_value: f64) -> Result<f64> {
    let floor = acc.min(cwa_value);
    if floor >= 1.0 {
        return Err(CalRiskError::PerfectAccuracy);
    }
    Ok((cwa_value - acc) / (1.0 - floor))
}

/// Equal-width bin index over [0, 1]: interior boundaries go to the upper
/// bin and 1.0 goes to the last bin.
#[inline]
pub fn bin_index(conf: f64, m_bins: usize) -> usize {
    let idx = (conf * m_bins as f64).floor();
    if idx <= 0.0 {
        0
    } else {
        (idx as usize).min(m_bins - 1)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BinStats {
    count: usize,
    correct: f64,
    conf: f64,
}

fn bin_stats(set: &EvaluationSet, m_bins: usize) -> Vec<BinStats> {
    let mut bins = vec![BinStats::default(); m_bins];
    for r in set.iter() {
        let b = &mut bins[bin_index(r.conf, m_bins)];
        b.count += 1;
        b.correct += r.correct_indicator();
        b.conf += r.conf;
    }
    bins
}

/// Expected Calibration Error, `Σ_m (|B_m|/N)·|acc(B_m) − conf(B_m)|`.
pub fn ece(set: &EvaluationSet, m_bins: usize) -> Result<f64> {
    if m_bins < 1 {
        return Err(CalRiskError::InvalidBins);
    }
    let n = set.len() as f64;
    Ok(bin_stats(set, m_bins)
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| {
            let size = b.count as f64;
            (size / n) * (b.correct / size - b.conf / size).abs()
        })
        .sum())
}

/// ECE written as `(1/N)·Σ_m |Σ_{i∈B_m} (1[correct] − conf_i)|`.
pub fn ece_indicator_form(set: &EvaluationSet, m_bins: usize) -> Result<f64> {
    if m_bins < 1 {
        return Err(CalRiskError::InvalidBins);
    }
    let mut gaps = vec![0.0f64; m_bins];
    for r in set.iter() {
        gaps[bin_index(r.conf, m_bins)] += r.correct_indicator() - r.conf;
    }
    Ok(gaps.iter().map(|g| g.abs()).sum::<f64>() / set.len() as f64)
}

/// Brier score on predicted-class correctness.
pub fn brier(set: &EvaluationSet) -> f64 {
    set.iter()
        .map(|r| (r.conf - r.correct_indicator()).powi(2))
        .sum::<f64>()
        / set.len() as f64
}

/// Jensen lower bound on CSR, `(1 − p̄)/(1 − E[conf | wrong])`.
pub fn jensen_lower_bound(set: &EvaluationSet) -> Result<f64> {
    let wrong_mean = mean_confidence_wrong(set)?;
    Ok((1.0 - accuracy(set)) / (1.0 - wrong_mean))
}

/// All scalar indicators for one evaluation set.
///
/// Fields that are undefined for the set (no errors, perfect accuracy) are
/// `None` rather than aborting the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub n: usize,
    pub acc: f64,
    pub cwa: f64,
    pub gain: Option<f64>,
    pub csr: f64,
    pub sigma_csr: f64,
    pub z: f64,
    pub p_risk: f64,
    /// `p_risk` with values for `CSR ≤ 1` set to 0.
    pub p_risk_one_sided: f64,
    pub ece: f64,
    pub brier: f64,
    pub mean_conf: f64,
    pub mean_conf_wrong: Option<f64>,
    pub jensen_lower_bound: Option<f64>,
}

impl RiskReport {
    /// CSR exceeds 1 by more than `k` standard deviations.
    pub fn exceeds_sigma(&self, k: f64) -> bool {
        self.csr > 1.0 + k * self.sigma_csr
    }
}

fn defined<T>(value: Result<T>, undefined: CalRiskError) -> Result<Option<T>> {
    match value {
        Ok(v) => Ok(Some(v)),
        Err(e) if e == undefined => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn risk_report(set: &EvaluationSet, m_bins: usize) -> Result<RiskReport> {
    let acc = accuracy(set);
    let cwa_value = cwa(set);
    let csr_value = csr(set)?;
    let sigma = sigma_csr(set)?;
    let (z, p) = p_risk(csr_value, sigma)?;
    Ok(RiskReport {
        n: set.len(),
        acc,
        cwa: cwa_value,
        gain: defined(gain(acc, cwa_value), CalRiskError::PerfectAccuracy)?,
        csr: csr_value,
        sigma_csr: sigma,
        z,
        p_risk: p,
        p_risk_one_sided: if csr_value > 1.0 { p } else { 0.0 },
        ece: ece(set, m_bins)?,
        brier: brier(set),
        mean_conf: mean_confidence(set),
        mean_conf_wrong: defined(mean_confidence_wrong(set), CalRiskError::NoErrors)?,
        jensen_lower_bound: defined(jensen_lower_bound(set), CalRiskError::NoErrors)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::PredictionRecord;

    fn binary(rows: &[(bool, f64)]) -> EvaluationSet {
        let raw = rows
            .iter()
            .map(|&(ok, c)| PredictionRecord::new(if ok { 0 } else { 1 }, 0, c))
            .collect();
        EvaluationSet::new(raw, 2).unwrap()
    }

    #[test]
    fn csr_zero_without_errors() {
        let set = binary(&[(true, 0.9), (true, 0.3)]);
        assert_eq!(csr(&set).unwrap(), 0.0);
    }

    #[test]
    fn csr_hand_example() {
        let set = binary(&[(false, 0.5), (true, 0.9)]);
        assert_eq!(csr(&set).unwrap(), 1.0);
    }

    #[test]
    fn sigma_uniform_odds() {
        let set = binary(&vec![(true, 0.5); 100]);
        assert!((sigma_csr(&set).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sigma_vanishes_at_epsilon() {
        let set = binary(&vec![(true, 0.0); 50]);
        let s = sigma_csr(&set).unwrap();
        assert!((s - (1e-8f64 / 50.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sigma_hand_example() {
        let set = binary(&[(true, 0.2), (false, 0.5), (true, 0.8), (true, 0.9)]);
        let expected = ((0.25 + 1.0 + 4.0 + 9.0) / 16.0f64).sqrt();
        assert!((sigma_csr(&set).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn p_risk_values() {
        assert_eq!(p_risk(1.0, 0.3).unwrap(), (0.0, 0.5));
        let (z, p) = p_risk(1.3, 0.1).unwrap();
        assert!((z - 3.0).abs() < 1e-12);
        assert!((p - 0.99865).abs() < 1e-5);
        let (_, p) = p_risk(1.5, 0.5).unwrap();
        assert!((p - 0.84134).abs() < 1e-5);
        assert!(matches!(p_risk(1.0, 0.0), Err(CalRiskError::DegenerateSigma(_))));
    }

    #[test]
    fn one_sided_p_risk() {
        assert_eq!(p_risk_one_sided(1.0, 0.3).unwrap(), 0.0);
        assert_eq!(p_risk_one_sided(0.4, 2.0).unwrap(), 0.0);
        assert_eq!(p_risk_one_sided(1.3, 0.1).unwrap(), p_risk(1.3, 0.1).unwrap().1);
    }

    #[test]
    fn cwa_examples() {
        let flat = binary(&[(true, 0.6), (false, 0.6), (true, 0.6)]);
        assert!((cwa(&flat) - accuracy(&flat)).abs() < 1e-15);

        let oracle = binary(&[(true, 1.0), (false, 0.0), (true, 1.0)]);
        assert!((cwa(&oracle) - 1.0).abs() < 1e-7);

        let set = binary(&[(true, 0.9), (false, 0.1), (true, 0.5)]);
        assert!((cwa(&set) - 1.4 / 1.5).abs() < 1e-15);
        assert!((cwa_covariance_form(&set) - cwa(&set)).abs() < 1e-12);
    }

    #[test]
    fn gain_examples() {
        assert_eq!(gain(0.7, 0.7).unwrap(), 0.0);
        assert_eq!(gain(0.5, 1.0).unwrap(), 1.0);
        assert_eq!(gain(1.0, 1.0).unwrap_err(), CalRiskError::PerfectAccuracy);
    }

    #[test]
    fn ece_examples() {
        let single = binary(&[(true, 0.7)]);
        assert!((ece(&single, 1).unwrap() - 0.3).abs() < 1e-15);
        // two bins, each calibrated: (0.25 ×2: one of four correct) and 0.75 ×4: three of four
        let set = binary(&[
            (true, 0.25),
            (false, 0.25),
            (false, 0.25),
            (false, 0.25),
            (true, 0.75),
            (true, 0.75),
            (true, 0.75),
            (false, 0.75),
        ]);
        assert!(ece(&set, 10).unwrap() < 1e-15);
        assert_eq!(ece(&set, 0).unwrap_err(), CalRiskError::InvalidBins);
    }

    #[test]
    fn bin_boundaries() {
        assert_eq!(bin_index(0.0, 15), 0);
        assert_eq!(bin_index(1.0, 15), 14);
        assert_eq!(bin_index(0.5, 2), 1);
        assert_eq!(bin_index(0.2, 5), 1);
        assert_eq!(bin_index(0.4999, 2), 0);
        assert_eq!(bin_index(1.0 - 1e-8, 15), 14);
    }

    #[test]
    fn brier_examples() {
        let flat = binary(&[(true, 0.5), (false, 0.5)]);
        assert!((brier(&flat) - 0.25).abs() < 1e-15);
        let set = binary(&[(true, 0.8), (false, 0.6)]);
        assert!((brier(&set) - 0.2).abs() < 1e-15);
        let oracle = binary(&[(true, 1.0), (false, 0.0)]);
        assert!(brier(&oracle) < 1e-15);
    }

    #[test]
    fn jensen_examples() {
        let set = binary(&[(false, 0.5), (true, 0.9)]);
        let bound = jensen_lower_bound(&set).unwrap();
        assert!((bound - 1.0).abs() < 1e-15);
        assert!(bound <= csr(&set).unwrap());

        let single = binary(&[(false, 0.73), (true, 0.2), (true, 0.6)]);
        assert!((jensen_lower_bound(&single).unwrap() - csr(&single).unwrap()).abs() < 1e-15);

        let none = binary(&[(true, 0.5)]);
        assert_eq!(jensen_lower_bound(&none).unwrap_err(), CalRiskError::NoErrors);
    }

    #[test]
    fn report_on_oracle_profile() {
        let set = binary(&[(true, 1.0), (false, 0.0), (true, 1.0), (true, 1.0)]);
        let r = risk_report(&set, 15).unwrap();
        assert!((r.cwa - 1.0).abs() < 1e-7);
        // one error at ε: CSR is the error rate
        assert!((r.csr - 0.25).abs() < 1e-7);
        // σ_CSR is dominated by the clipped 1 − ε confidences, so z ≈ 0
        assert!(r.p_risk < 0.5);
        assert!(r.z < 0.0);
    }

    #[test]
    fn report_on_flat_profile() {
        // conf = p̄ = 0.75 everywhere
        let set = binary(&[(true, 0.75), (true, 0.75), (true, 0.75), (false, 0.75)]);
        let r = risk_report(&set, 15).unwrap();
        assert!(r.ece < 1e-15);
        assert!((r.cwa - 0.75).abs() < 1e-15);
        assert!(r.gain.unwrap().abs() < 1e-15);
        assert!(r.csr >= r.jensen_lower_bound.unwrap());
    }

    #[test]
    fn report_flags_undefined_fields() {
        let set = binary(&[(true, 0.9), (true, 0.4)]);
        let r = risk_report(&set, 15).unwrap();
        assert_eq!(r.mean_conf_wrong, None);
        assert_eq!(r.jensen_lower_bound, None);
        assert_eq!(r.gain, None);
        assert_eq!(r.csr, 0.0);
    }
}
