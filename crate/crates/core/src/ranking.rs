//! ROC and confidence-weighted ROC curves, per-class AUC and cwAUC.
//!
//! The cw-ROC thresholds on the class-`k` confidence but counts each sample
//! with the confidence of its *predicted* class. Tied scores form a single
//! diagonal segment, which makes the trapezoidal area equal to the pairwise
//! ranking probability with ½ credit for ties.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{CalRiskError, Result};
use crate::record::EvaluationSet;

const GAP_TOLERANCE: f64 = 1e-10;

/// ROC-style curve for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub class_id: usize,
    /// `(false positive rate, true positive rate)` in sweep order.
    pub points: Vec<(f64, f64)>,
    pub area: f64,
    pub weighted: bool,
}

/// Classical vs confidence-weighted AUC for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucGap {
    pub class_id: usize,
    pub auc: f64,
    pub cw_auc: f64,
    /// `cw_auc − auc`.
    pub delta: f64,
    /// `Cov(w, z)/E[w]` over positive–negative pairs.
    pub cov_form: f64,
}

/// Macro averages over the classes with a defined AUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroAuc {
    pub auc: f64,
    pub cw_auc: f64,
    pub classes_used: usize,
    pub degenerate: Vec<usize>,
}

/// One sample as seen by the class-`k` ranking problem.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scored {
    pub score: f64,
    pub positive: bool,
    pub weight: f64,
}

pub(crate) fn scored(set: &EvaluationSet, class_id: usize) -> Result<Vec<Scored>> {
    if class_id >= set.k() {
        return Err(CalRiskError::LabelOutOfRange {
            index: 0,
            label: class_id,
            k: set.k(),
        });
    }
    let items = set
        .iter()
        .map(|r| {
            Ok(Scored {
                score: set.class_score(r, class_id)?,
                positive: r.true_label == class_id,
                weight: r.conf,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let positives = items.iter().filter(|s| s.positive).count();
    if positives == 0 || positives == items.len() {
        return Err(CalRiskError::DegenerateClass(class_id));
    }
    Ok(items)
}

fn descending(items: &mut [Scored]) {
    items.sort_by(|a, b| b.score.total_cmp(&a.score));
}

/// Sweeps thresholds from the highest score down; each tie group adds one
/// point.
pub(crate) fn sweep(mut items: Vec<Scored>, weighted: bool, class_id: usize) -> CurveSeries {
    descending(&mut items);
    let w = |s: &Scored| if weighted { s.weight } else { 1.0 };

    let mut steps = Vec::new();
    let (mut tp, mut fp) = (0.0f64, 0.0f64);
    let mut i = 0;
    while i < items.len() {
        let score = items[i].score;
        while i < items.len() && items[i].score.total_cmp(&score) == Ordering::Equal {
            if items[i].positive {
                tp += w(&items[i]);
            } else {
                fp += w(&items[i]);
            }
            i += 1;
        }
        steps.push((fp, tp));
    }
    let (total_fp, total_tp) = (fp, tp);

    let mut points = Vec::with_capacity(steps.len() + 1);
    points.push((0.0, 0.0));
    points.extend(steps.into_iter().map(|(f, t)| (f / total_fp, t / total_tp)));
    let area = trapezoid(&points);
    CurveSeries {
        class_id,
        points,
        area,
        weighted,
    }
}

/// Trapezoidal area under a polyline.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|p| (p[1].0 - p[0].0) * (p[0].1 + p[1].1) * 0.5)
        .sum()
}

pub fn roc_curve(set: &EvaluationSet, class_id: usize) -> Result<CurveSeries> {
    Ok(sweep(scored(set, class_id)?, false, class_id))
}

pub fn cw_roc_curve(set: &EvaluationSet, class_id: usize) -> Result<CurveSeries> {
    Ok(sweep(scored(set, class_id)?, true, class_id))
}

/// Pair moments `(E[w], E[z], E[w·z])` over all positive–negative pairs,
/// computed by a rank-sum pass instead of explicit pair enumeration.
///
/// `w_ij = a_i·b_j` factorises, so for each positive the weight of
/// negatives strictly below it (plus half of the tied ones) is enough.
fn pair_moments(mut items: Vec<Scored>) -> (f64, f64, f64) {
    items.sort_by(|a, b| a.score.total_cmp(&b.score));
    let n_pos = items.iter().filter(|s| s.positive).count() as f64;
    let n_neg = items.len() as f64 - n_pos;
    let pos_mass: f64 = items.iter().filter(|s| s.positive).map(|s| s.weight).sum();
    let neg_mass: f64 = items.iter().filter(|s| !s.positive).map(|s| s.weight).sum();

    let (mut below_count, mut below_mass) = (0.0f64, 0.0f64);
    let (mut z_sum, mut wz_sum) = (0.0f64, 0.0f64);
    let mut i = 0;
    while i < items.len() {
        let score = items[i].score;
        let start = i;
        let (mut tie_count, mut tie_mass) = (0.0f64, 0.0f64);
        while i < items.len() && items[i].score.total_cmp(&score) == Ordering::Equal {
            if !items[i].positive {
                tie_count += 1.0;
                tie_mass += items[i].weight;
            }
            i += 1;
        }
        for s in items[start..i].iter().filter(|s| s.positive) {
            z_sum += below_count + 0.5 * tie_count;
            wz_sum += s.weight * (below_mass + 0.5 * tie_mass);
        }
        below_count += tie_count;
        below_mass += tie_mass;
    }
    let pairs = n_pos * n_neg;
    (pos_mass * neg_mass / pairs, z_sum / pairs, wz_sum / pairs)
}

/// AUC and cwAUC from the curves, plus the covariance form of their gap.
pub fn auc_gap(set: &EvaluationSet, class_id: usize) -> Result<AucGap> {
    let items = scored(set, class_id)?;
    let auc = sweep(items.clone(), false, class_id).area;
    let cw_auc = sweep(items.clone(), true, class_id).area;
    let (mean_w, mean_z, mean_wz) = pair_moments(items);
    let cov_form = (mean_wz - mean_w * mean_z) / mean_w;
    let delta = cw_auc - auc;
    if (delta - cov_form).abs() > GAP_TOLERANCE {
        return Err(CalRiskError::IdentityViolation(format!(
            "class {class_id}: cwAUC − AUC = {delta}, Cov(w,z)/E[w] = {cov_form}"
        )));
    }
    Ok(AucGap {
        class_id,
        auc,
        cw_auc,
        delta,
        cov_form,
    })
}

/// `auc_gap` for every class; degenerate classes are `None`.
pub fn per_class_auc(set: &EvaluationSet) -> Result<Vec<Option<AucGap>>> {
    (0..set.k())
        .map(|k| match auc_gap(set, k) {
            Ok(g) => Ok(Some(g)),
            Err(CalRiskError::DegenerateClass(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// `|AUC(φ∘conf^(k)) − AUC(conf^(k))|`.
///
/// Only the classical AUC is compared; cwAUC depends on confidence
/// magnitudes and is expected to move.
pub fn monotone_invariance_check<F>(set: &EvaluationSet, class_id: usize, phi: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let items = scored(set, class_id)?;
    let mapped = items
        .iter()
        .map(|s| Scored {
            score: phi(s.score),
            ..*s
        })
        .collect();
    let before = sweep(items, false, class_id).area;
    let after = sweep(mapped, false, class_id).area;
    Ok((after - before).abs())
}

/// Unweighted mean over classes, skipping degenerate ones (index = class).
pub fn macro_average(per_class: &[Option<AucGap>]) -> Result<MacroAuc> {
    let defined: Vec<&AucGap> = per_class.iter().flatten().collect();
    if defined.is_empty() {
        return Err(CalRiskError::NoValidClasses);
    }
    let count = defined.len() as f64;
    Ok(MacroAuc {
        auc: defined.iter().map(|g| g.auc).sum::<f64>() / count,
        cw_auc: defined.iter().map(|g| g.cw_auc).sum::<f64>() / count,
        classes_used: defined.len(),
        degenerate: per_class
            .iter()
            .enumerate()
            .filter(|(_, g)| g.is_none())
            .map(|(k, _)| k)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::PredictionRecord;

    fn binary(rows: &[(usize, f64)]) -> EvaluationSet {
        // (true label, class-1 score) with the prediction taken as argmax
        let raw = rows
            .iter()
            .map(|&(y, s)| PredictionRecord::with_class_confs(y, usize::from(s >= 0.5), vec![1.0 - s, s]))
            .collect();
        EvaluationSet::new(raw, 2).unwrap()
    }

    fn pairwise(set: &EvaluationSet, class_id: usize, weighted: bool) -> f64 {
        let items = scored(set, class_id).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for p in items.iter().filter(|s| s.positive) {
            for q in items.iter().filter(|s| !s.positive) {
                let w = if weighted { p.weight * q.weight } else { 1.0 };
                let z = match p.score.partial_cmp(&q.score).unwrap() {
                    Ordering::Greater => 1.0,
                    Ordering::Equal => 0.5,
                    Ordering::Less => 0.0,
                };
                num += w * z;
                den += w;
            }
        }
        num / den
    }

    #[test]
    fn separated_scores() {
        let set = binary(&[(1, 0.9), (1, 0.8), (0, 0.3), (0, 0.1)]);
        assert_eq!(roc_curve(&set, 1).unwrap().area, 1.0);
        assert_eq!(cw_roc_curve(&set, 1).unwrap().area, 1.0);
    }

    #[test]
    fn identical_scores_give_half() {
        let set = binary(&[(1, 0.6), (0, 0.6), (0, 0.6), (1, 0.6), (1, 0.6)]);
        let c = roc_curve(&set, 1).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(c.area, 0.5);
    }

    #[test]
    fn curve_shape() {
        let set = binary(&[(1, 0.9), (0, 0.7), (1, 0.7), (0, 0.2), (1, 0.1)]);
        let c = roc_curve(&set, 1).unwrap();
        assert_eq!(*c.points.first().unwrap(), (0.0, 0.0));
        assert_eq!(*c.points.last().unwrap(), (1.0, 1.0));
        assert!(c.points.windows(2).all(|w| w[0].0 <= w[1].0));
        assert!((c.area - pairwise(&set, 1, false)).abs() < 1e-12);
    }

    #[test]
    fn weighted_matches_pairwise_on_ties() {
        let set = binary(&[
            (1, 0.9),
            (0, 0.7),
            (1, 0.7),
            (1, 0.7),
            (0, 0.2),
            (1, 0.1),
            (0, 0.1),
            (0, 0.55),
        ]);
        for k in 0..2 {
            let cw = cw_roc_curve(&set, k).unwrap().area;
            assert!((cw - pairwise(&set, k, true)).abs() < 1e-12);
            let gap = auc_gap(&set, k).unwrap();
            assert!((gap.delta - gap.cov_form).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_weights_make_curves_coincide() {
        let raw = vec![
            PredictionRecord::with_class_confs(0, 0, vec![0.5, 0.3, 0.2]),
            PredictionRecord::with_class_confs(1, 1, vec![0.2, 0.5, 0.3]),
            PredictionRecord::with_class_confs(2, 0, vec![0.5, 0.1, 0.4]),
            PredictionRecord::with_class_confs(2, 2, vec![0.3, 0.2, 0.5]),
        ];
        let set = EvaluationSet::new(raw, 3).unwrap();
        for k in 0..3 {
            let a = roc_curve(&set, k).unwrap();
            let b = cw_roc_curve(&set, k).unwrap();
            for (p, q) in a.points.iter().zip(&b.points) {
                assert!((p.0 - q.0).abs() < 1e-12 && (p.1 - q.1).abs() < 1e-12);
            }
            assert!(auc_gap(&set, k).unwrap().delta.abs() < 1e-12);
        }
    }

    #[test]
    fn confident_correct_rankings_raise_cwauc() {
        // the only misranked pair (3, 4) has weight ε², correct pairs ~1 or ε
        let eps = 1e-6;
        let raw = vec![
            PredictionRecord::with_class_confs(1, 1, vec![eps, 1.0 - eps]),
            PredictionRecord::with_class_confs(0, 0, vec![1.0 - eps, eps]),
            PredictionRecord::with_class_confs(1, 0, vec![eps, 0.3]),
            PredictionRecord::with_class_confs(0, 0, vec![eps, 0.5]),
        ];
        let set = EvaluationSet::new(raw, 2).unwrap();
        let gap = auc_gap(&set, 1).unwrap();
        assert_eq!(gap.auc, 0.75);
        assert!(gap.delta > 0.0);
        assert!((gap.cw_auc - pairwise(&set, 1, true)).abs() < 1e-12);
        assert!((gap.delta - gap.cov_form).abs() < 1e-10);
    }

    #[test]
    fn degenerate_class() {
        let set = binary(&[(1, 0.9), (1, 0.3)]);
        assert_eq!(
            roc_curve(&set, 1).unwrap_err(),
            CalRiskError::DegenerateClass(1)
        );
    }

    #[test]
    fn monotone_maps_leave_auc_unchanged() {
        let set = binary(&[(1, 0.9), (0, 0.7), (1, 0.7), (0, 0.2), (1, 0.1), (0, 0.45)]);
        assert_eq!(monotone_invariance_check(&set, 1, |x| x).unwrap(), 0.0);
        assert!(monotone_invariance_check(&set, 1, |x| x.powi(3)).unwrap() <= 1e-12);
    }

    #[test]
    fn macro_average_cases() {
        // symmetric binary scores: both classes share the same AUC
        let set = binary(&[(1, 0.9), (0, 0.7), (1, 0.6), (0, 0.2), (1, 0.1)]);
        let per = per_class_auc(&set).unwrap();
        let (a0, a1) = (per[0].unwrap().auc, per[1].unwrap().auc);
        assert!((a0 - a1).abs() < 1e-15);
        let m = macro_average(&per).unwrap();
        assert!((m.auc - a0).abs() < 1e-15);

        let single = macro_average(&[None, per[1]]).unwrap();
        assert_eq!(single.auc, a1);
        assert_eq!(single.degenerate, vec![0]);
        assert_eq!(
            macro_average(&[None, None]).unwrap_err(),
            CalRiskError::NoValidClasses
        );
    }
}
