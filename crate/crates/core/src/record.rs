//! Sample data model: per-sample predictions and validated evaluation sets.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{CalRiskError, Result};

/// Default clipping parameter applied to every confidence.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Tolerance for `class_confs[pred_label] == conf`.
const CLASS_CONF_TOLERANCE: f64 = 1e-9;

/// One sample's prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub true_label: usize,
    pub pred_label: usize,
    /// Confidence assigned to `pred_label`.
    pub conf: f64,
    /// Optional confidence for every class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_confs: Option<Vec<f64>>,
}

impl PredictionRecord {
    pub fn new(true_label: usize, pred_label: usize, conf: f64) -> Self {
        Self {
            true_label,
            pred_label,
            conf,
            class_confs: None,
        }
    }

    pub fn with_class_confs(true_label: usize, pred_label: usize, class_confs: Vec<f64>) -> Self {
        let conf = class_confs.get(pred_label).copied().unwrap_or(f64::NAN);
        Self {
            true_label,
            pred_label,
            conf,
            class_confs: Some(class_confs),
        }
    }

    #[inline]
    pub fn is_correct(&self) -> bool {
        self.true_label == self.pred_label
    }

    #[inline]
    pub(crate) fn correct_indicator(&self) -> f64 {
        if self.is_correct() {
            1.0
        } else {
            0.0
        }
    }
}

/// A validated, clipped collection of predictions over `k` classes.
///
/// Records keep their input order. Every metric sums over a canonical
/// order (stable sort by confidence, then true label, then predicted label)
/// so results do not depend on how the records were assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSet {
    records: Vec<PredictionRecord>,
    k: usize,
    epsilon: f64,
    canonical: Vec<usize>,
}

#[inline]
pub(crate) fn clip(value: f64, epsilon: f64) -> f64 {
    value.max(epsilon).min(1.0 - epsilon)
}

fn canonical_cmp(a: &PredictionRecord, b: &PredictionRecord) -> Ordering {
    a.conf
        .total_cmp(&b.conf)
        .then(a.true_label.cmp(&b.true_label))
        .then(a.pred_label.cmp(&b.pred_label))
        .then_with(|| match (&a.class_confs, &b.class_confs) {
            (Some(x), Some(y)) => x
                .iter()
                .zip(y)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal),
            _ => Ordering::Equal,
        })
}

/// Validates `raw` and maps every confidence `c` to `min(max(c, ε), 1 − ε)`.
pub fn clip_confidences(
    raw: Vec<PredictionRecord>,
    k: usize,
    epsilon: f64,
) -> Result<EvaluationSet> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(CalRiskError::InvalidEpsilon(epsilon));
    }
    if k < 2 {
        return Err(CalRiskError::InvalidClassCount(k));
    }
    if raw.is_empty() {
        return Err(CalRiskError::EmptySet);
    }

    let mut records = raw;
    for (index, r) in records.iter_mut().enumerate() {
        for label in [r.true_label, r.pred_label] {
            if label >= k {
                return Err(CalRiskError::LabelOutOfRange { index, label, k });
            }
        }
        if !(0.0..=1.0).contains(&r.conf) {
            return Err(CalRiskError::InvalidConfidence {
                index,
                value: r.conf,
            });
        }
        if let Some(cc) = r.class_confs.as_mut() {
            if cc.len() != k {
                return Err(CalRiskError::ClassConfidenceLength {
                    index,
                    len: cc.len(),
                    k,
                });
            }
            if let Some(&value) = cc.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(CalRiskError::InvalidConfidence { index, value });
            }
            let at_pred = cc[r.pred_label];
            if (at_pred - r.conf).abs() > CLASS_CONF_TOLERANCE {
                return Err(CalRiskError::ClassConfidenceMismatch {
                    index,
                    conf: r.conf,
                    class_conf: at_pred,
                });
            }
            for v in cc.iter_mut() {
                *v = clip(*v, epsilon);
            }
        }
        r.conf = clip(r.conf, epsilon);
    }

    let mut canonical: Vec<usize> = (0..records.len()).collect();
    canonical.sort_by(|&a, &b| canonical_cmp(&records[a], &records[b]));

    Ok(EvaluationSet {
        records,
        k,
        epsilon,
        canonical,
    })
}

impl EvaluationSet {
    /// Builds a set with the default clipping parameter.
    pub fn new(raw: Vec<PredictionRecord>, k: usize) -> Result<Self> {
        clip_confidences(raw, k, DEFAULT_EPSILON)
    }

    pub fn with_epsilon(raw: Vec<PredictionRecord>, k: usize, epsilon: f64) -> Result<Self> {
        clip_confidences(raw, k, epsilon)
    }

    /// Records in input order.
    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    /// Records in canonical summation order.
    pub fn iter(&self) -> impl Iterator<Item = &PredictionRecord> + '_ {
        self.canonical.iter().map(move |&i| &self.records[i])
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Always false; construction rejects empty input.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn error_count(&self) -> usize {
        self.records.iter().filter(|r| !r.is_correct()).count()
    }

    pub fn has_class_confs(&self) -> bool {
        self.records.iter().all(|r| r.class_confs.is_some())
    }

    /// Confidence of `record` for `class_id`.
    ///
    /// Uses the explicit vector when present. Binary records without one
    /// use `conf^(1) = conf` if predicted 1, else `1 − conf`, and
    /// `conf^(0) = 1 − conf^(1)`.
    pub fn class_score(&self, record: &PredictionRecord, class_id: usize) -> Result<f64> {
        if class_id >= self.k {
            return Err(CalRiskError::LabelOutOfRange {
                index: 0,
                label: class_id,
                k: self.k,
            });
        }
        match &record.class_confs {
            Some(cc) => Ok(cc[class_id]),
            None if self.k == 2 => {
                let score_one = if record.pred_label == 1 {
                    record.conf
                } else {
                    1.0 - record.conf
                };
                Ok(if class_id == 1 {
                    score_one
                } else {
                    1.0 - score_one
                })
            }
            None => Err(CalRiskError::MissingClassConfidences {
                class_id,
                k: self.k,
            }),
        }
    }

    /// Returns a new set with the same labels and different confidences.
    ///
    /// `map` receives each record in input order and returns the new
    /// `(conf, class_confs)`; values are clipped again with this set's ε.
    pub fn remap<F>(&self, mut map: F) -> Result<Self>
    where
        F: FnMut(&PredictionRecord) -> (f64, Option<Vec<f64>>),
    {
        let eps = self.epsilon;
        let records = self
            .records
            .iter()
            .map(|r| {
                let (conf, class_confs) = map(r);
                PredictionRecord {
                    true_label: r.true_label,
                    pred_label: r.pred_label,
                    conf: clip(conf, eps),
                    class_confs: class_confs.map(|v| v.into_iter().map(|c| clip(c, eps)).collect()),
                }
            })
            .collect();
        clip_confidences(records, self.k, eps)
    }

    /// Subset by record indices (input order).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        clip_confidences(records, self.k, self.epsilon)
    }
}
