#![allow(dead_code)]

use calrisk::{EvaluationSet, PredictionRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random K-class set with explicit class confidences. About a third of
/// the sets draw scores from a coarse grid so that ties occur.
pub fn random_set(k: usize, n: usize, seed: u64) -> EvaluationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coarse = rng.random_bool(0.35);
    let records = (0..n)
        .map(|_| {
            let mut raw: Vec<f64> = (0..k)
                .map(|_| {
                    let x: f64 = rng.random_range(0.01..1.0);
                    if coarse {
                        (x * 5.0).ceil()
                    } else {
                        x
                    }
                })
                .collect();
            let total: f64 = raw.iter().sum();
            raw.iter_mut().for_each(|x| *x /= total);
            let pred = if rng.random_bool(0.8) {
                (0..k).max_by(|&a, &b| raw[a].total_cmp(&raw[b])).unwrap()
            } else {
                rng.random_range(0..k)
            };
            let truth = if rng.random_bool(0.6) {
                pred
            } else {
                rng.random_range(0..k)
            };
            PredictionRecord::with_class_confs(truth, pred, raw)
        })
        .collect();
    EvaluationSet::new(records, k).unwrap()
}

/// Pairwise AUC and cwAUC for class `c`, ½ credit on ties.
pub fn pairwise_auc(set: &EvaluationSet, c: usize) -> Option<(f64, f64)> {
    let rows: Vec<(f64, bool, f64)> = set
        .records()
        .iter()
        .map(|r| (r.class_confs.as_ref().unwrap()[c], r.true_label == c, r.conf))
        .collect();
    let (mut z, mut wz, mut w, mut pairs) = (0.0, 0.0, 0.0, 0.0);
    for p in rows.iter().filter(|r| r.1) {
        for q in rows.iter().filter(|r| !r.1) {
            let zij = if p.0 > q.0 {
                1.0
            } else if p.0 == q.0 {
                0.5
            } else {
                0.0
            };
            let wij = p.2 * q.2;
            z += zij;
            wz += wij * zij;
            w += wij;
            pairs += 1.0;
        }
    }
    (pairs > 0.0).then(|| (z / pairs, wz / w))
}
