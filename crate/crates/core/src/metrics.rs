//! Confusion matrices and macro-averaged F1.
//!
//! Macro averaging always runs over the full fixed class set. Precision and
//! recall with a zero denominator are defined as 0, and a class's F1 is 0
//! when precision + recall is 0; this convention is stated in emitted
//! reports because scorers differ on it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no evaluated items")]
    EmptyEvaluation,
    #[error("class index {0} out of range for {1} classes")]
    ClassOutOfRange(usize, usize),
}

/// k x k confusion counts; rows are gold classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> ConfusionMatrix {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn add(&mut self, gold: usize, pred: usize) -> Result<(), MetricsError> {
        if gold >= self.classes {
            return Err(MetricsError::ClassOutOfRange(gold, self.classes));
        }
        if pred >= self.classes {
            return Err(MetricsError::ClassOutOfRange(pred, self.classes));
        }
        self.counts[gold * self.classes + pred] += 1;
        Ok(())
    }

    pub fn get(&self, gold: usize, pred: usize) -> usize {
        self.counts[gold * self.classes + pred]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn from_pairs(
        classes: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<ConfusionMatrix, MetricsError> {
        let mut cm = ConfusionMatrix::new(classes);
        for (gold, pred) in pairs {
            cm.add(gold, pred)?;
        }
        Ok(cm)
    }
}

/// Per-class F1 = 2PR / (P + R), with the zero conventions above.
pub fn per_class_f1(cm: &ConfusionMatrix) -> Result<Vec<f64>, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::EmptyEvaluation);
    }
    let k = cm.classes;
    let mut f1 = vec![0.0; k];
    for c in 0..k {
        let tp = cm.get(c, c) as f64;
        let pred_c: f64 = (0..k).map(|g| cm.get(g, c)).sum::<usize>() as f64;
        let gold_c: f64 = (0..k).map(|p| cm.get(c, p)).sum::<usize>() as f64;
        let precision = if pred_c > 0.0 { tp / pred_c } else { 0.0 };
        let recall = if gold_c > 0.0 { tp / gold_c } else { 0.0 };
        f1[c] = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    Ok(f1)
}

/// Unweighted mean of per-class F1 over the full class set.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let f1 = per_class_f1(cm)?;
    Ok(f1.iter().sum::<f64>() / f1.len() as f64)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyEvaluation);
    }
    let correct: usize = (0..cm.classes).map(|c| cm.get(c, c)).sum();
    Ok(correct as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_one() {
        let cm = ConfusionMatrix::from_pairs(4, [(0, 0), (1, 1), (2, 2), (3, 3)]).unwrap();
        assert_eq!(macro_f1(&cm).unwrap(), 1.0);
        assert_eq!(accuracy(&cm).unwrap(), 1.0);
    }

    #[test]
    fn all_comment_predictions_on_mixed_gold() {
        // Gold [S, S, C, C], everything predicted C.
        let cm = ConfusionMatrix::from_pairs(4, [(0, 3), (0, 3), (3, 3), (3, 3)]).unwrap();
        let f1 = per_class_f1(&cm).unwrap();
        assert_eq!(f1[0], 0.0);
        assert_eq!(f1[1], 0.0);
        assert_eq!(f1[2], 0.0);
        assert!((f1[3] - 2.0 / 3.0).abs() < 1e-12);
        assert!((macro_f1(&cm).unwrap() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn three_class_diagonal_is_perfect() {
        let cm = ConfusionMatrix::from_pairs(3, [(0, 0), (1, 1), (2, 2)]).unwrap();
        assert_eq!(macro_f1(&cm).unwrap(), 1.0);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        let cm = ConfusionMatrix::new(4);
        assert_eq!(macro_f1(&cm), Err(MetricsError::EmptyEvaluation));
    }

    #[test]
    fn out_of_range_class_is_rejected() {
        let mut cm = ConfusionMatrix::new(3);
        assert!(cm.add(3, 0).is_err());
        assert!(cm.add(0, 5).is_err());
    }

    #[test]
    fn macro_f1_invariant_under_class_permutation() {
        let pairs = [(0, 1), (1, 1), (2, 0), (3, 3), (0, 0), (2, 2)];
        let cm = ConfusionMatrix::from_pairs(4, pairs).unwrap();
        let perm = [2usize, 3, 0, 1];
        let permuted = ConfusionMatrix::from_pairs(
            4,
            pairs.iter().map(|&(g, p)| (perm[g], perm[p])),
        )
        .unwrap();
        assert!((macro_f1(&cm).unwrap() - macro_f1(&permuted).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_precision_recall_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let k = rng.random_range(2..=5);
            let n = rng.random_range(1..60);
            let pairs: Vec<(usize, usize)> = (0..n)
                .map(|_| (rng.random_range(0..k), rng.random_range(0..k)))
                .collect();
            let cm = ConfusionMatrix::from_pairs(k, pairs.iter().copied()).unwrap();
            let f1 = per_class_f1(&cm).unwrap();

            // Brute-force oracle straight off the label pairs.
            for c in 0..k {
                let tp = pairs.iter().filter(|&&(g, p)| g == c && p == c).count() as f64;
                let fp = pairs.iter().filter(|&&(g, p)| g != c && p == c).count() as f64;
                let fn_ = pairs.iter().filter(|&&(g, p)| g == c && p != c).count() as f64;
                let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
                let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
                let expect = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                assert_eq!(f1[c], expect, "class {c} of {k}, pairs {pairs:?}");
            }
        }
    }
}
