use alloc::vec;

use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct F1Scores {
    pub macro_f1: f64,
    pub micro_f1: f64,
}

/// Macro-F1 (unweighted mean over all `num_classes`; a class with no true or
/// predicted members scores 0) and Micro-F1 (global counts).
pub fn evaluate_predictions(predicted: &[usize], truth: &[usize], num_classes: usize) -> Result<F1Scores> {
    if predicted.is_empty() {
        return Err(Error::Empty("evaluation mask"));
    }
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch("predictions vs labels".into()));
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::InvalidValue(alloc::format!("class id outside [0, {num_classes})")));
        }
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let macro_f1 = (0..num_classes).map(|c| f1(tp[c], fp[c], fn_[c])).sum::<f64>() / num_classes as f64;
    let micro_f1 = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    Ok(F1Scores { macro_f1, micro_f1 })
}

/// Scores argmax predictions of `logits` (row `i` = node `i`) on `mask`.
pub fn evaluate(logits: &Matrix, labels: &[Option<usize>], mask: &[usize]) -> Result<F1Scores> {
    let predicted: alloc::vec::Vec<usize> = {
        let all = logits.argmax_rows();
        mask.iter().map(|&i| all[i]).collect()
    };
    let truth = mask
        .iter()
        .map(|&i| labels.get(i).copied().flatten().ok_or_else(|| Error::InvalidValue(alloc::format!("node {i} has no label"))))
        .collect::<Result<alloc::vec::Vec<_>>>()?;
    evaluate_predictions(&predicted, &truth, logits.cols())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let s = evaluate_predictions(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(s, F1Scores { macro_f1: 1.0, micro_f1: 1.0 });
    }

    #[test]
    fn all_class_zero_on_balanced_labels() {
        let s = evaluate_predictions(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(s.micro_f1, 0.5);
        assert!((s.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_errors() {
        assert!(evaluate_predictions(&[], &[], 2).is_err());
        let z = Matrix::zeros(2, 2);
        assert!(evaluate(&z, &[Some(0), Some(1)], &[]).is_err());
    }

    #[test]
    fn absent_class_counts_as_zero() {
        let s = evaluate_predictions(&[0, 1], &[0, 1], 3).unwrap();
        assert!((s.macro_f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.micro_f1, 1.0);
    }
}
