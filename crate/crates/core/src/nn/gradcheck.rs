use alloc::string::String;
use alloc::vec::Vec;

use super::model::{loss_and_grads, ForwardMode, Model};
use crate::graph::OperatorSet;
use crate::linalg::Matrix;
use crate::Result;

/// Worst per-entry disagreement between the reverse-mode gradient and a
/// central finite difference, for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub group: String,
    pub entries: usize,
    pub max_rel_error: f64,
}

/// `|a - b| / max(|a|, |b|, 1e-6)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compares every gradient entry of the full-mode, dropout-free loss with
/// `(L(p + h) - L(p - h)) / 2h`.
pub fn gradient_check(
    model: &Model,
    ops: &OperatorSet,
    x: &Matrix,
    labels: &[Option<usize>],
    rows: &[usize],
    h: f64,
) -> Result<Vec<GradientCheck>> {
    let (_, grads) = loss_and_grads(model, ops, x, labels, rows, ForwardMode::Full, None)?;
    let mut probe = model.clone();
    let loss_at = |probe: &mut Model, p: usize, k: usize, value: f64| -> Result<f64> {
        probe.params[p].as_mut_slice()[k] = value;
        let (loss, _) = loss_and_grads(probe, ops, x, labels, rows, ForwardMode::Full, None)?;
        Ok(loss)
    };
    let mut report = Vec::new();
    for group in model.param_groups() {
        let p = group.index;
        let mut worst = 0.0f64;
        let len = model.params[p].as_slice().len();
        for k in 0..len {
            let original = model.params[p].as_slice()[k];
            let plus = loss_at(&mut probe, p, k, original + h)?;
            let minus = loss_at(&mut probe, p, k, original - h)?;
            probe.params[p].as_mut_slice()[k] = original;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(relative_error(grads[p].as_slice()[k], numeric));
        }
        report.push(GradientCheck {
            group: group.name,
            entries: len,
            max_rel_error: worst,
        });
    }
    Ok(report)
}
