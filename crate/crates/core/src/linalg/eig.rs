//! Cyclic Jacobi eigenvalues for small dense symmetric matrices.

use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix, ascending. Only the upper triangle is
/// trusted; callers symmetrize first.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch("eigenvalues of a non-square matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("eigensolver input"));
    }
    let mut m = a.clone();
    let scale = m.max_abs();
    if n == 0 {
        return Ok(Vec::new());
    }
    if scale == 0.0 {
        return Ok(alloc::vec![0.0; n]);
    }

    let frob: f64 = m.as_slice().iter().map(|v| v * v).sum::<f64>();
    let threshold = f64::EPSILON * f64::EPSILON * frob;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = libm::copysign(1.0, theta) / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}
