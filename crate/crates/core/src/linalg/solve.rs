//! LU factorization with partial pivoting.

use alloc::format;
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

/// Inverse of a square matrix by Gauss–Jordan elimination with partial pivoting.
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch(format!("inverse of {}x{}", n, a.cols())));
    }
    let mut lu = a.clone();
    let mut inv = Matrix::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| libm::fabs(lu[(i, col)]).total_cmp(&libm::fabs(lu[(j, col)])))
            .unwrap_or(col);
        if libm::fabs(lu[(pivot, col)]) <= 1e-14 * scale {
            return Err(Error::Singular(format!("zero pivot in column {col}")));
        }
        if pivot != col {
            swap_rows(&mut lu, pivot, col);
            swap_rows(&mut inv, pivot, col);
        }
        let d = lu[(col, col)];
        lu.row_mut(col).iter_mut().for_each(|v| *v /= d);
        inv.row_mut(col).iter_mut().for_each(|v| *v /= d);
        let lu_pivot: Vec<f64> = lu.row(col).to_vec();
        let inv_pivot: Vec<f64> = inv.row(col).to_vec();
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = lu[(r, col)];
            if f == 0.0 {
                continue;
            }
            for (x, &p) in lu.row_mut(r).iter_mut().zip(&lu_pivot) {
                *x -= f * p;
            }
            for (x, &p) in inv.row_mut(r).iter_mut().zip(&inv_pivot) {
                *x -= f * p;
            }
        }
    }
    Ok(inv)
}

fn swap_rows(m: &mut Matrix, a: usize, b: usize) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    for j in 0..cols {
        data.swap(a * cols + j, b * cols + j);
    }
}
