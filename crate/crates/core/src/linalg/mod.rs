//! Dense and row-compressed matrices plus the small dense solvers used by the
//! oracles.

mod csr;
mod dense;
pub mod eig;
pub mod solve;

pub use csr::CsrMatrix;
pub use dense::Matrix;
