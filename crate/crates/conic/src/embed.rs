//! Real symmetric embedding of complex Hermitian matrices.
//!
//! `H ⪰ 0` holds exactly when `[[Re H, -Im H], [Im H, Re H]] ⪰ 0`, which lets
//! a real PSD cone carry complex semidefinite constraints.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{ConicError, Result};

pub fn hermitian_embed(h: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(ConicError::Dimension(format!(
            "hermitian_embed expects a square matrix, got {}x{}",
            n,
            h.ncols()
        )));
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    Ok(out)
}

/// Inverse of [`hermitian_embed`]; averages the redundant blocks.
pub fn hermitian_unembed(m: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
    let two_n = m.nrows();
    if m.ncols() != two_n || two_n % 2 != 0 {
        return Err(ConicError::Dimension(format!(
            "embedding must be square of even order, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = two_n / 2;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(i + n, j + n)]);
        let im = 0.5 * (m[(i + n, j)] - m[(i, j + n)]);
        Complex64::new(re, im)
    }))
}
