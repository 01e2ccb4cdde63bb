use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralStats {
    pub trace: f64,
    pub frobenius_sq: f64,
    /// Descending.
    pub eigenvalues: Vec<f64>,
}

pub fn trace(a: &DMatrix<f64>) -> f64 {
    a.trace()
}

/// `Σᵢⱼ aᵢⱼ²`, which equals `tr(A²)` for symmetric `A`.
pub fn frobenius_sq(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Trace, squared Frobenius norm and descending eigenvalues of a symmetric matrix.
pub fn spectral_stats(a: &DMatrix<f64>) -> Result<SpectralStats> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{} x {}", a.nrows(), a.ncols()),
        });
    }
    let scale = a.norm();
    let asym = (a - a.transpose()).norm();
    if asym > 1e-10 * scale {
        return Err(Error::Validation(format!(
            "matrix is not symmetric (relative asymmetry {:e})",
            asym / scale
        )));
    }
    let sym = (a + a.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|x, y| y.total_cmp(x));
    Ok(SpectralStats {
        trace: trace(a),
        frobenius_sq: frobenius_sq(a),
        eigenvalues,
    })
}
