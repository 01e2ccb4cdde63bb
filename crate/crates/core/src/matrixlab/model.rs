use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::sampling::Noise;
use crate::error::{Error, Result};
use crate::spectrum::SpectrumSpec;

/// One simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub p: usize,
    pub c: f64,
    pub n: usize,
    pub c_eff: f64,
    pub spectrum: SpectrumSpec,
    pub noise: Noise,
    pub seed: u64,
}

impl Scenario {
    /// Sets `n = round(p / c)` and `c_eff = p / n`. Requires `c > 1` and `1 <= n < p`.
    pub fn new(p: usize, c: f64, spectrum: SpectrumSpec, noise: Noise, seed: u64) -> Result<Self> {
        if !(c.is_finite() && c > 1.0) {
            return Err(Error::Validation(format!(
                "concentration c must satisfy c > 1 (got {c})"
            )));
        }
        if p < 2 {
            return Err(Error::Validation(format!("dimension p must be >= 2 (got {p})")));
        }
        let n = (p as f64 / c).round() as usize;
        if n == 0 || n >= p {
            return Err(Error::Validation(format!(
                "p = {p}, c = {c} gives n = {n}; need 1 <= n < p"
            )));
        }
        Ok(Scenario {
            p,
            c,
            n,
            c_eff: p as f64 / n as f64,
            spectrum,
            noise,
            seed,
        })
    }

    /// Set when the realized ratio `p/n` is more than 10% away from the target `c`.
    pub fn warning(&self) -> Option<String> {
        let rel = (self.c_eff - self.c).abs() / self.c;
        (rel > 0.1).then(|| {
            format!(
                "c_eff = {:.4} differs from target c = {} by {:.1}% (p = {}, n = {})",
                self.c_eff,
                self.c,
                rel * 100.0,
                self.p,
                self.n
            )
        })
    }

    pub fn covariance(&self) -> CovarianceModel {
        CovarianceModel::from_spectrum(&self.spectrum, self.p)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Scenario {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
enum Structure {
    Diagonal(Vec<f64>),
    Dense {
        sigma: DMatrix<f64>,
        sqrt: DMatrix<f64>,
        inv_sqrt: DMatrix<f64>,
        inv: DMatrix<f64>,
        eigenvalues: Vec<f64>,
    },
}

/// Finite population covariance `Σ` with its symmetric square root and inverse powers.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    structure: Structure,
}

impl CovarianceModel {
    /// Diagonal `Σ` with per-atom counts from largest-remainder apportionment.
    pub fn from_spectrum(spectrum: &SpectrumSpec, p: usize) -> Self {
        CovarianceModel {
            structure: Structure::Diagonal(spectrum.realize(p)),
        }
    }

    pub fn from_diagonal(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Validation("covariance must have p >= 1".into()));
        }
        if let Some((i, &t)) = eigenvalues
            .iter()
            .enumerate()
            .find(|(_, t)| !(t.is_finite() && **t > 0.0))
        {
            return Err(Error::Validation(format!(
                "diagonal entry {i} of Σ must be positive (got {t})"
            )));
        }
        Ok(CovarianceModel {
            structure: Structure::Diagonal(eigenvalues),
        })
    }

    /// Dense symmetric positive-definite `Σ`; powers come from its eigendecomposition.
    pub fn from_dense(sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != sigma.ncols() || sigma.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: "non-empty square matrix".into(),
                found: format!("{} x {}", sigma.nrows(), sigma.ncols()),
            });
        }
        let scale = sigma.norm().max(f64::MIN_POSITIVE);
        if (&sigma - sigma.transpose()).norm() > 1e-10 * scale {
            return Err(Error::Validation("Σ is not symmetric".into()));
        }
        let sym = (&sigma + sigma.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let min = eig.eigenvalues.min();
        if min <= 0.0 {
            return Err(Error::Validation(format!(
                "Σ is not positive definite (smallest eigenvalue {min:e})"
            )));
        }
        let power = |f: fn(f64) -> f64| {
            let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
            &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
        };
        let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        Ok(CovarianceModel {
            structure: Structure::Dense {
                sqrt: power(f64::sqrt),
                inv_sqrt: power(|l| 1.0 / l.sqrt()),
                inv: power(|l| 1.0 / l),
                sigma: sym,
                eigenvalues,
            },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.structure {
            Structure::Diagonal(d) => d.len(),
            Structure::Dense { sigma, .. } => sigma.nrows(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.structure, Structure::Diagonal(_))
    }

    /// Eigenvalues of `Σ` (diagonal order for diagonal models, ascending otherwise).
    pub fn eigenvalues(&self) -> Vec<f64> {
        match &self.structure {
            Structure::Diagonal(d) => d.clone(),
            Structure::Dense { eigenvalues, .. } => eigenvalues.clone(),
        }
    }

    /// Exact discrete spectrum `H_p` of this `Σ`.
    pub fn spectrum(&self) -> SpectrumSpec {
        SpectrumSpec::from_eigenvalues(&self.eigenvalues())
            .expect("covariance eigenvalues are positive by construction")
    }

    pub fn sigma(&self) -> DMatrix<f64> {
        match &self.structure {
            Structure::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Structure::Dense { sigma, .. } => sigma.clone(),
        }
    }

    pub fn sqrt(&self) -> DMatrix<f64> {
        match &self.structure {
            Structure::Diagonal(d) => diag_from(d, f64::sqrt),
            Structure::Dense { sqrt, .. } => sqrt.clone(),
        }
    }

    pub fn inv_sqrt(&self) -> DMatrix<f64> {
        match &self.structure {
            Structure::Diagonal(d) => diag_from(d, |t| 1.0 / t.sqrt()),
            Structure::Dense { inv_sqrt, .. } => inv_sqrt.clone(),
        }
    }

    pub fn inv(&self) -> DMatrix<f64> {
        match &self.structure {
            Structure::Diagonal(d) => diag_from(d, |t| 1.0 / t),
            Structure::Dense { inv, .. } => inv.clone(),
        }
    }

    /// `Σ^{1/2} X`.
    pub fn apply_sqrt(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.apply(x, f64::sqrt, |s| match s {
            Structure::Dense { sqrt, .. } => sqrt,
            Structure::Diagonal(_) => unreachable!(),
        })
    }

    /// `Σ^{-1/2} X`.
    pub fn apply_inv_sqrt(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.apply(x, |t| 1.0 / t.sqrt(), |s| match s {
            Structure::Dense { inv_sqrt, .. } => inv_sqrt,
            Structure::Diagonal(_) => unreachable!(),
        })
    }

    fn apply(
        &self,
        x: &DMatrix<f64>,
        scalar: fn(f64) -> f64,
        dense: fn(&Structure) -> &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        if x.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows", self.dim()),
                found: format!("{} x {}", x.nrows(), x.ncols()),
            });
        }
        Ok(match &self.structure {
            Structure::Diagonal(d) => {
                let mut y = x.clone();
                for (i, &t) in d.iter().enumerate() {
                    let f = scalar(t);
                    y.row_mut(i).scale_mut(f);
                }
                y
            }
            s @ Structure::Dense { .. } => dense(s) * x,
        })
    }
}

fn diag_from(d: &[f64], f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|&t| f(t))))
}
