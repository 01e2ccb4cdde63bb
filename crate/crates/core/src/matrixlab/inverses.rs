use nalgebra::{DMatrix, SymmetricEigen};

use super::model::CovarianceModel;
use crate::error::{Error, Result};

/// Largest accepted condition number of the `n × n` Gram matrix.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Low-rank factor `B` (`p × n`) with `A = (1/n) B B'`, from `B = Z V Λ^{-1}` where
/// `(1/n) Z'Z = V Λ V'`. Then `A = (1/n) Z G^{-2} Z'` with `G = (1/n) Z'Z`.
#[derive(Debug, Clone)]
pub struct GramFactor {
    pub factor: DMatrix<f64>,
    /// Eigenvalues of `G`, ascending.
    pub gram_eigenvalues: Vec<f64>,
}

impl GramFactor {
    /// Factors `(1/n) Z ((1/n) Z'Z)^{-2} Z'`; `Z` must have more rows than columns.
    pub fn new(z: &DMatrix<f64>) -> Result<Self> {
        let n = z.ncols();
        if n == 0 || z.nrows() == 0 {
            return Err(Error::Validation("empty data matrix".into()));
        }
        let gram = (z.transpose() * z) / n as f64;
        let eig = SymmetricEigen::new(gram);
        let smallest = eig.eigenvalues.min();
        let largest = eig.eigenvalues.max();
        let condition = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
        if condition.is_nan() || condition > GRAM_CONDITION_LIMIT {
            return Err(Error::SingularGram { smallest, condition });
        }
        let mut scaled = eig.eigenvectors;
        for (j, &l) in eig.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(1.0 / l);
        }
        let mut gram_eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        gram_eigenvalues.sort_by(f64::total_cmp);
        Ok(GramFactor {
            factor: z * scaled,
            gram_eigenvalues,
        })
    }

    pub fn smallest(&self) -> f64 {
        self.gram_eigenvalues[0]
    }

    /// `(1/n) B B'`.
    pub fn assemble(&self) -> DMatrix<f64> {
        let n = self.factor.ncols() as f64;
        (&self.factor * self.factor.transpose()) / n
    }

    /// All `p` eigenvalues of the assembled matrix, descending (`p − n` zeros last).
    /// The nonzero ones come from the `n × n` matrix `(1/n) B'B`.
    pub fn spectrum(&self) -> Vec<f64> {
        let (p, n) = self.factor.shape();
        let small = (self.factor.transpose() * &self.factor) / n as f64;
        let mut eig: Vec<f64> = SymmetricEigen::new(small).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        eig.resize(p.max(n), 0.0);
        eig
    }

    /// `tr((1/n) B B') = ‖B‖²_F / n`.
    pub fn trace(&self) -> f64 {
        self.factor.norm_squared() / self.factor.ncols() as f64
    }

    /// `‖(1/n) B B'‖²_F`, evaluated on the `n × n` side.
    pub fn frobenius_sq(&self) -> f64 {
        let n = self.factor.ncols() as f64;
        ((self.factor.transpose() * &self.factor) / n).norm_squared()
    }
}

/// `S⁺ = (1/n) Y ((1/n) Y'Y)^{-2} Y'`.
pub fn moore_penrose_inverse(y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(GramFactor::new(y)?.assemble())
}

/// `S⁻ = (1/n) Σ^{-1/2} X ((1/n) X'X)^{-2} X' Σ^{-1/2}`. Needs the true `Σ`.
pub fn reflexive_inverse(model: &CovarianceModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(reflexive_factor(model, x)?.assemble())
}

/// Low-rank factor of `S⁻`; its Gram eigenvalues are those of `(1/n) X'X`.
pub fn reflexive_factor(model: &CovarianceModel, x: &DMatrix<f64>) -> Result<GramFactor> {
    let whitened = GramFactor::new(x)?;
    Ok(GramFactor {
        factor: model.apply_inv_sqrt(&whitened.factor)?,
        gram_eigenvalues: whitened.gram_eigenvalues,
    })
}

/// `S`, `S⁺` and `S⁻` built from one noise draw.
#[derive(Debug, Clone)]
pub struct InversePair {
    pub s: DMatrix<f64>,
    pub s_plus: DMatrix<f64>,
    pub s_minus: DMatrix<f64>,
    /// Smallest eigenvalue over the two Gram matrices `(1/n)X'ΣX` and `(1/n)X'X`.
    pub gram_eigen_floor: f64,
    plus: GramFactor,
    minus: GramFactor,
}

impl InversePair {
    pub fn build(model: &CovarianceModel, x: &DMatrix<f64>) -> Result<Self> {
        let y = model.apply_sqrt(x)?;
        let plus = GramFactor::new(&y)?;
        let minus = reflexive_factor(model, x)?;
        let s = super::sampling::sample_covariance(&y);
        Ok(InversePair {
            s,
            s_plus: plus.assemble(),
            s_minus: minus.assemble(),
            gram_eigen_floor: plus.smallest().min(minus.smallest()),
            plus,
            minus,
        })
    }

    /// Eigenvalues of `S⁺`, descending: reciprocals of the Gram eigenvalues, then zeros.
    pub fn plus_spectrum(&self) -> Vec<f64> {
        let p = self.s.nrows();
        let mut eig: Vec<f64> = self.plus.gram_eigenvalues.iter().map(|l| 1.0 / l).collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        eig.resize(p, 0.0);
        eig
    }

    pub fn plus_factor(&self) -> &GramFactor {
        &self.plus
    }

    pub fn minus_factor(&self) -> &GramFactor {
        &self.minus
    }

    /// Eigenvalues of `S⁻`, descending.
    pub fn minus_spectrum(&self) -> Vec<f64> {
        self.minus.spectrum()
    }
}

/// Relative residuals of the four Penrose conditions for a candidate inverse `g` of `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenroseResiduals {
    /// `‖AGA − A‖ / ‖A‖`
    pub aga: f64,
    /// `‖GAG − G‖ / ‖G‖`
    pub gag: f64,
    /// `‖(AG)' − AG‖ / ‖AG‖`
    pub ag_symmetry: f64,
    /// `‖(GA)' − GA‖ / ‖GA‖`
    pub ga_symmetry: f64,
}

impl PenroseResiduals {
    pub fn reflexive_max(&self) -> f64 {
        self.aga.max(self.gag)
    }

    pub fn max(&self) -> f64 {
        self.reflexive_max().max(self.ag_symmetry).max(self.ga_symmetry)
    }
}

pub fn penrose_residuals(a: &DMatrix<f64>, g: &DMatrix<f64>) -> PenroseResiduals {
    let ag = a * g;
    let ga = g * a;
    let rel = |x: DMatrix<f64>, r: &DMatrix<f64>| x.norm() / r.norm();
    PenroseResiduals {
        aga: rel(&ag * a - a, a),
        gag: rel(&ga * g - g, g),
        ag_symmetry: rel(ag.transpose() - &ag, &ag),
        ga_symmetry: rel(ga.transpose() - &ga, &ga),
    }
}
