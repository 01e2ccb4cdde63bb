//! Frobenius-norm limits of `S⁺` and `S⁻`, their empirical counterparts and the
//! normalized Frobenius loss `NFL = ‖S⁻‖²_F / ‖S⁺‖²_F − 1`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrixlab::{frobenius_sq, CovarianceModel, GramFactor, InversePair};
use crate::spectrum::SpectrumSpec;
use crate::stieltjes::{m_underline_zero, m_underline_zero_prime, DEFAULT_TOL};

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c > 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "concentration c must satisfy c > 1 (got {c})"
        )))
    }
}

/// Limit of `(1/p)‖S⁺‖²_F`: `m'_F̲(0) / c`.
pub fn asymptotic_fro_plus(c: f64, h: &SpectrumSpec) -> Result<f64> {
    let m0 = m_underline_zero(c, h, DEFAULT_TOL)?;
    Ok(m_underline_zero_prime(c, h, m0)? / c)
}

/// Limit of `(1/p)‖S⁻‖²_F`:
/// `(1 + c(c−1)) / (c²(c−1)³) · (∫τ⁻¹dH)² + (∫τ⁻²dH) / (c(c−1))²`.
pub fn asymptotic_fro_minus(c: f64, h: &SpectrumSpec) -> Result<f64> {
    check_c(c)?;
    let h1 = h.inverse_moment(1)?;
    let h2 = h.inverse_moment(2)?;
    let d = c - 1.0;
    Ok((1.0 + c * d) / (c * c * d.powi(3)) * h1 * h1 + h2 / (c * d).powi(2))
}

pub fn asymptotic_nfl(c: f64, h: &SpectrumSpec) -> Result<f64> {
    Ok(asymptotic_fro_minus(c, h)? / asymptotic_fro_plus(c, h)? - 1.0)
}

/// Limit of `(1/p) tr(S⁻)`: `∫τ⁻¹dH / (c(c−1))`.
pub fn trace_limit_minus(c: f64, h: &SpectrumSpec) -> Result<f64> {
    check_c(c)?;
    Ok(h.inverse_moment(1)? / (c * (c - 1.0)))
}

/// `‖S⁻‖²_F / ‖S⁺‖²_F − 1`. Since `tr(S⁺S⁻) = tr(S⁺S⁺)` this also equals
/// `‖S⁻ − S⁺‖²_F / ‖S⁺‖²_F`.
pub fn empirical_nfl(s_plus: &DMatrix<f64>, s_minus: &DMatrix<f64>) -> Result<f64> {
    if s_plus.shape() != s_minus.shape() || s_plus.nrows() != s_plus.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("two square matrices of shape {:?}", s_plus.shape()),
            found: format!("{:?} and {:?}", s_plus.shape(), s_minus.shape()),
        });
    }
    nfl_from_norms(frobenius_sq(s_plus), frobenius_sq(s_minus))
}

/// `minus / plus − 1` for precomputed squared norms; a non-positive `plus` is an error.
pub fn nfl_from_norms(plus: f64, minus: f64) -> Result<f64> {
    if !(plus > 0.0 && plus.is_finite()) {
        return Err(Error::Conditioning { denominator: plus });
    }
    Ok(minus / plus - 1.0)
}

/// Consistent estimator of `(1/p)‖Σ⁻¹‖²_F` built from `S⁻`:
/// `(1/p)(c(c−1))² [‖S⁻‖²_F − (1/(c−1) + c)(tr S⁻)²/p]`.
pub fn precision_fro_estimator(s_minus: &DMatrix<f64>, c_eff: f64, p: usize) -> Result<f64> {
    if s_minus.nrows() != p || s_minus.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("{p} x {p}"),
            found: format!("{} x {}", s_minus.nrows(), s_minus.ncols()),
        });
    }
    precision_fro_from_moments(frobenius_sq(s_minus), s_minus.trace(), c_eff, p)
}

/// Same estimator from `‖S⁻‖²_F` and `tr(S⁻)` directly.
pub fn precision_fro_from_moments(frobenius_sq: f64, trace: f64, c_eff: f64, p: usize) -> Result<f64> {
    check_c(c_eff)?;
    if p == 0 {
        return Err(Error::Validation("dimension p must be positive".into()));
    }
    let p = p as f64;
    let c = c_eff;
    let scale = (c * (c - 1.0)).powi(2);
    Ok(scale * (frobenius_sq - (1.0 / (c - 1.0) + c) * trace * trace / p) / p)
}

/// Finite-`p` plug-in equivalents, using the exact eigenvalue distribution of `Σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalents {
    pub fro_plus: f64,
    pub fro_minus: f64,
    /// Positive root of `1/m = c (1/p) Σᵢ τᵢ/(1 + τᵢ m)` over the eigenvalues of `Σ`.
    pub m0: f64,
}

pub fn corollary_equivalents(sigma: &CovarianceModel, c: f64) -> Result<Equivalents> {
    let hp = sigma.spectrum();
    let m0 = m_underline_zero(c, &hp, DEFAULT_TOL)?;
    Ok(Equivalents {
        fro_plus: m_underline_zero_prime(c, &hp, m0)? / c,
        fro_minus: asymptotic_fro_minus(c, &hp)?,
        m0,
    })
}

/// All asymptotic quantities for one `(c, H)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticSummary {
    pub c: f64,
    pub fro_plus: f64,
    pub fro_minus: f64,
    pub nfl: f64,
    pub m0: f64,
    pub trace_minus: f64,
}

pub fn asymptotic_summary(c: f64, h: &SpectrumSpec) -> Result<AsymptoticSummary> {
    let m0 = m_underline_zero(c, h, DEFAULT_TOL)?;
    let fro_plus = m_underline_zero_prime(c, h, m0)? / c;
    let fro_minus = asymptotic_fro_minus(c, h)?;
    Ok(AsymptoticSummary {
        c,
        fro_plus,
        fro_minus,
        nfl: fro_minus / fro_plus - 1.0,
        m0,
        trace_minus: trace_limit_minus(c, h)?,
    })
}

/// Empirical and asymptotic Frobenius quantities for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrobeniusReport {
    pub c_eff: f64,
    pub fro_plus_emp: f64,
    pub fro_minus_emp: f64,
    pub fro_plus_asym: f64,
    pub fro_minus_asym: f64,
    pub nfl_emp: f64,
    pub nfl_asym: f64,
    pub trace_minus_emp: f64,
    pub trace_minus_asym: f64,
    pub precision_norm_estimate: f64,
    /// `(1/p)‖Σ⁻¹‖²_F`.
    pub precision_norm_true: f64,
}

impl FrobeniusReport {
    pub fn from_pair(sigma: &CovarianceModel, pair: &InversePair) -> Result<Self> {
        Self::from_factors(sigma, pair.plus_factor(), pair.minus_factor())
    }

    /// Works on the low-rank factors only, so no `p × p` product is formed.
    pub fn from_factors(sigma: &CovarianceModel, plus: &GramFactor, minus: &GramFactor) -> Result<Self> {
        let (p, n) = plus.factor.shape();
        if minus.factor.shape() != (p, n) || sigma.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: format!("factors of shape {p} x {n} and Σ of size {p}"),
                found: format!("{:?} and Σ of size {}", minus.factor.shape(), sigma.dim()),
            });
        }
        let c_eff = p as f64 / n as f64;
        let pf = p as f64;
        let fro_plus_emp = plus.frobenius_sq() / pf;
        let fro_minus_raw = minus.frobenius_sq();
        let trace_minus_raw = minus.trace();
        let fro_minus_emp = fro_minus_raw / pf;
        let asym = asymptotic_summary(c_eff, &sigma.spectrum())?;
        Ok(FrobeniusReport {
            c_eff,
            fro_plus_emp,
            fro_minus_emp,
            fro_plus_asym: asym.fro_plus,
            fro_minus_asym: asym.fro_minus,
            nfl_emp: nfl_from_norms(fro_plus_emp, fro_minus_emp)?,
            nfl_asym: asym.nfl,
            trace_minus_emp: trace_minus_raw / pf,
            trace_minus_asym: asym.trace_minus,
            precision_norm_estimate: precision_fro_from_moments(fro_minus_raw, trace_minus_raw, c_eff, p)?,
            precision_norm_true: sigma.spectrum().inverse_moment(2)?,
        })
    }
}
