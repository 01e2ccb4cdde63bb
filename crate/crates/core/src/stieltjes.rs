//! Limiting Stieltjes transforms of the two generalized inverses.
//!
//! With `H` the population spectrum and `c = lim p/n > 1`:
//!
//! ```text
//! S⁺:  m(z) = −(1/z) (2 − 1/c + ∫ dH(τ) / (z τ c (z m + 1) − 1))
//! S⁻:  m(z) = −1/z − (1/z) ∫ dH(τ) / (τ c z² m (1 − c / (1 − c − c z m)) − 1)
//! (1/n) Y'Y (companion):  m(z) = (c ∫ τ dH(τ) / (1 + τ m) − z)^{-1}
//! ```
//!
//! Each is solved by damped fixed-point iteration started from `−1/z` at a point
//! well above the real axis, then followed down to the requested `z` by Newton
//! continuation on the equation as displayed above.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectrum::SpectrumSpec;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_EPSILON: f64 = 1e-3;
const DAMPING_FLOOR: f64 = 1.0 / 64.0;
const NEWTON_STEPS: usize = 60;
const CONTINUATION_HEIGHT: f64 = 10.0;
const CONTINUATION_RATIO: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesSolution {
    pub z: Complex64,
    pub m: Complex64,
    /// `|RHS(m) − m|` at the returned value.
    pub residual: f64,
    pub iterations: usize,
    pub damping_used: f64,
}

/// Which transform to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    /// Limit of the spectrum of `S⁺`.
    Plus,
    /// Limit of the spectrum of `S⁻`.
    Minus,
    /// Marchenko-Pastur law (closed form, `H` ignored).
    Mp,
    /// Companion transform of `(1/n) Y'Y`.
    Underline,
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" => Ok(Transform::Plus),
            "minus" => Ok(Transform::Minus),
            "mp" => Ok(Transform::Mp),
            "underline" => Ok(Transform::Underline),
            other => Err(Error::Validation(format!(
                "unknown transform `{other}` (expected plus, minus, mp or underline)"
            ))),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Plus => "plus",
            Transform::Minus => "minus",
            Transform::Mp => "mp",
            Transform::Underline => "underline",
        })
    }
}

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c > 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "concentration c must satisfy c > 1 (got {c})"
        )))
    }
}

fn check_upper(z: Complex64) -> Result<()> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "z must lie in the upper half-plane (got {z})"
        )))
    }
}

/// Damped Picard iteration `x ← (1 − α) x + α T(x)`; `α` halves whenever the
/// residual `|T(x) − x|` grows, down to 1/64.
/// Returns `(x, residual, iterations, α)`.
fn damped_picard<F>(map: F, start: Complex64, opts: SolverOptions) -> (Complex64, f64, usize, f64)
where
    F: Fn(Complex64) -> Complex64,
{
    let mut x = start;
    let mut fx = map(x);
    let mut residual = (fx - x).norm();
    let mut alpha = 1.0;
    let mut iterations = 0;
    while iterations < opts.max_iter && residual >= opts.tol {
        iterations += 1;
        let candidate = x * (1.0 - alpha) + fx * alpha;
        let fc = map(candidate);
        let rc = (fc - candidate).norm();
        if !rc.is_finite() || rc > residual {
            if alpha > DAMPING_FLOOR {
                alpha *= 0.5;
                continue;
            }
            if !rc.is_finite() {
                break;
            }
        }
        x = candidate;
        fx = fc;
        residual = rc;
    }
    (x, residual, iterations, alpha)
}

/// Newton's method on the holomorphic defect `d(m) = RHS(m) − m`, with a
/// forward-difference slope. Returns the root and the Newton step count.
fn newton<F>(defect: F, start: Complex64, tol: f64) -> Option<(Complex64, usize)>
where
    F: Fn(Complex64) -> Complex64,
{
    let mut m = start;
    let mut d = defect(m);
    for step in 0..NEWTON_STEPS {
        if !d.is_finite() {
            return None;
        }
        if d.norm() < tol {
            return Some((m, step));
        }
        let h = 1e-7 * (1.0 + m.norm());
        let slope = (defect(m + h) - d) / h;
        if slope.norm() == 0.0 || !slope.is_finite() {
            return None;
        }
        m -= d / slope;
        d = defect(m);
    }
    (d.is_finite() && d.norm() < tol).then_some((m, NEWTON_STEPS))
}

/// One of the three fixed-point problems, bound to `(c, H)`.
struct Problem<'a> {
    which: Transform,
    c: f64,
    h: &'a SpectrumSpec,
}

impl Problem<'_> {
    fn rhs(&self, m: Complex64, z: Complex64) -> Complex64 {
        match self.which {
            Transform::Plus => rhs_plus(m, z, self.c, self.h),
            Transform::Minus => rhs_minus(m, z, self.c, self.h),
            Transform::Underline | Transform::Mp => rhs_underline(m, z, self.c, self.h),
        }
    }

    /// Damped Picard solve far from the real axis, where the iteration is contractive.
    ///
    /// The `S⁺` equation is iterated in `u = −c z (z m + 1)`, in which it reads
    /// `u = (c ∫ τ dH/(1 + τ u) − 1/z)^{-1}`; iterating it in `m` directly has
    /// spurious attracting roots for large `|z|`.
    fn start(&self, z: Complex64, opts: SolverOptions) -> Option<(Complex64, usize, f64)> {
        let m0 = -1.0 / z;
        let (m, iterations, alpha) = match self.which {
            Transform::Plus => {
                let c = self.c;
                let w = 1.0 / z;
                let map = |u: Complex64| {
                    let sum: Complex64 = self
                        .h
                        .atoms()
                        .iter()
                        .map(|a| a.weight * a.eigenvalue / (1.0 + a.eigenvalue * u))
                        .sum();
                    1.0 / (c * sum - w)
                };
                let (u, _, it, alpha) = damped_picard(map, -z, opts);
                ((-1.0 - u / (c * z)) / z, it, alpha)
            }
            _ => {
                let (m, _, it, alpha) = damped_picard(|m| self.rhs(m, z), m0, opts);
                (m, it, alpha)
            }
        };
        let (m, steps) = newton(|m| self.rhs(m, z) - m, m, opts.tol)?;
        Some((m, iterations + steps, alpha))
    }

    /// Solves at `z` by starting at `Re z + iY` and following the root down the
    /// vertical line with Newton steps. A step is rejected (and shortened) when the
    /// root jumps by more than half its modulus; in particular this keeps the
    /// `S⁻` solve away from its trivial root `m = 0`.
    fn solve(&self, z: Complex64, opts: SolverOptions) -> Result<StieltjesSolution> {
        let mut top = CONTINUATION_HEIGHT * (1.0 + z.re.abs());
        let mut last_residual = f64::INFINITY;
        for _ in 0..8 {
            if z.im >= top {
                if let Some((m, iterations, alpha)) = self.start(z, opts) {
                    return self.finish(z, m, iterations, alpha);
                }
            } else if let Some((m, iterations, alpha)) =
                self.start(Complex64::new(z.re, top), opts)
            {
                match self.follow(z, top, m, opts) {
                    Ok((m, steps)) => return self.finish(z, m, iterations + steps, alpha),
                    Err(r) => last_residual = r,
                }
            }
            top *= 2.0;
        }
        Err(Error::Divergence {
            iterations: opts.max_iter,
            residual: last_residual,
        })
    }

    fn follow(&self, z: Complex64, top: f64, mut m: Complex64, opts: SolverOptions) -> std::result::Result<(Complex64, usize), f64> {
        let floor = 1e-9 * (1.0 + z.re.abs());
        let mut y = top;
        let mut ratio = CONTINUATION_RATIO;
        let mut steps = 0;
        loop {
            let mut next = y * ratio;
            if next <= z.im || (z.im == 0.0 && next < floor) {
                next = z.im;
            }
            let zn = Complex64::new(z.re, next);
            let accepted = newton(|v| self.rhs(v, zn) - v, m, opts.tol).filter(|(v, _)| {
                (*v - m).norm() <= 0.5 * m.norm() && (zn.im == 0.0 || v.im > 0.0)
            });
            match accepted {
                Some((v, k)) => {
                    steps += k + 1;
                    m = v;
                    y = next;
                    if y == z.im {
                        return Ok((m, steps));
                    }
                    ratio = (ratio * ratio).max(CONTINUATION_RATIO);
                }
                None => {
                    ratio = ratio.sqrt();
                    if 1.0 - ratio < 1e-8 || steps > opts.max_iter {
                        return Err((self.rhs(m, zn) - m).norm());
                    }
                }
            }
        }
    }

    fn finish(&self, z: Complex64, m: Complex64, iterations: usize, damping_used: f64) -> Result<StieltjesSolution> {
        let residual = (self.rhs(m, z) - m).norm();
        if z.im > 0.0 && m.im <= 0.0 {
            return Err(Error::HalfPlane { im_m: m.im });
        }
        Ok(StieltjesSolution {
            z,
            m,
            residual,
            iterations,
            damping_used,
        })
    }
}

fn rhs_plus(m: Complex64, z: Complex64, c: f64, h: &SpectrumSpec) -> Complex64 {
    let zm1 = z * m + 1.0;
    let sum: Complex64 = h
        .atoms()
        .iter()
        .map(|a| a.weight / (z * a.eigenvalue * c * zm1 - 1.0))
        .sum();
    -(2.0 - 1.0 / c + sum) / z
}

fn rhs_minus(m: Complex64, z: Complex64, c: f64, h: &SpectrumSpec) -> Complex64 {
    let inner = 1.0 - c / (1.0 - c - c * z * m);
    let base = c * z * z * m * inner;
    let sum: Complex64 = h
        .atoms()
        .iter()
        .map(|a| a.weight / (a.eigenvalue * base - 1.0))
        .sum();
    -(1.0 + sum) / z
}

fn rhs_underline(m: Complex64, z: Complex64, c: f64, h: &SpectrumSpec) -> Complex64 {
    let sum: Complex64 = h
        .atoms()
        .iter()
        .map(|a| a.weight * a.eigenvalue / (1.0 + a.eigenvalue * m))
        .sum();
    1.0 / (c * sum - z)
}

/// Right-hand side of the fixed-point equation for `which` (not defined for `Mp`).
pub fn fixed_point_rhs(which: Transform, m: Complex64, z: Complex64, c: f64, h: &SpectrumSpec) -> Complex64 {
    match which {
        Transform::Plus => rhs_plus(m, z, c, h),
        Transform::Minus => rhs_minus(m, z, c, h),
        Transform::Underline => rhs_underline(m, z, c, h),
        Transform::Mp => mp_stieltjes(z, c).unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
    }
}

/// Stieltjes transform of the Marchenko-Pastur law with ratio `c`:
/// `(1 − c − z + √((1 + c − z)² − 4c)) / (2cz)`, on the branch with `Im m > 0` for `Im z > 0`.
/// For real `z` outside the support the branch is the limit from the upper half-plane.
pub fn mp_stieltjes(z: Complex64, c: f64) -> Result<Complex64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Validation(format!("ratio c must be positive (got {c})")));
    }
    if z.norm() == 0.0 {
        return Err(Error::PoleAtZero);
    }
    let roots = |z: Complex64| {
        let sq = ((1.0 + c - z) * (1.0 + c - z) - 4.0 * c).sqrt();
        let denom = 2.0 * c * z;
        ((1.0 - c - z + sq) / denom, (1.0 - c - z - sq) / denom)
    };
    let (a, b) = roots(z);
    if z.im > 0.0 {
        return Ok(if a.im >= b.im { a } else { b });
    }
    // real axis (or below): follow the upper half-plane limit
    let lifted = Complex64::new(z.re, z.im.abs() + 1e-9 * (1.0 + z.norm()));
    let (la, lb) = roots(lifted);
    let target = if la.im >= lb.im { la } else { lb };
    let pick = if (a - target).norm() <= (b - target).norm() { a } else { b };
    Ok(if z.im < 0.0 { pick.conj() } else { pick })
}

/// Solves the `S⁺` equation at `z ∈ ℂ⁺`.
pub fn solve_m_plus(z: Complex64, c: f64, h: &SpectrumSpec, opts: SolverOptions) -> Result<StieltjesSolution> {
    check_upper(z)?;
    check_c(c)?;
    Problem { which: Transform::Plus, c, h }.solve(z, opts)
}

/// Solves the `S⁻` equation at `z ∈ ℂ⁺`.
pub fn solve_m_minus(z: Complex64, c: f64, h: &SpectrumSpec, opts: SolverOptions) -> Result<StieltjesSolution> {
    check_upper(z)?;
    check_c(c)?;
    Problem { which: Transform::Minus, c, h }.solve(z, opts)
}

/// Companion transform `m_F̲(z)`; `z` in the closed upper half-plane, `z ≠ 0`.
pub fn m_underline(z: Complex64, c: f64, h: &SpectrumSpec, opts: SolverOptions) -> Result<StieltjesSolution> {
    check_c(c)?;
    if z.im < 0.0 || !z.is_finite() {
        return Err(Error::Validation(format!(
            "z must lie in the closed upper half-plane (got {z})"
        )));
    }
    if z.norm() == 0.0 {
        return Err(Error::PoleAtZero);
    }
    Problem { which: Transform::Underline, c, h }.solve(z, opts)
}

/// Dispatches to the solver (or closed form) for `which`.
pub fn solve(which: Transform, z: Complex64, c: f64, h: &SpectrumSpec, opts: SolverOptions) -> Result<StieltjesSolution> {
    match which {
        Transform::Plus => solve_m_plus(z, c, h, opts),
        Transform::Minus => solve_m_minus(z, c, h, opts),
        Transform::Underline => m_underline(z, c, h, opts),
        Transform::Mp => {
            let m = mp_stieltjes(z, c)?;
            // residual of the quadratic c z m² + (z + c − 1) m + 1 = 0
            let residual = (c * z * m * m + (z + c - 1.0) * m + 1.0).norm();
            Ok(StieltjesSolution {
                z,
                m,
                residual,
                iterations: 0,
                damping_used: 1.0,
            })
        }
    }
}

fn zero_point_scaled_defect(m: f64, c: f64, h: &SpectrumSpec) -> f64 {
    // m · (c ∫ τ/(1+τm) dH − 1/m); strictly increasing from −1 to c − 1 on (0, ∞)
    c * h
        .atoms()
        .iter()
        .map(|a| a.weight * a.eigenvalue * m / (1.0 + a.eigenvalue * m))
        .sum::<f64>()
        - 1.0
}

/// Positive root `m_F̲(0)` of `1/m = c ∫ τ dH(τ) / (1 + τ m)`.
pub fn m_underline_zero(c: f64, h: &SpectrumSpec, tol: f64) -> Result<f64> {
    check_c(c)?;
    let g = |m: f64| zero_point_scaled_defect(m, c, h);
    let mut lo = 1e-12;
    let mut hi = 1.0;
    while g(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Bracket);
        }
    }
    if g(lo) > 0.0 {
        return Err(Error::Bracket);
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    // Newton polish on the scaled defect, kept inside the bracket
    let mut m = 0.5 * (lo + hi);
    for _ in 0..5 {
        let slope: f64 = c * h
            .atoms()
            .iter()
            .map(|a| a.weight * a.eigenvalue / (1.0 + a.eigenvalue * m).powi(2))
            .sum::<f64>();
        let next = m - g(m) / slope;
        if !(next > lo && next < hi) {
            break;
        }
        m = next;
    }
    let defect = g(m) / m;
    if defect.abs() >= tol {
        return Err(Error::Divergence {
            iterations: 0,
            residual: defect.abs(),
        });
    }
    Ok(m)
}

/// `m'_F̲(0) = (1/m0² − c ∫ τ² dH(τ) / (1 + τ m0)²)^{-1}`.
pub fn m_underline_zero_prime(c: f64, h: &SpectrumSpec, m0: f64) -> Result<f64> {
    check_c(c)?;
    if !(m0.is_finite() && m0 > 0.0) {
        return Err(Error::Validation(format!("m0 must be positive (got {m0})")));
    }
    let lead = 1.0 / (m0 * m0);
    let tail: f64 = c * h
        .atoms()
        .iter()
        .map(|a| a.weight * (a.eigenvalue / (1.0 + a.eigenvalue * m0)).powi(2))
        .sum::<f64>();
    let denominator = lead - tail;
    if denominator.is_nan() || denominator <= 1e-12 * lead {
        return Err(Error::Conditioning { denominator });
    }
    Ok(1.0 / denominator)
}

/// `(1/p) Σᵢ 1/(λᵢ − z)`.
pub fn empirical_stieltjes(eigenvalues: &[f64], z: Complex64) -> Result<Complex64> {
    check_upper(z)?;
    if eigenvalues.is_empty() {
        return Err(Error::Validation("empty eigenvalue list".into()));
    }
    let sum: Complex64 = eigenvalues.iter().map(|&l| 1.0 / (l - z)).sum();
    Ok(sum / eigenvalues.len() as f64)
}

/// Moment generating function `Ψ(z) = −(1/z) m(1/z) − 1`, given `m(1/z)`.
pub fn psi_transform(m_at_inv_z: Complex64, z: Complex64) -> Result<Complex64> {
    if z.norm() == 0.0 {
        return Err(Error::PoleAtZero);
    }
    Ok(-m_at_inv_z / z - 1.0)
}

/// Mass of the atom at zero carried by each law when `c > 1` (rank deficiency `1 − 1/c`).
pub fn null_atom_mass(which: Transform, c: f64) -> f64 {
    match which {
        Transform::Plus | Transform::Minus | Transform::Mp if c > 1.0 => 1.0 - 1.0 / c,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub x: f64,
    /// `None` when the solver failed at this point.
    pub density: Option<f64>,
}

/// Density of the continuous part by Stieltjes inversion, `(1/π) Im m(x + iε)`.
///
/// The known atom at zero (mass `1 − 1/c`) is subtracted from `m` before
/// inversion so that its Cauchy tail does not leak into small `x`. Values are
/// clipped at zero.
pub fn density_grid(
    which: Transform,
    c: f64,
    h: &SpectrumSpec,
    x_grid: &[f64],
    epsilon: f64,
    opts: SolverOptions,
) -> Result<Vec<DensityPoint>> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Validation(format!("epsilon must be positive (got {epsilon})")));
    }
    if let Some(x) = x_grid.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::Validation(format!("grid points must be positive (got {x})")));
    }
    match which {
        Transform::Mp => {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Validation(format!("ratio c must be positive (got {c})")));
            }
        }
        _ => check_c(c)?,
    }
    let atom = null_atom_mass(which, c);
    Ok(x_grid
        .par_iter()
        .map(|&x| {
            let z = Complex64::new(x, epsilon);
            let density = solve(which, z, c, h, opts).ok().map(|sol| {
                let continuous = sol.m + atom / z;
                (continuous.im / std::f64::consts::PI).max(0.0)
            });
            DensityPoint { x, density }
        })
        .collect())
}

/// Trapezoid integral of the successfully evaluated points of a density grid.
pub fn grid_mass(points: &[DensityPoint]) -> f64 {
    points
        .windows(2)
        .filter_map(|w| match (w[0].density, w[1].density) {
            (Some(a), Some(b)) => Some(0.5 * (a + b) * (w[1].x - w[0].x)),
            _ => None,
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn three_level() -> SpectrumSpec {
        "0.2:1,0.4:3,0.4:10".parse().unwrap()
    }

    /// `∫ f dMP_c` by Simpson's rule in θ after `x = a + (b − a) sin²θ`,
    /// which removes the square-root edges; adds the atom at zero for `c > 1`.
    fn mp_integral(c: f64, f: impl Fn(f64) -> f64) -> f64 {
        let a = (1.0 - c.sqrt()).powi(2);
        let b = (1.0 + c.sqrt()).powi(2);
        let steps = 20_000;
        let hstep = std::f64::consts::FRAC_PI_2 / steps as f64;
        let integrand = |t: f64| {
            let (s, co) = t.sin_cos();
            let x = a + (b - a) * s * s;
            // density(x) dx = (b − a)² 2 sin²θ cos²θ / (2π c x) dθ; sin²θ/x → 1/(b − a) when a = 0
            let s2_over_x = if x == 0.0 { 1.0 / (b - a) } else { s * s / x };
            f(x) * (b - a).powi(2) * 2.0 * s2_over_x * co * co / (2.0 * std::f64::consts::PI * c)
        };
        let mut total = integrand(0.0) + integrand(std::f64::consts::FRAC_PI_2);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            total += w * integrand(k as f64 * hstep);
        }
        let atom = if c > 1.0 { (1.0 - 1.0 / c) * f(0.0) } else { 0.0 };
        total * hstep / 3.0 + atom
    }

    #[test]
    fn mp_matches_quadrature_below_support() {
        for (c, x) in [(1.0, -1.0), (0.5, -0.3), (2.0, -1.0)] {
            let m = mp_stieltjes(c64(x, 0.0), c).unwrap();
            let oracle = mp_integral(c, |l| 1.0 / (l - x));
            assert!((m.re - oracle).abs() < 1e-8, "c={c}: {m} vs {oracle}");
            assert!(m.im.abs() < 1e-12);
        }
    }

    #[test]
    fn mp_matches_quadrature_off_axis() {
        let z = c64(1.0, 0.7);
        let c = 0.5;
        let m = mp_stieltjes(z, c).unwrap();
        let re = mp_integral(c, |l| (1.0 / (l - z)).re);
        let im = mp_integral(c, |l| (1.0 / (l - z)).im);
        assert!((m.re - re).abs() < 1e-8 && (m.im - im).abs() < 1e-8);
    }

    #[test]
    fn mp_branch_and_tail() {
        for c in [0.3, 1.0, 2.0, 5.0] {
            for i in 0..100 {
                let z = c64(-5.0 + 0.15 * i as f64, 0.01 + 0.05 * (i % 7) as f64);
                assert!(mp_stieltjes(z, c).unwrap().im > 0.0);
            }
            let z = c64(0.0, 1e6);
            let m = mp_stieltjes(z, c).unwrap();
            assert!((z * m + 1.0).norm() < 1e-5);
        }
        assert!(matches!(mp_stieltjes(c64(0.0, 0.0), 2.0), Err(Error::PoleAtZero)));
    }

    #[test]
    fn plus_identity_residual_and_independent_start() {
        let h = SpectrumSpec::identity();
        let z = c64(0.0, 1.0);
        let sol = solve_m_plus(z, 2.0, &h, SolverOptions::default()).unwrap();
        assert!(sol.residual < 1e-10);
        assert!(sol.m.im > 0.0);
        assert!((rhs_plus(sol.m, z, 2.0, &h) - sol.m).norm() < 1e-10);

        // closed form for Σ = I: m̲(w) = −(1 − c)/w + c m_MP(w), m⁺(z) = −1/z − m̲(1/z)/(c z²)
        let c = 2.0;
        let w = (1.0 / z).conj();
        let under = (-(1.0 - c) / w + c * mp_stieltjes(w, c).unwrap()).conj();
        let oracle = -1.0 / z - under / (c * z * z);
        assert!((oracle - sol.m).norm() < 1e-8);

        // plain damped iteration of the displayed equation started near the oracle
        let mut m = oracle + c64(0.05, -0.05);
        for _ in 0..20_000 {
            m = m * 0.9 + rhs_plus(m, z, c, &h) * 0.1;
        }
        assert!((m - sol.m).norm() < 1e-8);

        // the displayed equation has a second root in ℂ⁺ that the solver must avoid
        let spurious = c64(-0.683_012_701_892_219, 1.683_012_701_892_220_5);
        assert!((rhs_plus(spurious, z, c, &h) - spurious).norm() < 1e-12);
        assert!((sol.m - spurious).norm() > 0.5);
    }

    #[test]
    fn plus_tail_has_unit_mass() {
        for y in [1e3, 1e5] {
            let z = c64(0.0, y);
            let sol = solve_m_plus(z, 2.0, &three_level(), SolverOptions::default()).unwrap();
            assert!((z * sol.m + 1.0).norm() < 10.0 / y);
        }
    }

    /// `m_{P⁺}(z) = −1/z − m_F̲(1/z) / (c z²)`: the nonzero eigenvalues of `S⁺`
    /// are reciprocals of those of `(1/n) Y'Y`.
    #[test]
    fn plus_agrees_with_companion_route() {
        let opts = SolverOptions::default();
        for h in [SpectrumSpec::identity(), three_level()] {
            for z in [c64(0.0, 1.0), c64(1.0, 1.0), c64(0.4, 0.2)] {
                let c = 2.0;
                let plus = solve_m_plus(z, c, &h, opts).unwrap();
                // 1/z is in the lower half-plane; use conjugate symmetry
                let w = (1.0 / z).conj();
                let under = m_underline(w, c, &h, opts).unwrap().m.conj();
                let expected = -1.0 / z - under / (c * z * z);
                assert!((plus.m - expected).norm() < 1e-8, "{z}: {} vs {expected}", plus.m);
            }
        }
    }

    #[test]
    fn minus_collapses_to_plus_for_identity() {
        let h = SpectrumSpec::identity();
        for c in [1.5, 2.0, 4.0] {
            for z in [c64(1.0, 1.0), c64(0.0, 1.0), c64(0.3, 0.05), c64(2.5, 0.5)] {
                let a = solve_m_plus(z, c, &h, SolverOptions::default()).unwrap();
                let b = solve_m_minus(z, c, &h, SolverOptions::default()).unwrap();
                assert!((a.m - b.m).norm() < 1e-8, "c={c} z={z}");
                assert!(b.residual < 1e-10);
            }
        }
    }

    #[test]
    fn minus_differs_for_three_level() {
        let z = c64(0.0, 1.0);
        let a = solve_m_plus(z, 2.0, &three_level(), SolverOptions::default()).unwrap();
        let b = solve_m_minus(z, 2.0, &three_level(), SolverOptions::default()).unwrap();
        assert!((a.m - b.m).norm() > 0.01);
        assert!((rhs_minus(b.m, z, 2.0, &three_level()) - b.m).norm() < 1e-10);
    }

    #[test]
    fn solver_validation() {
        let h = SpectrumSpec::identity();
        let o = SolverOptions::default();
        assert!(matches!(solve_m_plus(c64(1.0, 0.0), 2.0, &h, o), Err(Error::Validation(_))));
        assert!(matches!(solve_m_minus(c64(1.0, 1.0), 0.8, &h, o), Err(Error::Validation(_))));
        let tight = SolverOptions { tol: 0.0, max_iter: 50 };
        assert!(matches!(
            solve_m_plus(c64(1.0, 1.0), 2.0, &three_level(), tight),
            Err(Error::Divergence { .. })
        ));
    }

    fn bisect_zero(c: f64, h: &SpectrumSpec) -> f64 {
        let f = |m: f64| {
            c * h.atoms().iter().map(|a| a.weight * a.eigenvalue / (1.0 + a.eigenvalue * m)).sum::<f64>() - 1.0 / m
        };
        let (mut lo, mut hi) = (1e-12f64, 1e3f64);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zero_point_values() {
        let id = SpectrumSpec::identity();
        assert!((m_underline_zero(2.0, &id, 1e-12).unwrap() - 1.0).abs() < 1e-10);
        assert!((m_underline_zero(4.0, &id, 1e-12).unwrap() - 1.0 / 3.0).abs() < 1e-10);
        let m = m_underline_zero(2.0, &three_level(), 1e-12).unwrap();
        assert!((m - bisect_zero(2.0, &three_level())).abs() < 1e-9);
        assert!((m - 0.253_398_892_769_037_3).abs() < 1e-12);
        assert!(m_underline_zero(1.0, &id, 1e-12).is_err());
    }

    #[test]
    fn zero_point_derivative() {
        let id = SpectrumSpec::identity();
        assert!((m_underline_zero_prime(2.0, &id, 1.0).unwrap() - 2.0).abs() < 1e-12);
        let m4 = m_underline_zero(4.0, &id, 1e-12).unwrap();
        assert!((m_underline_zero_prime(4.0, &id, m4).unwrap() - 1.0 / 6.75).abs() < 1e-10);
        let m = m_underline_zero(2.0, &three_level(), 1e-12).unwrap();
        let d = m_underline_zero_prime(2.0, &three_level(), m).unwrap();
        assert!((d - 0.151_754_634_926_176_6).abs() < 1e-10);

        // finite difference of m_F̲ along the imaginary axis: m(iy) ≈ m0 + i y m'(0)
        let o = SolverOptions { tol: 1e-14, max_iter: 100_000 };
        let y = 1e-4;
        let mz = m_underline(c64(0.0, y), 2.0, &three_level(), o).unwrap().m;
        assert!(((mz.im / y) - d).abs() < 1e-3 * d);
    }

    #[test]
    fn zero_point_derivative_conditioning() {
        // m0 far from the root makes the denominator negative
        assert!(matches!(
            m_underline_zero_prime(2.0, &SpectrumSpec::identity(), 10.0),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn underline_approaches_zero_point() {
        let h = three_level();
        let m0 = m_underline_zero(2.0, &h, 1e-12).unwrap();
        let o = SolverOptions { tol: 1e-13, max_iter: 100_000 };
        for y in [1e-4, 1e-5, 1e-6] {
            let m = m_underline(c64(0.0, y), 2.0, &h, o).unwrap().m;
            assert!((m - m0).norm() < 10.0 * y, "y={y}: {m} vs {m0}");
        }
    }

    #[test]
    fn underline_identity_matches_mp_companion() {
        // companion of MP: m̲(z) = −(1 − c)/z + c m_MP(z)
        let c = 2.0;
        let z = c64(0.0, 1.0);
        let m = m_underline(z, c, &SpectrumSpec::identity(), SolverOptions::default()).unwrap();
        let expected = -(1.0 - c) / z + c * mp_stieltjes(z, c).unwrap();
        assert!((m.m - expected).norm() < 1e-9);
    }

    #[test]
    fn empirical_examples() {
        assert!((empirical_stieltjes(&[0.0, 0.0], c64(0.0, 1.0)).unwrap() - c64(0.0, 1.0)).norm() < 1e-15);
        let m = empirical_stieltjes(&[1.0; 5], c64(0.0, 1.0)).unwrap();
        assert!((m - c64(0.5, 0.5)).norm() < 1e-15);
        assert!(empirical_stieltjes(&[1.0], c64(0.0, 0.0)).is_err());
    }

    #[test]
    fn psi_examples() {
        // unit mass at 1: m(w) = 1/(1 − w), Ψ(z) = Σ_{k≥1} z^k
        let z = c64(0.5, 0.0);
        let m_inv = 1.0 / (1.0 - 1.0 / z);
        assert!((psi_transform(m_inv, z).unwrap() - 1.0).norm() < 1e-14);
        // unit mass at 0: m(w) = −1/w
        let z = c64(0.3, 0.2);
        assert!(psi_transform(-z, z).unwrap().norm() < 1e-15);
        // mixture 0.3 δ₂ + 0.7 δ₅ at z = 0.1: Ψ = Σ w λz/(1 − λz)
        let z = c64(0.1, 0.0);
        let w = 1.0 / z;
        let m = 0.3 / (2.0 - w) + 0.7 / (5.0 - w);
        let oracle = 0.3 * 0.2 / 0.8 + 0.7 * 0.5 / 0.5;
        assert!((psi_transform(m, z).unwrap() - oracle).norm() < 1e-13);
        assert!(psi_transform(m, c64(0.0, 0.0)).is_err());
    }

    #[test]
    fn psi_of_plus_vanishes_at_origin() {
        // Γ⁺(0) = −1 ⇔ Ψ(0) = 0 for a probability measure
        for y in [1e-3, 1e-4] {
            let z = c64(0.0, -y);
            let sol = solve_m_plus(1.0 / z, 2.0, &three_level(), SolverOptions::default()).unwrap();
            assert!(psi_transform(sol.m, z).unwrap().norm() < 10.0 * y);
        }
    }

    #[test]
    fn mp_density_support() {
        let c: f64 = 2.0;
        let (a, b) = ((1.0 - c.sqrt()).powi(2), (1.0 + c.sqrt()).powi(2));
        let grid: Vec<f64> = (1..=600).map(|i| i as f64 * 0.01).collect();
        let pts = density_grid(Transform::Mp, c, &SpectrumSpec::identity(), &grid, 1e-3, SolverOptions::default()).unwrap();
        for p in &pts {
            let d = p.density.unwrap();
            if p.x > a + 0.02 && p.x < b - 0.02 {
                assert!(d > 1e-3, "x={} d={d}", p.x);
            } else if p.x < a - 0.02 || p.x > b + 0.02 {
                assert!(d < 1e-2, "x={} d={d}", p.x);
            }
        }
        assert!((grid_mass(&pts) - 0.5).abs() < 0.02);
    }

    #[test]
    fn density_minus_matches_plus_for_identity() {
        let grid: Vec<f64> = (1..=300).map(|i| i as f64 * 0.02).collect();
        let o = SolverOptions::default();
        let h = SpectrumSpec::identity();
        let plus = density_grid(Transform::Plus, 2.0, &h, &grid, 1e-3, o).unwrap();
        let minus = density_grid(Transform::Minus, 2.0, &h, &grid, 1e-3, o).unwrap();
        for (a, b) in plus.iter().zip(&minus) {
            assert!((a.density.unwrap() - b.density.unwrap()).abs() < 0.01, "x={}", a.x);
        }
    }

    #[test]
    fn density_validation() {
        let h = SpectrumSpec::identity();
        let o = SolverOptions::default();
        assert!(density_grid(Transform::Plus, 2.0, &h, &[1.0], 0.0, o).is_err());
        assert!(density_grid(Transform::Plus, 2.0, &h, &[-1.0], 1e-3, o).is_err());
        assert!(density_grid(Transform::Plus, 0.5, &h, &[1.0], 1e-3, o).is_err());
    }
}
