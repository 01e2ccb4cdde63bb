//! Discrete population spectral distributions.
//!
//! A [`SpectrumSpec`] is a finite mixture of point masses `(weight, τ)` with
//! strictly positive eigenvalues. Every integral `∫ f(τ) dH(τ)` used by the
//! solvers and the Frobenius limits is the exact finite sum `Σ wᵢ f(τᵢ)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One point mass of the population spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub weight: f64,
    pub eigenvalue: f64,
}

/// Canonical discrete spectrum: weights sum to one, eigenvalues strictly
/// increasing and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    atoms: Vec<Atom>,
    label: Option<String>,
}

/// Eigenvalues closer than this (relative) are merged into one atom.
const MERGE_TOL: f64 = 1e-12;

impl SpectrumSpec {
    /// Validates, normalizes, sorts and merges a raw list of `(weight, eigenvalue)` pairs.
    pub fn canonicalize(raw: &[(f64, f64)]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Validation("spectrum must contain at least one atom".into()));
        }
        for (index, &(weight, eigenvalue)) in raw.iter().enumerate() {
            let reason = if !weight.is_finite() || weight <= 0.0 {
                Some("weight must be positive and finite")
            } else if !eigenvalue.is_finite() || eigenvalue <= 0.0 {
                Some("eigenvalue must be positive and finite")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(Error::InvalidAtom {
                    index,
                    weight,
                    eigenvalue,
                    reason,
                });
            }
        }

        let mut sorted: Vec<(f64, f64)> = raw.to_vec();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1));

        let mut atoms: Vec<Atom> = Vec::with_capacity(sorted.len());
        for (weight, eigenvalue) in sorted {
            match atoms.last_mut() {
                Some(last) if (eigenvalue - last.eigenvalue).abs() <= MERGE_TOL * eigenvalue => {
                    last.weight += weight;
                }
                _ => atoms.push(Atom { weight, eigenvalue }),
            }
        }

        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        for atom in &mut atoms {
            atom.weight /= total;
        }
        Ok(SpectrumSpec { atoms, label: None })
    }

    /// Point mass at one: the spectrum of `Σ = I`.
    pub fn identity() -> Self {
        SpectrumSpec {
            atoms: vec![Atom {
                weight: 1.0,
                eigenvalue: 1.0,
            }],
            label: Some("identity".into()),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `Σᵢ wᵢ f(τᵢ)`. Fails with [`Error::Pole`] if `f` is not finite at an atom.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        let mut total = 0.0;
        for (index, atom) in self.atoms.iter().enumerate() {
            let value = f(atom.eigenvalue);
            if !value.is_finite() {
                return Err(Error::Pole {
                    index,
                    eigenvalue: atom.eigenvalue,
                });
            }
            total += atom.weight * value;
        }
        Ok(total)
    }

    /// `∫ τ^{-k} dH(τ)` for `k ∈ {1, 2}`.
    pub fn inverse_moment(&self, k: u32) -> Result<f64> {
        match k {
            1 => self.integrate(|t| 1.0 / t),
            2 => self.integrate(|t| 1.0 / (t * t)),
            _ => Err(Error::Validation(format!(
                "inverse moment order must be 1 or 2, got {k}"
            ))),
        }
    }

    /// Largest-remainder apportionment of `p` eigenvalues over the atoms, so
    /// that the per-atom counts sum to exactly `p`.
    pub fn apportion(&self, p: usize) -> Vec<usize> {
        let quotas: Vec<f64> = self.atoms.iter().map(|a| a.weight * p as f64).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        // ties go to the earlier (smaller) eigenvalue
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().take(p.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        counts
    }

    /// Length-`p` eigenvalue vector realizing this spectrum, ascending.
    pub fn realize(&self, p: usize) -> Vec<f64> {
        self.apportion(p)
            .into_iter()
            .zip(&self.atoms)
            .flat_map(|(count, atom)| std::iter::repeat_n(atom.eigenvalue, count))
            .collect()
    }

    /// Empirical spectrum of a finite set of eigenvalues (mass `1/p` each).
    pub fn from_eigenvalues(eigenvalues: &[f64]) -> Result<Self> {
        let raw: Vec<(f64, f64)> = eigenvalues.iter().map(|&t| (1.0, t)).collect();
        Self::canonicalize(&raw)
    }
}

impl FromStr for SpectrumSpec {
    type Err = Error;

    /// Parses `weight:eigenvalue` pairs separated by commas, e.g. `0.2:1,0.4:3,0.4:10`.
    fn from_str(s: &str) -> Result<Self> {
        let mut raw = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (w, t) = part.split_once(':').ok_or_else(|| {
                Error::Validation(format!("spectrum entry `{part}` is not of the form weight:eigenvalue"))
            })?;
            let parse = |x: &str| {
                x.trim().parse::<f64>().map_err(|_| {
                    Error::Validation(format!("spectrum entry `{part}`: `{x}` is not a number"))
                })
            };
            raw.push((parse(w)?, parse(t)?));
        }
        Self::canonicalize(&raw)
    }
}

impl fmt::Display for SpectrumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", atom.weight, atom.eigenvalue)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn figure1() -> SpectrumSpec {
        SpectrumSpec::canonicalize(&[(0.2, 1.0), (0.4, 3.0), (0.4, 10.0)]).unwrap()
    }

    #[test]
    fn canonical_examples() {
        let id = SpectrumSpec::canonicalize(&[(1.0, 1.0)]).unwrap();
        assert_eq!(id.atoms(), &[Atom { weight: 1.0, eigenvalue: 1.0 }]);

        let fig = figure1();
        assert_eq!(fig.atoms().len(), 3);
        assert!((fig.atoms()[0].weight - 0.2).abs() < 1e-15);
        assert_eq!(fig.atoms()[2].eigenvalue, 10.0);

        let merged = SpectrumSpec::canonicalize(&[(1.0, 2.0), (1.0, 2.0)]).unwrap();
        assert_eq!(merged.atoms(), &[Atom { weight: 1.0, eigenvalue: 2.0 }]);
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let s = SpectrumSpec::canonicalize(&[(0.5, 4.0), (0.5, 1.0)]).unwrap();
        assert_eq!(s.atoms()[0].eigenvalue, 1.0);
        assert_eq!(s.atoms()[1].eigenvalue, 4.0);
    }

    #[test]
    fn rejects_bad_atoms() {
        assert!(matches!(SpectrumSpec::canonicalize(&[]), Err(Error::Validation(_))));
        match SpectrumSpec::canonicalize(&[(0.5, 1.0), (0.5, -2.0)]) {
            Err(Error::InvalidAtom { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        match SpectrumSpec::canonicalize(&[(0.0, 1.0)]) {
            Err(Error::InvalidAtom { index, .. }) => assert_eq!(index, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn integrate_finite_sums() {
        let id = SpectrumSpec::identity();
        assert_eq!(id.integrate(|t| 1.0 / t).unwrap(), 1.0);
        let fig = figure1();
        let h1 = 0.2 + 0.4 / 3.0 + 0.4 / 10.0;
        let h2 = 0.2 + 0.4 / 9.0 + 0.4 / 100.0;
        assert!((fig.integrate(|t| 1.0 / t).unwrap() - h1).abs() < 1e-15);
        assert!((fig.integrate(|t| 1.0 / (t * t)).unwrap() - h2).abs() < 1e-15);
        assert!((h1 - 0.373_333_333_333_333_3).abs() < 1e-15);
        assert!((h2 - 0.248_444_444_444_444_4).abs() < 1e-15);
    }

    #[test]
    fn integrate_reports_pole() {
        let fig = figure1();
        match fig.integrate(|t| if t == 3.0 { f64::INFINITY } else { t }) {
            Err(Error::Pole { index, eigenvalue }) => {
                assert_eq!(index, 1);
                assert_eq!(eigenvalue, 3.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverse_moments() {
        assert_eq!(SpectrumSpec::identity().inverse_moment(1).unwrap(), 1.0);
        let fig = figure1();
        assert!((fig.inverse_moment(1).unwrap() - 0.373_333_333_333_333_3).abs() < 1e-15);
        assert!((fig.inverse_moment(2).unwrap() - 0.248_444_444_444_444_4).abs() < 1e-15);
        assert!(fig.inverse_moment(3).is_err());
        assert!(fig.inverse_moment(0).is_err());
    }

    #[test]
    fn realized_sigma_matches_moments() {
        let fig = figure1();
        let diag = fig.realize(500);
        assert_eq!(diag.len(), 500);
        let p = diag.len() as f64;
        let tr1: f64 = diag.iter().map(|t| 1.0 / t).sum::<f64>() / p;
        let tr2: f64 = diag.iter().map(|t| 1.0 / (t * t)).sum::<f64>() / p;
        assert!((tr1 - fig.inverse_moment(1).unwrap()).abs() < 1e-14);
        assert!((tr2 - fig.inverse_moment(2).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn apportion_largest_remainder() {
        let s = SpectrumSpec::canonicalize(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).unwrap();
        assert_eq!(s.apportion(10), vec![4, 3, 3]);
        assert_eq!(s.apportion(2), vec![1, 1, 0]);
        assert_eq!(figure1().apportion(7), vec![1, 3, 3]);
    }

    #[test]
    fn parse_and_display() {
        let s: SpectrumSpec = "0.2:1, 0.4:3,0.4:10".parse().unwrap();
        assert_eq!(s, figure1());
        let back: SpectrumSpec = s.to_string().parse().unwrap();
        assert_eq!(back, s);
        assert!("0.2-1".parse::<SpectrumSpec>().is_err());
        assert!("a:1".parse::<SpectrumSpec>().is_err());
        assert!("".parse::<SpectrumSpec>().is_err());
    }

    fn arb_spectrum() -> impl Strategy<Value = SpectrumSpec> {
        prop::collection::vec((0.01f64..5.0, 0.05f64..50.0), 1..8)
            .prop_map(|raw| SpectrumSpec::canonicalize(&raw).unwrap())
    }

    proptest! {
        #[test]
        fn unit_mass(spec in arb_spectrum()) {
            prop_assert!((spec.integrate(|_| 1.0).unwrap() - 1.0).abs() < 1e-12);
            let w = spec.atoms().windows(2).all(|w| w[0].eigenvalue < w[1].eigenvalue);
            prop_assert!(w);
        }

        #[test]
        fn integrate_is_linear(spec in arb_spectrum(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let f = |t: f64| t.ln();
            let g = |t: f64| 1.0 / (1.0 + t);
            let lhs = spec.integrate(|t| a * f(t) + b * g(t)).unwrap();
            let rhs = a * spec.integrate(f).unwrap() + b * spec.integrate(g).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn apportion_sums_to_p(spec in arb_spectrum(), p in 1usize..2000) {
            prop_assert_eq!(spec.apportion(p).iter().sum::<usize>(), p);
        }
    }
}
