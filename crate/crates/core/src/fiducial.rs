//! Product fiducial states `|ξ⟩ = ⊗ |ξ⟩_i`, the discrete coherent states
//! `|α,β⟩ = Z_α X_β |ξ⟩`, and the fiducial matrix elements `⟨ξ|Z_γ X_δ|ξ⟩`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{kron_vectors, omega_pow, StateVector, C64};
use crate::zd::{check_prime, checked_dim, DString};

/// Coefficients of the builtin single-particle fiducial.
///
/// * `d = 2`: `(|0⟩ + ζ|1⟩)/√(1+|ζ|²)` with `ζ = ((√3−1)/√2) e^{iπ/4}`.
/// * `d = 3`: `(|0⟩ + e^{iπ/3}|1⟩)/√2`.
pub fn builtin_coefficients(d: u32) -> Result<DVector<C64>> {
    match d {
        2 => {
            let zeta = C64::from_polar((3f64.sqrt() - 1.0) / 2f64.sqrt(), std::f64::consts::FRAC_PI_4);
            let norm = (1.0 + zeta.norm_sqr()).sqrt();
            Ok(DVector::from_vec(vec![C64::new(1.0 / norm, 0.0), zeta / norm]))
        }
        3 => {
            let s = 1.0 / 2f64.sqrt();
            Ok(DVector::from_vec(vec![
                C64::new(s, 0.0),
                C64::from_polar(s, std::f64::consts::FRAC_PI_3),
                C64::new(0.0, 0.0),
            ]))
        }
        other => Err(Error::UnsupportedDimension(other)),
    }
}

/// `Z^a X^b |v⟩` for a single qudit.
pub fn shift_single(v: &DVector<C64>, a: u32, b: u32) -> DVector<C64> {
    let d = v.len();
    let mut out = DVector::zeros(d);
    for l in 0..d {
        let target = (l + b as usize) % d;
        out[target] = v[l] * omega_pow(d as u32, (a as usize * target) as i64);
    }
    out
}

/// A product fiducial over `N` particles, possibly heterogeneous.
#[derive(Debug, Clone, PartialEq)]
pub struct Fiducial {
    d: u32,
    sites: Vec<DVector<C64>>,
    // per site, ⟨ξ_i| Z^γ X^δ |ξ_i⟩ indexed by γ·d + δ
    elements: Vec<Vec<C64>>,
}

impl Fiducial {
    /// Builds a fiducial from per-particle coefficient lists; each list is
    /// normalized.
    pub fn from_sites(d: u32, sites: Vec<DVector<C64>>) -> Result<Self> {
        check_prime(d)?;
        if sites.is_empty() {
            return Err(Error::Domain("fiducial needs at least one particle".into()));
        }
        let mut normalized = Vec::with_capacity(sites.len());
        for (i, v) in sites.into_iter().enumerate() {
            if v.len() != d as usize {
                return Err(Error::Dimension(format!(
                    "particle {i} has {} coefficients, expected {d}",
                    v.len()
                )));
            }
            let norm = v.norm();
            if norm < 1e-300 || !norm.is_finite() {
                return Err(Error::Domain(format!("particle {i} has a zero or non-finite state")));
            }
            normalized.push(v.unscale(norm));
        }
        let elements = normalized
            .iter()
            .map(|v| {
                let mut table = Vec::with_capacity((d * d) as usize);
                for g in 0..d {
                    for dd in 0..d {
                        table.push(v.dotc(&shift_single(v, g, dd)));
                    }
                }
                table
            })
            .collect();
        Ok(Self { d, sites: normalized, elements })
    }

    /// The same single-particle state on every site.
    pub fn uniform(single: DVector<C64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("particle number must be at least 1".into()));
        }
        let d = single.len() as u32;
        Self::from_sites(d, vec![single; n])
    }

    /// The builtin SIC fiducial for `d ∈ {2, 3}`, replicated on `n` sites.
    pub fn builtin(d: u32, n: usize) -> Result<Self> {
        Self::uniform(builtin_coefficients(d)?, n)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, i: usize) -> &DVector<C64> {
        &self.sites[i]
    }

    pub fn is_uniform(&self) -> bool {
        self.sites.windows(2).all(|w| (&w[0] - &w[1]).norm() < 1e-14)
    }

    /// The same fiducial restricted to (or replicated onto) `n` sites. Only
    /// valid for uniform fiducials.
    pub fn resized(&self, n: usize) -> Result<Self> {
        if !self.is_uniform() {
            return Err(Error::Domain("cannot resize a heterogeneous fiducial".into()));
        }
        Self::uniform(self.sites[0].clone(), n)
    }

    /// Single-particle `|a,b⟩_i = Z^a X^b |ξ⟩_i`.
    pub fn single_coherent(&self, site: usize, a: u32, b: u32) -> DVector<C64> {
        shift_single(&self.sites[site], a % self.d, b % self.d)
    }

    /// `⟨ξ_i| Z^γ X^δ |ξ_i⟩`.
    pub fn single_element(&self, site: usize, g: u32, dd: u32) -> C64 {
        self.elements[site][((g % self.d) * self.d + dd % self.d) as usize]
    }

    fn check_label(&self, s: &DString) -> Result<()> {
        if s.d() != self.d || s.len() != self.n() {
            return Err(Error::Dimension(format!(
                "label {s} does not match a fiducial over Z_{} with {} particles",
                self.d,
                self.n()
            )));
        }
        Ok(())
    }

    /// `|α,β⟩ = ⊗ |a_i, b_i⟩`.
    pub fn coherent_state(&self, alpha: &DString, beta: &DString) -> Result<StateVector> {
        self.check_label(alpha)?;
        self.check_label(beta)?;
        checked_dim(self.d, self.n())?;
        let factors: Vec<DVector<C64>> = (0..self.n())
            .map(|i| self.single_coherent(i, alpha.digits()[i], beta.digits()[i]))
            .collect();
        Ok(kron_vectors(&factors))
    }

    /// `|ξ⟩` as a full vector.
    pub fn state(&self) -> Result<StateVector> {
        checked_dim(self.d, self.n())?;
        Ok(kron_vectors(&self.sites))
    }

    /// `⟨ξ| Z_γ X_δ |ξ⟩` as a product of single-particle elements.
    pub fn matrix_element(&self, gamma: &DString, delta: &DString) -> Result<C64> {
        self.check_label(gamma)?;
        self.check_label(delta)?;
        Ok((0..self.n())
            .map(|i| self.single_element(i, gamma.digits()[i], delta.digits()[i]))
            .product())
    }

    /// Smallest `|⟨ξ_i|Z^γ X^δ|ξ_i⟩|` over every site and label.
    pub fn min_element_modulus(&self) -> f64 {
        self.elements
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Errors with [`Error::SingularFiducial`] if any single-particle matrix
    /// element vanishes.
    pub fn ensure_invertible(&self) -> Result<()> {
        for (i, table) in self.elements.iter().enumerate() {
            for (idx, z) in table.iter().enumerate() {
                if z.norm() < 1e-12 {
                    let (g, dd) = (idx as u32 / self.d, idx as u32 % self.d);
                    return Err(Error::SingularFiducial(format!("site {i}, (γ,δ) = ({g},{dd})")));
                }
            }
        }
        Ok(())
    }

    pub fn from_config(config: &FiducialConfig, n: usize) -> Result<Self> {
        let to_vec = |list: &[[f64; 2]]| DVector::from_iterator(list.len(), list.iter().map(|p| C64::new(p[0], p[1])));
        match &config.coefficients {
            Coefficients::Shared(list) => {
                if list.len() != config.d as usize {
                    return Err(Error::Input(format!(
                        "fiducial config lists {} coefficients for d = {}",
                        list.len(),
                        config.d
                    )));
                }
                check_prime(config.d)?;
                Self::uniform(to_vec(list), n)
            }
            Coefficients::PerParticle(lists) => {
                if lists.len() != n {
                    return Err(Error::Input(format!(
                        "fiducial config has {} particles, register has {n}",
                        lists.len()
                    )));
                }
                Self::from_sites(config.d, lists.iter().map(|l| to_vec(l)).collect())
            }
        }
    }
}

/// JSON fiducial configuration: `{"d": 3, "coefficients": [[re, im], …]}` or
/// one such list per particle.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FiducialConfig {
    pub d: u32,
    pub coefficients: Coefficients,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Coefficients {
    Shared(Vec<[f64; 2]>),
    PerParticle(Vec<Vec<[f64; 2]>>),
}

/// Outcome of checking the SIC overlap condition for a single-particle fiducial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SicReport {
    pub d: u32,
    /// `max |·|` over all `d⁴` pairs of `|⟨a,b|a′,b′⟩|² − (1+dδ)/(1+d)`.
    pub max_deviation: f64,
    /// Largest deviation restricted to distinct pairs.
    pub max_distinct_deviation: f64,
}

/// Evaluates `|⟨a,b|a′,b′⟩|²` against `(1 + d δ)/(1 + d)` for all pairs.
pub fn sic_check(single: &DVector<C64>) -> Result<SicReport> {
    let d = single.len() as u32;
    check_prime(d)?;
    let v = single.unscale(single.norm());
    let states: Vec<DVector<C64>> = (0..d)
        .flat_map(|a| (0..d).map(move |b| (a, b)))
        .map(|(a, b)| shift_single(&v, a, b))
        .collect();
    let mut max_dev = 0.0f64;
    let mut max_distinct = 0.0f64;
    for (i, x) in states.iter().enumerate() {
        for (j, y) in states.iter().enumerate() {
            let overlap = x.dotc(y).norm_sqr();
            let target = if i == j { 1.0 } else { 1.0 / (1.0 + d as f64) };
            let dev = (overlap - target).abs();
            max_dev = max_dev.max(dev);
            if i != j {
                max_distinct = max_distinct.max(dev);
            }
        }
    }
    Ok(SicReport {
        d,
        max_deviation: max_dev,
        max_distinct_deviation: max_distinct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zd::{all_strings, weight_vector};
    use std::collections::HashMap;

    #[test]
    fn builtin_qubit_fiducial() {
        let c = builtin_coefficients(2).unwrap();
        assert!((c.norm() - 1.0).abs() < 1e-15);
        let zeta = c[1] / c[0];
        assert!((zeta.norm_sqr() - (2.0 - 3f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn builtin_qutrit_fiducial() {
        let c = builtin_coefficients(3).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((c[0] - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((c[1] - C64::from_polar(s, std::f64::consts::PI / 3.0)).norm() < 1e-15);
        assert_eq!(c[2], C64::new(0.0, 0.0));
        assert!(matches!(builtin_coefficients(5), Err(Error::UnsupportedDimension(5))));
    }

    #[test]
    fn coherent_state_examples() {
        let f = Fiducial::builtin(2, 1).unwrap();
        let zero = DString::zero(2, 1).unwrap();
        assert!((f.coherent_state(&zero, &zero).unwrap() - f.state().unwrap()).norm() < 1e-15);

        let one = DString::new(2, vec![1]).unwrap();
        let v = f.coherent_state(&zero, &one).unwrap();
        let zeta = C64::from_polar((3f64.sqrt() - 1.0) / 2f64.sqrt(), std::f64::consts::FRAC_PI_4);
        let norm = (1.0 + zeta.norm_sqr()).sqrt();
        assert!((v[0] - zeta / norm).norm() < 1e-15);
        assert!((v[1] - C64::new(1.0 / norm, 0.0)).norm() < 1e-15);

        let f2 = Fiducial::builtin(3, 2).unwrap();
        let f1 = Fiducial::builtin(3, 1).unwrap();
        let a = DString::new(3, vec![1, 2]).unwrap();
        let b = DString::new(3, vec![2, 0]).unwrap();
        let full = f2.coherent_state(&a, &b).unwrap();
        let p0 = f1.coherent_state(&DString::new(3, vec![1]).unwrap(), &DString::new(3, vec![2]).unwrap()).unwrap();
        let p1 = f1.coherent_state(&DString::new(3, vec![2]).unwrap(), &DString::new(3, vec![0]).unwrap()).unwrap();
        assert!((full - p0.kronecker(&p1)).norm() < 1e-14);
        assert!((f2.coherent_state(&a, &b).unwrap().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sic_condition_for_builtins() {
        for d in [2, 3] {
            let r = sic_check(&builtin_coefficients(d).unwrap()).unwrap();
            assert!(r.max_deviation < 1e-10, "d={d}: {r:?}");
        }
    }

    #[test]
    fn sic_check_flags_a_non_sic_state() {
        let v = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let r = sic_check(&v).unwrap();
        assert!(r.max_distinct_deviation > 0.1);
        assert!(r.max_deviation >= r.max_distinct_deviation);
    }

    #[test]
    fn matrix_element_examples() {
        let f = Fiducial::builtin(2, 1).unwrap();
        let zero = DString::zero(2, 1).unwrap();
        let one = DString::new(2, vec![1]).unwrap();
        assert!((f.matrix_element(&zero, &zero).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        let z = f.matrix_element(&one, &zero).unwrap();
        assert!((z - C64::new(1.0 / 3f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn qutrit_element_modulus() {
        // |⟨ξ|Z_γX_δ|ξ⟩|² = (d+1)^{-(2/(d²(d-1))) Σ q_kl}
        let (d, n) = (3u32, 2usize);
        let f = Fiducial::builtin(d, n).unwrap();
        let strings = all_strings(d, n).unwrap();
        for g in &strings {
            for dd in &strings {
                let q = weight_vector(g, dd).unwrap();
                let expected = 4f64.powf(-(2.0 / 18.0) * q.total() as f64);
                let got = f.matrix_element(g, dd).unwrap().norm_sqr();
                assert!((got - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matrix_element_constant_on_weight_classes() {
        for (d, n) in [(2u32, 1usize), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)] {
            let f = Fiducial::builtin(d, n).unwrap();
            let strings = all_strings(d, n).unwrap();
            let mut seen: HashMap<Vec<u32>, C64> = HashMap::new();
            for g in &strings {
                for dd in &strings {
                    let key = weight_vector(g, dd).unwrap().entries().to_vec();
                    let val = f.matrix_element(g, dd).unwrap();
                    assert!(val.norm() > 0.0);
                    let prev = *seen.entry(key).or_insert(val);
                    assert!((prev - val).norm() < 1e-12, "d={d} n={n}");
                }
            }
        }
    }

    #[test]
    fn element_modulus_per_nonzero_pair() {
        for d in [2u32, 3] {
            let f = Fiducial::builtin(d, 1).unwrap();
            for g in 0..d {
                for dd in 0..d {
                    let m = f.single_element(0, g, dd).norm();
                    let expected = if g == 0 && dd == 0 { 1.0 } else { 1.0 / (d as f64 + 1.0).sqrt() };
                    assert!((m - expected).abs() < 1e-12);
                }
            }
            f.ensure_invertible().unwrap();
        }
    }

    #[test]
    fn singular_fiducial_detected() {
        // |0⟩ has ⟨0|X|0⟩ = 0
        let f = Fiducial::uniform(DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]), 2).unwrap();
        assert!(matches!(f.ensure_invertible(), Err(Error::SingularFiducial(_))));
    }

    #[test]
    fn config_parsing() {
        let json = r#"{"d": 2, "coefficients": [[1.0, 0.0], [0.3, 0.4]]}"#;
        let cfg: FiducialConfig = serde_json::from_str(json).unwrap();
        let f = Fiducial::from_config(&cfg, 3).unwrap();
        assert_eq!(f.n(), 3);
        assert!(f.is_uniform());
        assert!((f.site(0).norm() - 1.0).abs() < 1e-15);

        let json = r#"{"d": 2, "coefficients": [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 0.0]]]}"#;
        let cfg: FiducialConfig = serde_json::from_str(json).unwrap();
        let f = Fiducial::from_config(&cfg, 2).unwrap();
        assert!(!f.is_uniform());
        assert!(Fiducial::from_config(&cfg, 3).is_err());
    }
}
