//! Tomography restricted to the symmetric subspace: Dicke-type basis,
//! projected coherent states `φ_m`, the POVM `E_m = d^{−N} R_m |φ_m⟩⟨φ_m|`,
//! projected kernels, reconstruction, and the redundancy conditions.
//!
//! Operators on `H_sym` are `d_sym × d_sym` matrices in the basis
//! `|p; N⟩`, `p = (p_1, …, p_{d−1})` in lexicographic order.
//!
//! Projecting a product operator `⊗ A_i` needs only the occupation counts
//! seen so far, so the projected kernels and `φ_m` are built one site at a
//! time without touching the `d^N`-dimensional space.

use std::collections::HashMap;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiducial::Fiducial;
use crate::linalg::max_abs_diff;
use crate::macro_space::{binomial, factorial, MeasurementSpace};
use crate::ops::{omega_pow, Operator, StateVector, C64};
use crate::phase_space::{kernel, single_kernel, KernelSign};
use crate::zd::{check_prime, checked_dim, enumerate_strings, max_dim, weight_vector, DString, WeightVector};

/// `d_sym = C(N + d − 1, d − 1)`.
pub fn sym_dim(d: u32, n: usize) -> usize {
    binomial(n as u64 + d as u64 - 1, d as u64 - 1)
        .try_into()
        .unwrap_or(usize::MAX)
}

/// Occupation counts `(η_1, …, η_{d−1})` of the levels `1, …, d−1`.
pub fn eta(lambda: &DString) -> Vec<u32> {
    let d = lambda.d() as usize;
    let mut out = vec![0u32; d - 1];
    for &l in lambda.digits() {
        if l > 0 {
            out[l as usize - 1] += 1;
        }
    }
    out
}

/// The Lagrange-polynomial form of the occupation counts,
/// `η_i = ((−1)^i/((d−1−i)! i!)) Σ_j Π_{k≠i} (k − l_j)`.
pub fn eta_polynomial(lambda: &DString) -> Vec<f64> {
    let d = lambda.d() as i64;
    (1..d)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let denom = (factorial((d - 1 - i) as u64) * factorial(i as u64)).to_string().parse::<f64>().expect("small factorial");
            let sum: f64 = lambda
                .digits()
                .iter()
                .map(|&l| (0..d).filter(|&k| k != i).map(|k| (k - l as i64) as f64).product::<f64>())
                .sum();
            sign * sum / denom
        })
        .collect()
}

/// The Dicke-type basis of `H_sym`, lexicographic in `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBasis {
    d: u32,
    n: usize,
    indices: Vec<Vec<u32>>,
    lookup: HashMap<Vec<u32>, usize>,
    norms: Vec<f64>,
    // next[s][l]: index after adding one particle at level l
    next: Vec<Vec<Option<usize>>>,
}

impl SymBasis {
    pub fn new(d: u32, n: usize) -> Result<Self> {
        check_prime(d)?;
        if n == 0 {
            return Err(Error::Domain("particle number must be at least 1".into()));
        }
        let dsym = sym_dim(d, n);
        if dsym > max_dim() {
            return Err(Error::Capacity {
                requested: dsym as u128,
                limit: max_dim(),
            });
        }
        let mut indices = Vec::with_capacity(dsym);
        fn rec(vars: usize, budget: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if cur.len() == vars {
                out.push(cur.clone());
                return;
            }
            for p in 0..=budget {
                cur.push(p);
                rec(vars, budget - p, cur, out);
                cur.pop();
            }
        }
        rec(d as usize - 1, n as u32, &mut Vec::new(), &mut indices);
        let lookup: HashMap<Vec<u32>, usize> = indices.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let nf = factorial(n as u64);
        let norms = indices
            .iter()
            .map(|p| {
                let rest = n as u64 - p.iter().map(|&x| x as u64).sum::<u64>();
                let num = p.iter().fold(factorial(rest), |acc, &x| acc * factorial(x as u64));
                // N_p² = 1 / multinomial
                let multinomial = &nf / num;
                let m: f64 = multinomial.to_string().parse().unwrap_or(f64::INFINITY);
                1.0 / m.sqrt()
            })
            .collect();
        let next = indices
            .iter()
            .map(|p| {
                (0..d)
                    .map(|l| {
                        if l == 0 {
                            let total: u32 = p.iter().sum();
                            (total < n as u32).then(|| lookup[p])
                        } else {
                            let mut q = p.clone();
                            q[l as usize - 1] += 1;
                            lookup.get(&q).copied()
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            d,
            n,
            indices,
            lookup,
            norms,
            next,
        })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    pub fn position(&self, p: &[u32]) -> Option<usize> {
        self.lookup.get(p).copied()
    }

    /// `N_p = √(p_1!…p_{d−1}!(N−Σp)!/N!)`.
    pub fn norm_const(&self, index: usize) -> f64 {
        self.norms[index]
    }

    fn zero_index(&self) -> usize {
        0
    }

    /// Per-level amplitudes `Σ_{λ : η(λ)=p} Π_i v_i(l_i)` for a product vector,
    /// not yet multiplied by `N_p`.
    fn product_amplitudes(&self, factors: &[DVector<C64>]) -> Vec<C64> {
        let dsym = self.dim();
        let mut state = vec![C64::new(0.0, 0.0); dsym];
        state[self.zero_index()] = C64::new(1.0, 0.0);
        for (site, f) in factors.iter().enumerate() {
            let mut next = vec![C64::new(0.0, 0.0); dsym];
            for s in 0..dsym {
                let v = state[s];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                for l in 0..self.d as usize {
                    // level 0 keeps the counts unchanged but consumes a site
                    let target = if l == 0 {
                        (self.indices[s].iter().sum::<u32>() as usize <= site).then_some(s)
                    } else {
                        self.next[s][l]
                    };
                    if let Some(t) = target {
                        next[t] += v * f[l];
                    }
                }
            }
            state = next;
        }
        state
    }

    /// `⟨t|Π_s (⊗ A_i) Π_s|t′⟩` for single-particle factors `A_i`.
    pub fn project_product(&self, factors: &[Operator]) -> Result<Operator> {
        if factors.len() != self.n || factors.iter().any(|f| f.shape() != (self.d as usize, self.d as usize)) {
            return Err(Error::Dimension(format!("need {} factors of size {}", self.n, self.d)));
        }
        let dsym = self.dim();
        let du = self.d as usize;
        let mut state = vec![C64::new(0.0, 0.0); dsym * dsym];
        state[0] = C64::new(1.0, 0.0);
        for (site, f) in factors.iter().enumerate() {
            let mut next = vec![C64::new(0.0, 0.0); dsym * dsym];
            for s in 0..dsym {
                let filled_s = self.indices[s].iter().sum::<u32>() as usize;
                for s2 in 0..dsym {
                    let v = state[s * dsym + s2];
                    if v == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let filled_s2 = self.indices[s2].iter().sum::<u32>() as usize;
                    for l in 0..du {
                        let t = if l == 0 { (filled_s <= site).then_some(s) } else { self.next[s][l] };
                        let Some(t) = t else { continue };
                        for l2 in 0..du {
                            let t2 = if l2 == 0 { (filled_s2 <= site).then_some(s2) } else { self.next[s2][l2] };
                            let Some(t2) = t2 else { continue };
                            next[t * dsym + t2] += v * f[(l, l2)];
                        }
                    }
                }
            }
            state = next;
        }
        Ok(Operator::from_fn(dsym, dsym, |i, j| state[i * dsym + j] * (self.norms[i] * self.norms[j])))
    }

    /// `|p; N⟩` in the computational basis.
    pub fn dicke_state(&self, index: usize) -> Result<StateVector> {
        let dim = checked_dim(self.d, self.n)?;
        let target = self
            .indices
            .get(index)
            .ok_or_else(|| Error::Domain(format!("basis index {index} out of range")))?;
        let mut v = StateVector::zeros(dim);
        for lambda in enumerate_strings(self.d, self.n)? {
            if &eta(&lambda) == target {
                v[lambda.index()] = C64::new(self.norms[index], 0.0);
            }
        }
        Ok(v)
    }

    /// The `d^N × d_sym` isometry whose columns are the Dicke states.
    pub fn isometry(&self) -> Result<Operator> {
        let dim = checked_dim(self.d, self.n)?;
        let mut v = Operator::zeros(dim, self.dim());
        for lambda in enumerate_strings(self.d, self.n)? {
            let col = self.lookup[&eta(&lambda)];
            v[(lambda.index(), col)] = C64::new(self.norms[col], 0.0);
        }
        Ok(v)
    }

    /// `Π_s ρ Π_s` expressed in the Dicke basis, with `max |ρ − Π_s ρ Π_s|`.
    pub fn from_full(&self, rho: &Operator) -> Result<(Operator, f64)> {
        let v = self.isometry()?;
        if rho.shape() != (v.nrows(), v.nrows()) {
            return Err(Error::Dimension(format!("state is {}×{}, expected {}", rho.nrows(), rho.ncols(), v.nrows())));
        }
        let reduced = v.adjoint() * rho * &v;
        let back = &v * &reduced * v.adjoint();
        let residual = max_abs_diff(&back, rho);
        Ok((reduced, residual))
    }

    /// Embeds a `d_sym × d_sym` operator into the full space.
    pub fn to_full(&self, rho_s: &Operator) -> Result<Operator> {
        let v = self.isometry()?;
        if rho_s.shape() != (self.dim(), self.dim()) {
            return Err(Error::Dimension(format!("symmetric operator must be {0}×{0}", self.dim())));
        }
        Ok(&v * rho_s * v.adjoint())
    }
}

/// `|p; N⟩` for explicit `(d, N, p)`.
pub fn dicke_state(p: &[u32], d: u32, n: usize) -> Result<StateVector> {
    let basis = SymBasis::new(d, n)?;
    let index = basis
        .position(p)
        .ok_or_else(|| Error::Domain(format!("{p:?} is not a valid occupation index for d = {d}, N = {n}")))?;
    basis.dicke_state(index)
}

/// `Π_s = Σ_p |p; N⟩⟨p; N|` on the full space.
pub fn projector_sym(d: u32, n: usize) -> Result<Operator> {
    let v = SymBasis::new(d, n)?.isometry()?;
    Ok(&v * v.adjoint())
}

fn coherent_factors(fid: &Fiducial, alpha: &DString, beta: &DString) -> Vec<DVector<C64>> {
    (0..fid.n())
        .map(|i| fid.single_coherent(i, alpha.digits()[i], beta.digits()[i]))
        .collect()
}

/// `φ = Π_s |α,β⟩` in the Dicke basis: components `N_p Υ_p`.
pub fn phi_of_pair(basis: &SymBasis, fid: &Fiducial, alpha: &DString, beta: &DString) -> Result<StateVector> {
    if fid.d() != basis.d || fid.n() != basis.n || alpha.len() != basis.n || beta.len() != basis.n {
        return Err(Error::Dimension("labels, fiducial and basis disagree on (d, N)".into()));
    }
    let amps = basis.product_amplitudes(&coherent_factors(fid, alpha, beta));
    Ok(StateVector::from_iterator(
        basis.dim(),
        amps.iter().enumerate().map(|(i, a)| a * basis.norms[i]),
    ))
}

/// `φ_m` on the canonical representative of `m`.
pub fn phi_state(m: &WeightVector, fid: &Fiducial, space: &MeasurementSpace, basis: &SymBasis) -> Result<StateVector> {
    let class = space
        .class(m)
        .ok_or_else(|| Error::EmptyClass(format!("{m} is not realized")))?;
    let (a, b) = class.representative();
    phi_of_pair(basis, fid, a, b)
}

/// `Υ_p(α,β) = Σ_{λ : η(λ) = p} ω^{α·λ} c_{λ−β}` by enumerating all `λ`.
pub fn upsilon_by_enumeration(basis: &SymBasis, fid: &Fiducial, alpha: &DString, beta: &DString) -> Result<Vec<C64>> {
    let d = fid.d();
    let mut out = vec![C64::new(0.0, 0.0); basis.dim()];
    for lambda in enumerate_strings(d, fid.n())? {
        let phase = omega_pow(d, lambda.dot(alpha)? as i64);
        let shifted = lambda.sub(beta)?;
        let c: C64 = (0..fid.n()).map(|i| fid.site(i)[shifted.digits()[i] as usize]).product();
        out[basis.lookup[&eta(&lambda)]] += phase * c;
    }
    Ok(out)
}

/// `Π_s Δ⁺(α,β) Π_s` in the Dicke basis for a single point.
pub fn projected_point_kernel(basis: &SymBasis, fid: &Fiducial, alpha: &DString, beta: &DString) -> Result<Operator> {
    fid.ensure_invertible()?;
    let factors = (0..fid.n())
        .map(|i| single_kernel(fid, i, KernelSign::Plus, alpha.digits()[i], beta.digits()[i]))
        .collect::<Result<Vec<_>>>()?;
    basis.project_product(&factors)
}

/// `Δ_s⁺(m) = Π_s (Σ_{h(α,β)=m} Δ⁺(α,β)) Π_s`. Every point of the class
/// projects to the same operator, so this is `R_m` times one projection.
pub fn delta_s_plus(m: &WeightVector, fid: &Fiducial, space: &MeasurementSpace, basis: &SymBasis) -> Result<Operator> {
    let class = space
        .class(m)
        .ok_or_else(|| Error::EmptyClass(format!("{m} is not realized")))?;
    let (a, b) = class.representative();
    Ok(projected_point_kernel(basis, fid, a, b)? * C64::new(class.multiplicity_f64, 0.0))
}

/// [`delta_s_plus`] by summing every dense kernel in the class and
/// projecting with the Dicke isometry.
pub fn delta_s_plus_dense(m: &WeightVector, fid: &Fiducial, space: &MeasurementSpace, basis: &SymBasis) -> Result<Operator> {
    let class = space
        .class(m)
        .ok_or_else(|| Error::EmptyClass(format!("{m} is not realized")))?;
    let v = basis.isometry()?;
    let dim = v.nrows();
    let mut sum = Operator::zeros(dim, dim);
    for (a, b) in class.members() {
        sum += kernel(KernelSign::Plus, fid, &a, &b)?;
    }
    Ok(v.adjoint() * sum * v)
}

/// `g(q, m) = Σ_{h(α,β)=m} ω^{α·δ − β·γ}` on the representative `(γ, δ)` of `q`.
pub fn g_function(q: &WeightVector, m: &WeightVector, space: &MeasurementSpace) -> Result<C64> {
    let cq = space.class(q).ok_or_else(|| Error::EmptyClass(format!("{q} is not realized")))?;
    let cm = space.class(m).ok_or_else(|| Error::EmptyClass(format!("{m} is not realized")))?;
    let (gamma, delta) = cq.representative();
    let d = space.d();
    let mut acc = C64::new(0.0, 0.0);
    for (alpha, beta) in cm.members() {
        acc += omega_pow(d, alpha.dot(delta)? as i64 - beta.dot(gamma)? as i64);
    }
    Ok(acc)
}

/// `f(q) = R_q / ⟨ξ|Z_γ X_δ|ξ⟩` on the representative of `q`.
pub fn f_function(q: &WeightVector, fid: &Fiducial, space: &MeasurementSpace) -> Result<C64> {
    let cq = space.class(q).ok_or_else(|| Error::EmptyClass(format!("{q} is not realized")))?;
    let (gamma, delta) = cq.representative();
    let c = fid.matrix_element(gamma, delta)?;
    if c.norm() < 1e-300 {
        return Err(Error::SingularFiducial(format!("(γ,δ) = ({gamma},{delta})")));
    }
    Ok(C64::new(cq.multiplicity_f64, 0.0) / c)
}

/// `C_{t,t′}(q) = Σ_{h(γ,δ)=q} Σ_λ ω^{γ·λ} [η(λ) = t] [η(λ−δ) = t′]` for all
/// `(t, t′)` at once.
pub fn c_function(q: &WeightVector, space: &MeasurementSpace, basis: &SymBasis) -> Result<Operator> {
    let cq = space.class(q).ok_or_else(|| Error::EmptyClass(format!("{q} is not realized")))?;
    let (d, n) = (space.d(), space.n());
    checked_dim(d, n)?;
    let dsym = basis.dim();
    let mut out = Operator::zeros(dsym, dsym);
    let lambdas: Vec<DString> = enumerate_strings(d, n)?.collect();
    for (gamma, delta) in cq.members() {
        for lambda in &lambdas {
            let t = basis.lookup[&eta(lambda)];
            let t2 = basis.lookup[&eta(&lambda.sub(&delta)?)];
            out[(t, t2)] += omega_pow(d, gamma.dot(lambda)? as i64);
        }
    }
    Ok(out)
}

/// `⟨t|Δ_s⁺(m)|t′⟩ = d^{−2N} N_t N_{t′} Σ_q g(q,m) f(q) C_{t,t′}(q) / R_q`.
pub fn delta_s_plus_gcf(m: &WeightVector, fid: &Fiducial, space: &MeasurementSpace, basis: &SymBasis) -> Result<Operator> {
    let dim = checked_dim(space.d(), space.n())? as f64;
    let dsym = basis.dim();
    let mut out = Operator::zeros(dsym, dsym);
    for cq in space.classes() {
        let g = g_function(&cq.m, m, space)?;
        if g.norm() < 1e-14 {
            continue;
        }
        let f = f_function(&cq.m, fid, space)?;
        let c = c_function(&cq.m, space, basis)?;
        out += c * (g * f / cq.multiplicity_f64);
    }
    for i in 0..dsym {
        for j in 0..dsym {
            out[(i, j)] *= basis.norms[i] * basis.norms[j] / (dim * dim);
        }
    }
    Ok(out)
}

/// Precomputed symmetric-subspace tomography for one `(d, N, ξ)`.
#[derive(Debug, Clone)]
pub struct SymTomography {
    basis: SymBasis,
    space: MeasurementSpace,
    fid: Fiducial,
    phis: Vec<StateVector>,
    point_kernels: Vec<Operator>,
    scale: f64,
}

impl SymTomography {
    pub fn new(fid: Fiducial, space: MeasurementSpace) -> Result<Self> {
        if fid.d() != space.d() || fid.n() != space.n() {
            return Err(Error::Dimension("fiducial and measurement space disagree on (d, N)".into()));
        }
        fid.ensure_invertible()?;
        let basis = SymBasis::new(fid.d(), fid.n())?;
        let built = space
            .classes()
            .par_iter()
            .map(|c| {
                let (a, b) = c.representative();
                Ok((phi_of_pair(&basis, &fid, a, b)?, projected_point_kernel(&basis, &fid, a, b)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let (phis, point_kernels) = built.into_iter().unzip();
        let scale = (fid.d() as f64).powi(fid.n() as i32);
        Ok(Self {
            basis,
            space,
            fid,
            phis,
            point_kernels,
            scale,
        })
    }

    /// Builds the measurement space from occupations.
    pub fn for_fiducial(fid: Fiducial) -> Result<Self> {
        let space = MeasurementSpace::from_occupations(fid.d(), fid.n())?;
        Self::new(fid, space)
    }

    pub fn basis(&self) -> &SymBasis {
        &self.basis
    }

    pub fn space(&self) -> &MeasurementSpace {
        &self.space
    }

    pub fn fiducial(&self) -> &Fiducial {
        &self.fid
    }

    pub fn outcomes(&self) -> usize {
        self.space.len()
    }

    pub fn phi(&self, index: usize) -> &StateVector {
        &self.phis[index]
    }

    /// `E_m` for every class, in space order.
    pub fn povm(&self) -> Vec<Operator> {
        self.space
            .classes()
            .iter()
            .zip(&self.phis)
            .map(|(c, phi)| (phi * phi.adjoint()) * C64::new(c.multiplicity_f64 / self.scale, 0.0))
            .collect()
    }

    /// `Δ_s⁺(m)` for the class at `index`.
    pub fn delta_s_plus(&self, index: usize) -> Operator {
        &self.point_kernels[index] * C64::new(self.space.classes()[index].multiplicity_f64, 0.0)
    }

    /// `Π_s Δ⁺(α,β) Π_s` on the representative of the class at `index`.
    pub fn point_kernel(&self, index: usize) -> &Operator {
        &self.point_kernels[index]
    }

    /// `d^N`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Operator multiplying `σ_m` in the reconstruction: `d^N R_m^{−1} Δ_s⁺(m)`.
    pub fn reconstruction_operator(&self, index: usize) -> Operator {
        &self.point_kernels[index] * C64::new(self.scale, 0.0)
    }

    /// `σ_m = Tr(E_m ρ_s) = d^{−N} R_m ⟨φ_m|ρ_s|φ_m⟩`.
    pub fn probabilities(&self, rho_s: &Operator) -> Result<Vec<f64>> {
        if rho_s.shape() != (self.basis.dim(), self.basis.dim()) {
            return Err(Error::Dimension(format!("symmetric state must be {0}×{0}", self.basis.dim())));
        }
        Ok(self
            .space
            .classes()
            .iter()
            .zip(&self.phis)
            .map(|(c, phi)| c.multiplicity_f64 / self.scale * phi.dotc(&(rho_s * phi)).re)
            .collect())
    }

    /// `ρ_s = d^N Σ_m σ_m R_m^{−1} Δ_s⁺(m)`.
    pub fn reconstruct(&self, sigma: &[f64]) -> Result<Operator> {
        if sigma.len() != self.outcomes() {
            return Err(Error::IncompleteData(format!("{} probabilities for {} outcomes", sigma.len(), self.outcomes())));
        }
        let dsym = self.basis.dim();
        let mut out = Operator::zeros(dsym, dsym);
        for (k, &s) in self.point_kernels.iter().zip(sigma) {
            if s != 0.0 {
                out += k * C64::new(s * self.scale, 0.0);
            }
        }
        Ok(out)
    }

    /// Largest `|σ_q − Tr(E_q ρ_rec(σ))|` over all `q`.
    pub fn redundancy_violation(&self, sigma: &[f64]) -> Result<f64> {
        let rec = self.reconstruct(sigma)?;
        let predicted = self.probabilities(&rec)?;
        Ok(sigma.iter().zip(&predicted).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// The self-consistency conditions in the uncorrected form
    /// `σ_q = d^N Σ_m σ_m R_m^{−1} ⟨φ_q|Δ_s⁺(m)|φ_q⟩`, which omits the factor
    /// `d^{−N} R_q`; kept to quantify that omission on exact data.
    pub fn redundancy_violation_uncorrected(&self, sigma: &[f64]) -> Result<f64> {
        let rec = self.reconstruct(sigma)?;
        Ok(sigma
            .iter()
            .zip(&self.phis)
            .map(|(s, phi)| (s - phi.dotc(&(&rec * phi)).re).abs())
            .fold(0.0, f64::max))
    }

    /// Largest anti-Hermitian residual `max |Δ − Δ†|` over all projected kernels.
    pub fn kernel_hermiticity_residual(&self) -> f64 {
        self.point_kernels.iter().map(crate::linalg::hermiticity_residual).fold(0.0, f64::max)
    }
}

/// Number of outcomes versus `d_sym² − 1` independent parameters.
pub fn redundancy_counts(d: u32, n: usize) -> (u128, u128) {
    let outcomes: u128 = crate::macro_space::count_multiplets(d, n).try_into().unwrap_or(u128::MAX);
    let dsym = sym_dim(d, n) as u128;
    (outcomes, dsym * dsym - 1)
}

/// Weight vector of `(α, β)` for use with [`SymTomography`] lookups.
pub fn class_of(alpha: &DString, beta: &DString) -> Result<WeightVector> {
    weight_vector(alpha, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collective::{collective_op, p_symbol_o};
    use crate::linalg::{hermitian_eigenvalues, trace_product};
    use crate::ops::{ghz_state, projector};
    use crate::zd::all_strings;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym_state(dsym: usize, rank: usize, rng: &mut ChaCha8Rng) -> Operator {
        let a = DMatrix::from_fn(dsym, rank, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let r = &a * a.adjoint();
        let t = r.trace();
        r / t
    }

    #[test]
    fn eta_examples() {
        let l = DString::new(3, vec![0, 1, 2, 1]).unwrap();
        assert_eq!(eta(&l), vec![2, 1]);
        assert_eq!(eta(&DString::zero(3, 4).unwrap()), vec![0, 0]);
        for lambda in all_strings(2, 4).unwrap() {
            assert_eq!(eta(&lambda), vec![lambda.weight()]);
        }
        for (d, n) in [(3u32, 3usize), (5, 2)] {
            for lambda in all_strings(d, n).unwrap() {
                let poly = eta_polynomial(&lambda);
                for (a, b) in eta(&lambda).iter().zip(poly) {
                    assert!((*a as f64 - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dicke_examples() {
        let v = dicke_state(&[1], 2, 2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let expected = StateVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(0.0, 0.0)]);
        assert!((v - expected).norm() < 1e-15);
        let zero = dicke_state(&[0, 0], 3, 2).unwrap();
        assert_eq!(zero[0], C64::new(1.0, 0.0));
        assert!(dicke_state(&[3], 2, 2).is_err());
    }

    #[test]
    fn dicke_gram_is_identity() {
        for (d, n) in [(2u32, 1usize), (2, 3), (2, 6), (3, 2), (3, 4)] {
            let basis = SymBasis::new(d, n).unwrap();
            assert_eq!(basis.dim(), sym_dim(d, n));
            let v = basis.isometry().unwrap();
            let gram = v.adjoint() * &v;
            assert!(max_abs_diff(&gram, &Operator::identity(basis.dim(), basis.dim())) < 1e-12);
        }
        assert_eq!(sym_dim(3, 2), 6);
    }

    #[test]
    fn symmetric_projector() {
        let p = projector_sym(2, 2).unwrap();
        let ev = hermitian_eigenvalues(&p);
        assert_eq!(ev.iter().filter(|&&x| x > 0.5).count(), 3);
        assert!(max_abs_diff(&(&p * &p), &p) < 1e-12);
        let ghz = ghz_state(2, 2).unwrap();
        assert!((&p * &ghz - &ghz).norm() < 1e-14);
    }

    #[test]
    fn phi_paths_agree_and_are_class_constant() {
        let (d, n) = (2u32, 3usize);
        let fid = Fiducial::builtin(d, n).unwrap();
        let space = MeasurementSpace::enumerate(d, n).unwrap();
        let basis = SymBasis::new(d, n).unwrap();
        let v = basis.isometry().unwrap();
        for c in space.classes() {
            let phi = phi_state(&c.m, &fid, &space, &basis).unwrap();
            assert!(phi.norm() <= 1.0 + 1e-12);
            for (a, b) in c.members() {
                let other = phi_of_pair(&basis, &fid, &a, &b).unwrap();
                assert!((&other - &phi).norm() < 1e-10);
                let dense = v.adjoint() * fid.coherent_state(&a, &b).unwrap();
                assert!((&dense - &phi).norm() < 1e-12);
                let ups = upsilon_by_enumeration(&basis, &fid, &a, &b).unwrap();
                for (i, u) in ups.iter().enumerate() {
                    assert!((u * basis.norm_const(i) - phi[i]).norm() < 1e-12);
                }
            }
        }
        let zero = WeightVector::zero(d, n).unwrap();
        let phi0 = phi_state(&zero, &fid, &space, &basis).unwrap();
        let xi = v.adjoint() * fid.state().unwrap();
        assert!((phi0 - xi).norm() < 1e-12);
    }

    #[test]
    fn povm_completeness() {
        for (d, n) in [(2u32, 1usize), (2, 3), (3, 2), (2, 8)] {
            let fid = Fiducial::builtin(d, n).unwrap();
            let tomo = SymTomography::for_fiducial(fid).unwrap();
            let povm = tomo.povm();
            let dsym = tomo.basis().dim();
            let mut total = Operator::zeros(dsym, dsym);
            for e in &povm {
                assert!(hermitian_eigenvalues(e)[0] > -1e-12);
                total += e;
            }
            assert!(max_abs_diff(&total, &Operator::identity(dsym, dsym)) < 1e-10, "d={d} n={n}");
            if n == 1 {
                assert_eq!(povm.len(), 4);
                let tr: f64 = povm.iter().map(|e| e.trace().re).sum();
                assert!((tr - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_paths_agree() {
        for (d, n) in [(2u32, 2usize), (2, 3), (3, 2)] {
            let fid = Fiducial::builtin(d, n).unwrap();
            let space = MeasurementSpace::enumerate(d, n).unwrap();
            let basis = SymBasis::new(d, n).unwrap();
            for c in space.classes() {
                let dp = delta_s_plus(&c.m, &fid, &space, &basis).unwrap();
                let dense = delta_s_plus_dense(&c.m, &fid, &space, &basis).unwrap();
                assert!(max_abs_diff(&dp, &dense) < 1e-10, "d={d} n={n} m={}", c.m);
                assert!(crate::linalg::hermiticity_residual(&dp) < 1e-10);
                if d == 2 && n == 2 || d == 3 && c.multiplicity_f64 < 3.0 {
                    let gcf = delta_s_plus_gcf(&c.m, &fid, &space, &basis).unwrap();
                    assert!(max_abs_diff(&dp, &gcf) < 1e-8, "gcf d={d} n={n} m={}", c.m);
                }
            }
        }
    }

    #[test]
    fn discrete_function_examples() {
        let (d, n) = (2u32, 3usize);
        let fid = Fiducial::builtin(d, n).unwrap();
        let space = MeasurementSpace::enumerate(d, n).unwrap();
        let basis = SymBasis::new(d, n).unwrap();
        let zero = WeightVector::zero(d, n).unwrap();
        assert_eq!(g_function(&zero, &zero, &space).unwrap(), C64::new(1.0, 0.0));
        assert!((f_function(&zero, &fid, &space).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        let c = c_function(&zero, &space, &basis).unwrap();
        for t in 0..basis.dim() {
            for t2 in 0..basis.dim() {
                let expected = if t == t2 { binomial(n as u64, t as u64).to_string().parse::<f64>().unwrap() } else { 0.0 };
                assert!((c[(t, t2)] - C64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn reconstruction_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for (d, n) in [(2u32, 1usize), (2, 3), (2, 5), (3, 2), (3, 3)] {
            let tomo = SymTomography::for_fiducial(Fiducial::builtin(d, n).unwrap()).unwrap();
            let dsym = tomo.basis().dim();
            for trial in 0..10 {
                let rank = if trial % 2 == 0 { 1 } else { dsym };
                let rho = random_sym_state(dsym, rank, &mut rng);
                let sigma = tomo.probabilities(&rho).unwrap();
                assert!(sigma.iter().all(|&s| s >= -1e-12));
                assert!((sigma.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                let rec = tomo.reconstruct(&sigma).unwrap();
                assert!(max_abs_diff(&rec, &rho) < 1e-8, "d={d} n={n}");
                assert!(tomo.redundancy_violation(&sigma).unwrap() < 1e-8);
            }
            let mut e0 = Operator::zeros(dsym, dsym);
            e0[(0, 0)] = C64::new(1.0, 0.0);
            let rec = tomo.reconstruct(&tomo.probabilities(&e0).unwrap()).unwrap();
            assert!(max_abs_diff(&rec, &e0) < 1e-9);
            let mixed = Operator::identity(dsym, dsym) / C64::new(dsym as f64, 0.0);
            let sigma = tomo.probabilities(&mixed).unwrap();
            for (s, e) in sigma.iter().zip(tomo.povm()) {
                assert!((s - e.trace().re / dsym as f64).abs() < 1e-12);
            }
            assert!(max_abs_diff(&tomo.reconstruct(&sigma).unwrap(), &mixed) < 1e-9);
        }
    }

    #[test]
    fn redundancy_detects_perturbation() {
        let tomo = SymTomography::for_fiducial(Fiducial::builtin(2, 3).unwrap()).unwrap();
        let ghz = tomo.basis().from_full(&projector(&ghz_state(2, 3).unwrap())).unwrap().0;
        let mut sigma = tomo.probabilities(&ghz).unwrap();
        assert!((sigma.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(tomo.redundancy_violation(&sigma).unwrap() < 1e-8);
        sigma[3] += 0.01;
        let total: f64 = sigma.iter().sum();
        sigma.iter_mut().for_each(|s| *s /= total);
        assert!(tomo.redundancy_violation(&sigma).unwrap() > 1e-3);
        assert_eq!(redundancy_counts(2, 1), (4, 3));
    }

    #[test]
    fn uncorrected_redundancy_fails_on_exact_data() {
        let tomo = SymTomography::for_fiducial(Fiducial::builtin(2, 2).unwrap()).unwrap();
        let ghz = tomo.basis().from_full(&projector(&ghz_state(2, 2).unwrap())).unwrap().0;
        let sigma = tomo.probabilities(&ghz).unwrap();
        assert!(tomo.redundancy_violation_uncorrected(&sigma).unwrap() > 1e-2);
    }

    #[test]
    fn collective_expectations_in_coherent_states() {
        for n in [1usize, 2, 3] {
            let fid = Fiducial::builtin(2, n).unwrap();
            let space = MeasurementSpace::enumerate(2, n).unwrap();
            let basis = SymBasis::new(2, n).unwrap();
            let v = basis.isometry().unwrap();
            for (k, l) in crate::zd::weight_labels(2) {
                let o = collective_op(k, l, &fid).unwrap();
                let o_sym = v.adjoint() * &o * &v;
                for c in space.classes() {
                    let (a, b) = c.representative();
                    let target = 2f64.powi(n as i32) / 3.0 * p_symbol_o(k, l, a, b).unwrap();
                    let coherent = fid.coherent_state(a, b).unwrap();
                    assert!((coherent.dotc(&(&o * &coherent)).re - target).abs() < 1e-10);
                    if n <= 2 {
                        let phi = phi_state(&c.m, &fid, &space, &basis).unwrap();
                        assert!((phi.dotc(&(&o_sym * &phi)).re - target).abs() < 1e-10, "n={n} m={}", c.m);
                    }
                }
            }
        }
    }

    #[test]
    fn full_space_ingestion() {
        let basis = SymBasis::new(2, 3).unwrap();
        let ghz = projector(&ghz_state(2, 3).unwrap());
        let (rs, residual) = basis.from_full(&ghz).unwrap();
        assert!(residual < 1e-12);
        assert!(max_abs_diff(&basis.to_full(&rs).unwrap(), &ghz) < 1e-12);
        let v0 = crate::ops::basis_state(&DString::new(2, vec![0, 0, 1]).unwrap()).unwrap();
        assert!(basis.from_full(&projector(&v0)).unwrap().1 > 0.1);
        assert!((trace_product(&rs, &rs).re - 1.0).abs() < 1e-12);
    }
}
