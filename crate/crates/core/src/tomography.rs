//! Collective tomography on the full Hilbert space: symmetrized monomials
//! `D_m`, reconstruction from `Q̃`, symmetrization, fidelity, and expansion of
//! `D_m` in products of collective operators.

use rayon::prelude::*;

use crate::collective::collective_op;
use crate::error::{Error, Result};
use crate::fiducial::Fiducial;
use crate::linalg::{least_squares_complex, max_abs_diff, trace_product};
use crate::macro_space::{MacroClass, MeasurementSpace, QTilde};
use crate::ops::{add_monomial, all_permutations, permutation_operator, Operator, StateVector, C64};
use crate::phase_space::{kernel, KernelSign};
use crate::zd::{checked_dim, weight, DString, WeightVector};

/// Largest `N` accepted by [`symmetrize`] (`N!` permutations).
pub const MAX_SYMMETRIZE_N: usize = 8;

/// Sums per-item operators in parallel over fixed chunks, then adds the
/// chunk totals in order so the result does not depend on scheduling.
fn ordered_sum(items: usize, dim: usize, f: impl Fn(usize) -> Result<Operator> + Sync) -> Result<Operator> {
    let chunk = items.div_ceil(rayon::current_num_threads().max(1) * 4).max(1);
    let starts: Vec<usize> = (0..items).step_by(chunk).collect();
    let partials = starts
        .par_iter()
        .map(|&s| {
            let mut acc = Operator::zeros(dim, dim);
            for i in s..(s + chunk).min(items) {
                acc += f(i)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Operator::zeros(dim, dim);
    for p in partials {
        out += p;
    }
    Ok(out)
}

/// `D_m = Σ_{h(α,β)=m} Z_α X_β`.
pub fn d_m_operator(m: &WeightVector, space: &MeasurementSpace) -> Result<Operator> {
    let class = space
        .class(m)
        .ok_or_else(|| Error::EmptyClass(format!("{m} is not realized for d = {}, N = {}", space.d(), space.n())))?;
    d_m_of_class(class, space)
}

fn d_m_of_class(class: &MacroClass, space: &MeasurementSpace) -> Result<Operator> {
    let dim = checked_dim(space.d(), space.n())?;
    let mut out = Operator::zeros(dim, dim);
    for (alpha, beta) in class.members() {
        add_monomial(&mut out, C64::new(1.0, 0.0), &alpha, &beta)?;
    }
    Ok(out)
}

/// `Δ^±(m) = Σ_{h(α,β)=m} Δ^±(α,β)`.
pub fn class_kernel(sign: KernelSign, class: &MacroClass, fid: &Fiducial) -> Result<Operator> {
    let dim = checked_dim(fid.d(), fid.n())?;
    let mut out = Operator::zeros(dim, dim);
    for (alpha, beta) in class.members() {
        out += kernel(sign, fid, &alpha, &beta)?;
    }
    Ok(out)
}

fn check_space(fid: &Fiducial, space: &MeasurementSpace) -> Result<usize> {
    if fid.d() != space.d() || fid.n() != space.n() {
        return Err(Error::Dimension("fiducial and measurement space disagree on (d, N)".into()));
    }
    checked_dim(fid.d(), fid.n())
}

/// `ρ_rec = Σ_m Q̃(m) R_m^{−1} Δ⁺(m)`.
pub fn reconstruct_full(q: &QTilde, fid: &Fiducial, space: &MeasurementSpace) -> Result<Operator> {
    let dim = check_space(fid, space)?;
    fid.ensure_invertible()?;
    let values = space
        .classes()
        .iter()
        .map(|c| q.get(&c.m).ok_or_else(|| Error::IncompleteData(format!("Q̃ has no value at {}", c.m))))
        .collect::<Result<Vec<f64>>>()?;
    ordered_sum(space.len(), dim, |i| {
        let c = &space.classes()[i];
        let w = values[i] / c.multiplicity_f64;
        if w == 0.0 {
            return Ok(Operator::zeros(dim, dim));
        }
        Ok(class_kernel(KernelSign::Plus, c, fid)? * C64::new(w, 0.0))
    })
}

/// `⟨D_m⟩ = Tr(ρ D_m)` for every class, in space order.
pub fn dm_averages(rho: &Operator, space: &MeasurementSpace) -> Result<Vec<(WeightVector, C64)>> {
    let dim = checked_dim(space.d(), space.n())?;
    if rho.shape() != (dim, dim) {
        return Err(Error::Dimension(format!("state is {}×{}, expected {dim}", rho.nrows(), rho.ncols())));
    }
    space
        .classes()
        .par_iter()
        .map(|c| Ok((c.m.clone(), trace_product(rho, &d_m_of_class(c, space)?))))
        .collect()
}

/// `⟨D_m⟩` recovered from `Q̃` alone: `Σ_{m′} P_{D_m}(m′) Q̃(m′)`, with the
/// P-symbol evaluated on a representative of `m′`.
pub fn dm_averages_from_q_tilde(q: &QTilde, fid: &Fiducial, space: &MeasurementSpace) -> Result<Vec<(WeightVector, C64)>> {
    check_space(fid, space)?;
    let kernels = space
        .classes()
        .iter()
        .map(|c| {
            let (a, b) = c.representative();
            let value = q.get(&c.m).ok_or_else(|| Error::IncompleteData(format!("Q̃ has no value at {}", c.m)))?;
            Ok((kernel(KernelSign::Plus, fid, a, b)?, value))
        })
        .collect::<Result<Vec<_>>>()?;
    space
        .classes()
        .par_iter()
        .map(|c| {
            let dm = d_m_of_class(c, space)?;
            let total = kernels.iter().map(|(k, v)| trace_product(k, &dm) * *v).sum();
            Ok((c.m.clone(), total))
        })
        .collect()
}

/// `ρ_rec = d^{−N} Σ_m R_m^{−1} ⟨D_m⟩ D_m†`.
pub fn reconstruct_from_dm_averages(averages: &[(WeightVector, C64)], space: &MeasurementSpace) -> Result<Operator> {
    let dim = checked_dim(space.d(), space.n())?;
    let mut lookup = std::collections::HashMap::new();
    for (m, v) in averages {
        lookup.insert(m.clone(), *v);
    }
    let values = space
        .classes()
        .iter()
        .map(|c| lookup.get(&c.m).copied().ok_or_else(|| Error::IncompleteData(format!("no ⟨D_m⟩ at {}", c.m))))
        .collect::<Result<Vec<_>>>()?;
    ordered_sum(space.len(), dim, |i| {
        let c = &space.classes()[i];
        let w = values[i] / (c.multiplicity_f64 * dim as f64);
        Ok(d_m_of_class(c, space)?.adjoint() * w)
    })
}

/// `(1/N!) Σ_π P_π ρ P_π†`.
pub fn symmetrize(rho: &Operator, d: u32, n: usize) -> Result<Operator> {
    if n > MAX_SYMMETRIZE_N {
        return Err(Error::Capacity {
            requested: (1..=n as u128).product(),
            limit: (1..=MAX_SYMMETRIZE_N).product(),
        });
    }
    let dim = checked_dim(d, n)?;
    if rho.shape() != (dim, dim) {
        return Err(Error::Dimension(format!("state is {}×{}, expected {dim}", rho.nrows(), rho.ncols())));
    }
    let perms = all_permutations(n);
    let count = perms.len() as f64;
    let out = ordered_sum(perms.len(), dim, |i| {
        let p = permutation_operator(d, n, &perms[i])?;
        Ok(&p * rho * p.adjoint())
    })?;
    Ok(out / C64::new(count, 0.0))
}

/// `Tr(ρ σ)`.
pub fn fidelity(rho: &Operator, sigma: &Operator) -> f64 {
    trace_product(rho, sigma).re
}

/// `(1/N!) Σ_π |⟨ψ|P_π|ψ⟩|²`.
pub fn fidelity_pure(psi: &StateVector, d: u32, n: usize) -> Result<f64> {
    let dim = checked_dim(d, n)?;
    if psi.len() != dim {
        return Err(Error::Dimension(format!("state has {} entries, expected {dim}", psi.len())));
    }
    let perms = all_permutations(n);
    let mut acc = 0.0;
    for perm in &perms {
        let p = permutation_operator(d, n, perm)?;
        acc += psi.dotc(&(&p * psi)).norm_sqr();
    }
    Ok(acc / perms.len() as f64)
}

/// Sum of `Z_μ` over all strings of digit weight `h(μ) = target`.
pub fn z_weight_sum(d: u32, n: usize, target: u32) -> Result<Operator> {
    let dim = checked_dim(d, n)?;
    let zero = DString::zero(d, n)?;
    let mut out = Operator::zeros(dim, dim);
    for mu in crate::zd::enumerate_strings(d, n)? {
        if weight(&mu) == target {
            add_monomial(&mut out, C64::new(1.0, 0.0), &mu, &zero)?;
        }
    }
    Ok(out)
}

/// Result of expanding an operator over ordered products of collective
/// operators `Π_j Ô_{labels[j]}^{p_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub labels: Vec<(u32, u32)>,
    /// `(p, C_p)` with `|C_p| ≥` the pruning threshold.
    pub terms: Vec<(Vec<u32>, C64)>,
    /// Total degree of the smallest basis that reproduced the target, or
    /// the bound itself when none did.
    pub degree: u32,
    pub unknowns: usize,
    pub rank: usize,
    /// `max |Σ C_p Π Ô^p − target|`.
    pub residual: f64,
}

impl Expansion {
    pub fn is_exact(&self) -> bool {
        self.residual < RESIDUAL_TOL
    }

    pub fn coefficient(&self, powers: &[u32]) -> C64 {
        self.terms
            .iter()
            .find(|(p, _)| p == powers)
            .map(|t| t.1)
            .unwrap_or(C64::new(0.0, 0.0))
    }
}

pub const RESIDUAL_TOL: f64 = 1e-8;
pub const PRUNE_TOL: f64 = 1e-10;

fn exponent_vectors(vars: usize, degree: u32) -> Vec<Vec<u32>> {
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
    let mut out = Vec::new();
    rec(vars, degree, &mut Vec::new(), &mut out);
    out.sort_by_key(|p| (p.iter().sum::<u32>(), std::cmp::Reverse(p.clone())));
    out
}

/// Expands `target` in ordered products of `Ô_{labels}` of total degree at
/// most `max_degree`, growing the degree until the least-squares residual
/// drops below `1e−8`.
pub fn expand_in_collective(target: &Operator, fid: &Fiducial, labels: &[(u32, u32)], max_degree: u32) -> Result<Expansion> {
    let dim = checked_dim(fid.d(), fid.n())?;
    if target.shape() != (dim, dim) {
        return Err(Error::Dimension(format!("target is {}×{}, expected {dim}", target.nrows(), target.ncols())));
    }
    let ops = labels.iter().map(|&(k, l)| collective_op(k, l, fid)).collect::<Result<Vec<_>>>()?;
    let diagonal = labels.iter().all(|&(k, _)| k == 0) && {
        let mut off = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                if i != j {
                    off = off.max(target[(i, j)].norm());
                }
            }
        }
        off == 0.0
    };
    let id = Operator::identity(dim, dim);
    let mut powers: Vec<Vec<Operator>> = ops.iter().map(|o| vec![id.clone(), o.clone()]).collect();
    let mut last = None;
    for degree in 0..=max_degree {
        for (o, list) in ops.iter().zip(powers.iter_mut()) {
            while list.len() <= degree as usize {
                let next = list.last().expect("nonempty") * o;
                list.push(next);
            }
        }
        let exps = exponent_vectors(labels.len(), degree);
        let basis: Vec<Operator> = exps
            .iter()
            .map(|p| p.iter().enumerate().fold(id.clone(), |acc, (j, &e)| acc * &powers[j][e as usize]))
            .collect();
        // for a diagonal problem only the diagonals carry equations
        let rows: Vec<(usize, usize)> = if diagonal {
            (0..dim).map(|i| (i, i)).collect()
        } else {
            (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).collect()
        };
        let a = nalgebra::DMatrix::from_fn(rows.len(), basis.len(), |r, c| basis[c][rows[r]]);
        let b = nalgebra::DMatrix::from_fn(rows.len(), 1, |r, _| target[rows[r]]);
        let (x, rank) = least_squares_complex(&a, &b, 1e-12);
        let mut rebuilt = Operator::zeros(dim, dim);
        for (c, op) in basis.iter().enumerate() {
            rebuilt += op * x[(c, 0)];
        }
        let residual = max_abs_diff(&rebuilt, target);
        let terms = exps
            .iter()
            .zip(x.iter())
            .filter(|(_, v)| v.norm() >= PRUNE_TOL)
            .map(|(p, v)| {
                let clean = C64::new(if v.re.abs() < PRUNE_TOL { 0.0 } else { v.re }, if v.im.abs() < PRUNE_TOL { 0.0 } else { v.im });
                (p.clone(), clean)
            })
            .collect();
        let expansion = Expansion {
            labels: labels.to_vec(),
            terms,
            degree,
            unknowns: basis.len(),
            rank,
            residual,
        };
        if expansion.is_exact() {
            return Ok(expansion);
        }
        last = Some(expansion);
    }
    Ok(last.expect("degree loop runs at least once"))
}

/// Expansion of a diagonal-sector `D_m` (every `m_{0l} = 0`) in the
/// diagonal collective operators `Ô_{0,1}, …, Ô_{0,d−1}`, with total degree
/// bounded by `Σ_k m_{k0}`.
pub fn expand_dm_in_collective(m: &WeightVector, fid: &Fiducial, space: &MeasurementSpace) -> Result<Expansion> {
    let d = fid.d();
    if d != 2 && d != 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    if (1..d).any(|l| m.get(0, l) != Some(0)) {
        return Err(Error::Domain(format!("{m} is outside the diagonal sector")));
    }
    let target = d_m_operator(m, space)?;
    let bound: u32 = (1..d).map(|k| m.get(k, 0).unwrap_or(0)).sum();
    let labels: Vec<(u32, u32)> = (1..d).map(|l| (0, l)).collect();
    expand_in_collective(&target, fid, &labels, bound)
}
