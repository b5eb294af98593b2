//! Dual phase-space kernels, Q- and P-symbols, and reconstruction from a
//! complete symbol table.
//!
//! For a product fiducial both kernels factorize over particles, so every
//! kernel is a Kronecker product of `d × d` single-particle kernels:
//!
//! * `Δ⁻(α,β) = |α,β⟩⟨α,β|`, trace 1,
//! * `Δ⁺(α,β) = d^{-2N} Σ_{γ,δ} ω^{α·δ − β·γ} ⟨ξ|Z_γX_δ|ξ⟩^{-1} Z_γ X_δ`, trace `d^{-N}`,
//!
//! with `Tr(Δ⁺(α,β) Δ⁻(α′,β′)) = δ_{αα′} δ_{ββ′}`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::fiducial::Fiducial;
use crate::linalg::trace_product;
use crate::ops::{kron_all, omega_pow, pauli_single, Operator, PauliKind, C64};
use crate::zd::{checked_dim, DString};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelSign {
    /// `Δ⁺`, dual to the coherent-state projectors.
    Plus,
    /// `Δ⁻ = |α,β⟩⟨α,β|`.
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Q,
    P,
}

fn single_monomial(d: u32, g: u32, dd: u32) -> Operator {
    let z = pauli_single(PauliKind::Z, d).expect("prime d");
    let x = pauli_single(PauliKind::X, d).expect("prime d");
    let mut out = Operator::identity(d as usize, d as usize);
    for _ in 0..g {
        out = &out * &z;
    }
    for _ in 0..dd {
        out = &out * &x;
    }
    out
}

/// Single-particle `Δ^±(a,b)` on site `site`.
pub fn single_kernel(fid: &Fiducial, site: usize, sign: KernelSign, a: u32, b: u32) -> Result<Operator> {
    let d = fid.d();
    match sign {
        KernelSign::Minus => {
            let v = fid.single_coherent(site, a, b);
            Ok(&v * v.adjoint())
        }
        KernelSign::Plus => {
            let du = d as usize;
            let mut out = Operator::zeros(du, du);
            for g in 0..d {
                for dd in 0..d {
                    let c = fid.single_element(site, g, dd);
                    if c.norm() < 1e-12 {
                        return Err(Error::SingularFiducial(format!("site {site}, (γ,δ) = ({g},{dd})")));
                    }
                    let phase = omega_pow(d, a as i64 * dd as i64 - b as i64 * g as i64);
                    out += single_monomial(d, g, dd) * (phase / c);
                }
            }
            Ok(out / C64::new((d * d) as f64, 0.0))
        }
    }
}

fn check_labels(fid: &Fiducial, alpha: &DString, beta: &DString) -> Result<()> {
    for s in [alpha, beta] {
        if s.d() != fid.d() || s.len() != fid.n() {
            return Err(Error::Dimension(format!(
                "label {s} does not match a fiducial over Z_{} with {} particles",
                fid.d(),
                fid.n()
            )));
        }
    }
    Ok(())
}

/// Full kernel `Δ^±(α,β)` as a dense `d^N × d^N` operator.
pub fn kernel(sign: KernelSign, fid: &Fiducial, alpha: &DString, beta: &DString) -> Result<Operator> {
    check_labels(fid, alpha, beta)?;
    checked_dim(fid.d(), fid.n())?;
    if sign == KernelSign::Plus {
        fid.ensure_invertible()?;
    }
    let factors = (0..fid.n())
        .map(|i| single_kernel(fid, i, sign, alpha.digits()[i], beta.digits()[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok(kron_all(&factors))
}

/// `Q_f(α,β) = ⟨α,β| f |α,β⟩`.
pub fn q_symbol(f: &Operator, fid: &Fiducial, alpha: &DString, beta: &DString) -> Result<C64> {
    check_labels(fid, alpha, beta)?;
    let v = fid.coherent_state(alpha, beta)?;
    if f.nrows() != v.len() || f.ncols() != v.len() {
        return Err(Error::Dimension(format!("operator is {}×{}, expected {}", f.nrows(), f.ncols(), v.len())));
    }
    Ok(v.dotc(&(f * &v)))
}

/// `P_f(α,β) = Tr(Δ⁺(α,β) f)`.
pub fn p_symbol(f: &Operator, fid: &Fiducial, alpha: &DString, beta: &DString) -> Result<C64> {
    let k = kernel(KernelSign::Plus, fid, alpha, beta)?;
    if f.shape() != k.shape() {
        return Err(Error::Dimension(format!("operator is {}×{}, expected {}", f.nrows(), f.ncols(), k.nrows())));
    }
    Ok(trace_product(&k, f))
}

/// Index of `(α,β)` in phase-space enumeration order: `α` outer, `β` inner.
pub fn point_index(alpha: &DString, beta: &DString) -> usize {
    let dim = (alpha.d() as usize).pow(alpha.len() as u32);
    alpha.index() * dim + beta.index()
}

/// A symbol table over all `d^{2N}` phase-space points, possibly partial.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTable {
    d: u32,
    n: usize,
    kind: SymbolKind,
    values: Vec<Option<C64>>,
}

impl SymbolTable {
    pub fn empty(d: u32, n: usize, kind: SymbolKind) -> Result<Self> {
        let dim = checked_dim(d, n)?;
        Ok(Self {
            d,
            n,
            kind,
            values: vec![None; dim * dim],
        })
    }

    /// Tabulates the Q- or P-symbol of `f` over the whole phase space.
    pub fn of_operator(f: &Operator, fid: &Fiducial, kind: SymbolKind) -> Result<Self> {
        let (d, n) = (fid.d(), fid.n());
        let dim = checked_dim(d, n)?;
        if f.shape() != (dim, dim) {
            return Err(Error::Dimension(format!("operator is {}×{}, expected {dim}", f.nrows(), f.ncols())));
        }
        let mut table = Self::empty(d, n, kind)?;
        let cache = KernelCache::new(fid.clone())?;
        for a in 0..dim {
            let alpha = DString::from_index(d, n, a)?;
            for b in 0..dim {
                let beta = DString::from_index(d, n, b)?;
                let value = match kind {
                    SymbolKind::Q => q_symbol(f, fid, &alpha, &beta)?,
                    SymbolKind::P => trace_product(cache.get(KernelSign::Plus, &alpha, &beta)?, f),
                };
                table.values[a * dim + b] = Some(value);
            }
        }
        Ok(table)
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn set(&mut self, alpha: &DString, beta: &DString, value: C64) {
        let i = point_index(alpha, beta);
        self.values[i] = Some(value);
    }

    pub fn get(&self, alpha: &DString, beta: &DString) -> Option<C64> {
        self.values[point_index(alpha, beta)]
    }

    /// Values in enumeration order; `None` marks a missing point.
    pub fn values(&self) -> &[Option<C64>] {
        &self.values
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// `f = Σ Q_f Δ⁺ = Σ P_f Δ⁻` from a complete table.
pub fn reconstruct_from_symbols(table: &SymbolTable, fid: &Fiducial) -> Result<Operator> {
    if table.d != fid.d() || table.n != fid.n() {
        return Err(Error::Dimension("symbol table and fiducial disagree on (d, N)".into()));
    }
    let missing = table.missing();
    if missing > 0 {
        return Err(Error::IncompleteData(format!("{missing} phase-space points missing")));
    }
    let sign = match table.kind {
        SymbolKind::Q => KernelSign::Plus,
        SymbolKind::P => KernelSign::Minus,
    };
    let dim = checked_dim(fid.d(), fid.n())?;
    let mut out = Operator::zeros(dim, dim);
    for a in 0..dim {
        let alpha = DString::from_index(fid.d(), fid.n(), a)?;
        for b in 0..dim {
            let beta = DString::from_index(fid.d(), fid.n(), b)?;
            let value = table.values[a * dim + b].expect("checked complete");
            out += kernel(sign, fid, &alpha, &beta)? * value;
        }
    }
    Ok(out)
}

/// `⟨f⟩_ρ = Σ P_f(α,β) Q_ρ(α,β)`.
pub fn average_from_symbols(p_f: &SymbolTable, q_rho: &SymbolTable) -> Result<C64> {
    if p_f.kind != SymbolKind::P || q_rho.kind != SymbolKind::Q {
        return Err(Error::Domain("expected a P-table for the observable and a Q-table for the state".into()));
    }
    if p_f.values.len() != q_rho.values.len() {
        return Err(Error::Dimension("symbol tables of different size".into()));
    }
    let mut acc = C64::new(0.0, 0.0);
    for (p, q) in p_f.values.iter().zip(&q_rho.values) {
        match (p, q) {
            (Some(p), Some(q)) => acc += p * q,
            _ => return Err(Error::IncompleteData("symbol table has missing points".into())),
        }
    }
    Ok(acc)
}

/// P-symbol of `ŝ_{mn} = Σ_i Z_i^m X_i^n` in closed form:
/// `d^{-N} ω^{mn} Σ_i ω^{m b_i − n a_i} / ⟨ξ_i|Z^{−m}X^{−n}|ξ_i⟩`.
pub fn p_symbol_collective_monomial(m: u32, n: u32, fid: &Fiducial, alpha: &DString, beta: &DString) -> Result<C64> {
    check_labels(fid, alpha, beta)?;
    let d = fid.d();
    let (m, n) = (m % d, n % d);
    let (neg_m, neg_n) = ((d - m) % d, (d - n) % d);
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..fid.n() {
        let c = fid.single_element(i, neg_m, neg_n);
        if c.norm() < 1e-12 {
            return Err(Error::SingularFiducial(format!("site {i}, (γ,δ) = ({neg_m},{neg_n})")));
        }
        let (a, b) = (alpha.digits()[i] as i64, beta.digits()[i] as i64);
        acc += omega_pow(d, m as i64 * b - n as i64 * a) / c;
    }
    let scale = (d as f64).powi(fid.n() as i32);
    Ok(acc * omega_pow(d, (m * n) as i64) / scale)
}

/// Lazily filled, thread-safe cache of dense kernels keyed by phase-space point.
#[derive(Debug)]
pub struct KernelCache {
    fid: Fiducial,
    dim: usize,
    plus: Vec<OnceLock<Operator>>,
    minus: Vec<OnceLock<Operator>>,
}

impl KernelCache {
    pub fn new(fid: Fiducial) -> Result<Self> {
        let dim = checked_dim(fid.d(), fid.n())?;
        let points = dim * dim;
        Ok(Self {
            fid,
            dim,
            plus: (0..points).map(|_| OnceLock::new()).collect(),
            minus: (0..points).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn fiducial(&self) -> &Fiducial {
        &self.fid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, sign: KernelSign, alpha: &DString, beta: &DString) -> Result<&Operator> {
        check_labels(&self.fid, alpha, beta)?;
        let slot = match sign {
            KernelSign::Plus => &self.plus[point_index(alpha, beta)],
            KernelSign::Minus => &self.minus[point_index(alpha, beta)],
        };
        if let Some(k) = slot.get() {
            return Ok(k);
        }
        let k = kernel(sign, &self.fid, alpha, beta)?;
        Ok(slot.get_or_init(|| k))
    }
}

/// Explicit double-sum form of the kernels over all `d^{2N}` monomials.
/// Exponentially slower than [`kernel`]; serves as an independent check.
pub fn kernel_by_monomial_sum(sign: KernelSign, fid: &Fiducial, alpha: &DString, beta: &DString) -> Result<Operator> {
    use crate::ops::add_monomial;
    use crate::zd::all_strings;
    check_labels(fid, alpha, beta)?;
    let (d, n) = (fid.d(), fid.n());
    let dim = checked_dim(d, n)?;
    let strings = all_strings(d, n)?;
    let mut out = Operator::zeros(dim, dim);
    for gamma in &strings {
        for delta in &strings {
            let phase_exp = alpha.dot(delta)? as i64 - beta.dot(gamma)? as i64;
            let coeff = match sign {
                KernelSign::Minus => {
                    let gd = gamma.dot(delta)? as i64;
                    let c = fid.matrix_element(&gamma.neg(), &delta.neg())?;
                    omega_pow(d, phase_exp - gd) * c / dim as f64
                }
                KernelSign::Plus => {
                    let c = fid.matrix_element(gamma, delta)?;
                    if c.norm() < 1e-300 {
                        return Err(Error::SingularFiducial(format!("(γ,δ) = ({gamma},{delta})")));
                    }
                    omega_pow(d, phase_exp) / c / (dim * dim) as f64
                }
            };
            add_monomial(&mut out, coeff, gamma, delta)?;
        }
    }
    Ok(out)
}
