//! Dense generalized Pauli operators `Z_α X_β` and small tensor-product helpers.
//!
//! Computational-basis index convention: site 1 is the most significant
//! base-`d` digit, matching [`DString::index`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::zd::{check_permutation, check_prime, checked_dim, DString};

pub type C64 = Complex64;
/// Complex square matrix of dimension `d^N` (operators, kernels, density matrices).
pub type Operator = DMatrix<C64>;
/// Complex vector of dimension `d^N`.
pub type StateVector = DVector<C64>;

/// `ω^k` with `ω = exp(2πi/d)`; `k` is reduced mod `d` before evaluation.
pub fn omega_pow(d: u32, k: i64) -> C64 {
    let r = k.rem_euclid(d as i64) as f64;
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * r / d as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliKind {
    Z,
    X,
}

/// Single-qudit `Z = Σ ω^l |l⟩⟨l|` or `X = Σ |l+1⟩⟨l|`.
pub fn pauli_single(kind: PauliKind, d: u32) -> Result<Operator> {
    check_prime(d)?;
    let n = d as usize;
    let mut m = Operator::zeros(n, n);
    for l in 0..n {
        match kind {
            PauliKind::Z => m[(l, l)] = omega_pow(d, l as i64),
            PauliKind::X => m[((l + 1) % n, l)] = C64::new(1.0, 0.0),
        }
    }
    Ok(m)
}

fn check_pair(alpha: &DString, beta: &DString) -> Result<()> {
    if alpha.d() != beta.d() || alpha.len() != beta.len() {
        return Err(Error::Dimension(format!(
            "monomial labels {alpha} and {beta} do not match"
        )));
    }
    Ok(())
}

/// Adds `coeff · Z_α X_β` to `target` in `O(d^N)` time.
pub fn add_monomial(target: &mut Operator, coeff: C64, alpha: &DString, beta: &DString) -> Result<()> {
    check_pair(alpha, beta)?;
    let d = alpha.d();
    let n = alpha.len();
    let dim = checked_dim(d, n)?;
    if target.nrows() != dim || target.ncols() != dim {
        return Err(Error::Dimension(format!(
            "target is {}x{}, monomial needs {dim}x{dim}",
            target.nrows(),
            target.ncols()
        )));
    }
    let mut lambda = vec![0u32; n];
    for col in 0..dim {
        // row = λ + β, phase ω^{α·(λ+β)}
        let mut row = 0usize;
        let mut phase = 0u32;
        for i in 0..n {
            let v = (lambda[i] + beta.digits()[i]) % d;
            row = row * d as usize + v as usize;
            phase = (phase + alpha.digits()[i] * v) % d;
        }
        target[(row, col)] += coeff * omega_pow(d, phase as i64);
        increment(&mut lambda, d);
    }
    Ok(())
}

pub(crate) fn increment(digits: &mut [u32], d: u32) {
    for slot in digits.iter_mut().rev() {
        *slot += 1;
        if *slot < d {
            return;
        }
        *slot = 0;
    }
}

/// `Z_α X_β = ⊗ Z^{a_i} · ⊗ X^{b_i}` as a dense matrix.
pub fn monomial(alpha: &DString, beta: &DString) -> Result<Operator> {
    check_pair(alpha, beta)?;
    let dim = checked_dim(alpha.d(), alpha.len())?;
    let mut m = Operator::zeros(dim, dim);
    add_monomial(&mut m, C64::new(1.0, 0.0), alpha, beta)?;
    Ok(m)
}

/// `Z_α X_β |v⟩` without forming the matrix.
pub fn apply_monomial(alpha: &DString, beta: &DString, v: &StateVector) -> Result<StateVector> {
    check_pair(alpha, beta)?;
    let d = alpha.d();
    let n = alpha.len();
    let dim = checked_dim(d, n)?;
    if v.len() != dim {
        return Err(Error::Dimension(format!("vector of length {} for d^N = {dim}", v.len())));
    }
    let mut out = StateVector::zeros(dim);
    let mut lambda = vec![0u32; n];
    for col in 0..dim {
        let mut row = 0usize;
        let mut phase = 0u32;
        for i in 0..n {
            let x = (lambda[i] + beta.digits()[i]) % d;
            row = row * d as usize + x as usize;
            phase = (phase + alpha.digits()[i] * x) % d;
        }
        out[row] = v[col] * omega_pow(d, phase as i64);
        increment(&mut lambda, d);
    }
    Ok(out)
}

/// `(1/√d) Σ_l |l…l⟩`.
pub fn ghz_state(d: u32, n: usize) -> Result<StateVector> {
    check_prime(d)?;
    let dim = checked_dim(d, n)?;
    let mut v = StateVector::zeros(dim);
    let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    for l in 0..d {
        let idx = DString::new(d, vec![l; n])?.index();
        v[idx] = amp;
    }
    Ok(v)
}

/// Computational basis vector `|λ⟩`.
pub fn basis_state(lambda: &DString) -> Result<StateVector> {
    let dim = checked_dim(lambda.d(), lambda.len())?;
    let mut v = StateVector::zeros(dim);
    v[lambda.index()] = C64::new(1.0, 0.0);
    Ok(v)
}

/// `|v⟩⟨v|`.
pub fn projector(v: &StateVector) -> Operator {
    v * v.adjoint()
}

/// Kronecker product of a list of factors, first factor most significant.
pub fn kron_all(factors: &[Operator]) -> Operator {
    let mut acc = Operator::from_element(1, 1, C64::new(1.0, 0.0));
    for f in factors {
        acc = acc.kronecker(f);
    }
    acc
}

/// Tensor product of single-particle vectors.
pub fn kron_vectors(factors: &[DVector<C64>]) -> StateVector {
    let mut acc = StateVector::from_element(1, C64::new(1.0, 0.0));
    for f in factors {
        acc = acc.kronecker(f);
    }
    acc
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` on `site` (0-based).
pub fn embed_single(op: &Operator, site: usize, n: usize) -> Result<Operator> {
    if site >= n {
        return Err(Error::Domain(format!("site {site} out of range for {n} particles")));
    }
    let local = op.nrows();
    checked_dim(local as u32, n)?;
    let id = Operator::identity(local, local);
    let factors: Vec<Operator> = (0..n).map(|i| if i == site { op.clone() } else { id.clone() }).collect();
    Ok(kron_all(&factors))
}

/// `Σ_i I ⊗ … ⊗ op_i ⊗ … ⊗ I`.
pub fn collective_sum(op: &Operator, n: usize) -> Result<Operator> {
    let mut acc: Option<Operator> = None;
    for site in 0..n {
        let term = embed_single(op, site, n)?;
        acc = Some(match acc {
            None => term,
            Some(a) => a + term,
        });
    }
    acc.ok_or_else(|| Error::Domain("particle number must be at least 1".into()))
}

/// Matrix of the site permutation `P|λ⟩ = |πλ⟩`, where site `i` of `πλ` is
/// site `perm[i]` of `λ`.
pub fn permutation_operator(d: u32, n: usize, perm: &[usize]) -> Result<Operator> {
    check_permutation(perm, n)?;
    let dim = checked_dim(d, n)?;
    let mut p = Operator::zeros(dim, dim);
    let mut lambda = vec![0u32; n];
    for col in 0..dim {
        let row = perm.iter().fold(0usize, |acc, &s| acc * d as usize + lambda[s] as usize);
        p[(row, col)] = C64::new(1.0, 0.0);
        increment(&mut lambda, d);
    }
    Ok(p)
}

/// `P ρ P†` for the site permutation `perm`.
pub fn permute_state(rho: &Operator, d: u32, n: usize, perm: &[usize]) -> Result<Operator> {
    let p = permutation_operator(d, n, perm)?;
    if rho.nrows() != p.nrows() || rho.ncols() != p.ncols() {
        return Err(Error::Dimension(format!(
            "operator is {}x{}, register has dimension {}",
            rho.nrows(),
            rho.ncols(),
            p.nrows()
        )));
    }
    Ok(&p * rho * p.adjoint())
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    loop {
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}
