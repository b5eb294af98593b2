//! The collective Hermitian family `Ô_{k,l}` and its single-particle factors
//!
//! `Ô^{(i)}_{k,l} = I − (2/(d(d−1))) Σ_{a,b} {ka+lb} |a,b⟩⟨a,b|`.

use crate::error::{Error, Result};
use crate::fiducial::Fiducial;
use crate::ops::{embed_single, omega_pow, Operator, C64};
use crate::zd::{check_prime, checked_dim, mod_inverse, weight, DString};

fn check_label(d: u32, k: u32, l: u32) -> Result<()> {
    if k >= d || l >= d {
        return Err(Error::Domain(format!("label ({k},{l}) out of range for d = {d}")));
    }
    if k == 0 && l == 0 {
        return Err(Error::Domain("(k,l) = (0,0) does not label a collective operator".into()));
    }
    Ok(())
}

/// `Ô^{(i)}_{k,l}` on site `site` of the fiducial.
pub fn single_particle_op(k: u32, l: u32, fid: &Fiducial, site: usize) -> Result<Operator> {
    let d = fid.d();
    check_label(d, k, l)?;
    let du = d as usize;
    let scale = 2.0 / (d as f64 * (d as f64 - 1.0));
    let mut out = Operator::identity(du, du);
    for a in 0..d {
        for b in 0..d {
            let w = (k * a + l * b) % d;
            if w == 0 {
                continue;
            }
            let v = fid.single_coherent(site, a, b);
            out -= (&v * v.adjoint()) * C64::new(scale * w as f64, 0.0);
        }
    }
    Ok(out)
}

/// `Ô_{k,l} = Σ_i I ⊗ … ⊗ Ô^{(i)}_{k,l} ⊗ … ⊗ I`.
pub fn collective_op(k: u32, l: u32, fid: &Fiducial) -> Result<Operator> {
    let (d, n) = (fid.d(), fid.n());
    check_label(d, k, l)?;
    let dim = checked_dim(d, n)?;
    let mut out = Operator::zeros(dim, dim);
    for site in 0..n {
        out += embed_single(&single_particle_op(k, l, fid, site)?, site, n)?;
    }
    Ok(out)
}

/// `N·I − (2/((d−1)d^N)) Σ_{α,β} h(kα+lβ) |α,β⟩⟨α,β|`, built from all
/// `d^{2N}` coherent projectors.
pub fn collective_op_phase_space(k: u32, l: u32, fid: &Fiducial) -> Result<Operator> {
    let (d, n) = (fid.d(), fid.n());
    check_label(d, k, l)?;
    let dim = checked_dim(d, n)?;
    let scale = 2.0 / ((d as f64 - 1.0) * dim as f64);
    let mut out = Operator::identity(dim, dim) * C64::new(n as f64, 0.0);
    for a in 0..dim {
        let alpha = DString::from_index(d, n, a)?;
        for b in 0..dim {
            let beta = DString::from_index(d, n, b)?;
            let h = weight(&alpha.combine(k, &beta, l)?);
            if h == 0 {
                continue;
            }
            let v = fid.coherent_state(&alpha, &beta)?;
            out -= (&v * v.adjoint()) * C64::new(scale * h as f64, 0.0);
        }
    }
    Ok(out)
}

/// `τ_{q,λ} = Σ_r r ω^{r q λ^{−1}}`.
pub fn tau(q: i64, lambda: u32, d: u32) -> Result<C64> {
    let inv = mod_inverse(lambda, d)? as i64;
    Ok((0..d as i64).map(|r| omega_pow(d, r * q * inv) * r as f64).sum())
}

/// `(λ, m)` with `(k, l) = (λ, λm)` for `k ≠ 0`.
pub fn lambda_m(k: u32, l: u32, d: u32) -> Result<(u32, u32)> {
    check_label(d, k, l)?;
    if k == 0 {
        return Err(Error::Domain("diagonal labels (0,l) have no (λ, m) form".into()));
    }
    Ok((k, (l * mod_inverse(k, d)?) % d))
}

/// `⟨p| Ô^{(i)}_{k,l} |q⟩` from the fiducial coefficients `c_p`:
///
/// * `k = 0`: `δ_{pq} [1 − (2/(d−1)) Σ_r {lr} |c_{p−r}|²]`,
/// * `(k,l) = (λ,λm)`: `δ_{pq} − (2 τ_{p−q,λ}/(d(d−1))) Σ_r ω^{−mr(p−q)} c_{p−r} c*_{q−r}`.
pub fn matrix_elements(k: u32, l: u32, fid: &Fiducial, site: usize) -> Result<Operator> {
    let d = fid.d();
    check_prime(d)?;
    check_label(d, k, l)?;
    let du = d as usize;
    let c = fid.site(site);
    let at = |i: i64| c[i.rem_euclid(d as i64) as usize];
    let df = d as f64;
    let mut out = Operator::zeros(du, du);
    if k == 0 {
        for p in 0..du {
            let s: f64 = (0..d as i64).map(|r| ((l as i64 * r) % d as i64) as f64 * at(p as i64 - r).norm_sqr()).sum();
            out[(p, p)] = C64::new(1.0 - 2.0 / (df - 1.0) * s, 0.0);
        }
        return Ok(out);
    }
    let (lambda, m) = lambda_m(k, l, d)?;
    for p in 0..du as i64 {
        for q in 0..du as i64 {
            let t = tau(p - q, lambda, d)?;
            let s: C64 = (0..d as i64)
                .map(|r| omega_pow(d, -(m as i64) * r * (p - q)) * at(p - r) * at(q - r).conj())
                .sum();
            let delta = if p == q { 1.0 } else { 0.0 };
            out[(p as usize, q as usize)] = C64::new(delta, 0.0) - t * s * (2.0 / (df * (df - 1.0)));
        }
    }
    Ok(out)
}

/// The `d + 1` commuting sets: `{(0,l)}`, `{(k,0)}`, and `{(λ, λm)}` for
/// each `m = 1, …, d−1`.
pub fn commuting_sets(d: u32) -> Result<Vec<Vec<(u32, u32)>>> {
    check_prime(d)?;
    let mut sets = vec![(1..d).map(|l| (0, l)).collect::<Vec<_>>(), (1..d).map(|k| (k, 0)).collect()];
    for m in 1..d {
        sets.push((1..d).map(|lambda| (lambda, (lambda * m) % d)).collect());
    }
    Ok(sets)
}

/// `P_{Ô_{k,l}}(α,β) = d^{−N}[N − (2/(d−1)) h(kα+lβ)]`.
pub fn p_symbol_o(k: u32, l: u32, alpha: &DString, beta: &DString) -> Result<f64> {
    let d = alpha.d();
    check_label(d, k, l)?;
    let n = alpha.len();
    let h = weight(&alpha.combine(k, beta, l)?) as f64;
    Ok((n as f64 - 2.0 / (d as f64 - 1.0) * h) / (d as f64).powi(n as i32))
}
