//! Arithmetic over `Z_d` for prime `d`: d-strings, weights and weight vectors.
//!
//! Strings are indexed with site 1 as the most significant base-`d` digit, so
//! [`DString::index`] agrees with the row index of the computational basis
//! used by the dense operators in [`crate::ops`].

use std::fmt;

use crate::error::{Error, Result};

/// Default upper bound on `d^N` for anything that allocates dense objects.
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Environment variable overriding [`DEFAULT_MAX_DIM`].
pub const MAX_DIM_ENV: &str = "QMACRO_MAX_DIM";

/// The active size guard: `QMACRO_MAX_DIM` if set and parseable, else the default.
pub fn max_dim() -> usize {
    std::env::var(MAX_DIM_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_MAX_DIM)
}

pub fn is_prime(d: u32) -> bool {
    if d < 2 {
        return false;
    }
    let mut k = 2u32;
    while k * k <= d {
        if d.is_multiple_of(k) {
            return false;
        }
        k += 1;
    }
    true
}

pub(crate) fn check_prime(d: u32) -> Result<()> {
    if is_prime(d) {
        Ok(())
    } else {
        Err(Error::NotPrime(d))
    }
}

/// Checks `d^n` against the size guard and returns it.
pub fn checked_dim(d: u32, n: usize) -> Result<usize> {
    let limit = max_dim();
    let mut dim: u128 = 1;
    for _ in 0..n {
        dim *= d as u128;
        if dim > limit as u128 {
            // keep multiplying only far enough to report a sensible number
            let requested = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
            return Err(Error::Capacity { requested, limit });
        }
    }
    Ok(dim as usize)
}

/// Shape of an `N`-qudit register with prime local dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Register {
    d: u32,
    n: usize,
}

impl Register {
    pub fn new(d: u32, n: usize) -> Result<Self> {
        check_prime(d)?;
        if n == 0 {
            return Err(Error::Domain("particle number must be at least 1".into()));
        }
        Ok(Self { d, n })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `d^N`, subject to the size guard.
    pub fn dim(&self) -> Result<usize> {
        checked_dim(self.d, self.n)
    }

    /// Number of phase-space points `d^{2N}`, subject to the guard on `d^N`.
    pub fn phase_space_size(&self) -> Result<usize> {
        let dim = self.dim()?;
        Ok(dim * dim)
    }
}

/// Length-`N` string over `Z_d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DString {
    d: u32,
    digits: Vec<u32>,
}

impl DString {
    pub fn new(d: u32, digits: Vec<u32>) -> Result<Self> {
        check_prime(d)?;
        if digits.is_empty() {
            return Err(Error::Domain("a d-string needs at least one digit".into()));
        }
        if let Some(&bad) = digits.iter().find(|&&x| x >= d) {
            return Err(Error::Domain(format!("digit {bad} is not in Z_{d}")));
        }
        Ok(Self { d, digits })
    }

    pub fn zero(d: u32, n: usize) -> Result<Self> {
        Self::new(d, vec![0; n])
    }

    /// Inverse of [`DString::index`].
    pub fn from_index(d: u32, n: usize, mut index: usize) -> Result<Self> {
        check_prime(d)?;
        let mut digits = vec![0u32; n];
        for slot in digits.iter_mut().rev() {
            *slot = (index % d as usize) as u32;
            index /= d as usize;
        }
        if index != 0 {
            return Err(Error::Domain("index exceeds d^N".into()));
        }
        Self::new(d, digits)
    }

    pub(crate) fn from_digits_unchecked(d: u32, digits: Vec<u32>) -> Self {
        debug_assert!(digits.iter().all(|&x| x < d));
        Self { d, digits }
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    /// Position in the computational basis; site 1 is the most significant digit.
    pub fn index(&self) -> usize {
        self.digits
            .iter()
            .fold(0usize, |acc, &x| acc * self.d as usize + x as usize)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.d != other.d || self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "strings over Z_{} of length {} and Z_{} of length {}",
                self.d,
                self.len(),
                other.d,
                other.len()
            )));
        }
        Ok(())
    }

    /// Componentwise sum mod `d`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let d = self.d;
        let digits = self
            .digits
            .iter()
            .zip(&other.digits)
            .map(|(a, b)| (a + b) % d)
            .collect();
        Ok(Self { d, digits })
    }

    /// Componentwise difference mod `d`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let d = self.d;
        let digits = self
            .digits
            .iter()
            .zip(&other.digits)
            .map(|(a, b)| (a + d - b) % d)
            .collect();
        Ok(Self { d, digits })
    }

    pub fn neg(&self) -> Self {
        let d = self.d;
        Self {
            d,
            digits: self.digits.iter().map(|a| (d - a) % d).collect(),
        }
    }

    /// Componentwise product `k·α` mod `d`.
    pub fn scale(&self, k: u32) -> Result<Self> {
        if k >= self.d {
            return Err(Error::Domain(format!("scalar {k} is not in Z_{}", self.d)));
        }
        let d = self.d;
        Ok(Self {
            d,
            digits: self.digits.iter().map(|a| (k * a) % d).collect(),
        })
    }

    /// `k·self + l·other` mod `d`.
    pub fn combine(&self, k: u32, other: &Self, l: u32) -> Result<Self> {
        self.check_compatible(other)?;
        let d = self.d;
        let (k, l) = (k % d, l % d);
        Ok(Self {
            d,
            digits: self
                .digits
                .iter()
                .zip(&other.digits)
                .map(|(a, b)| (k * a + l * b) % d)
                .collect(),
        })
    }

    /// Symplectic-free inner product `αβ = Σ a_i b_i` mod `d`.
    pub fn dot(&self, other: &Self) -> Result<u32> {
        self.check_compatible(other)?;
        Ok(self
            .digits
            .iter()
            .zip(&other.digits)
            .fold(0u32, |acc, (a, b)| (acc + a * b) % self.d))
    }

    /// Integer digit sum `h(α)`; not reduced mod `d`.
    pub fn weight(&self) -> u32 {
        self.digits.iter().sum()
    }

    /// The string with its sites permuted: site `i` of the result is site
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.len())?;
        Ok(Self {
            d: self.d,
            digits: perm.iter().map(|&p| self.digits[p]).collect(),
        })
    }
}

impl fmt::Display for DString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.digits.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Domain(format!(
            "permutation of length {} applied to {n} sites",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::Domain(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// The labels `(k, l) ∈ Z_d × Z_d \ {(0,0)}` in lexicographic order.
pub fn weight_labels(d: u32) -> Vec<(u32, u32)> {
    (0..d)
        .flat_map(|k| (0..d).map(move |l| (k, l)))
        .filter(|&kl| kl != (0, 0))
        .collect()
}

/// Position of label `(k, l)` inside [`weight_labels`].
pub fn label_position(d: u32, k: u32, l: u32) -> Option<usize> {
    if k >= d || l >= d || (k, l) == (0, 0) {
        None
    } else {
        Some((k * d + l) as usize - 1)
    }
}

/// Column names `m01, m02, …` matching [`weight_labels`].
pub fn weight_label_names(d: u32) -> Vec<String> {
    weight_labels(d)
        .into_iter()
        .map(|(k, l)| format!("m{k}{l}"))
        .collect()
}

/// The vector `{h(kα + lβ)}` over all labels; a point of measurement space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightVector {
    entries: Vec<u32>,
    d: u32,
    n: usize,
}

impl WeightVector {
    pub fn new(d: u32, n: usize, entries: Vec<u32>) -> Result<Self> {
        check_prime(d)?;
        let expected = (d * d - 1) as usize;
        if entries.len() != expected {
            return Err(Error::Dimension(format!(
                "weight vector over Z_{d} needs {expected} entries, got {}",
                entries.len()
            )));
        }
        let max = (d - 1) as usize * n;
        if let Some(&bad) = entries.iter().find(|&&m| m as usize > max) {
            return Err(Error::Domain(format!("weight {bad} exceeds (d-1)N = {max}")));
        }
        Ok(Self { entries, d, n })
    }

    pub fn zero(d: u32, n: usize) -> Result<Self> {
        Self::new(d, n, vec![0; (d * d - 1) as usize])
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    /// Entry `m_{kl}`.
    pub fn get(&self, k: u32, l: u32) -> Option<u32> {
        label_position(self.d, k, l).map(|i| self.entries[i])
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&m| m as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&m| m == 0)
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// `h(α)`.
pub fn weight(alpha: &DString) -> u32 {
    alpha.weight()
}

/// `{h(kα + lβ)}` in lexicographic label order.
pub fn weight_vector(alpha: &DString, beta: &DString) -> Result<WeightVector> {
    alpha.check_compatible(beta)?;
    let d = alpha.d;
    let mut entries = vec![0u32; (d * d - 1) as usize];
    for (&a, &b) in alpha.digits.iter().zip(&beta.digits) {
        for (slot, (k, l)) in entries.iter_mut().zip(weight_labels(d)) {
            *slot += (k * a + l * b) % d;
        }
    }
    Ok(WeightVector {
        entries,
        d,
        n: alpha.len(),
    })
}

/// Multiplicative inverse of `k` in `Z_d`.
pub fn mod_inverse(k: u32, d: u32) -> Result<u32> {
    check_prime(d)?;
    let k = k % d;
    if k == 0 {
        return Err(Error::NoInverse(k, d));
    }
    // d is prime, so k^(d-2) is the inverse
    let mut result = 1u64;
    let mut base = k as u64;
    let mut exp = d - 2;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * base % d as u64;
        }
        base = base * base % d as u64;
        exp >>= 1;
    }
    Ok(result as u32)
}

/// All `d^N` strings in index order (last digit fastest).
pub fn enumerate_strings(d: u32, n: usize) -> Result<impl Iterator<Item = DString> + Clone> {
    check_prime(d)?;
    if n == 0 {
        return Err(Error::Domain("particle number must be at least 1".into()));
    }
    let dim = checked_dim(d, n)?;
    Ok((0..dim).map(move |i| {
        let mut digits = vec![0u32; n];
        let mut idx = i;
        for slot in digits.iter_mut().rev() {
            *slot = (idx % d as usize) as u32;
            idx /= d as usize;
        }
        DString::from_digits_unchecked(d, digits)
    }))
}

/// All strings as a vector, in index order.
pub fn all_strings(d: u32, n: usize) -> Result<Vec<DString>> {
    Ok(enumerate_strings(d, n)?.collect())
}
