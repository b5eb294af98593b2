//! The measurement space: weight-vector classes `m`, their multiplicities
//! `R_m`, and the rescaled Husimi function `Q̃(m)`.
//!
//! Two pairs `(α,β)` share a weight vector exactly when they are related by a
//! particle permutation, so every class is fixed by the occupation numbers
//! `n_{ab} = #{i : (a_i, b_i) = (a, b)}` and `R_m = N! / Π n_{ab}!`.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiducial::Fiducial;
use crate::ops::{omega_pow, Operator, C64};
use crate::zd::{check_prime, checked_dim, label_position, weight_labels, weight_vector, DString, WeightVector};

/// Upper bound on the number of classes built from occupations.
pub const MAX_CLASSES: usize = 5_000_000;

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of distinct weight vectors, `C(N + d² − 1, d² − 1)`.
pub fn count_multiplets(d: u32, n: usize) -> BigUint {
    let cells = (d as u64) * (d as u64);
    binomial(n as u64 + cells - 1, cells - 1)
}

/// `N! / Π n_{ab}!`.
pub fn multinomial(n: usize, occupations: &[u32]) -> BigUint {
    let mut acc = factorial(n as u64);
    for &k in occupations {
        acc /= factorial(k as u64);
    }
    acc
}

/// One weight-vector class of the measurement space.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroClass {
    pub m: WeightVector,
    /// `n_{ab}` indexed by `a·d + b`.
    pub occupations: Vec<u32>,
    pub multiplicity: BigUint,
    pub multiplicity_f64: f64,
    alpha: DString,
    beta: DString,
}

impl MacroClass {
    fn from_occupations(d: u32, n: usize, occupations: Vec<u32>) -> Result<Self> {
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for (cell, &count) in occupations.iter().enumerate() {
            for _ in 0..count {
                a.push(cell as u32 / d);
                b.push(cell as u32 % d);
            }
        }
        let alpha = DString::new(d, a)?;
        let beta = DString::new(d, b)?;
        let m = weight_vector(&alpha, &beta)?;
        let multiplicity = multinomial(n, &occupations);
        let multiplicity_f64 = multiplicity.to_f64().unwrap_or(f64::INFINITY);
        Ok(Self {
            m,
            occupations,
            multiplicity,
            multiplicity_f64,
            alpha,
            beta,
        })
    }

    /// Canonical representative: sites filled in increasing `(a, b)` order.
    pub fn representative(&self) -> (&DString, &DString) {
        (&self.alpha, &self.beta)
    }

    /// Every `(α, β)` in the class, as distinct permutations of the
    /// representative, in lexicographic order of the per-site cells.
    pub fn members(&self) -> Vec<(DString, DString)> {
        let d = self.alpha.d();
        let mut cells: Vec<u32> = self
            .alpha
            .digits()
            .iter()
            .zip(self.beta.digits())
            .map(|(&a, &b)| a * d + b)
            .collect();
        cells.sort_unstable();
        let mut out = Vec::new();
        loop {
            let a = cells.iter().map(|c| c / d).collect();
            let b = cells.iter().map(|c| c % d).collect();
            out.push((DString::from_digits_unchecked(d, a), DString::from_digits_unchecked(d, b)));
            if !next_permutation(&mut cells) {
                break;
            }
        }
        out
    }

    /// Digit counts of `β`, `n_v = #{i : b_i = v}`.
    pub fn beta_counts(&self) -> Vec<u32> {
        let d = self.alpha.d() as usize;
        (0..d).map(|v| (0..d).map(|a| self.occupations[a * d + v]).sum()).collect()
    }
}

fn next_permutation(v: &mut [u32]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).expect("successor exists");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

fn occupations_of(alpha: &DString, beta: &DString) -> Vec<u32> {
    let d = alpha.d() as usize;
    let mut occ = vec![0u32; d * d];
    for (&a, &b) in alpha.digits().iter().zip(beta.digits()) {
        occ[a as usize * d + b as usize] += 1;
    }
    occ
}

/// All weight-vector classes for `(d, N)`, sorted lexicographically by `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSpace {
    d: u32,
    n: usize,
    classes: Vec<MacroClass>,
    index: HashMap<WeightVector, usize>,
}

impl MeasurementSpace {
    fn from_classes(d: u32, n: usize, mut classes: Vec<MacroClass>) -> Self {
        classes.sort_by(|x, y| x.m.cmp(&y.m));
        let index = classes.iter().enumerate().map(|(i, c)| (c.m.clone(), i)).collect();
        Self { d, n, classes, index }
    }

    /// Exhaustive scan over all `d^{2N}` pairs grouped by weight vector.
    /// The multiplicities are the counted class sizes.
    pub fn enumerate(d: u32, n: usize) -> Result<Self> {
        check_prime(d)?;
        if n == 0 {
            return Err(Error::Domain("particle number must be at least 1".into()));
        }
        let dim = checked_dim(d, n)?;
        let partials: Vec<BTreeMap<Vec<u32>, (u64, WeightVector)>> = (0..dim)
            .into_par_iter()
            .map(|a| {
                let alpha = DString::from_index(d, n, a).expect("index in range");
                let mut local: BTreeMap<Vec<u32>, (u64, WeightVector)> = BTreeMap::new();
                for b in 0..dim {
                    let beta = DString::from_index(d, n, b).expect("index in range");
                    let m = weight_vector(&alpha, &beta).expect("same register");
                    local
                        .entry(m.entries().to_vec())
                        .and_modify(|e| e.0 += 1)
                        .or_insert_with(|| (1, m));
                }
                local
            })
            .collect();
        let mut merged: BTreeMap<Vec<u32>, (u64, WeightVector)> = BTreeMap::new();
        for part in partials {
            for (key, (count, m)) in part {
                merged.entry(key).and_modify(|e| e.0 += count).or_insert((count, m));
            }
        }
        // one representative per class to recover the occupations
        let mut reps: HashMap<Vec<u32>, Vec<u32>> = HashMap::new();
        for a in 0..dim {
            if reps.len() == merged.len() {
                break;
            }
            let alpha = DString::from_index(d, n, a)?;
            for b in 0..dim {
                let beta = DString::from_index(d, n, b)?;
                let m = weight_vector(&alpha, &beta)?;
                reps.entry(m.entries().to_vec()).or_insert_with(|| occupations_of(&alpha, &beta));
            }
        }
        let mut classes = Vec::with_capacity(merged.len());
        for (key, (count, m)) in merged {
            let occ = reps.remove(&key).expect("every class has a representative");
            let mut class = MacroClass::from_occupations(d, n, occ)?;
            if class.m != m {
                return Err(Error::Domain(format!("class {m} has a representative mapping to {}", class.m)));
            }
            class.multiplicity = BigUint::from(count);
            class.multiplicity_f64 = count as f64;
            classes.push(class);
        }
        Ok(Self::from_classes(d, n, classes))
    }

    /// Builds the classes from occupation numbers without touching the
    /// `d^{2N}` pairs; usable far beyond the dense-operator size guard.
    pub fn from_occupations(d: u32, n: usize) -> Result<Self> {
        check_prime(d)?;
        if n == 0 {
            return Err(Error::Domain("particle number must be at least 1".into()));
        }
        let count = count_multiplets(d, n);
        let count_usize = count.to_usize().filter(|&c| c <= MAX_CLASSES).ok_or(Error::Capacity {
            requested: count.to_u128().unwrap_or(u128::MAX),
            limit: MAX_CLASSES,
        })?;
        let cells = (d * d) as usize;
        let mut classes = Vec::with_capacity(count_usize);
        let mut occ = vec![0u32; cells];
        compositions(n as u32, 0, &mut occ, &mut |o| {
            classes.push(o.to_vec());
        });
        let classes = classes
            .into_par_iter()
            .map(|o| MacroClass::from_occupations(d, n, o))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_classes(d, n, classes))
    }

    /// Exhaustive scan when the phase space is small, occupations otherwise.
    pub fn build(d: u32, n: usize) -> Result<Self> {
        let small = (d as u128).pow(2 * n as u32) <= 1 << 16;
        if small {
            Self::enumerate(d, n)
        } else {
            Self::from_occupations(d, n)
        }
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> &[MacroClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn position(&self, m: &WeightVector) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn class(&self, m: &WeightVector) -> Option<&MacroClass> {
        self.position(m).map(|i| &self.classes[i])
    }

    /// `R_m`, zero for unreachable vectors.
    pub fn multiplicity(&self, m: &WeightVector) -> BigUint {
        self.class(m).map(|c| c.multiplicity.clone()).unwrap_or_default()
    }

    pub fn total_multiplicity(&self) -> BigUint {
        self.classes.iter().map(|c| &c.multiplicity).sum()
    }
}

fn compositions(remaining: u32, cell: usize, occ: &mut Vec<u32>, emit: &mut impl FnMut(&[u32])) {
    if cell + 1 == occ.len() {
        occ[cell] = remaining;
        emit(occ);
        return;
    }
    for k in (0..=remaining).rev() {
        occ[cell] = k;
        compositions(remaining - k, cell + 1, occ, emit);
    }
    occ[cell] = 0;
}

fn exact_div(num: i64, den: i64) -> Option<u64> {
    if num < 0 || num % den != 0 {
        None
    } else {
        Some((num / den) as u64)
    }
}

/// Closed-form multiplicities for `d ∈ {2, 3}` from the weight vector alone.
/// Returns zero when a factorial argument is negative or fractional.
pub fn r_closed(d: u32, m: &WeightVector, n: usize) -> Result<BigUint> {
    if m.d() != d || m.n() != n {
        return Err(Error::Dimension(format!("weight vector {m} is not over (d={d}, N={n})")));
    }
    let q = |k: u32, l: u32| m.get(k, l).expect("label in range") as i64;
    let big_n = n as i64;
    let args: Vec<Option<u64>> = match d {
        2 => vec![
            exact_div(q(1, 0) + q(0, 1) - q(1, 1), 2),
            exact_div(2 * big_n - q(1, 0) - q(0, 1) - q(1, 1), 2),
            exact_div(q(1, 0) - q(0, 1) + q(1, 1), 2),
            exact_div(q(0, 1) + q(1, 1) - q(1, 0), 2),
        ],
        3 => {
            let order = [(1, 0), (2, 0), (0, 1), (0, 2), (1, 1), (2, 2), (2, 1), (1, 2)];
            let rows: [[i64; 8]; 8] = [
                [2, -1, 2, -1, -1, 2, -1, -1],
                [2, -1, -1, 2, -1, -1, 2, -1],
                [2, -1, -1, -1, 2, -1, -1, 2],
                [-1, 2, 2, -1, -1, -1, -1, 2],
                [-1, 2, -1, 2, 2, -1, -1, -1],
                [-1, 2, -1, -1, -1, 2, 2, -1],
                [-1, -1, 2, -1, 2, -1, 2, -1],
                [-1, -1, -1, 2, -1, 2, -1, 2],
            ];
            let qs: Vec<i64> = order.iter().map(|&(k, l)| q(k, l)).collect();
            let total: i64 = qs.iter().sum();
            let mut args = vec![exact_div(9 * big_n - total, 9)];
            for row in rows {
                let num: i64 = row.iter().zip(&qs).map(|(r, x)| r * x).sum();
                args.push(exact_div(num, 9));
            }
            args
        }
        other => return Err(Error::UnsupportedDimension(other)),
    };
    let mut occ = Vec::with_capacity(args.len());
    for a in args {
        match a {
            Some(v) => occ.push(v),
            None => return Ok(BigUint::zero()),
        }
    }
    if occ.iter().sum::<u64>() != n as u64 {
        return Ok(BigUint::zero());
    }
    let mut acc = factorial(n as u64);
    for k in occ {
        acc /= factorial(k);
    }
    Ok(acc)
}

/// Unnormalized Gaussian asymptote of `R_m` around `q₀ = ((d−1)/2)(N,…,N)`.
///
/// * `d = 2`: `exp(−2 |m − q₀|² / N)`.
/// * `d = 3`: `exp(−Σ [x² + y² − x y] / N)` over the pairs
///   `(m_{kl}, m_{2k,2l})` for `(k,l) ∈ {(0,1), (1,0), (1,1), (1,2)}`, with
///   `x, y` the offsets from `N`.
pub fn r_gaussian(d: u32, m: &[f64], n: usize) -> Result<f64> {
    let nf = n as f64;
    match d {
        2 => {
            if m.len() != 3 {
                return Err(Error::Dimension("qubit weight vectors have 3 entries".into()));
            }
            let q0 = nf / 2.0;
            let r2: f64 = m.iter().map(|x| (x - q0).powi(2)).sum();
            Ok((-2.0 * r2 / nf).exp())
        }
        3 => {
            if m.len() != 8 {
                return Err(Error::Dimension("qutrit weight vectors have 8 entries".into()));
            }
            let at = |k: u32, l: u32| m[label_position(3, k, l).expect("label")] - nf;
            let mut s = 0.0;
            for (k, l) in [(0, 1), (1, 0), (1, 1), (1, 2)] {
                let x = at(k, l);
                let y = at((2 * k) % 3, (2 * l) % 3);
                s += x * x + y * y - x * y;
            }
            Ok((-s / nf).exp())
        }
        other => Err(Error::UnsupportedDimension(other)),
    }
}

/// A sparse `Q̃` table over the realized weight vectors, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct QTilde {
    d: u32,
    n: usize,
    entries: Vec<(WeightVector, f64)>,
}

impl QTilde {
    pub fn from_values(space: &MeasurementSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Dimension(format!("{} values for {} classes", values.len(), space.len())));
        }
        let entries = space.classes.iter().map(|c| c.m.clone()).zip(values).collect();
        Ok(Self {
            d: space.d,
            n: space.n,
            entries,
        })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(WeightVector, f64)] {
        &self.entries
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.1)
    }

    pub fn get(&self, m: &WeightVector) -> Option<f64> {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(m))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn total(&self) -> f64 {
        self.values().sum()
    }

    /// Sums `Q̃` over every coordinate except the listed labels `(k, l)`.
    pub fn marginal(&self, axes: &[(u32, u32)]) -> Result<BTreeMap<Vec<u32>, f64>> {
        let positions = axes
            .iter()
            .map(|&(k, l)| {
                label_position(self.d, k, l).ok_or_else(|| Error::Domain(format!("({k},{l}) is not a weight label for d = {}", self.d)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = BTreeMap::new();
        for (m, v) in &self.entries {
            let key: Vec<u32> = positions.iter().map(|&p| m.entries()[p]).collect();
            *out.entry(key).or_insert(0.0) += v;
        }
        Ok(out)
    }

    /// Mean and standard deviation of the coordinate `m_{kl}` under `Q̃`
    /// normalized to unit mass.
    pub fn axis_moments(&self, k: u32, l: u32) -> Result<(f64, f64)> {
        let marginal = self.marginal(&[(k, l)])?;
        let total: f64 = marginal.values().sum();
        if total <= 0.0 {
            return Err(Error::Domain("Q̃ has no positive mass".into()));
        }
        let mean = marginal.iter().map(|(x, v)| x[0] as f64 * v).sum::<f64>() / total;
        let var = marginal.iter().map(|(x, v)| (x[0] as f64 - mean).powi(2) * v).sum::<f64>() / total;
        Ok((mean, var.sqrt()))
    }
}

/// `Q̃_ρ(m) = Σ_{h(α,β)=m} ⟨α,β|ρ|α,β⟩` by a full phase-space scan.
pub fn q_tilde(rho: &Operator, fid: &Fiducial, space: &MeasurementSpace) -> Result<QTilde> {
    let (d, n) = (fid.d(), fid.n());
    if space.d != d || space.n != n {
        return Err(Error::Dimension("measurement space and fiducial disagree on (d, N)".into()));
    }
    let dim = checked_dim(d, n)?;
    if rho.shape() != (dim, dim) {
        return Err(Error::Dimension(format!("state is {}×{}, expected {dim}", rho.nrows(), rho.ncols())));
    }
    if crate::linalg::hermiticity_residual(rho) > 1e-8 {
        return Err(Error::Domain("state is not Hermitian".into()));
    }
    let partials: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|a| -> Result<Vec<f64>> {
            let alpha = DString::from_index(d, n, a)?;
            let mut local = vec![0.0; space.len()];
            for b in 0..dim {
                let beta = DString::from_index(d, n, b)?;
                let v = fid.coherent_state(&alpha, &beta)?;
                let q = v.dotc(&(rho * &v)).re;
                let m = weight_vector(&alpha, &beta)?;
                let slot = space.position(&m).ok_or_else(|| Error::Domain(format!("{m} missing from the space")))?;
                local[slot] += q;
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; space.len()];
    for part in partials {
        for (acc, v) in values.iter_mut().zip(part) {
            *acc += v;
        }
    }
    QTilde::from_values(space, values)
}

/// `Q̃(m) = Q(m) R_m` for a state whose Q-function is constant on classes.
pub fn q_tilde_symmetric(space: &MeasurementSpace, q_of_class: impl Fn(&MacroClass) -> Result<f64> + Sync) -> Result<QTilde> {
    let values = space
        .classes
        .par_iter()
        .map(|c| Ok(q_of_class(c)? * c.multiplicity_f64))
        .collect::<Result<Vec<_>>>()?;
    QTilde::from_values(space, values)
}

/// [`q_tilde_symmetric`] with `Q` evaluated on each class representative.
pub fn q_tilde_symmetric_state(rho: &Operator, fid: &Fiducial, space: &MeasurementSpace) -> Result<QTilde> {
    q_tilde_symmetric(space, |c| {
        let (alpha, beta) = c.representative();
        Ok(crate::phase_space::q_symbol(rho, fid, alpha, beta)?.re)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticState {
    Fiducial,
    Ghz,
}

/// `(d+1)^{−(2/(d²(d−1))) Σ m_{kl}}`: the fiducial Q-function on a class.
pub fn fiducial_q(d: u32, m: &WeightVector) -> f64 {
    let df = d as f64;
    let exponent = 2.0 / (df * df * (df - 1.0)) * m.total() as f64;
    (df + 1.0).powf(-exponent)
}

/// Digit counts of `β` recovered from the `m_{0k}` coordinates.
pub fn beta_counts_from_m(d: u32, m: &WeightVector) -> Option<Vec<u32>> {
    let n = m.n() as i64;
    match d {
        2 => {
            let n1 = m.get(0, 1)? as i64;
            Some(vec![(n - n1) as u32, n1 as u32])
        }
        3 => {
            let (h1, h2) = (m.get(0, 1)? as i64, m.get(0, 2)? as i64);
            let n1 = exact_div(2 * h2 - h1, 3)? as i64;
            let n2 = exact_div(2 * h1 - h2, 3)? as i64;
            let n0 = n - n1 - n2;
            (n0 >= 0).then(|| vec![n0 as u32, n1 as u32, n2 as u32])
        }
        _ => None,
    }
}

/// GHZ Q-function on a class:
/// `(1/d) |Σ_l ω^{m_{l0}} Π_v c_{l−v}^{n_v}|²` for a uniform fiducial.
pub fn ghz_q_general(fid: &Fiducial, m: &WeightVector, beta_counts: &[u32]) -> Result<f64> {
    if !fid.is_uniform() {
        return Err(Error::Domain("closed-form GHZ Q-function needs a uniform fiducial".into()));
    }
    let d = fid.d();
    let c = fid.site(0);
    let mut amp = C64::new(0.0, 0.0);
    for l in 0..d {
        let phase = if l == 0 { C64::new(1.0, 0.0) } else { omega_pow(d, m.get(l, 0).expect("label") as i64) };
        let mut prod = C64::new(1.0, 0.0);
        for (v, &count) in beta_counts.iter().enumerate() {
            prod *= c[((l + d - v as u32) % d) as usize].powu(count);
        }
        amp += phase * prod;
    }
    Ok(amp.norm_sqr() / d as f64)
}

/// Qubit closed form with the builtin fiducial:
/// `|ζ^{m01} + (−1)^{m10} ζ^{N−m01}|² / (2 (1+|ζ|²)^N)`.
pub fn ghz_q_qubit(m: &WeightVector) -> f64 {
    let n = m.n() as i32;
    let zeta = C64::from_polar((3f64.sqrt() - 1.0) / 2f64.sqrt(), std::f64::consts::FRAC_PI_4);
    let m01 = m.get(0, 1).expect("label") as i32;
    let sign = if m.get(1, 0).expect("label").is_multiple_of(2) { 1.0 } else { -1.0 };
    let amp = zeta.powi(m01) + zeta.powi(n - m01) * sign;
    amp.norm_sqr() / (2.0 * (1.0 + zeta.norm_sqr()).powi(n))
}

/// Qutrit closed form with the builtin fiducial `(|0⟩ + e^{iπ/3}|1⟩)/√2`:
/// `|δ_{n1,0} e^{iπ n2/3} + ω^{m10} δ_{n2,0} e^{iπ n0/3} + ω^{m20} δ_{n0,0} e^{iπ n1/3}|² / (3·2^N)`.
pub fn ghz_q_qutrit(m: &WeightVector) -> f64 {
    let Some(counts) = beta_counts_from_m(3, m) else {
        return 0.0;
    };
    let (n0, n1, n2) = (counts[0], counts[1], counts[2]);
    let e = |k: u32| C64::from_polar(1.0, std::f64::consts::FRAC_PI_3 * k as f64);
    let mut amp = C64::new(0.0, 0.0);
    if n1 == 0 {
        amp += e(n2);
    }
    if n2 == 0 {
        amp += omega_pow(3, m.get(1, 0).expect("label") as i64) * e(n0);
    }
    if n0 == 0 {
        amp += omega_pow(3, m.get(2, 0).expect("label") as i64) * e(n1);
    }
    amp.norm_sqr() / (3.0 * 2f64.powi(m.n() as i32))
}

/// Closed-form `Q̃` for the builtin fiducial or the GHZ state.
pub fn q_tilde_analytic(state: AnalyticState, space: &MeasurementSpace) -> Result<QTilde> {
    let d = space.d;
    if d != 2 && d != 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    match state {
        AnalyticState::Fiducial => q_tilde_symmetric(space, |c| Ok(fiducial_q(d, &c.m))),
        AnalyticState::Ghz => q_tilde_symmetric(space, |c| {
            Ok(if d == 2 { ghz_q_qubit(&c.m) } else { ghz_q_qutrit(&c.m) })
        }),
    }
}

/// GHZ `Q̃` through the general form for any uniform fiducial.
pub fn q_tilde_ghz(fid: &Fiducial, space: &MeasurementSpace) -> Result<QTilde> {
    if fid.d() != space.d {
        return Err(Error::Dimension("fiducial and measurement space disagree on d".into()));
    }
    q_tilde_symmetric(space, |c| ghz_q_general(fid, &c.m, &c.beta_counts()))
}

/// The weight labels in storage order, re-exported for table headers.
pub fn labels(d: u32) -> Vec<(u32, u32)> {
    weight_labels(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{ghz_state, projector};
    use crate::phase_space::p_symbol_collective_monomial;
    use crate::zd::all_strings;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wv(d: u32, n: usize, e: &[u32]) -> WeightVector {
        WeightVector::new(d, n, e.to_vec()).unwrap()
    }

    #[test]
    fn qubit_pair_space() {
        let space = MeasurementSpace::enumerate(2, 2).unwrap();
        assert_eq!(space.len(), 10);
        assert_eq!(space.multiplicity(&wv(2, 2, &[0, 1, 1])), BigUint::from(2u32));
        assert_eq!(space.multiplicity(&wv(2, 2, &[0, 0, 0])), BigUint::one());
        assert_eq!(space.total_multiplicity(), BigUint::from(16u32));
    }

    #[test]
    fn multiplet_counts() {
        assert_eq!(count_multiplets(2, 1), BigUint::from(4u32));
        assert_eq!(count_multiplets(2, 2), BigUint::from(10u32));
        assert_eq!(count_multiplets(3, 1), BigUint::from(9u32));
        let big = count_multiplets(3, 200);
        assert_eq!(big, binomial(208, 8));
    }

    #[test]
    fn enumeration_matches_occupations() {
        for (d, n) in [(2u32, 1usize), (2, 2), (2, 3), (2, 4), (2, 5), (2, 6), (3, 1), (3, 2), (3, 3)] {
            let brute = MeasurementSpace::enumerate(d, n).unwrap();
            let fast = MeasurementSpace::from_occupations(d, n).unwrap();
            assert_eq!(brute, fast, "d={d} n={n}");
            assert_eq!(BigUint::from(brute.len()), count_multiplets(d, n));
            assert_eq!(brute.total_multiplicity(), BigUint::from(d).pow(2 * n as u32));
            for c in brute.classes() {
                assert_eq!(r_closed(d, &c.m, n).unwrap(), c.multiplicity, "d={d} n={n} m={}", c.m);
            }
        }
    }

    #[test]
    fn r_closed_examples() {
        assert_eq!(r_closed(2, &wv(2, 2, &[0, 1, 1]), 2).unwrap(), BigUint::from(2u32));
        assert_eq!(r_closed(2, &wv(2, 1, &[1, 1, 0]), 1).unwrap(), BigUint::one());
        assert_eq!(r_closed(3, &WeightVector::zero(3, 5).unwrap(), 5).unwrap(), BigUint::one());
        // odd parity sum is unreachable for qubits
        assert_eq!(r_closed(2, &wv(2, 2, &[1, 0, 0]), 2).unwrap(), BigUint::zero());
        assert!(matches!(r_closed(5, &WeightVector::zero(5, 1).unwrap(), 1), Err(Error::UnsupportedDimension(5))));
    }

    #[test]
    fn gaussian_peak_and_symmetry() {
        assert_eq!(r_gaussian(2, &[5.0, 5.0, 5.0], 10).unwrap(), 1.0);
        assert_eq!(r_gaussian(3, &[7.0; 8], 7).unwrap(), 1.0);
        let m = [3.0, 6.0, 4.5];
        let mirrored: Vec<f64> = m.iter().map(|x| 10.0 - x).collect();
        assert!((r_gaussian(2, &m, 10).unwrap() - r_gaussian(2, &mirrored, 10).unwrap()).abs() < 1e-15);
        let m3 = [5.0, 8.0, 6.0, 7.5, 9.0, 4.0, 7.0, 6.5];
        let mirrored3: Vec<f64> = m3.iter().map(|x| 14.0 - x).collect();
        assert!((r_gaussian(3, &m3, 7).unwrap() - r_gaussian(3, &mirrored3, 7).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_tracks_qubit_multiplicities() {
        let n = 40usize;
        let q0 = wv(2, n, &[20, 20, 20]);
        let peak = r_closed(2, &q0, n).unwrap().to_f64().unwrap();
        let radius = (n as f64).sqrt() / 2.0;
        let mut checked = 0;
        for a in 16..=24u32 {
            for b in 16..=24u32 {
                for c in 16..=24u32 {
                    let dist = ((a as f64 - 20.0).powi(2) + (b as f64 - 20.0).powi(2) + (c as f64 - 20.0).powi(2)).sqrt();
                    if dist > radius {
                        continue;
                    }
                    let r = r_closed(2, &wv(2, n, &[a, b, c]), n).unwrap().to_f64().unwrap();
                    if r == 0.0 {
                        continue;
                    }
                    let g = r_gaussian(2, &[a as f64, b as f64, c as f64], n).unwrap();
                    assert!((r / peak / g - 1.0).abs() < 0.1, "m=({a},{b},{c})");
                    checked += 1;
                }
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn q_tilde_of_maximally_mixed_and_fiducial() {
        let (d, n) = (2u32, 2usize);
        let space = MeasurementSpace::enumerate(d, n).unwrap();
        let fid = Fiducial::builtin(d, n).unwrap();
        let rho = Operator::identity(4, 4) / C64::new(4.0, 0.0);
        let qt = q_tilde(&rho, &fid, &space).unwrap();
        for (c, (_, v)) in space.classes().iter().zip(qt.entries()) {
            assert!((v - c.multiplicity_f64 / 4.0).abs() < 1e-12);
        }
        let fid1 = Fiducial::builtin(2, 1).unwrap();
        let space1 = MeasurementSpace::enumerate(2, 1).unwrap();
        let xi = projector(&fid1.state().unwrap());
        let qt = q_tilde(&xi, &fid1, &space1).unwrap();
        assert!((qt.get(&wv(2, 1, &[1, 0, 1])).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((qt.get(&wv(2, 1, &[0, 0, 0])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q_tilde_sums_and_symmetric_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (d, n) in [(2u32, 3usize), (3, 2)] {
            let dim = checked_dim(d, n).unwrap();
            let space = MeasurementSpace::enumerate(d, n).unwrap();
            let fid = Fiducial::builtin(d, n).unwrap();
            let a = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let rho = &a * a.adjoint();
            let rho = &rho / rho.trace();
            let qt = q_tilde(&rho, &fid, &space).unwrap();
            assert!((qt.total() - dim as f64).abs() < 1e-8);
            assert!(qt.values().all(|v| v >= -1e-12));

            let ghz = projector(&ghz_state(d, n).unwrap());
            let full = q_tilde(&ghz, &fid, &space).unwrap();
            let sym = q_tilde_symmetric_state(&ghz, &fid, &space).unwrap();
            let analytic = q_tilde_analytic(AnalyticState::Ghz, &space).unwrap();
            let general = q_tilde_ghz(&fid, &space).unwrap();
            for i in 0..space.len() {
                let f = full.entries()[i].1;
                assert!((f - sym.entries()[i].1).abs() < 1e-10);
                assert!((f - analytic.entries()[i].1).abs() < 1e-8);
                assert!((f - general.entries()[i].1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn analytic_ghz_matches_scan_for_small_registers() {
        for (d, n) in [(2u32, 1usize), (2, 2), (2, 4), (3, 1)] {
            let space = MeasurementSpace::enumerate(d, n).unwrap();
            let fid = Fiducial::builtin(d, n).unwrap();
            let full = q_tilde(&projector(&ghz_state(d, n).unwrap()), &fid, &space).unwrap();
            let analytic = q_tilde_analytic(AnalyticState::Ghz, &space).unwrap();
            for (x, y) in full.values().zip(analytic.values()) {
                assert!((x - y).abs() < 1e-8, "d={d} n={n}");
            }
        }
    }

    #[test]
    fn analytic_fiducial_matches_scan() {
        for (d, n) in [(2u32, 1usize), (2, 3), (3, 2)] {
            let space = MeasurementSpace::enumerate(d, n).unwrap();
            let fid = Fiducial::builtin(d, n).unwrap();
            let full = q_tilde(&projector(&fid.state().unwrap()), &fid, &space).unwrap();
            let analytic = q_tilde_analytic(AnalyticState::Fiducial, &space).unwrap();
            for (x, y) in full.values().zip(analytic.values()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        let space = MeasurementSpace::enumerate(2, 1).unwrap();
        let analytic = q_tilde_analytic(AnalyticState::Fiducial, &space).unwrap();
        assert_eq!(analytic.get(&wv(2, 1, &[0, 0, 0])).unwrap(), 1.0);
    }

    #[test]
    fn qubit_ghz_clusters() {
        for n in [8usize, 12, 16] {
            let space = MeasurementSpace::from_occupations(2, n).unwrap();
            let qt = q_tilde_analytic(AnalyticState::Ghz, &space).unwrap();
            let marginal = qt.marginal(&[(0, 1)]).unwrap();
            let half = n as u32 / 2;
            let argmax = |range: std::ops::Range<u32>| {
                range
                    .max_by(|a, b| marginal[&vec![*a]].total_cmp(&marginal[&vec![*b]]))
                    .unwrap()
            };
            let lo = argmax(0..half);
            let hi = argmax(half + 1..n as u32 + 1);
            let s = 1.0 / 3f64.sqrt();
            let target_lo = (n as f64 * (1.0 - s) / 2.0).round() as i64;
            let target_hi = (n as f64 * (1.0 + s) / 2.0).round() as i64;
            assert!((lo as i64 - target_lo).abs() <= 1, "n={n} lo={lo}");
            assert!((hi as i64 - target_hi).abs() <= 1, "n={n} hi={hi}");
        }
    }

    #[test]
    fn qutrit_ghz_clusters_in_m01_m02_plane() {
        let n = 6usize;
        let space = MeasurementSpace::from_occupations(3, n).unwrap();
        let qt = q_tilde_analytic(AnalyticState::Ghz, &space).unwrap();
        let plane = qt.marginal(&[(0, 1), (0, 2)]).unwrap();
        let nz: Vec<&Vec<u32>> = plane.iter().filter(|(_, v)| **v > 1e-12).map(|(k, _)| k).collect();
        for k in &nz {
            let (h1, h2) = (k[0], k[1]);
            assert!(h1 == 2 * h2 || h2 == 2 * h1 || h1 + h2 == 3 * n as u32, "{k:?}");
        }
        let mass = |pred: &dyn Fn(u32, u32) -> bool| plane.iter().filter(|(k, _)| pred(k[0], k[1])).map(|(_, v)| v).sum::<f64>();
        let near = |h1: u32, h2: u32, c1: f64, c2: f64| (h1 as f64 - c1).abs() <= n as f64 / 2.0 && (h2 as f64 - c2).abs() <= n as f64 / 2.0;
        let nf = n as f64;
        for (c1, c2) in [(nf, nf / 2.0), (nf / 2.0, nf), (1.5 * nf, 1.5 * nf)] {
            assert!(mass(&|a, b| near(a, b, c1, c2)) > 0.2 * qt.total());
        }
    }

    #[test]
    fn collective_average_from_q_tilde() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (d, n) = (2u32, 3usize);
        let space = MeasurementSpace::enumerate(d, n).unwrap();
        let fid = Fiducial::builtin(d, n).unwrap();
        let a = DMatrix::from_fn(8, 8, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let rho = &a * a.adjoint();
        let rho = &rho / rho.trace();
        let qt = q_tilde(&rho, &fid, &space).unwrap();
        for (mm, nn) in [(0u32, 1u32), (1, 0), (1, 1)] {
            let mut s = Operator::zeros(8, 8);
            for site in 0..n {
                let mut al = vec![0; n];
                let mut be = vec![0; n];
                al[site] = mm;
                be[site] = nn;
                crate::ops::add_monomial(&mut s, C64::new(1.0, 0.0), &DString::new(d, al).unwrap(), &DString::new(d, be).unwrap()).unwrap();
            }
            let direct = crate::linalg::trace_product(&rho, &s);
            let mut via = C64::new(0.0, 0.0);
            for (c, (_, q)) in space.classes().iter().zip(qt.entries()) {
                let (alpha, beta) = c.representative();
                via += p_symbol_collective_monomial(mm, nn, &fid, alpha, beta).unwrap() * *q;
            }
            assert!((via - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn fiducial_class_value_is_class_constant() {
        let (d, n) = (3u32, 2usize);
        let fid = Fiducial::builtin(d, n).unwrap();
        let xi = projector(&fid.state().unwrap());
        let strings = all_strings(d, n).unwrap();
        for alpha in &strings {
            for beta in &strings {
                let m = weight_vector(alpha, beta).unwrap();
                let q = crate::phase_space::q_symbol(&xi, &fid, alpha, beta).unwrap().re;
                assert!((q - fiducial_q(d, &m)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn class_members_have_the_class_weight() {
        let space = MeasurementSpace::enumerate(3, 3).unwrap();
        let mut total = 0;
        for c in space.classes() {
            let members = c.members();
            assert_eq!(BigUint::from(members.len()), c.multiplicity);
            for (a, b) in &members {
                assert_eq!(weight_vector(a, b).unwrap(), c.m);
            }
            total += members.len();
        }
        assert_eq!(total, 729);
    }

    #[test]
    fn large_register_capacity() {
        assert!(MeasurementSpace::from_occupations(2, 32).is_ok());
        assert!(matches!(MeasurementSpace::from_occupations(3, 40), Err(Error::Capacity { .. })));
    }
}
