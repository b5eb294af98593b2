//! Finite-statistics simulation of the collective protocol: multinomial
//! sampling, linear-inversion estimates, the error matrix `A`, the
//! Cramér-Rao bound, and `λ/√M` fits against a product-SIC baseline.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiducial::Fiducial;
use crate::linalg::{hermitian_eigenvalues, pseudo_inverse_real, trace_product};
use crate::ops::{Operator, StateVector, C64};
use crate::symmetric::{phi_of_pair, projected_point_kernel, SymBasis, SymTomography};
use crate::zd::all_strings;

/// Probability vectors must sum to one within this tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Largest number of outcomes the product-SIC baseline will enumerate.
pub const MAX_SIC_OUTCOMES: usize = 1 << 18;

/// Relative singular-value cutoff for the Fisher pseudo-inverse.
pub const FISHER_RCOND: f64 = 1e-10;

/// A rank-one POVM `{w_i |φ_i⟩⟨φ_i|}` on `H_sym` with linear inversion
/// `ρ̃ = s Σ_i p̃_i K_i`.
pub trait Protocol: Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn outcomes(&self) -> usize;
    fn element(&self, index: usize) -> (f64, &StateVector);
    fn inversion_kernel(&self, index: usize) -> &Operator;
    fn inversion_scale(&self) -> f64;

    fn probabilities(&self, rho: &Operator) -> Result<Vec<f64>> {
        if rho.shape() != (self.dim(), self.dim()) {
            return Err(Error::Dimension(format!("state must be {0}×{0}", self.dim())));
        }
        Ok((0..self.outcomes())
            .map(|i| {
                let (w, phi) = self.element(i);
                w * phi.dotc(&(rho * phi)).re
            })
            .collect())
    }

    fn reconstruct(&self, freqs: &[f64]) -> Result<Operator> {
        if freqs.len() != self.outcomes() {
            return Err(Error::IncompleteData(format!("{} frequencies for {} outcomes", freqs.len(), self.outcomes())));
        }
        let mut out = Operator::zeros(self.dim(), self.dim());
        for (i, &f) in freqs.iter().enumerate() {
            if f != 0.0 {
                out += self.inversion_kernel(i) * C64::new(f * self.inversion_scale(), 0.0);
            }
        }
        Ok(out)
    }
}

impl Protocol for SymTomography {
    fn name(&self) -> &'static str {
        "collective"
    }

    fn dim(&self) -> usize {
        self.basis().dim()
    }

    fn outcomes(&self) -> usize {
        SymTomography::outcomes(self)
    }

    fn element(&self, index: usize) -> (f64, &StateVector) {
        (self.space().classes()[index].multiplicity_f64 / self.scale(), self.phi(index))
    }

    fn inversion_kernel(&self, index: usize) -> &Operator {
        self.point_kernel(index)
    }

    fn inversion_scale(&self) -> f64 {
        self.scale()
    }
}

/// The product-SIC protocol `{d^{−N} |α,β⟩⟨α,β|}` restricted to `H_sym`,
/// inverted with `Π_s Δ⁺(α,β) Π_s`.
#[derive(Debug, Clone)]
pub struct SicTomography {
    dim: usize,
    scale: f64,
    phis: Vec<StateVector>,
    kernels: Vec<Operator>,
}

impl SicTomography {
    pub fn new(fid: &Fiducial) -> Result<Self> {
        fid.ensure_invertible()?;
        let (d, n) = (fid.d(), fid.n());
        let outcomes = (d as u128).checked_pow(2 * n as u32).unwrap_or(u128::MAX);
        if outcomes > MAX_SIC_OUTCOMES as u128 {
            return Err(Error::Capacity {
                requested: outcomes,
                limit: MAX_SIC_OUTCOMES,
            });
        }
        let basis = SymBasis::new(d, n)?;
        let strings = all_strings(d, n)?;
        let pairs: Vec<_> = strings.iter().flat_map(|a| strings.iter().map(move |b| (a, b))).collect();
        let built = pairs
            .par_iter()
            .map(|(a, b)| Ok((phi_of_pair(&basis, fid, a, b)?, projected_point_kernel(&basis, fid, a, b)?)))
            .collect::<Result<Vec<_>>>()?;
        let (phis, kernels) = built.into_iter().unzip();
        Ok(Self {
            dim: basis.dim(),
            scale: (d as f64).powi(n as i32),
            phis,
            kernels,
        })
    }
}

impl Protocol for SicTomography {
    fn name(&self) -> &'static str {
        "sic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn outcomes(&self) -> usize {
        self.phis.len()
    }

    fn element(&self, index: usize) -> (f64, &StateVector) {
        (1.0 / self.scale, &self.phis[index])
    }

    fn inversion_kernel(&self, index: usize) -> &Operator {
        &self.kernels[index]
    }

    fn inversion_scale(&self) -> f64 {
        self.scale
    }
}

/// Outcome counts from `M` repetitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub counts: Vec<u64>,
    pub trials: u64,
}

impl SampleRecord {
    pub fn new(counts: Vec<u64>) -> Self {
        let trials = counts.iter().sum();
        Self { counts, trials }
    }

    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if self.trials == 0 {
            return Err(Error::Domain("no trials: the estimate is undefined".into()));
        }
        Ok(self.counts.iter().map(|&c| c as f64 / self.trials as f64).collect())
    }
}

/// Deterministic generator for a given seed and stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Multinomial draw of `trials` outcomes by sequential conditional binomials.
pub fn sample_counts_with(sigma: &[f64], trials: u64, rng: &mut ChaCha8Rng) -> Result<SampleRecord> {
    let total: f64 = sigma.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL || sigma.iter().any(|&s| s < -NORMALIZATION_TOL || !s.is_finite()) {
        return Err(Error::Domain(format!("not a probability vector (sum {total})")));
    }
    let mut counts = vec![0u64; sigma.len()];
    let mut remaining = trials;
    let mut mass = 1.0f64;
    for (i, &s) in sigma.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let s = s.max(0.0);
        let draw = if i + 1 == sigma.len() || mass <= s {
            remaining
        } else {
            let p = (s / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, p)
                .map_err(|e| Error::Domain(e.to_string()))?
                .sample(rng)
        };
        counts[i] = draw;
        remaining -= draw;
        mass -= s;
    }
    Ok(SampleRecord { counts, trials })
}

/// [`sample_counts_with`] on the stream `(seed, stream)`.
pub fn sample_counts(sigma: &[f64], trials: u64, seed: u64, stream: u64) -> Result<SampleRecord> {
    sample_counts_with(sigma, trials, &mut stream_rng(seed, stream))
}

/// Linear-inversion estimate from observed counts.
pub fn estimate_state(protocol: &dyn Protocol, record: &SampleRecord) -> Result<Operator> {
    protocol.reconstruct(&record.frequencies()?)
}

/// Smallest eigenvalue of a (possibly non-positive) estimate.
pub fn eigenvalue_floor(rho: &Operator) -> f64 {
    hermitian_eigenvalues(rho).first().copied().unwrap_or(0.0)
}

/// `Tr[(ρ − ρ̃)²]`.
pub fn hs_distance_sq(rho: &Operator, other: &Operator) -> Result<f64> {
    if rho.shape() != other.shape() {
        return Err(Error::Dimension("states have different sizes".into()));
    }
    let diff = rho - other;
    Ok(trace_product(&diff, &diff).re.max(0.0))
}

/// `A_{pq} = s² Tr(K_p K_q)`, so that `Tr[(ρ−ρ̃)²] = Σ A_{pq} Δσ_p Δσ_q`.
pub fn a_matrix(protocol: &dyn Protocol) -> DMatrix<f64> {
    let n = protocol.outcomes();
    let s2 = protocol.inversion_scale().powi(2);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|p| {
            (0..n)
                .map(|q| s2 * trace_product(protocol.inversion_kernel(p), protocol.inversion_kernel(q)).re)
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |p, q| 0.5 * (rows[p][q] + rows[q][p]))
}

/// Exact mean squared Hilbert-Schmidt error of linear inversion,
/// `(1/M)[Σ_p A_pp σ_p − σᵀAσ]`.
pub fn linear_inversion_mse(a: &DMatrix<f64>, sigma: &[f64], trials: u64) -> f64 {
    let n = sigma.len();
    let diag: f64 = (0..n).map(|p| a[(p, p)] * sigma[p]).sum();
    let mut quad = 0.0;
    for p in 0..n {
        for q in 0..n {
            quad += sigma[p] * a[(p, q)] * sigma[q];
        }
    }
    (diag - quad) / trials as f64
}

/// Orthonormal traceless Hermitian basis of `dim × dim` matrices.
pub fn traceless_hermitian_basis(dim: usize) -> Vec<Operator> {
    let mut out = Vec::with_capacity(dim * dim - 1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in i + 1..dim {
            let mut sym = Operator::zeros(dim, dim);
            sym[(i, j)] = C64::new(s, 0.0);
            sym[(j, i)] = C64::new(s, 0.0);
            out.push(sym);
            let mut anti = Operator::zeros(dim, dim);
            anti[(i, j)] = C64::new(0.0, -s);
            anti[(j, i)] = C64::new(0.0, s);
            out.push(anti);
        }
    }
    for k in 1..dim {
        let norm = 1.0 / ((k * (k + 1)) as f64).sqrt();
        let mut diag = Operator::zeros(dim, dim);
        for j in 0..k {
            diag[(j, j)] = C64::new(norm, 0.0);
        }
        diag[(k, k)] = C64::new(-(k as f64) * norm, 0.0);
        out.push(diag);
    }
    out
}

/// Cramér-Rao bound on the mean squared Hilbert-Schmidt error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CramerRao {
    pub mse: f64,
    /// Rank of the Fisher matrix; `d_sym² − 1` when every direction is identifiable.
    pub rank: usize,
    pub parameters: usize,
}

/// `Tr F⁺` in the orthonormal chart `ρ = I/d_sym + Σ θ_j G_j`, where the
/// Hilbert-Schmidt metric is the identity and
/// `F_{jk} = M Σ_{σ_m > 0} ∂_j σ_m ∂_k σ_m / σ_m`.
pub fn cramer_rao_mse(protocol: &dyn Protocol, rho: &Operator, trials: u64) -> Result<CramerRao> {
    if trials == 0 {
        return Err(Error::Domain("the bound needs at least one trial".into()));
    }
    let sigma = protocol.probabilities(rho)?;
    let dim = protocol.dim();
    let basis = traceless_hermitian_basis(dim);
    let k = basis.len();
    if k == 0 {
        return Ok(CramerRao {
            mse: 0.0,
            rank: 0,
            parameters: 0,
        });
    }
    let cutoff = 1e-14 * sigma.iter().copied().fold(0.0, f64::max);
    let rows: Vec<Vec<f64>> = (0..protocol.outcomes())
        .into_par_iter()
        .filter(|&m| sigma[m] > cutoff)
        .map(|m| {
            let (w, phi) = protocol.element(m);
            let scale = 1.0 / sigma[m].sqrt();
            basis.iter().map(|g| scale * w * phi.dotc(&(g * phi)).re).collect()
        })
        .collect();
    let mut fisher = DMatrix::<f64>::zeros(k, k);
    for row in &rows {
        for i in 0..k {
            for j in 0..k {
                fisher[(i, j)] += row[i] * row[j];
            }
        }
    }
    fisher *= trials as f64;
    let (pinv, rank) = pseudo_inverse_real(&fisher, FISHER_RCOND);
    Ok(CramerRao {
        mse: pinv.trace().max(0.0),
        rank,
        parameters: k,
    })
}

/// Least-squares fit of `log √MSE = log λ + slope · log M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaFit {
    pub lambda: f64,
    pub slope: f64,
}

pub fn lambda_fit(points: &[(f64, f64)]) -> Result<LambdaFit> {
    let mut ms: Vec<f64> = points.iter().map(|p| p.0).collect();
    ms.sort_by(f64::total_cmp);
    ms.dedup();
    if ms.len() < 3 {
        return Err(Error::Fit("need at least three distinct trial counts".into()));
    }
    if points.iter().any(|&(m, e)| !(m > 0.0 && e > 0.0 && e.is_finite())) {
        return Err(Error::Fit("trial counts and errors must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| 0.5 * p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(LambdaFit {
        lambda: (my - slope * mx).exp(),
        slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    Pure,
    Mixed,
}

impl Ensemble {
    pub fn name(self) -> &'static str {
        match self {
            Ensemble::Pure => "pure",
            Ensemble::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure" => Ok(Ensemble::Pure),
            "mixed" => Ok(Ensemble::Mixed),
            other => Err(Error::Input(format!("unknown ensemble {other:?}"))),
        }
    }
}

fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Haar-random pure state or Hilbert-Schmidt mixed state on `H_sym`.
pub fn random_symmetric_state_with(kind: Ensemble, dim: usize, rng: &mut ChaCha8Rng) -> Operator {
    match kind {
        Ensemble::Pure => {
            let v = StateVector::from_fn(dim, |_, _| complex_normal(rng));
            let v = &v / C64::new(v.norm(), 0.0);
            &v * v.adjoint()
        }
        Ensemble::Mixed => {
            let g = Operator::from_fn(dim, dim, |_, _| complex_normal(rng));
            let r = &g * g.adjoint();
            let t = r.trace();
            r / t
        }
    }
}

pub fn random_symmetric_state(kind: Ensemble, d: u32, n: usize, seed: u64) -> Result<Operator> {
    let dim = SymBasis::new(d, n)?.dim();
    Ok(random_symmetric_state_with(kind, dim, &mut stream_rng(seed, 0)))
}

/// One simulated squared error for the product-SIC protocol.
pub fn sic_baseline_mse(sic: &SicTomography, rho: &Operator, trials: u64, seed: u64) -> Result<f64> {
    simulate_mse(sic, rho, trials, seed, 0)
}

/// Squared Hilbert-Schmidt error of one linear-inversion estimate.
pub fn simulate_mse(protocol: &dyn Protocol, rho: &Operator, trials: u64, seed: u64, stream: u64) -> Result<f64> {
    let sigma = protocol.probabilities(rho)?;
    let total: f64 = sigma.iter().sum();
    let sigma: Vec<f64> = sigma.iter().map(|s| s.max(0.0) / total).collect();
    let record = sample_counts(&sigma, trials, seed, stream)?;
    hs_distance_sq(rho, &estimate_state(protocol, &record)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Collective,
    Sic,
}

impl std::str::FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "collective" => Ok(ProtocolKind::Collective),
            "sic" => Ok(ProtocolKind::Sic),
            other => Err(Error::Input(format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: Vec<u64>,
    pub ensemble: Ensemble,
    #[serde(default = "default_ensemble_size")]
    pub ensemble_size: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<ProtocolKind>,
}

fn default_ensemble_size() -> usize {
    200
}

fn default_repetitions() -> usize {
    1
}

fn default_protocols() -> Vec<ProtocolKind> {
    vec![ProtocolKind::Collective, ProtocolKind::Sic]
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials.is_empty() || self.trials.contains(&0) {
            return Err(Error::Input("every trial count must be at least 1".into()));
        }
        if self.ensemble_size == 0 || self.repetitions == 0 {
            return Err(Error::Input("ensemble size and repetitions must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub d: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub protocol: String,
    #[serde(rename = "M")]
    pub m: u64,
    pub mean_mse: f64,
    pub std_mse: f64,
    pub lambda: Option<f64>,
    pub slope: Option<f64>,
    pub seed: u64,
    pub ensemble: String,
}

// stream layout: state index in the high bits, then trial index, then repetition
fn sample_stream(state: usize, m_index: usize, rep: usize) -> u64 {
    ((state as u64) << 40) | ((m_index as u64) << 24) | (rep as u64 + 1)
}

/// RNG stream of the `state`-th ensemble member in [`run_experiment`].
pub fn state_stream(state: usize) -> u64 {
    (state as u64) << 40
}

/// Mean and spread of the squared error over the ensemble for every `M`,
/// with a `λ/√M` fit per protocol.
pub fn run_experiment(config: &ExperimentConfig, fid: &Fiducial) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    let basis = SymBasis::new(config.d, config.n)?;
    let states: Vec<Operator> = (0..config.ensemble_size)
        .map(|i| random_symmetric_state_with(config.ensemble, basis.dim(), &mut stream_rng(config.seed, state_stream(i))))
        .collect();
    let mut records = Vec::new();
    for kind in &config.protocols {
        let protocol: Box<dyn Protocol> = match kind {
            ProtocolKind::Collective => Box::new(SymTomography::for_fiducial(fid.clone())?),
            ProtocolKind::Sic => Box::new(SicTomography::new(fid)?),
        };
        let mut rows = Vec::new();
        for (mi, &m) in config.trials.iter().enumerate() {
            let per_state = states
                .par_iter()
                .enumerate()
                .map(|(si, rho)| {
                    let mut acc = 0.0;
                    for rep in 0..config.repetitions {
                        acc += simulate_mse(protocol.as_ref(), rho, m, config.seed, sample_stream(si, mi, rep))?;
                    }
                    Ok(acc / config.repetitions as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let n = per_state.len() as f64;
            let mean = per_state.iter().sum::<f64>() / n;
            let var = if per_state.len() > 1 {
                per_state.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            rows.push((m, mean, var.sqrt()));
        }
        let fit = lambda_fit(&rows.iter().map(|&(m, e, _)| (m as f64, e)).collect::<Vec<_>>()).ok();
        for (m, mean, std) in rows {
            records.push(BenchRecord {
                d: config.d,
                n: config.n,
                protocol: protocol.name().to_string(),
                m,
                mean_mse: mean,
                std_mse: std,
                lambda: fit.map(|f| f.lambda),
                slope: fit.map(|f| f.slope),
                seed: config.seed,
                ensemble: config.ensemble.name().to_string(),
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_residual, max_abs_diff};

    fn collective(d: u32, n: usize) -> SymTomography {
        SymTomography::for_fiducial(Fiducial::builtin(d, n).unwrap()).unwrap()
    }

    #[test]
    fn sampling_edge_cases() {
        let sigma = [0.25, 0.25, 0.5];
        let zero = sample_counts(&sigma, 0, 1, 0).unwrap();
        assert_eq!(zero.counts, vec![0, 0, 0]);
        assert!(zero.frequencies().is_err());
        let point = sample_counts(&[1.0, 0.0, 0.0], 50, 1, 0).unwrap();
        assert_eq!(point.counts, vec![50, 0, 0]);
        assert!(sample_counts(&[0.5, 0.4], 10, 1, 0).is_err());
        assert_eq!(sample_counts(&sigma, 1000, 9, 3).unwrap(), sample_counts(&sigma, 1000, 9, 3).unwrap());
        assert_ne!(sample_counts(&sigma, 1000, 9, 3).unwrap(), sample_counts(&sigma, 1000, 9, 4).unwrap());
    }

    #[test]
    fn sampling_moments() {
        let sigma = [0.1, 0.2, 0.3, 0.4];
        let (reps, m) = (10_000usize, 20u64);
        let mut rng = stream_rng(5, 0);
        let draws: Vec<Vec<f64>> = (0..reps)
            .map(|_| sample_counts_with(&sigma, m, &mut rng).unwrap().counts.iter().map(|&c| c as f64).collect())
            .collect();
        for p in 0..4 {
            let mean = draws.iter().map(|x| x[p]).sum::<f64>() / reps as f64;
            let sd = (m as f64 * sigma[p] * (1.0 - sigma[p]) / reps as f64).sqrt();
            assert!((mean - m as f64 * sigma[p]).abs() < 3.0 * sd);
            for q in 0..4 {
                let mq = draws.iter().map(|x| x[q]).sum::<f64>() / reps as f64;
                let products: Vec<f64> = draws.iter().map(|x| (x[p] - mean) * (x[q] - mq)).collect();
                let cov = products.iter().sum::<f64>() / (reps as f64 - 1.0);
                let var = products.iter().map(|v| (v - cov).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
                let expected = m as f64 * sigma[p] * (if p == q { 1.0 } else { 0.0 } - sigma[q]);
                let band = 3.0 * (var / reps as f64).sqrt();
                assert!((cov - expected).abs() < band, "p={p} q={q} cov={cov} expected={expected}");
            }
        }
    }

    #[test]
    fn hs_distance_examples() {
        let mut a = Operator::zeros(2, 2);
        a[(0, 0)] = C64::new(1.0, 0.0);
        let mut b = Operator::zeros(2, 2);
        b[(1, 1)] = C64::new(1.0, 0.0);
        assert_eq!(hs_distance_sq(&a, &a).unwrap(), 0.0);
        assert!((hs_distance_sq(&a, &b).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(hs_distance_sq(&a, &b).unwrap(), hs_distance_sq(&b, &a).unwrap());
        assert!(hs_distance_sq(&a, &Operator::zeros(3, 3)).is_err());
    }

    #[test]
    fn exact_frequencies_give_exact_state() {
        let tomo = collective(2, 3);
        let rho = random_symmetric_state(Ensemble::Mixed, 2, 3, 4).unwrap();
        let sigma = Protocol::probabilities(&tomo, &rho).unwrap();
        assert!(max_abs_diff(&Protocol::reconstruct(&tomo, &sigma).unwrap(), &rho) < 1e-9);
        let sic = SicTomography::new(&Fiducial::builtin(2, 3).unwrap()).unwrap();
        let p = sic.probabilities(&rho).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(max_abs_diff(&sic.reconstruct(&p).unwrap(), &rho) < 1e-9);
        let sic3 = SicTomography::new(&Fiducial::builtin(3, 1).unwrap()).unwrap();
        let rho3 = random_symmetric_state(Ensemble::Pure, 3, 1, 2).unwrap();
        assert!(max_abs_diff(&sic3.reconstruct(&sic3.probabilities(&rho3).unwrap()).unwrap(), &rho3) < 1e-9);
    }

    #[test]
    fn estimates_can_be_non_positive() {
        let tomo = collective(2, 2);
        let rho = random_symmetric_state(Ensemble::Pure, 2, 2, 8).unwrap();
        let sigma = Protocol::probabilities(&tomo, &rho).unwrap();
        let floor = (0..20)
            .map(|s| eigenvalue_floor(&estimate_state(&tomo, &sample_counts(&sigma, 30, 1, s).unwrap()).unwrap()))
            .fold(f64::INFINITY, f64::min);
        assert!(floor < 0.0);
    }

    #[test]
    fn a_matrix_properties() {
        for tomo in [collective(2, 2), collective(3, 2)] {
            let a = a_matrix(&tomo);
            assert!((&a - a.transpose()).abs().max() < 1e-10);
            let n = a.nrows();
            let centering = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64);
            let projected = &centering * &a * &centering;
            let ev = projected.symmetric_eigen().eigenvalues;
            assert!(ev.iter().all(|&x| x > -1e-9 * a.abs().max()));
            let rho = random_symmetric_state(Ensemble::Mixed, tomo.space().d(), tomo.space().n(), 3).unwrap();
            let sigma = Protocol::probabilities(&tomo, &rho).unwrap();
            let mut rng = stream_rng(77, 1);
            for _ in 0..5 {
                let raw: Vec<f64> = (0..n).map(|_| rand::Rng::random::<f64>(&mut rng) - 0.5).collect();
                let mean = raw.iter().sum::<f64>() / n as f64;
                let delta: Vec<f64> = raw.iter().map(|x| 1e-2 * (x - mean)).collect();
                let perturbed: Vec<f64> = sigma.iter().zip(&delta).map(|(s, e)| s + e).collect();
                let est = Protocol::reconstruct(&tomo, &perturbed).unwrap();
                let quad = (0..n).flat_map(|p| (0..n).map(move |q| (p, q))).map(|(p, q)| a[(p, q)] * delta[p] * delta[q]).sum::<f64>();
                let hs = hs_distance_sq(&rho, &est).unwrap();
                assert!((quad - hs).abs() < 1e-9 * hs.max(1.0), "quad {quad} hs {hs}");
            }
        }
    }

    #[test]
    fn cramer_rao_scaling_and_ordering() {
        let tomo = collective(2, 2);
        let rho = random_symmetric_state(Ensemble::Mixed, 2, 2, 11).unwrap();
        let b1 = cramer_rao_mse(&tomo, &rho, 1000).unwrap();
        let b2 = cramer_rao_mse(&tomo, &rho, 2000).unwrap();
        assert_eq!(b1.rank, 8);
        assert_eq!(b1.parameters, 8);
        assert!((b1.mse / b2.mse - 2.0).abs() < 1e-8);
        assert!(b1.mse >= 0.0);
        let a = a_matrix(&tomo);
        let sigma = Protocol::probabilities(&tomo, &rho).unwrap();
        let exact = linear_inversion_mse(&a, &sigma, 1000);
        assert!(b1.mse <= exact * (1.0 + 1e-9));
        let reps = 2000;
        let empirical = (0..reps).map(|r| simulate_mse(&tomo, &rho, 10_000, 21, r).unwrap()).sum::<f64>() / reps as f64;
        let bound = cramer_rao_mse(&tomo, &rho, 10_000).unwrap().mse;
        assert!(bound <= empirical * 1.1, "bound {bound} empirical {empirical}");
        assert!((empirical / linear_inversion_mse(&a, &sigma, 10_000) - 1.0).abs() < 0.1);
    }

    #[test]
    fn lambda_fit_examples() {
        let pts: Vec<(f64, f64)> = [100.0, 1000.0, 10_000.0].iter().map(|&m: &f64| (m, 0.49 / m)).collect();
        let fit = lambda_fit(&pts).unwrap();
        assert!((fit.lambda - 0.7).abs() < 1e-12);
        assert!((fit.slope + 0.5).abs() < 1e-12);
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(m, e)| (4.0 * m, e / 4.0)).collect();
        assert!((lambda_fit(&scaled).unwrap().lambda - 0.7).abs() < 1e-12);
        assert!(lambda_fit(&pts[..2]).is_err());
        assert!(lambda_fit(&[(10.0, 1.0), (10.0, 2.0), (10.0, 3.0)]).is_err());
    }

    #[test]
    fn random_states() {
        for kind in [Ensemble::Pure, Ensemble::Mixed] {
            let rho = random_symmetric_state(kind, 2, 3, 6).unwrap();
            assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
            assert!(hermiticity_residual(&rho) < 1e-12);
            assert!(eigenvalue_floor(&rho) > -1e-12);
            assert_eq!(rho, random_symmetric_state(kind, 2, 3, 6).unwrap());
            let purity = trace_product(&rho, &rho).re;
            if kind == Ensemble::Pure {
                assert!((purity - 1.0).abs() < 1e-12);
            } else {
                assert!(purity < 1.0);
            }
        }
    }

    #[test]
    fn error_decreases_with_trials() {
        let tomo = collective(2, 2);
        let medians: Vec<f64> = [100u64, 1000, 10_000]
            .iter()
            .map(|&m| {
                let mut errs: Vec<f64> = (0..41)
                    .map(|s| {
                        let rho = random_symmetric_state(Ensemble::Pure, 2, 2, s).unwrap();
                        simulate_mse(&tomo, &rho, m, 3, s).unwrap()
                    })
                    .collect();
                errs.sort_by(f64::total_cmp);
                errs[20]
            })
            .collect();
        assert!(medians[0] > medians[1] && medians[1] > medians[2]);
    }

    #[test]
    fn simulated_slopes() {
        for (d, n) in [(2u32, 2usize), (3, 1)] {
            let config = ExperimentConfig {
                d,
                n,
                trials: vec![100, 1000, 10_000],
                ensemble: Ensemble::Pure,
                ensemble_size: 50,
                repetitions: 4,
                seed: 12,
                protocols: vec![ProtocolKind::Collective, ProtocolKind::Sic],
            };
            let records = run_experiment(&config, &Fiducial::builtin(d, n).unwrap()).unwrap();
            assert_eq!(records.len(), 6);
            for r in &records {
                let slope = r.slope.unwrap();
                assert!((-0.55..=-0.45).contains(&slope), "{r:?}");
            }
            let json = serde_json::to_string(&records[0]).unwrap();
            assert!(json.contains("\"N\"") && json.contains("\"M\"") && json.contains("mean_mse"));
        }
    }

    #[test]
    fn protocols_coincide_for_one_particle() {
        for d in [2u32, 3] {
            let fid = Fiducial::builtin(d, 1).unwrap();
            let coll = collective(d, 1);
            let sic = SicTomography::new(&fid).unwrap();
            let (a_coll, a_sic) = (a_matrix(&coll), a_matrix(&sic));
            for seed in 0..5 {
                let rho = random_symmetric_state(Ensemble::Mixed, d, 1, seed).unwrap();
                let x = linear_inversion_mse(&a_coll, &coll.probabilities(&rho).unwrap(), 100);
                let y = linear_inversion_mse(&a_sic, &Protocol::probabilities(&sic, &rho).unwrap(), 100);
                assert!((x - y).abs() < 1e-12 * x.max(1.0), "d={d} {x} {y}");
            }
        }
    }
}
