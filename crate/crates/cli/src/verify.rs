//! Invariant suites run by `qmacro verify`.

use qmacro::collective::{collective_op, commuting_sets, single_particle_op};
use qmacro::estimation::{random_symmetric_state_with, stream_rng, Ensemble};
use qmacro::fiducial::{builtin_coefficients, sic_check, Fiducial};
use qmacro::linalg::{hermiticity_residual, max_abs_diff, trace_product};
use qmacro::macro_space::{q_tilde, MeasurementSpace};
use qmacro::ops::{basis_state, projector, Operator, C64};
use qmacro::phase_space::{kernel_by_monomial_sum, KernelCache, KernelSign};
use qmacro::symmetric::SymTomography;
use qmacro::tomography::{fidelity, reconstruct_full, symmetrize};
use qmacro::zd::{all_strings, checked_dim, weight_labels, DString};
use qmacro::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Sic,
    Kernels,
    Collective,
    Tomography,
    Symmetric,
    All,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
}

impl Check {
    fn new(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tol,
        }
    }

    pub fn passed(&self) -> bool {
        self.residual.is_finite() && self.residual < self.tol
    }
}

pub fn run(suite: Suite, fid: &Fiducial) -> Result<Vec<Check>> {
    let suites = match suite {
        Suite::All => vec![Suite::Sic, Suite::Kernels, Suite::Collective, Suite::Tomography, Suite::Symmetric],
        s => vec![s],
    };
    let mut out = Vec::new();
    for s in suites {
        out.extend(match s {
            Suite::Sic => sic(fid)?,
            Suite::Kernels => kernels(fid)?,
            Suite::Collective => collective(fid)?,
            Suite::Tomography => tomography(fid)?,
            Suite::Symmetric => symmetric(fid)?,
            Suite::All => unreachable!(),
        });
    }
    Ok(out)
}

fn sic(fid: &Fiducial) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for i in 0..fid.n() {
        if i > 0 && fid.is_uniform() {
            break;
        }
        let report = sic_check(fid.site(i))?;
        out.push(Check::new(format!("sic overlaps (site {i}, d = {})", fid.d()), report.max_deviation, 1e-10));
    }
    if let Ok(builtin) = builtin_coefficients(fid.d()) {
        let diff = (0..fid.n()).map(|i| (fid.site(i) - &builtin).norm()).fold(0.0, f64::max);
        if diff > 1e-12 {
            out.push(Check::new("builtin fiducial sic overlaps", sic_check(&builtin)?.max_deviation, 1e-10));
        }
    }
    Ok(out)
}

fn kernels(fid: &Fiducial) -> Result<Vec<Check>> {
    let (d, n) = (fid.d(), fid.n());
    let dim = checked_dim(d, n)?;
    let cache = KernelCache::new(fid.clone())?;
    let strings = all_strings(d, n)?;
    let points: Vec<(&DString, &DString)> = strings.iter().flat_map(|a| strings.iter().map(move |b| (a, b))).collect();
    let mut duality = 0.0f64;
    for (i, (a, b)) in points.iter().enumerate() {
        let plus = cache.get(KernelSign::Plus, a, b)?;
        for (j, (a2, b2)) in points.iter().enumerate() {
            let minus = cache.get(KernelSign::Minus, a2, b2)?;
            let target = if i == j { 1.0 } else { 0.0 };
            duality = duality.max((trace_product(plus, minus) - C64::new(target, 0.0)).norm());
        }
    }
    let mut sum_plus = Operator::zeros(dim, dim);
    let mut sum_minus = Operator::zeros(dim, dim);
    let mut oracle = 0.0f64;
    for (a, b) in &points {
        sum_plus += cache.get(KernelSign::Plus, a, b)?;
        sum_minus += cache.get(KernelSign::Minus, a, b)?;
    }
    for (a, b) in points.iter().take(16) {
        for sign in [KernelSign::Plus, KernelSign::Minus] {
            oracle = oracle.max(max_abs_diff(cache.get(sign, a, b)?, &kernel_by_monomial_sum(sign, fid, a, b)?));
        }
    }
    let identity = Operator::identity(dim, dim);
    Ok(vec![
        Check::new("kernel bi-orthogonality", duality, 1e-10),
        Check::new("sum of dual kernels = I", max_abs_diff(&sum_plus, &identity), 1e-10),
        Check::new("sum of coherent projectors = d^N I", max_abs_diff(&sum_minus, &(identity * C64::new(dim as f64, 0.0))), 1e-10),
        Check::new("product kernels = monomial sums", oracle, 1e-10),
    ])
}

fn collective(fid: &Fiducial) -> Result<Vec<Check>> {
    let d = fid.d();
    let single = fid.resized(1)?;
    let expected = d as f64 / (3.0 * (d as f64 - 1.0));
    let (mut norm, mut herm, mut cyc, mut orth) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let labels = weight_labels(d);
    let ops: Vec<Operator> = labels.iter().map(|&(k, l)| single_particle_op(k, l, &single, 0)).collect::<Result<_>>()?;
    for op in &ops {
        herm = herm.max(hermiticity_residual(op)).max(op.trace().norm());
        norm = norm.max((trace_product(op, op).re - expected).abs());
        if d == 3 {
            cyc = cyc.max(max_abs_diff(op, &(op * op * op * C64::new(4.0, 0.0))));
        }
    }
    for (i, &(k, l)) in labels.iter().enumerate() {
        for (j, &(k2, l2)) in labels.iter().enumerate() {
            if (k2 * l) % d != (k * l2) % d {
                orth = orth.max(trace_product(&ops[i], &ops[j]).norm());
            }
        }
    }
    let mut commute = 0.0f64;
    if checked_dim(d, fid.n()).is_ok_and(|dim| dim <= 729) {
        for set in commuting_sets(d)? {
            let built: Vec<Operator> = set.iter().map(|&(k, l)| collective_op(k, l, fid)).collect::<Result<_>>()?;
            for a in &built {
                for b in &built {
                    commute = commute.max(max_abs_diff(&(a * b), &(b * a)));
                }
            }
        }
    }
    let mut out = vec![
        Check::new("single-particle operators Hermitian and traceless", herm, 1e-10),
        Check::new(format!("Tr(O²) = {expected:.6}"), norm, 1e-10),
        Check::new("trace orthogonality across commuting sets", orth, 1e-10),
        Check::new("commuting sets commute", commute, 1e-10),
    ];
    if d == 3 {
        out.push(Check::new("qutrit cyclicity O = 4 O³", cyc, 1e-10));
    }
    Ok(out)
}

fn tomography(fid: &Fiducial) -> Result<Vec<Check>> {
    let (d, n) = (fid.d(), fid.n());
    let dim = checked_dim(d, n)?;
    let space = MeasurementSpace::build(d, n)?;
    let mut rng = stream_rng(2024, 0);
    let mut err = 0.0f64;
    for _ in 0..3 {
        let rho = random_symmetric_state_with(Ensemble::Mixed, dim, &mut rng);
        let rec = reconstruct_full(&q_tilde(&rho, fid, &space)?, fid, &space)?;
        err = err.max(max_abs_diff(&rec, &symmetrize(&rho, d, n)?));
    }
    let mut out = vec![Check::new("reconstruction equals symmetrization", err, 1e-8)];
    if n >= 2 {
        let mut digits = vec![0u32; n];
        digits[1] = 1;
        let v = basis_state(&DString::new(d, digits)?)?;
        let rho = projector(&v);
        let rec = reconstruct_full(&q_tilde(&rho, fid, &space)?, fid, &space)?;
        out.push(Check::new("fidelity of |0,1,0…⟩ = (N−1)!/N!", (fidelity(&rho, &rec) - 1.0 / n as f64).abs(), 1e-10));
    }
    Ok(out)
}

fn symmetric(fid: &Fiducial) -> Result<Vec<Check>> {
    let tomo = SymTomography::for_fiducial(fid.clone())?;
    let dsym = tomo.basis().dim();
    let mut total = Operator::zeros(dsym, dsym);
    for e in tomo.povm() {
        total += e;
    }
    let completeness = max_abs_diff(&total, &Operator::identity(dsym, dsym));
    let mut rng = stream_rng(2025, 0);
    let (mut round_trip, mut redundancy) = (0.0f64, 0.0f64);
    for i in 0..5 {
        let kind = if i % 2 == 0 { Ensemble::Pure } else { Ensemble::Mixed };
        let rho = random_symmetric_state_with(kind, dsym, &mut rng);
        let sigma = tomo.probabilities(&rho)?;
        round_trip = round_trip.max(max_abs_diff(&tomo.reconstruct(&sigma)?, &rho));
        redundancy = redundancy.max(tomo.redundancy_violation(&sigma)?);
    }
    Ok(vec![
        Check::new("POVM completeness", completeness, 1e-10),
        Check::new("symmetric round trip", round_trip, 1e-8),
        Check::new("redundancy conditions on exact data", redundancy, 1e-8),
        Check::new("projected kernels Hermitian", tomo.kernel_hermiticity_residual(), 1e-10),
    ])
}
