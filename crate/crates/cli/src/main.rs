//! `qmacro`: projected Q̃ tables, multiplicities, collective operators,
//! reconstructions and MSE benchmarks from the command line.

mod io;
mod states;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use qmacro::collective::{collective_op, single_particle_op};
use qmacro::estimation::{run_experiment, Ensemble, ExperimentConfig, ProtocolKind};
use qmacro::fiducial::{Fiducial, FiducialConfig};
use qmacro::linalg::max_abs_diff;
use qmacro::macro_space::{count_multiplets, q_tilde, q_tilde_symmetric, r_closed, MeasurementSpace, QTilde};
use qmacro::symmetric::{phi_of_pair, SymBasis, SymTomography};
use qmacro::tomography::{fidelity, reconstruct_full, symmetrize, MAX_SYMMETRIZE_N};
use qmacro::zd::{label_position, weight_label_names};
use qmacro::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::io::{csv_string, emit, matrix_to_json, read_manifest, read_weight_table, write_manifest, RunManifest};
use crate::states::{load, LoadedState, StateSpec};

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CAPACITY: u8 = 3;
const EXIT_INPUT: u8 = 4;

/// Classes enumerated by brute force below this many phase-space points.
const ENUMERATION_LIMIT: u128 = 1 << 22;

#[derive(Debug, Parser)]
#[command(name = "qmacro", version, about = "Macroscopic phase-space tools for N-qudit systems")]
struct Cli {
    /// Worker threads for the library's parallel loops.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; stdout when omitted. A manifest is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
struct System {
    /// Prime single-particle dimension.
    #[arg(long)]
    d: u32,
    /// Number of particles.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// JSON fiducial configuration; the builtin fiducial otherwise.
    #[arg(long)]
    fiducial: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum Mode {
    Full,
    Symmetric,
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// Projected Q̃ table of a state, optionally marginalized to some axes.
    Qtilde {
        #[command(flatten)]
        system: System,
        /// ghz | fiducial | dicke:<p-list> | product:<digits> | random:<pure|mixed>:<seed> | file:<path>
        #[arg(long)]
        state: String,
        /// Axes to keep, e.g. `0,1` or `0,1;1,0`.
        #[arg(long)]
        project: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Class multiplicities by enumeration and by closed form.
    Multiplicity {
        #[command(flatten)]
        system: System,
    },
    /// Reconstruct a state from Q̃ (full mode) or from collective probabilities (symmetric mode).
    Reconstruct {
        #[command(flatten)]
        system: System,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, conflicts_with = "counts", required_unless_present = "counts")]
        state: Option<String>,
        /// CSV with m-columns and `Qtilde` (full mode) or `count` (symmetric mode).
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Monte-Carlo MSE study with λ/√M fits.
    BenchMse {
        #[command(flatten)]
        system: System,
        #[arg(long, value_delimiter = ',', default_values = ["collective", "sic"])]
        protocol: Vec<ProtocolKind>,
        #[arg(long, value_delimiter = ',', default_values_t = [100u64, 1000, 10000])]
        trials: Vec<u64>,
        #[arg(long, default_value = "pure")]
        ensemble: Ensemble,
        #[arg(long, default_value_t = 200)]
        states: usize,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an invariant suite; exits 1 if any check fails.
    Verify {
        #[command(flatten)]
        system: System,
        #[arg(long, value_enum)]
        suite: verify::Suite,
    },
    /// Matrix of a collective (or single-particle) operator O_{k,l}.
    Ops {
        #[command(flatten)]
        system: System,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        l: u32,
        /// Single-particle operator on this site instead of the collective sum.
        #[arg(long)]
        site: Option<usize>,
    },
    /// Repeat a run from its manifest.
    Replay { manifest: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Qtilde { .. } => "qtilde",
            Command::Multiplicity { .. } => "multiplicity",
            Command::Reconstruct { .. } => "reconstruct",
            Command::BenchMse { .. } => "bench-mse",
            Command::Verify { .. } => "verify",
            Command::Ops { .. } => "ops",
            Command::Replay { .. } => "replay",
        }
    }
}

enum Failure {
    Library(Error),
    Usage(String),
    Verify(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Capacity { .. } => EXIT_CAPACITY,
        Error::NotPrime(_) | Error::Domain(_) | Error::UnsupportedDimension(_) | Error::NoInverse(..) => EXIT_USAGE,
        _ => EXIT_INPUT,
    }
}

fn load_fiducial(system: &System) -> Result<Fiducial> {
    if !qmacro::zd::is_prime(system.d) {
        return Err(Error::NotPrime(system.d));
    }
    match &system.fiducial {
        None => Fiducial::builtin(system.d, system.n),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
            let config: FiducialConfig = serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
            if config.d != system.d {
                return Err(Error::Input(format!("fiducial file is for d = {}, run uses d = {}", config.d, system.d)));
            }
            Fiducial::from_config(&config, system.n)
        }
    }
}

fn parse_state(s: &str) -> CmdResult<StateSpec> {
    s.parse::<StateSpec>().map_err(Failure::Usage)
}

fn parse_axes(s: &str, d: u32) -> CmdResult<Vec<(u32, u32)>> {
    s.split(';')
        .map(|pair| {
            let (k, l) = pair.split_once(',').ok_or_else(|| Failure::Usage(format!("axis {pair:?} is not k,l")))?;
            let k = k.trim().parse::<u32>().map_err(|_| Failure::Usage(format!("bad axis {pair:?}")))?;
            let l = l.trim().parse::<u32>().map_err(|_| Failure::Usage(format!("bad axis {pair:?}")))?;
            label_position(d, k, l).ok_or_else(|| Failure::Usage(format!("({k},{l}) is not a weight label for d = {d}")))?;
            Ok((k, l))
        })
        .collect()
}

fn json_string(v: &impl Serialize) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Error::Input(e.to_string()))
}

fn measurement_space(d: u32, n: usize) -> Result<MeasurementSpace> {
    MeasurementSpace::build(d, n)
}

fn state_q_tilde(loaded: &LoadedState, fid: &Fiducial, space: &MeasurementSpace) -> Result<QTilde> {
    match loaded {
        LoadedState::Symmetric(rs) => {
            let basis = SymBasis::new(fid.d(), fid.n())?;
            q_tilde_symmetric(space, |c| {
                let (a, b) = c.representative();
                let phi = phi_of_pair(&basis, fid, a, b)?;
                Ok(phi.dotc(&(rs * &phi)).re)
            })
        }
        LoadedState::Full(rho) => q_tilde(rho, fid, space),
    }
}

fn cmd_qtilde(system: &System, state: &str, project: Option<&str>, format: Format) -> CmdResult<String> {
    let (d, n) = (system.d, system.n);
    let spec = parse_state(state)?;
    let axes = project.map(|p| parse_axes(p, d)).transpose()?;
    let fid = load_fiducial(system)?;
    let space = measurement_space(d, n)?;
    let q = state_q_tilde(&load(&spec, &fid)?, &fid, &space)?;
    let names = weight_label_names(d);
    if let Some(axes) = axes {
        let marginal = q.marginal(&axes)?;
        let axis_names: Vec<String> = axes.iter().map(|&(k, l)| format!("m{k}{l}")).collect();
        return Ok(match format {
            Format::Csv => {
                let mut header = axis_names;
                header.push("Qtilde".into());
                let rows: Vec<Vec<String>> = marginal
                    .iter()
                    .map(|(key, v)| key.iter().map(|x| x.to_string()).chain([v.to_string()]).collect())
                    .collect();
                csv_string(&header, &rows)?
            }
            Format::Json => json_string(&json!({
                "d": d, "N": n, "axes": axis_names,
                "rows": marginal.iter().map(|(key, v)| json!({"m": key, "qtilde": v})).collect::<Vec<_>>(),
            }))?,
        });
    }
    Ok(match format {
        Format::Csv => {
            let mut header = names.clone();
            header.extend(["R".to_string(), "Qtilde".to_string()]);
            let rows: Vec<Vec<String>> = space
                .classes()
                .iter()
                .zip(q.values())
                .map(|(c, v)| {
                    c.m.entries()
                        .iter()
                        .map(|x| x.to_string())
                        .chain([c.multiplicity.to_string(), v.to_string()])
                        .collect()
                })
                .collect();
            csv_string(&header, &rows)?
        }
        Format::Json => json_string(&json!({
            "d": d, "N": n, "labels": names, "total": q.total(),
            "rows": space.classes().iter().zip(q.values()).map(|(c, v)| json!({
                "m": c.m.entries(), "R": c.multiplicity.to_string(), "qtilde": v,
            })).collect::<Vec<_>>(),
        }))?,
    })
}

fn cmd_multiplicity(system: &System) -> CmdResult<(String, bool)> {
    let (d, n) = (system.d, system.n);
    if !qmacro::zd::is_prime(d) {
        return Err(Error::NotPrime(d).into());
    }
    let points = (d as u128).checked_pow(2 * n as u32).unwrap_or(u128::MAX);
    let space = if points <= ENUMERATION_LIMIT {
        MeasurementSpace::enumerate(d, n)?
    } else {
        MeasurementSpace::from_occupations(d, n)?
    };
    let closed = d == 2 || d == 3;
    let mut all_match = true;
    let mut rows = Vec::with_capacity(space.len() + 1);
    for c in space.classes() {
        let mut row: Vec<String> = c.m.entries().iter().map(|x| x.to_string()).collect();
        row.push(c.multiplicity.to_string());
        if closed {
            let r = r_closed(d, &c.m, n)?;
            let ok = r == c.multiplicity;
            all_match &= ok;
            row.push(r.to_string());
            row.push(ok.to_string());
        } else {
            row.extend([String::new(), String::new()]);
        }
        rows.push(row);
    }
    let total = space.total_multiplicity();
    let expected = BigUint::from(d).pow(2 * n as u32);
    all_match &= total == expected;
    let mut totals = vec![String::new(); weight_label_names(d).len()];
    totals[0] = "total".into();
    totals.extend([total.to_string(), expected.to_string(), (total == expected).to_string()]);
    rows.push(totals);
    let mut header = weight_label_names(d);
    header.extend(["R_enum", "R_closed", "match"].map(String::from));
    if count_multiplets(d, n) != BigUint::from(space.len()) {
        all_match = false;
    }
    Ok((csv_string(&header, &rows)?, all_match))
}

fn cmd_reconstruct(system: &System, mode: Mode, state: Option<&str>, counts: Option<&Path>) -> CmdResult<String> {
    let (d, n) = (system.d, system.n);
    let spec = state.map(parse_state).transpose()?;
    let fid = load_fiducial(system)?;
    let space = measurement_space(d, n)?;
    let aligned = |path: &Path, column: &str| -> Result<Vec<f64>> {
        let table = read_weight_table(path, d, n, column)?;
        let mut values = vec![None; space.len()];
        for (m, v) in table {
            let i = space
                .position(&m)
                .ok_or_else(|| Error::Input(format!("{m} is not a realized class")))?;
            values[i] = Some(v);
        }
        let missing = values.iter().filter(|v| v.is_none()).count();
        if missing > 0 {
            return Err(Error::IncompleteData(format!("{missing} of {} outcomes missing from {}", space.len(), path.display())));
        }
        Ok(values.into_iter().map(|v| v.unwrap_or(0.0)).collect())
    };
    let report = match mode {
        Mode::Full => {
            let (q, input) = match (&spec, counts) {
                (Some(spec), _) => {
                    let basis = SymBasis::new(d, n)?;
                    let rho = load(spec, &fid)?.full(&basis)?;
                    (q_tilde(&rho, &fid, &space)?, Some(rho))
                }
                (None, Some(path)) => (QTilde::from_values(&space, aligned(path, "Qtilde")?)?, None),
                (None, None) => return Err(Failure::Usage("give --state or --counts".into())),
            };
            let rec = reconstruct_full(&q, &fid, &space)?;
            let (fid_value, err) = match &input {
                Some(rho) => {
                    let err = if n <= MAX_SYMMETRIZE_N {
                        Some(max_abs_diff(&rec, &symmetrize(rho, d, n)?))
                    } else {
                        None
                    };
                    (Some(fidelity(rho, &rec)), err)
                }
                None => (None, None),
            };
            json!({
                "mode": "full", "d": d, "N": n, "basis": "computational",
                "matrix": matrix_to_json(&rec),
                "fidelity": fid_value,
                "max_error_vs_symmetrized": err,
            })
        }
        Mode::Symmetric => {
            let tomo = SymTomography::for_fiducial(fid.clone())?;
            let (sigma, input, residual) = match (&spec, counts) {
                (Some(spec), _) => {
                    let (rs, residual) = load(spec, &fid)?.symmetric(tomo.basis())?;
                    if residual > 1e-10 {
                        eprintln!("warning: input state is not permutation symmetric; discarded part has max entry {residual:.3e}");
                    }
                    (tomo.probabilities(&rs)?, Some(rs), Some(residual))
                }
                (None, Some(path)) => {
                    let c = aligned(path, "count")?;
                    let total: f64 = c.iter().sum();
                    if total <= 0.0 || c.iter().any(|&x| x < 0.0) {
                        return Err(Error::Input("counts must be non-negative with a positive total".into()).into());
                    }
                    (c.iter().map(|x| x / total).collect(), None, None)
                }
                (None, None) => return Err(Failure::Usage("give --state or --counts".into())),
            };
            let rec = tomo.reconstruct(&sigma)?;
            json!({
                "mode": "symmetric", "d": d, "N": n, "basis": "dicke",
                "dicke_indices": tomo.basis().indices(),
                "matrix": matrix_to_json(&rec),
                "fidelity": input.as_ref().map(|rs| fidelity(rs, &rec)),
                "max_error": input.as_ref().map(|rs| max_abs_diff(rs, &rec)),
                "symmetry_residual": residual,
                "redundancy_violation": tomo.redundancy_violation(&sigma)?,
            })
        }
    };
    Ok(json_string(&report)?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    system: &System,
    protocols: &[ProtocolKind],
    trials: &[u64],
    ensemble: Ensemble,
    states: usize,
    repetitions: usize,
    seed: u64,
) -> CmdResult<String> {
    let fid = load_fiducial(system)?;
    let config = ExperimentConfig {
        d: system.d,
        n: system.n,
        trials: trials.to_vec(),
        ensemble,
        ensemble_size: states,
        repetitions,
        seed,
        protocols: protocols.to_vec(),
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(json_string(&run_experiment(&config, &fid)?)?)
}

fn cmd_verify(system: &System, suite: verify::Suite) -> CmdResult<String> {
    let fid = load_fiducial(system)?;
    let checks = verify::run(suite, &fid)?;
    let mut text = String::new();
    let mut failures = 0;
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        failures += usize::from(!c.passed());
        text.push_str(&format!("{status} {}: residual {:.3e} (tol {:.0e})\n", c.name, c.residual, c.tol));
    }
    if failures > 0 {
        emit(None, &text)?;
        return Err(Failure::Verify(failures));
    }
    Ok(text)
}

fn cmd_ops(system: &System, k: u32, l: u32, site: Option<usize>) -> CmdResult<String> {
    let fid = load_fiducial(system)?;
    let op = match site {
        Some(s) if s >= system.n => return Err(Failure::Usage(format!("site {s} out of range for N = {}", system.n))),
        Some(s) => single_particle_op(k, l, &fid, s)?,
        None => collective_op(k, l, &fid)?,
    };
    Ok(json_string(&json!({
        "d": system.d, "N": system.n, "k": k, "l": l, "site": site,
        "matrix": matrix_to_json(&op),
    }))?)
}

fn seed_of(command: &Command) -> Option<u64> {
    match command {
        Command::BenchMse { seed, .. } => Some(*seed),
        _ => None,
    }
}

fn execute(cli: Cli, args: Vec<String>) -> CmdResult<()> {
    if let Some(w) = cli.workers {
        // a second call in the same process (replay) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global();
    }
    if let Command::Replay { manifest } = &cli.command {
        let m = read_manifest(manifest)?;
        let mut argv = vec!["qmacro".to_string()];
        let mut it = m.args.iter();
        while let Some(a) = it.next() {
            if a == "--out" {
                it.next();
            } else if !a.starts_with("--out=") {
                argv.push(a.clone());
            }
        }
        if let Some(out) = &cli.out {
            argv.push("--out".into());
            argv.push(out.display().to_string());
        }
        let inner = Cli::try_parse_from(&argv).map_err(|e| Failure::Usage(e.to_string()))?;
        return execute(inner, argv[1..].to_vec());
    }
    let start = Instant::now();
    let mut verify_failed = false;
    let output = match &cli.command {
        Command::Qtilde {
            system,
            state,
            project,
            format,
        } => cmd_qtilde(system, state, project.as_deref(), *format)?,
        Command::Multiplicity { system } => {
            let (text, ok) = cmd_multiplicity(system)?;
            verify_failed = !ok;
            text
        }
        Command::Reconstruct {
            system,
            mode,
            state,
            counts,
        } => cmd_reconstruct(system, *mode, state.as_deref(), counts.as_deref())?,
        Command::BenchMse {
            system,
            protocol,
            trials,
            ensemble,
            states,
            repetitions,
            seed,
        } => cmd_bench(system, protocol, trials, *ensemble, *states, *repetitions, *seed)?,
        Command::Verify { system, suite } => cmd_verify(system, *suite)?,
        Command::Ops { system, k, l, site } => cmd_ops(system, *k, *l, *site)?,
        Command::Replay { .. } => unreachable!(),
    };
    emit(cli.out.as_deref(), &output)?;
    if let Some(out) = &cli.out {
        let manifest = RunManifest {
            command: cli.command.name().to_string(),
            args,
            parameters: serde_json::to_value(&cli.command).map_err(|e| Error::Input(e.to_string()))?,
            seed: seed_of(&cli.command),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        write_manifest(out, &manifest)?;
    }
    if verify_failed {
        return Err(Failure::Verify(1));
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli, args[1..].to_vec()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Library(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Verify(count)) => {
            eprintln!("{count} check(s) failed");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}
