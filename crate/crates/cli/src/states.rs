//! Parsing of `--state` values and loading of state files.

use std::path::PathBuf;
use std::str::FromStr;

use qmacro::estimation::{random_symmetric_state_with, stream_rng, Ensemble};
use qmacro::fiducial::Fiducial;
use qmacro::ops::{basis_state, projector, Operator, C64};
use qmacro::symmetric::{phi_of_pair, SymBasis};
use qmacro::zd::{checked_dim, DString};
use qmacro::{Error, Result};

use crate::io::read_state_file;

#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Ghz,
    Fiducial,
    Dicke(Vec<u32>),
    Product(Vec<u32>),
    Random(Ensemble, u64),
    File(PathBuf),
}

fn parse_list(s: &str) -> std::result::Result<Vec<u32>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|_| format!("bad integer {t:?}")))
        .collect()
}

impl FromStr for StateSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "ghz" => Ok(StateSpec::Ghz),
            "fiducial" => Ok(StateSpec::Fiducial),
            "dicke" => Ok(StateSpec::Dicke(parse_list(rest)?)),
            "product" => Ok(StateSpec::Product(parse_list(rest)?)),
            "random" => {
                let (kind, seed) = rest.split_once(':').unwrap_or((rest, "0"));
                let kind = kind.parse::<Ensemble>().map_err(|e| e.to_string())?;
                let seed = seed.parse::<u64>().map_err(|_| format!("bad seed {seed:?}"))?;
                Ok(StateSpec::Random(kind, seed))
            }
            "file" if !rest.is_empty() => Ok(StateSpec::File(PathBuf::from(rest))),
            _ => Err(format!(
                "unknown state {s:?}; expected ghz, fiducial, dicke:<p-list>, product:<digits>, random:<pure|mixed>:<seed> or file:<path>"
            )),
        }
    }
}

/// A density matrix either on `H_sym` (Dicke basis) or on the full space.
#[derive(Debug, Clone)]
pub enum LoadedState {
    Symmetric(Operator),
    Full(Operator),
}

/// Loads the state, keeping it on `H_sym` whenever it is known to be symmetric.
pub fn load(spec: &StateSpec, fid: &Fiducial) -> Result<LoadedState> {
    let (d, n) = (fid.d(), fid.n());
    let symmetric = |basis: &SymBasis, amps: Vec<(usize, C64)>| {
        let mut v = qmacro::ops::StateVector::zeros(basis.dim());
        for (i, a) in amps {
            v[i] += a;
        }
        projector(&v)
    };
    match spec {
        StateSpec::Ghz => {
            let basis = SymBasis::new(d, n)?;
            let amp = C64::new(1.0 / (d as f64).sqrt(), 0.0);
            let amps = (0..d)
                .map(|l| {
                    let mut p = vec![0u32; d as usize - 1];
                    if l > 0 {
                        p[l as usize - 1] = n as u32;
                    }
                    (basis.position(&p).expect("valid occupation"), amp)
                })
                .collect();
            Ok(LoadedState::Symmetric(symmetric(&basis, amps)))
        }
        StateSpec::Fiducial if fid.is_uniform() => {
            let basis = SymBasis::new(d, n)?;
            let zero = DString::zero(d, n)?;
            Ok(LoadedState::Symmetric(projector(&phi_of_pair(&basis, fid, &zero, &zero)?)))
        }
        StateSpec::Fiducial => Ok(LoadedState::Full(projector(&fid.state()?))),
        StateSpec::Dicke(p) => {
            let basis = SymBasis::new(d, n)?;
            let index = basis
                .position(p)
                .ok_or_else(|| Error::Input(format!("{p:?} is not an occupation list of length {} summing to at most {n}", d - 1)))?;
            Ok(LoadedState::Symmetric(symmetric(&basis, vec![(index, C64::new(1.0, 0.0))])))
        }
        StateSpec::Product(digits) => {
            if digits.len() != n {
                return Err(Error::Input(format!("product state has {} digits, expected {n}", digits.len())));
            }
            let lambda = DString::new(d, digits.clone()).map_err(|e| Error::Input(e.to_string()))?;
            Ok(LoadedState::Full(projector(&basis_state(&lambda)?)))
        }
        StateSpec::Random(kind, seed) => {
            let basis = SymBasis::new(d, n)?;
            Ok(LoadedState::Symmetric(random_symmetric_state_with(*kind, basis.dim(), &mut stream_rng(*seed, 0))))
        }
        StateSpec::File(path) => {
            let rho = read_state_file(path)?;
            let dim = checked_dim(d, n)?;
            if rho.shape() != (dim, dim) {
                return Err(Error::Input(format!(
                    "state file holds a {}×{} matrix, expected {dim}×{dim}",
                    rho.nrows(),
                    rho.ncols()
                )));
            }
            Ok(LoadedState::Full(rho))
        }
    }
}

impl LoadedState {
    /// The state on the full `d^N`-dimensional space.
    pub fn full(&self, basis: &SymBasis) -> Result<Operator> {
        match self {
            LoadedState::Symmetric(rs) => basis.to_full(rs),
            LoadedState::Full(rho) => Ok(rho.clone()),
        }
    }

    /// The state projected to `H_sym`, with the size of the discarded part.
    pub fn symmetric(&self, basis: &SymBasis) -> Result<(Operator, f64)> {
        match self {
            LoadedState::Symmetric(rs) => Ok((rs.clone(), 0.0)),
            LoadedState::Full(rho) => basis.from_full(rho),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_state_specs() {
        assert_eq!("ghz".parse::<StateSpec>().unwrap(), StateSpec::Ghz);
        assert_eq!("dicke:1,0".parse::<StateSpec>().unwrap(), StateSpec::Dicke(vec![1, 0]));
        assert_eq!("product:0,1".parse::<StateSpec>().unwrap(), StateSpec::Product(vec![0, 1]));
        assert_eq!("random:mixed:4".parse::<StateSpec>().unwrap(), StateSpec::Random(Ensemble::Mixed, 4));
        assert!("file:".parse::<StateSpec>().is_err());
        assert!("w".parse::<StateSpec>().is_err());
        assert!("dicke:x".parse::<StateSpec>().is_err());
    }

    #[test]
    fn ghz_in_dicke_basis_matches_dense() {
        let fid = Fiducial::builtin(3, 2).unwrap();
        let basis = SymBasis::new(3, 2).unwrap();
        let loaded = load(&StateSpec::Ghz, &fid).unwrap().full(&basis).unwrap();
        let dense = projector(&qmacro::ops::ghz_state(3, 2).unwrap());
        assert!(qmacro::linalg::max_abs_diff(&loaded, &dense) < 1e-12);
    }
}
