//! Transverse-field Ising reservoir and the per-input encoding-plus-evolution
//! step map.

use rand::distributions::{Distribution, Uniform};

use crate::error::{QrcError, Result};
use crate::rng::stream_rng;
use crate::state::{
    embed_pure_at_site, partial_trace_site, pauli_on_site, pauli_pair, propagator, Axis, C64,
    CMatrix, OperatorMatrix, QuantumState,
};

pub const DEFAULT_N_SPINS: usize = 6;
pub const DEFAULT_DT: f64 = 10.0;
pub const DEFAULT_WASHOUT: usize = 20;

/// Defines the Hamiltonian and propagator of one reservoir realization.
#[derive(Clone, Debug)]
pub struct ReservoirSpec {
    pub n_spins: usize,
    /// Upper-triangular couplings, row-major over pairs i < j, in units of J.
    pub couplings: Vec<f64>,
    /// Transverse field h, in units of J.
    pub field_h: f64,
    /// Step duration, in units of 1/J.
    pub dt: f64,
    pub seed: u64,
    /// Which spin receives the input encoding.
    pub input_site: usize,
}

impl ReservoirSpec {
    /// Random couplings drawn from the seed, everything else as given.
    pub fn sampled(n_spins: usize, field_h: f64, dt: f64, seed: u64) -> Result<Self> {
        if n_spins < 2 {
            return Err(QrcError::InvalidParameter(format!(
                "reservoir needs at least 2 spins, got {n_spins}"
            )));
        }
        if dt <= 0.0 {
            return Err(QrcError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            n_spins,
            couplings: sample_couplings(n_spins, seed)?,
            field_h,
            dt,
            seed,
            input_site: 0,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.n_spins * (self.n_spins - 1) / 2
    }

    /// Coupling J_ij for i < j.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < j && j < self.n_spins);
        // offset of pair (i, j) in row-major upper-triangular order
        let before = i * self.n_spins - i * (i + 1) / 2;
        self.couplings[before + (j - i - 1)]
    }
}

/// Uniform couplings in [-J/2, J/2] with J = 1, deterministic in the seed.
pub fn sample_couplings(n_spins: usize, seed: u64) -> Result<Vec<f64>> {
    if n_spins < 2 {
        return Err(QrcError::InvalidParameter(format!(
            "need at least 2 spins to couple, got {n_spins}"
        )));
    }
    let mut rng = stream_rng(seed, &[0x4a5]);
    let dist = Uniform::new_inclusive(-0.5, 0.5);
    let n_pairs = n_spins * (n_spins - 1) / 2;
    Ok((0..n_pairs).map(|_| dist.sample(&mut rng)).collect())
}

/// H = sum_{i<j} J_ij sx_i sx_j + (h/2) sum_i sz_i.
pub fn build_hamiltonian(spec: &ReservoirSpec) -> Result<OperatorMatrix> {
    let n = spec.n_spins;
    let dim = 1usize << n;
    let mut h = CMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in (i + 1)..n {
            let jij = spec.coupling(i, j);
            if jij != 0.0 {
                let xx = pauli_pair(Axis::X, i, j, n)?;
                h += xx.mat.scale(jij);
            }
        }
    }
    if spec.field_h != 0.0 {
        for i in 0..n {
            let z = pauli_on_site(Axis::Z, i, n)?;
            h += z.mat.scale(spec.field_h / 2.0);
        }
    }
    OperatorMatrix::hermitian(h)
}

/// U = exp(-i H dt) for the spec's Hamiltonian.
pub fn build_propagator(spec: &ReservoirSpec) -> Result<OperatorMatrix> {
    propagator(&build_hamiltonian(spec)?, spec.dt)
}

/// Amplitudes of sqrt(1-s)|0> + sqrt(s)|1>.
pub fn encode_input(s: f64) -> Result<[C64; 2]> {
    if !(0.0..=1.0).contains(&s) {
        return Err(QrcError::InputOutOfRange { value: s });
    }
    Ok([C64::new((1.0 - s).sqrt(), 0.0), C64::new(s.sqrt(), 0.0)])
}

/// One CPTP processing step: replace the input-site marginal with the encoded
/// pure state, then conjugate by U.
pub fn step_map(
    rho_prev: &QuantumState,
    s_k: f64,
    u: &OperatorMatrix,
    input_site: usize,
) -> Result<QuantumState> {
    let amps = encode_input(s_k)?;
    let rest = partial_trace_site(rho_prev, input_site)?;
    let injected = embed_pure_at_site(amps, &rest, input_site, rho_prev.n_spins())?;
    let evolved = &u.mat * injected * u.mat.adjoint();
    Ok(QuantumState::from_parts_unchecked(evolved, rho_prev.n_spins()).rehermitized())
}
