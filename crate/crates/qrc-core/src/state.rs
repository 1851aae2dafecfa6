//! Dense complex linear algebra for multi-spin density matrices.
//!
//! Spins are indexed `0..N`, with spin 0 the leftmost tensor factor, i.e.
//! basis index bit `N-1-site` addresses `site`. Dimensions are capped at
//! N = 12 (4096) since everything here is dense.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{QrcError, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub const MAX_SPINS: usize = 12;

/// Tolerance for algebraic identities (Hermiticity, unit trace, unitarity).
pub const TOL_ALGEBRA: f64 = 1e-10;
/// Eigenvalue floor for positive semidefiniteness checks.
pub const TOL_PSD: f64 = -1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = QrcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(QrcError::InvalidParameter(format!(
                "unknown axis '{other}', expected x, y or z"
            ))),
        }
    }
}

/// Operator on the full register, with an optional Hermitian tag.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub mat: CMatrix,
    pub hermitian: bool,
}

impl OperatorMatrix {
    pub fn hermitian(mat: CMatrix) -> Result<Self> {
        let dev = hermiticity_deviation(&mat);
        if dev > TOL_ALGEBRA {
            return Err(QrcError::NotHermitian { max_dev: dev });
        }
        Ok(Self { mat, hermitian: true })
    }

    pub fn general(mat: CMatrix) -> Self {
        Self { mat, hermitian: false }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }
}

/// Density matrix of an N-spin register.
#[derive(Clone, Debug)]
pub struct QuantumState {
    rho: CMatrix,
    n_spins: usize,
}

impl QuantumState {
    /// Validating constructor: Hermitian, unit trace, PSD.
    pub fn new(rho: CMatrix, n_spins: usize) -> Result<Self> {
        check_spin_count(n_spins)?;
        let dim = 1usize << n_spins;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(QrcError::DimensionMismatch { left: rho.nrows(), right: dim });
        }
        let dev = hermiticity_deviation(&rho);
        if dev > TOL_ALGEBRA {
            return Err(QrcError::InvalidState {
                what: "Hermiticity",
                detail: format!("max |rho - rho†| = {dev:.3e}"),
            });
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TOL_ALGEBRA || tr.im.abs() > TOL_ALGEBRA {
            return Err(QrcError::InvalidState {
                what: "unit trace",
                detail: format!("Tr(rho) = {tr}"),
            });
        }
        let min_eig = min_eigenvalue(&rho);
        if min_eig < TOL_PSD {
            return Err(QrcError::InvalidState {
                what: "positivity",
                detail: format!("min eigenvalue = {min_eig:.3e}"),
            });
        }
        Ok(Self { rho, n_spins })
    }

    /// Trusted constructor for hot loops; the step map preserves validity.
    pub fn from_parts_unchecked(rho: CMatrix, n_spins: usize) -> Self {
        Self { rho, n_spins }
    }

    /// All spins in |0>.
    pub fn all_zero(n_spins: usize) -> Result<Self> {
        check_spin_count(n_spins)?;
        let dim = 1usize << n_spins;
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(0, 0)] = C64::new(1.0, 0.0);
        Ok(Self { rho, n_spins })
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_matrix(self) -> CMatrix {
        self.rho
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// (rho + rho†)/2, suppressing float drift after repeated maps.
    pub fn rehermitized(mut self) -> Self {
        let adj = self.rho.adjoint();
        self.rho += adj;
        self.rho.scale_mut(0.5);
        self
    }

    /// Trace distance (1/2)·||rho - other||_1.
    pub fn trace_distance(&self, other: &QuantumState) -> f64 {
        let diff = &self.rho - &other.rho;
        let eig = SymmetricEigen::new(diff);
        0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>()
    }
}

fn check_spin_count(n_spins: usize) -> Result<()> {
    if n_spins == 0 || n_spins > MAX_SPINS {
        return Err(QrcError::InvalidParameter(format!(
            "n_spins must be in 1..={MAX_SPINS}, got {n_spins}"
        )));
    }
    Ok(())
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let mut max = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > max {
                max = d;
            }
        }
    }
    max
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Single Pauli acting on `site`, identity elsewhere.
pub fn pauli_on_site(axis: Axis, site: usize, n_spins: usize) -> Result<OperatorMatrix> {
    check_spin_count(n_spins)?;
    if site >= n_spins {
        return Err(QrcError::SiteOutOfRange { site, n_spins });
    }
    let dim = 1usize << n_spins;
    let bit = n_spins - 1 - site;
    let mask = 1usize << bit;
    let mut m = CMatrix::zeros(dim, dim);
    for a in 0..dim {
        match axis {
            Axis::Z => {
                m[(a, a)] = if a & mask == 0 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(-1.0, 0.0)
                };
            }
            Axis::X => {
                m[(a, a ^ mask)] = C64::new(1.0, 0.0);
            }
            Axis::Y => {
                // <1|sigma_y|0> = i, <0|sigma_y|1> = -i
                m[(a, a ^ mask)] = if a & mask != 0 {
                    C64::new(0.0, 1.0)
                } else {
                    C64::new(0.0, -1.0)
                };
            }
        }
    }
    Ok(OperatorMatrix { mat: m, hermitian: true })
}

/// Two-site Pauli product sigma^axis_i sigma^axis_j.
pub fn pauli_pair(axis: Axis, site_i: usize, site_j: usize, n_spins: usize) -> Result<OperatorMatrix> {
    let a = pauli_on_site(axis, site_i, n_spins)?;
    let b = pauli_on_site(axis, site_j, n_spins)?;
    Ok(OperatorMatrix { mat: &a.mat * &b.mat, hermitian: true })
}

/// U = exp(-i H dt) via Hermitian eigendecomposition.
pub fn propagator(h: &OperatorMatrix, dt: f64) -> Result<OperatorMatrix> {
    let dev = hermiticity_deviation(&h.mat);
    if !h.hermitian || dev > TOL_ALGEBRA {
        return Err(QrcError::NotHermitian { max_dev: dev });
    }
    let eig = SymmetricEigen::new(h.mat.clone());
    let dim = h.dim();
    let mut phases = CMatrix::zeros(dim, dim);
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        phases[(k, k)] = (-C64::i() * (lambda * dt)).exp();
    }
    let u = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
    Ok(OperatorMatrix::general(u))
}

/// Trace out a single site, returning the 2^(N-1) marginal of the rest.
pub fn partial_trace_site(rho: &QuantumState, site: usize) -> Result<CMatrix> {
    let n = rho.n_spins();
    if site >= n {
        return Err(QrcError::SiteOutOfRange { site, n_spins: n });
    }
    let bit = n - 1 - site;
    let half = 1usize << (n - 1);
    let low_mask = (1usize << bit) - 1;
    let insert = |r: usize, s: usize| ((r >> bit) << (bit + 1)) | (s << bit) | (r & low_mask);
    let mut out = CMatrix::zeros(half, half);
    for ra in 0..half {
        for rb in 0..half {
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..2 {
                acc += rho.rho()[(insert(ra, s), insert(rb, s))];
            }
            out[(ra, rb)] = acc;
        }
    }
    Ok(out)
}

/// Tensor a single-qubit pure state (amplitudes) into position `site` of a
/// 2^(N-1) density matrix over the remaining spins.
pub fn embed_pure_at_site(
    amps: [C64; 2],
    rest: &CMatrix,
    site: usize,
    n_spins: usize,
) -> Result<CMatrix> {
    check_spin_count(n_spins)?;
    if site >= n_spins {
        return Err(QrcError::SiteOutOfRange { site, n_spins });
    }
    let half = 1usize << (n_spins - 1);
    if rest.nrows() != half {
        return Err(QrcError::DimensionMismatch { left: rest.nrows(), right: half });
    }
    let bit = n_spins - 1 - site;
    let low_mask = (1usize << bit) - 1;
    let insert = |r: usize, s: usize| ((r >> bit) << (bit + 1)) | (s << bit) | (r & low_mask);
    let dim = 1usize << n_spins;
    let mut out = CMatrix::zeros(dim, dim);
    for ra in 0..half {
        for rb in 0..half {
            let r = rest[(ra, rb)];
            if r == C64::new(0.0, 0.0) {
                continue;
            }
            for sa in 0..2 {
                for sb in 0..2 {
                    out[(insert(ra, sa), insert(rb, sb))] = amps[sa] * amps[sb].conj() * r;
                }
            }
        }
    }
    Ok(out)
}

/// Tr(rho O) for Hermitian O; the imaginary part is checked to vanish.
pub fn expectation(rho: &QuantumState, op: &OperatorMatrix) -> Result<f64> {
    if rho.dim() != op.dim() {
        return Err(QrcError::DimensionMismatch { left: rho.dim(), right: op.dim() });
    }
    let mut tr = C64::new(0.0, 0.0);
    for a in 0..rho.dim() {
        for b in 0..rho.dim() {
            tr += rho.rho()[(a, b)] * op.mat[(b, a)];
        }
    }
    if tr.im.abs() > TOL_ALGEBRA {
        return Err(QrcError::InvalidState {
            what: "real expectation",
            detail: format!("Im Tr(rho O) = {:.3e}", tr.im),
        });
    }
    Ok(tr.re)
}

/// Max-norm of U U† - I.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let prod = u * u.adjoint();
    let dim = u.nrows();
    let mut max = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            let d = (prod[(i, j)] - target).norm();
            if d > max {
                max = d;
            }
        }
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub(crate) fn random_hermitian(dim: usize, rng: &mut impl Rng) -> CMatrix {
        let mut m = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let adj = m.adjoint();
        (m + adj).scale(0.5)
    }

    #[test]
    fn pauli_z_single_qubit() {
        let m = pauli_on_site(Axis::Z, 0, 1).unwrap();
        assert_eq!(m.mat[(0, 0)], c(1.0, 0.0));
        assert_eq!(m.mat[(1, 1)], c(-1.0, 0.0));
        assert_eq!(m.mat[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn pauli_x_on_second_site_of_two() {
        // I (x) sigma_x expanded by hand
        let m = pauli_on_site(Axis::X, 1, 2).unwrap();
        let expected = [(0, 1), (1, 0), (2, 3), (3, 2)];
        for a in 0..4 {
            for b in 0..4 {
                let want = if expected.contains(&(a, b)) { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(m.mat[(a, b)].re, want, epsilon = 1e-15);
                assert_abs_diff_eq!(m.mat[(a, b)].im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn paulis_are_involutory() {
        for axis in Axis::ALL {
            for site in 0..3 {
                let m = pauli_on_site(axis, site, 3).unwrap();
                let sq = &m.mat * &m.mat;
                for i in 0..8 {
                    for j in 0..8 {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert_abs_diff_eq!(sq[(i, j)].re, want, epsilon = 1e-12);
                        assert_abs_diff_eq!(sq[(i, j)].im, 0.0, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn pauli_site_out_of_range() {
        assert!(pauli_on_site(Axis::X, 3, 3).is_err());
    }

    #[test]
    fn propagator_of_zero_is_identity() {
        let h = OperatorMatrix::hermitian(CMatrix::zeros(4, 4)).unwrap();
        let u = propagator(&h, 10.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(u.mat[(i, j)].re, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn propagator_of_diagonal_field() {
        // H = (h/2) sigma_z with h = 1, dt = 10 -> diag(e^{-5i}, e^{+5i})
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 0)] = c(0.5, 0.0);
        h[(1, 1)] = c(-0.5, 0.0);
        let u = propagator(&OperatorMatrix::hermitian(h).unwrap(), 10.0).unwrap();
        assert_abs_diff_eq!(u.mat[(0, 0)].re, 5.0f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(u.mat[(0, 0)].im, -(5.0f64.sin()), epsilon = 1e-12);
        assert_abs_diff_eq!(u.mat[(1, 1)].re, 5.0f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(u.mat[(1, 1)].im, 5.0f64.sin(), epsilon = 1e-12);
    }

    #[test]
    fn propagator_matches_taylor_series_oracle() {
        let mut rng = crate::rng::stream_rng(11, &[0]);
        let h = random_hermitian(8, &mut rng);
        let u = propagator(&OperatorMatrix::hermitian(h.clone()).unwrap(), 1.0).unwrap();
        // truncated Taylor series of exp(-iH), 50 terms
        let mut taylor = CMatrix::identity(8, 8);
        let mut term = CMatrix::identity(8, 8);
        let a = h.map(|z| -C64::i() * z);
        for k in 1..=50 {
            term = (&term * &a).scale(1.0 / k as f64);
            taylor += &term;
        }
        let mut max = 0.0f64;
        for i in 0..8 {
            for j in 0..8 {
                max = max.max((u.mat[(i, j)] - taylor[(i, j)]).norm());
            }
        }
        assert!(max < 1e-9, "propagator deviates from Taylor oracle by {max:.3e}");
    }

    #[test]
    fn propagator_rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(OperatorMatrix::hermitian(m).is_err());
    }

    #[test]
    fn partial_trace_of_product_state() {
        // |0><0| (x) rho_b, trace over site 0 -> rho_b
        let mut rng = crate::rng::stream_rng(3, &[1]);
        let b = random_hermitian(2, &mut rng);
        let tr = b.trace();
        let rho_b = b.scale(1.0 / tr.re);
        let mut full = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                full[(i, j)] = rho_b[(i, j)];
            }
        }
        let state = QuantumState::from_parts_unchecked(full, 2);
        let red = partial_trace_site(&state, 0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(red[(i, j)].re, rho_b[(i, j)].re, epsilon = 1e-14);
                assert_abs_diff_eq!(red[(i, j)].im, rho_b[(i, j)].im, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let mut rho = CMatrix::zeros(4, 4);
        for (a, b) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            rho[(a, b)] = c(0.5, 0.0);
        }
        let state = QuantumState::new(rho, 2).unwrap();
        let red = partial_trace_site(&state, 0).unwrap();
        assert_abs_diff_eq!(red[(0, 0)].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(red[(1, 1)].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(red[(0, 1)].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn partial_trace_site_out_of_range() {
        let state = QuantumState::all_zero(2).unwrap();
        assert!(partial_trace_site(&state, 2).is_err());
    }

    #[test]
    fn expectations_on_computational_states() {
        let rho = QuantumState::all_zero(1).unwrap();
        let z = pauli_on_site(Axis::Z, 0, 1).unwrap();
        let x = pauli_on_site(Axis::X, 0, 1).unwrap();
        assert_abs_diff_eq!(expectation(&rho, &z).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(expectation(&rho, &x).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn expectation_on_maximally_mixed_vanishes() {
        let rho = QuantumState::new(CMatrix::identity(2, 2).scale(0.5), 1).unwrap();
        for axis in Axis::ALL {
            let p = pauli_on_site(axis, 0, 1).unwrap();
            assert_abs_diff_eq!(expectation(&rho, &p).unwrap(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let rho = QuantumState::all_zero(1).unwrap();
        let op = pauli_on_site(Axis::Z, 0, 2).unwrap();
        assert!(expectation(&rho, &op).is_err());
    }
}
