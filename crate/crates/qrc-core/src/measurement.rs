//! Indirect-measurement model: the Gaussian pointer kernel, the unconditional
//! back-action mask, basis rotations and observable extraction.

use nalgebra::DMatrix;

use crate::error::{QrcError, Result};
use crate::state::{
    expectation, pauli_on_site, pauli_pair, Axis, C64, CMatrix, OperatorMatrix, QuantumState,
};

/// Measurement strength and axis.
#[derive(Clone, Copy, Debug)]
pub struct MeasurementModel {
    /// Pointer displacement in units of the Gaussian width.
    pub strength_g: f64,
    pub basis: Axis,
}

impl MeasurementModel {
    pub fn new(strength_g: f64, basis: Axis) -> Result<Self> {
        if strength_g < 0.0 {
            return Err(QrcError::InvalidStrength(strength_g, "must be non-negative"));
        }
        Ok(Self { strength_g, basis })
    }
}

/// Element-wise dephasing mask: entry (a, b) is exp(-g^2 d_H(a,b) / 2) with
/// d_H the Hamming distance of the basis-state indices.
#[derive(Clone, Debug)]
pub struct BackActionMask {
    mask: DMatrix<f64>,
    g: f64,
    n_spins: usize,
}

impl BackActionMask {
    pub fn mask(&self) -> &DMatrix<f64> {
        &self.mask
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// g = 0: the all-ones mask leaves every state untouched.
    pub fn is_trivial(&self) -> bool {
        self.g == 0.0
    }

    /// Test hook: the all-ones mask, independent of any g.
    pub fn all_ones(n_spins: usize) -> Self {
        let dim = 1usize << n_spins;
        Self { mask: DMatrix::from_element(dim, dim, 1.0), g: 0.0, n_spins }
    }
}

/// Pointer-state measurement operator for outcome V along z: diagonal with
/// entries (2 pi)^{-1/4} exp(-(V -+ g)^2 / 4).
pub fn measurement_kernel(v: f64, g: f64) -> Result<OperatorMatrix> {
    if g < 0.0 {
        return Err(QrcError::InvalidStrength(g, "must be non-negative"));
    }
    let norm = (2.0 * std::f64::consts::PI).powf(-0.25);
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = C64::new(norm * (-(v - g).powi(2) / 4.0).exp(), 0.0);
    m[(1, 1)] = C64::new(norm * (-(v + g).powi(2) / 4.0).exp(), 0.0);
    Ok(OperatorMatrix { mat: m, hermitian: true })
}

/// Unconditional back-action mask for strength g on N spins, filled directly
/// from Hamming distances.
pub fn backaction_mask(g: f64, n_spins: usize) -> Result<BackActionMask> {
    if g < 0.0 {
        return Err(QrcError::InvalidStrength(g, "must be non-negative"));
    }
    let dim = 1usize << n_spins;
    // per-distance factors, d in 0..=N
    let factors: Vec<f64> = (0..=n_spins)
        .map(|d| (-g * g * d as f64 / 2.0).exp())
        .collect();
    let mut mask = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            mask[(a, b)] = factors[(a ^ b).count_ones() as usize];
        }
    }
    Ok(BackActionMask { mask, g, n_spins })
}

/// Element-wise product of the state with the mask; the diagonal is untouched.
pub fn apply_backaction(rho: &QuantumState, mask: &BackActionMask) -> Result<QuantumState> {
    if rho.dim() != mask.mask.nrows() {
        return Err(QrcError::DimensionMismatch { left: rho.dim(), right: mask.mask.nrows() });
    }
    if mask.is_trivial() {
        return Ok(rho.clone());
    }
    let dim = rho.dim();
    let mut out = rho.rho().clone();
    for a in 0..dim {
        for b in 0..dim {
            let f = mask.mask[(a, b)];
            if f != 1.0 {
                out[(a, b)] *= f;
            }
        }
    }
    Ok(QuantumState::from_parts_unchecked(out, rho.n_spins()))
}

/// Single-qubit rotation mapping sigma^basis to sigma^z under conjugation.
fn single_qubit_rotation(basis: Axis) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match basis {
        Axis::Z => CMatrix::identity(2, 2),
        // Hadamard: H sx H = sz
        Axis::X => CMatrix::from_row_slice(2, 2, &[
            C64::new(s, 0.0),
            C64::new(s, 0.0),
            C64::new(s, 0.0),
            C64::new(-s, 0.0),
        ]),
        // H S†: (H S†) sy (H S†)† = sz
        Axis::Y => CMatrix::from_row_slice(2, 2, &[
            C64::new(s, 0.0),
            C64::new(0.0, -s),
            C64::new(s, 0.0),
            C64::new(0.0, s),
        ]),
    }
}

/// Global rotation R^(x)N with R sigma^basis_i R† = sigma^z_i on every spin.
pub fn basis_rotation(basis: Axis, n_spins: usize) -> OperatorMatrix {
    let single = single_qubit_rotation(basis);
    let mut full = CMatrix::identity(1, 1);
    for _ in 0..n_spins {
        full = full.kronecker(&single);
    }
    OperatorMatrix::general(full)
}

/// Dephase along the given axis: rotate into the z frame, apply the mask,
/// rotate back. The trivial mask is a structural no-op so disturbance-free
/// trajectories stay bit-identical to unmasked ones.
pub fn dephase_along(rho: &QuantumState, basis: Axis, mask: &BackActionMask) -> Result<QuantumState> {
    if mask.is_trivial() {
        return Ok(rho.clone());
    }
    match basis {
        Axis::Z => apply_backaction(rho, mask),
        _ => {
            let r = basis_rotation(basis, rho.n_spins());
            let rotated = QuantumState::from_parts_unchecked(
                &r.mat * rho.rho() * r.mat.adjoint(),
                rho.n_spins(),
            );
            let masked = apply_backaction(&rotated, mask)?;
            Ok(QuantumState::from_parts_unchecked(
                r.mat.adjoint() * masked.rho() * &r.mat,
                rho.n_spins(),
            )
            .rehermitized())
        }
    }
}

/// Precomputed observable operators for feature extraction.
pub struct ObservableSet {
    n_spins: usize,
    singles: Vec<Vec<OperatorMatrix>>,
    pairs: Vec<Vec<OperatorMatrix>>,
}

impl ObservableSet {
    pub fn new(n_spins: usize) -> Result<Self> {
        let mut singles = Vec::with_capacity(3);
        let mut pairs = Vec::with_capacity(3);
        for axis in Axis::ALL {
            let s: Result<Vec<_>> =
                (0..n_spins).map(|i| pauli_on_site(axis, i, n_spins)).collect();
            singles.push(s?);
            let mut p = Vec::new();
            for i in 0..n_spins {
                for j in (i + 1)..n_spins {
                    p.push(pauli_pair(axis, i, j, n_spins)?);
                }
            }
            pairs.push(p);
        }
        Ok(Self { n_spins, singles, pairs })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Columns per direction: N singles + N(N-1)/2 pairs + N variances.
    pub fn cols_per_direction(&self) -> usize {
        2 * self.n_spins + self.n_spins * (self.n_spins - 1) / 2
    }

    fn axis_index(axis: Axis) -> usize {
        match axis {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn single(&self, axis: Axis, site: usize) -> &OperatorMatrix {
        &self.singles[Self::axis_index(axis)][site]
    }

    pub fn pairs(&self, axis: Axis) -> &[OperatorMatrix] {
        &self.pairs[Self::axis_index(axis)]
    }
}

/// One direction's feature sub-row: N singles, N(N-1)/2 unordered pairs, and
/// N literal-one variance columns.
pub fn extract_features(rho: &QuantumState, basis: Axis, obs: &ObservableSet) -> Result<Vec<f64>> {
    let n = obs.n_spins();
    let mut row = Vec::with_capacity(obs.cols_per_direction());
    for i in 0..n {
        row.push(expectation(rho, obs.single(basis, i))?);
    }
    for op in obs.pairs(basis) {
        row.push(expectation(rho, op)?);
    }
    // (sigma^d_i)^2 = I, emitted for column-count fidelity
    row.extend(std::iter::repeat(1.0).take(n));
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::state::min_eigenvalue;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex;
    use rand::Rng;

    fn random_state(n_spins: usize, rng: &mut impl Rng) -> QuantumState {
        let dim = 1usize << n_spins;
        let mut a = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                a[(i, j)] = Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let rho = &a * a.adjoint();
        let tr = rho.trace().re;
        QuantumState::from_parts_unchecked(rho.scale(1.0 / tr), n_spins)
    }

    #[test]
    fn kernel_at_zero_strength_is_scaled_identity() {
        let k = measurement_kernel(0.0, 0.0).unwrap();
        let norm = (2.0 * std::f64::consts::PI).powf(-0.25);
        assert_abs_diff_eq!(k.mat[(0, 0)].re, norm, epsilon = 1e-15);
        assert_abs_diff_eq!(k.mat[(1, 1)].re, norm, epsilon = 1e-15);
    }

    /// Simpson quadrature over [-40, 40].
    fn integrate(f: impl Fn(f64) -> f64) -> f64 {
        let n = 80_000usize; // even
        let (a, b) = (-40.0f64, 40.0f64);
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn kernel_completeness_integral() {
        for g in [0.0, 0.5, 2.0] {
            for entry in 0..2 {
                let total = integrate(|v| {
                    let k = measurement_kernel(v, g).unwrap();
                    let d = k.mat[(entry, entry)].re;
                    d * d
                });
                assert!((total - 1.0).abs() < 1e-8, "g={g} entry={entry} integral={total}");
            }
        }
    }

    #[test]
    fn kernel_off_diagonal_damping_matches_mask_factor() {
        // integral of the 00/11 cross term at g=1 equals e^{-1/2}
        let g = 1.0;
        let total = integrate(|v| {
            let k = measurement_kernel(v, g).unwrap();
            k.mat[(0, 0)].re * k.mat[(1, 1)].re
        });
        assert!((total - (-0.5f64).exp()).abs() < 1e-6, "integral={total}");
    }

    #[test]
    fn mask_at_zero_strength_is_all_ones() {
        let m = backaction_mask(0.0, 3).unwrap();
        assert!(m.is_trivial());
        assert!(m.mask().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn mask_single_qubit_values() {
        let m = backaction_mask(1.0, 1).unwrap();
        let c = (-0.5f64).exp();
        assert_abs_diff_eq!(m.mask()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mask()[(0, 1)], c, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mask()[(1, 0)], c, epsilon = 1e-15);
    }

    #[test]
    fn mask_two_qubit_distance_two_entry() {
        // hand expansion of (I + c sx)(x)(I + c sx) with c = e^{-1/2}
        let m = backaction_mask(1.0, 2).unwrap();
        assert_abs_diff_eq!(m.mask()[(0, 3)], (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn mask_is_psd() {
        for g in [0.0, 0.1, 0.5, 1.0, 2.0, 10.0] {
            for n in 1..=4usize {
                let m = backaction_mask(g, n).unwrap();
                let cm = m.mask().map(|x| Complex::new(x, 0.0));
                assert!(min_eigenvalue(&cm) > -1e-9, "g={g} n={n}");
            }
        }
    }

    #[test]
    fn backaction_preserves_diagonal_and_positivity() {
        let mut rng = stream_rng(31, &[0]);
        let mask = backaction_mask(0.5, 3).unwrap();
        for _ in 0..20 {
            let rho = random_state(3, &mut rng);
            let out = apply_backaction(&rho, &mask).unwrap();
            for a in 0..8 {
                assert_eq!(out.rho()[(a, a)], rho.rho()[(a, a)]);
                for b in 0..8 {
                    if a != b {
                        assert!(out.rho()[(a, b)].norm() <= rho.rho()[(a, b)].norm() + 1e-15);
                    }
                }
            }
            assert!(min_eigenvalue(out.rho()) > -1e-10);
        }
    }

    #[test]
    fn backaction_all_ones_is_identity() {
        let mut rng = stream_rng(32, &[0]);
        let rho = random_state(2, &mut rng);
        let out = apply_backaction(&rho, &BackActionMask::all_ones(2)).unwrap();
        assert_eq!(out.rho().as_slice(), rho.rho().as_slice());
    }

    #[test]
    fn strong_limit_fully_dephases() {
        let mut rng = stream_rng(33, &[0]);
        let rho = random_state(2, &mut rng);
        let out = apply_backaction(&rho, &backaction_mask(50.0, 2).unwrap()).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert!(out.rho()[(a, b)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rotations_conjugate_to_z() {
        for basis in Axis::ALL {
            let r = basis_rotation(basis, 1);
            let p = pauli_on_site(basis, 0, 1).unwrap();
            let conj = &r.mat * &p.mat * r.mat.adjoint();
            let z = pauli_on_site(Axis::Z, 0, 1).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    assert!((conj[(a, b)] - z.mat[(a, b)]).norm() < 1e-12, "basis {basis:?}");
                }
            }
        }
    }

    #[test]
    fn rotation_is_identity_for_z() {
        let r = basis_rotation(Axis::Z, 3);
        assert_eq!(&r.mat, &CMatrix::identity(8, 8));
    }

    #[test]
    fn global_rotation_conjugates_every_site() {
        let n = 3;
        for basis in [Axis::X, Axis::Y] {
            let r = basis_rotation(basis, n);
            for i in 0..n {
                let p = pauli_on_site(basis, i, n).unwrap();
                let conj = &r.mat * &p.mat * r.mat.adjoint();
                let z = pauli_on_site(Axis::Z, i, n).unwrap();
                let max: f64 = (0..1 << n)
                    .flat_map(|a| (0..1 << n).map(move |b| (a, b)))
                    .map(|(a, b)| (conj[(a, b)] - z.mat[(a, b)]).norm())
                    .fold(0.0, f64::max);
                assert!(max < 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_channel_matches_mask_on_single_qubit() {
        // integrate Omega rho Omega† over V and compare with the mask action
        let mut rng = stream_rng(34, &[0]);
        let rho = random_state(1, &mut rng);
        for g in [0.25, 1.0, 3.0] {
            let mask = backaction_mask(g, 1).unwrap();
            let expected = apply_backaction(&rho, &mask).unwrap();
            for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let re = integrate(|v| {
                    let k = measurement_kernel(v, g).unwrap();
                    (k.mat[(a, a)] * rho.rho()[(a, b)] * k.mat[(b, b)]).re
                });
                let im = integrate(|v| {
                    let k = measurement_kernel(v, g).unwrap();
                    (k.mat[(a, a)] * rho.rho()[(a, b)] * k.mat[(b, b)]).im
                });
                assert!((re - expected.rho()[(a, b)].re).abs() < 1e-6, "g={g}");
                assert!((im - expected.rho()[(a, b)].im).abs() < 1e-6, "g={g}");
            }
        }
    }

    #[test]
    fn features_of_all_zero_state() {
        let obs = ObservableSet::new(6).unwrap();
        let rho = QuantumState::all_zero(6).unwrap();
        let row = extract_features(&rho, Axis::Z, &obs).unwrap();
        assert_eq!(row.len(), 27);
        for v in &row[..6] {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
        for v in &row[6..21] {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
        for v in &row[21..] {
            assert_eq!(*v, 1.0);
        }
    }

    #[test]
    fn features_of_maximally_mixed_state() {
        let n = 3;
        let dim = 1usize << n;
        let obs = ObservableSet::new(n).unwrap();
        let rho = QuantumState::from_parts_unchecked(
            CMatrix::identity(dim, dim).scale(1.0 / dim as f64),
            n,
        );
        for basis in Axis::ALL {
            let row = extract_features(&rho, basis, &obs).unwrap();
            for v in &row[..obs.cols_per_direction() - n] {
                assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
            }
            for v in &row[obs.cols_per_direction() - n..] {
                assert_eq!(*v, 1.0);
            }
        }
    }

    #[test]
    fn three_directions_give_81_columns_for_six_spins() {
        let obs = ObservableSet::new(6).unwrap();
        assert_eq!(3 * obs.cols_per_direction(), 81);
    }
}
