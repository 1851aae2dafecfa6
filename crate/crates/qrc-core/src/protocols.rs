//! Full time-series trajectories for the three protocols: restarting (RSP),
//! online with indirect measurements (OLP), and the classical feedback-driven
//! protocol.

use nalgebra::DMatrix;

use crate::benchmark::TimeSeries;
use crate::error::{QrcError, Result};
use crate::measurement::{
    backaction_mask, dephase_along, extract_features, BackActionMask, ObservableSet,
};
use crate::reservoir::{build_propagator, encode_input, step_map, ReservoirSpec, DEFAULT_WASHOUT};
use crate::state::{expectation, Axis, C64, CMatrix, OperatorMatrix, QuantumState};

/// What a feature column holds; shot noise depends on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    Single,
    Pair,
    Variance,
}

#[derive(Clone, Copy, Debug)]
pub struct ColumnInfo {
    pub axis: Axis,
    pub kind: ColumnKind,
}

/// K x F matrix of observable expectation values, one row per input.
#[derive(Clone, Debug)]
pub struct FeatureTable {
    pub data: DMatrix<f64>,
    pub columns: Vec<ColumnInfo>,
    pub washout: usize,
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    /// Columns belonging to one measurement direction.
    pub fn select_axis(&self, axis: Axis) -> FeatureTable {
        let picked: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.axis == axis)
            .map(|(i, _)| i)
            .collect();
        self.select_columns(&picked)
    }

    pub fn select_columns(&self, indices: &[usize]) -> FeatureTable {
        let mut data = DMatrix::zeros(self.n_rows(), indices.len());
        for (new_c, &c) in indices.iter().enumerate() {
            data.set_column(new_c, &self.data.column(c));
        }
        FeatureTable {
            data,
            columns: indices.iter().map(|&c| self.columns[c]).collect(),
            washout: self.washout,
        }
    }

    /// Side-by-side concatenation; rows and washout must agree.
    pub fn hconcat(tables: &[&FeatureTable]) -> Result<FeatureTable> {
        let first = tables.first().ok_or_else(|| {
            QrcError::InvalidParameter("cannot concatenate zero tables".into())
        })?;
        let rows = first.n_rows();
        let total: usize = tables.iter().map(|t| t.n_cols()).sum();
        let mut data = DMatrix::zeros(rows, total);
        let mut columns = Vec::with_capacity(total);
        let mut at = 0;
        for t in tables {
            if t.n_rows() != rows {
                return Err(QrcError::DimensionMismatch { left: t.n_rows(), right: rows });
            }
            for c in 0..t.n_cols() {
                data.set_column(at + c, &t.data.column(c));
            }
            columns.extend_from_slice(&t.columns);
            at += t.n_cols();
        }
        Ok(FeatureTable { data, columns, washout: first.washout })
    }
}

/// Restarting protocol: the disturbance-free trajectory, all observables read
/// from the exact state.
pub fn run_rsp(series: &TimeSeries, spec: &ReservoirSpec) -> Result<FeatureTable> {
    run_olp_with_mask(series, spec, &BackActionMask::all_ones(spec.n_spins), &Axis::ALL)
}

/// Online protocol at strength g: three passes over the series, one per
/// measurement direction, with back-action applied after every step.
pub fn run_olp(series: &TimeSeries, spec: &ReservoirSpec, g: f64) -> Result<FeatureTable> {
    if g <= 0.0 {
        return Err(QrcError::InvalidStrength(
            g,
            "OLP needs g > 0; at g = 0 the measurement record carries no information",
        ));
    }
    let mask = backaction_mask(g, spec.n_spins)?;
    run_olp_with_mask(series, spec, &mask, &Axis::ALL)
}

/// OLP with an explicit mask (test hook) and a choice of direction passes.
///
/// With the trivial mask each pass is the same disturbance-free trajectory,
/// so the output is bit-identical to the RSP table.
pub fn run_olp_with_mask(
    series: &TimeSeries,
    spec: &ReservoirSpec,
    mask: &BackActionMask,
    directions: &[Axis],
) -> Result<FeatureTable> {
    let n = spec.n_spins;
    let obs = ObservableSet::new(n)?;
    let u = build_propagator(spec)?;
    let k_len = series.values.len();
    let per_dir = obs.cols_per_direction();

    let mut blocks: Vec<DMatrix<f64>> = Vec::with_capacity(directions.len());
    let trivial = mask.is_trivial();
    let mut shared: Option<DMatrix<f64>> = None;
    for &basis in directions {
        // disturbance-free passes share one trajectory per basis; compute once
        if trivial {
            if shared.is_none() {
                shared = Some(run_pass(series, spec, &u, mask, Axis::Z, &obs, true)?);
            }
            blocks.push(project_basis(shared.as_ref().unwrap(), basis, &obs));
        } else {
            blocks.push(run_pass(series, spec, &u, mask, basis, &obs, false)?);
        }
    }

    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut data = DMatrix::zeros(k_len, total);
    let mut columns = Vec::with_capacity(total);
    let mut at = 0;
    for (block, &basis) in blocks.iter().zip(directions) {
        for c in 0..block.ncols() {
            data.set_column(at + c, &block.column(c));
        }
        columns.extend(direction_columns(basis, n));
        at += per_dir;
    }
    Ok(FeatureTable { data, columns, washout: DEFAULT_WASHOUT })
}

fn direction_columns(axis: Axis, n_spins: usize) -> Vec<ColumnInfo> {
    let mut cols = Vec::new();
    for _ in 0..n_spins {
        cols.push(ColumnInfo { axis, kind: ColumnKind::Single });
    }
    for _ in 0..n_spins * (n_spins - 1) / 2 {
        cols.push(ColumnInfo { axis, kind: ColumnKind::Pair });
    }
    for _ in 0..n_spins {
        cols.push(ColumnInfo { axis, kind: ColumnKind::Variance });
    }
    cols
}

/// One trajectory; when `all_axes` is set, every direction is extracted from
/// the same state (the disturbance-free case), otherwise only `basis`.
fn run_pass(
    series: &TimeSeries,
    spec: &ReservoirSpec,
    u: &OperatorMatrix,
    mask: &BackActionMask,
    basis: Axis,
    obs: &ObservableSet,
    all_axes: bool,
) -> Result<DMatrix<f64>> {
    let k_len = series.values.len();
    let per_dir = obs.cols_per_direction();
    let n_cols = if all_axes { 3 * per_dir } else { per_dir };
    let mut out = DMatrix::zeros(k_len, n_cols);
    let mut rho = QuantumState::all_zero(spec.n_spins)?;
    for (k, &s) in series.values.iter().enumerate() {
        rho = step_map(&rho, s, u, spec.input_site)?;
        rho = dephase_along(&rho, basis, mask)?;
        if all_axes {
            let mut at = 0;
            for axis in Axis::ALL {
                let row = extract_features(&rho, axis, obs)?;
                for (c, v) in row.into_iter().enumerate() {
                    out[(k, at + c)] = v;
                }
                at += per_dir;
            }
        } else {
            let row = extract_features(&rho, basis, obs)?;
            for (c, v) in row.into_iter().enumerate() {
                out[(k, c)] = v;
            }
        }
    }
    Ok(out)
}

/// Pick one direction's block out of an all-axes pass matrix.
fn project_basis(all: &DMatrix<f64>, basis: Axis, obs: &ObservableSet) -> DMatrix<f64> {
    let per_dir = obs.cols_per_direction();
    let offset = match basis {
        Axis::X => 0,
        Axis::Y => per_dir,
        Axis::Z => 2 * per_dir,
    };
    all.columns(offset, per_dir).into_owned()
}

/// Feedback layer configuration: strength, wiring and readout axis.
#[derive(Clone, Debug)]
pub struct FeedbackSpec {
    pub a_fb: f64,
    /// Ordered (control, target) pairs; the layer applies them in order.
    pub pattern: Vec<(usize, usize)>,
    pub feedback_axis: Axis,
}

impl FeedbackSpec {
    /// Brick-wall wiring covering all qubits: (0,1),(2,3),... then (1,2),(3,4),...
    pub fn brick_wall(a_fb: f64, n_spins: usize) -> Self {
        let mut pattern = Vec::new();
        let mut i = 0;
        while i + 1 < n_spins {
            pattern.push((i, i + 1));
            i += 2;
        }
        let mut i = 1;
        while i + 1 < n_spins {
            pattern.push((i, i + 1));
            i += 2;
        }
        Self { a_fb, pattern, feedback_axis: Axis::Z }
    }

    fn validate(&self, n_spins: usize) -> Result<()> {
        for &(i, j) in &self.pattern {
            if i == j || i >= n_spins || j >= n_spins {
                return Err(QrcError::InvalidParameter(format!(
                    "invalid feedback pair ({i}, {j}) for {n_spins} spins"
                )));
            }
        }
        Ok(())
    }
}

fn embed_single_qubit(gate: &CMatrix, site: usize, n_spins: usize) -> CMatrix {
    let dim = 1usize << n_spins;
    let bit = n_spins - 1 - site;
    let mask = 1usize << bit;
    let mut out = CMatrix::zeros(dim, dim);
    for a in 0..dim {
        let sa = (a & mask != 0) as usize;
        for sb in 0..2 {
            let b = (a & !mask) | (sb << bit);
            out[(a, b)] = gate[(sa, sb)];
        }
    }
    out
}

fn rx_gate(theta: f64) -> CMatrix {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(theta / 2.0).sin());
    CMatrix::from_row_slice(2, 2, &[c, s, s, c])
}

fn rz_gate(theta: f64) -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = (-C64::i() * (theta / 2.0)).exp();
    m[(1, 1)] = (C64::i() * (theta / 2.0)).exp();
    m
}

fn cnot(control: usize, target: usize, n_spins: usize) -> CMatrix {
    let dim = 1usize << n_spins;
    let cbit = 1usize << (n_spins - 1 - control);
    let tbit = 1usize << (n_spins - 1 - target);
    let mut m = CMatrix::zeros(dim, dim);
    for b in 0..dim {
        let b2 = if b & cbit != 0 { b ^ tbit } else { b };
        m[(b2, b)] = C64::new(1.0, 0.0);
    }
    m
}

/// Two-qubit feedback module RX_i RX_j CX_ij RZ_j CX_ij at angle theta.
pub fn feedback_module(i: usize, j: usize, theta: f64, n_spins: usize) -> CMatrix {
    let rx_i = embed_single_qubit(&rx_gate(theta), i, n_spins);
    let rx_j = embed_single_qubit(&rx_gate(theta), j, n_spins);
    let rz_j = embed_single_qubit(&rz_gate(theta), j, n_spins);
    let cx = cnot(i, j, n_spins);
    rx_i * rx_j * &cx * rz_j * &cx
}

/// Unitary feedback layer built from the previous step's expectation values;
/// each module on (i, j) uses theta = a_fb * <sigma_i>.
pub fn feedback_layer(
    expectations: &[f64],
    fb: &FeedbackSpec,
    n_spins: usize,
) -> Result<OperatorMatrix> {
    fb.validate(n_spins)?;
    if expectations.len() != n_spins {
        return Err(QrcError::DimensionMismatch { left: expectations.len(), right: n_spins });
    }
    if expectations.iter().any(|e| e.abs() > 1.0 + 1e-9) {
        return Err(QrcError::InvalidParameter(
            "feedback expectations must lie in [-1, 1]".into(),
        ));
    }
    let dim = 1usize << n_spins;
    let mut u = CMatrix::identity(dim, dim);
    for &(i, j) in &fb.pattern {
        let theta = fb.a_fb * expectations[i];
        u = feedback_module(i, j, theta, n_spins) * u;
    }
    Ok(OperatorMatrix::general(u))
}

/// Feedback-driven protocol: reset per input, classical memory re-injected via
/// the feedback layer, single-spin readout in all three directions.
pub fn run_feedback(
    series: &TimeSeries,
    spec: &ReservoirSpec,
    fb: &FeedbackSpec,
) -> Result<FeatureTable> {
    fb.validate(spec.n_spins)?;
    let n = spec.n_spins;
    let obs = ObservableSet::new(n)?;
    let u = build_propagator(spec)?;
    let k_len = series.values.len();
    let mut data = DMatrix::zeros(k_len, 3 * n);
    let mut prev = vec![0.0f64; n];
    // |0...0| marginal of the non-input spins
    let half = 1usize << (n - 1);
    let mut rest_zero = CMatrix::zeros(half, half);
    rest_zero[(0, 0)] = C64::new(1.0, 0.0);

    for (k, &s) in series.values.iter().enumerate() {
        let amps = encode_input(s)?;
        let injected = crate::state::embed_pure_at_site(amps, &rest_zero, spec.input_site, n)?;
        let layer = feedback_layer(&prev, fb, n)?;
        let pre = &layer.mat * injected * layer.mat.adjoint();
        let evolved = &u.mat * pre * u.mat.adjoint();
        let rho = QuantumState::from_parts_unchecked(evolved, n).rehermitized();
        let mut next_prev = prev.clone();
        for (a, axis) in Axis::ALL.iter().enumerate() {
            for i in 0..n {
                let v = expectation(&rho, obs.single(*axis, i))?;
                data[(k, a * n + i)] = v;
                if *axis == fb.feedback_axis {
                    next_prev[i] = v;
                }
            }
        }
        prev = next_prev;
    }

    let mut columns = Vec::with_capacity(3 * n);
    for axis in Axis::ALL {
        for _ in 0..n {
            columns.push(ColumnInfo { axis, kind: ColumnKind::Single });
        }
    }
    Ok(FeatureTable { data, columns, washout: DEFAULT_WASHOUT })
}

/// Purity of the trajectory after each step of a single-basis OLP pass.
/// Used to check that back-action only ever reduces coherence.
pub fn olp_purity_trace(
    series: &TimeSeries,
    spec: &ReservoirSpec,
    g: f64,
    basis: Axis,
) -> Result<Vec<(f64, f64)>> {
    let mask = backaction_mask(g, spec.n_spins)?;
    let u = build_propagator(spec)?;
    let mut rho = QuantumState::all_zero(spec.n_spins)?;
    let mut out = Vec::with_capacity(series.values.len());
    for &s in &series.values {
        rho = step_map(&rho, s, &u, spec.input_site)?;
        let before = rho.purity();
        rho = dephase_along(&rho, basis, &mask)?;
        out.push((before, rho.purity()));
    }
    Ok(out)
}
