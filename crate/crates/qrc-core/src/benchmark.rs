//! Task generation, linear readout training and capacity metrics.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QrcError, Result};
use crate::protocols::{ColumnKind, FeatureTable};
use crate::rng::stream_rng;

pub const SANTAFE_LEN: usize = 2000;
pub const MEMORY_LEN: usize = 1000;

/// Relative singular-value cutoff of the pseudo-inverse readout solver.
pub const SVD_CUTOFF: f64 = 1e-10;
/// Fraction of aligned rows used for training; the split is contiguous.
pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesOrigin {
    SantaFe,
    UniformRandom,
}

/// Normalized input series, values in [0, 1].
#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub origin: SeriesOrigin,
}

impl TimeSeries {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(QrcError::InputOutOfRange { value: *v });
        }
        Ok(Self { values, origin: SeriesOrigin::UniformRandom })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn truncated(mut self, k: usize) -> Self {
        self.values.truncate(k);
        self
    }
}

/// Santa Fe laser series: plain text, one value per line, first `SANTAFE_LEN`
/// entries min-max normalized to [0, 1].
pub fn load_santafe(path: &Path) -> Result<TimeSeries> {
    load_santafe_k(path, SANTAFE_LEN)
}

pub fn load_santafe_k(path: &Path, k: usize) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path)?;
    let mut raw = Vec::with_capacity(k);
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| {
            QrcError::Series(format!("non-numeric value '{t}' on line {}", lineno + 1))
        })?;
        raw.push(v);
        if raw.len() == k {
            break;
        }
    }
    if raw.len() < k {
        return Err(QrcError::Series(format!(
            "need at least {k} values, file has {}",
            raw.len()
        )));
    }
    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max - min <= 0.0 {
        return Err(QrcError::Series("constant series cannot be normalized".into()));
    }
    let values = raw.iter().map(|v| (v - min) / (max - min)).collect();
    Ok(TimeSeries { values, origin: SeriesOrigin::SantaFe })
}

/// 1000 i.i.d. uniform [0, 1] points for the short-term memory task.
pub fn gen_memory_series(seed: u64) -> TimeSeries {
    gen_memory_series_k(seed, MEMORY_LEN)
}

pub fn gen_memory_series_k(seed: u64, k: usize) -> TimeSeries {
    let mut rng = stream_rng(seed, &[0x5e2]);
    let values = (0..k).map(|_| rng.gen::<f64>()).collect();
    TimeSeries { values, origin: SeriesOrigin::UniformRandom }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// t_k = s_{k+eta}
    Forward,
    /// t_k = s_{k-eta}
    Memory,
}

impl std::str::FromStr for TaskKind {
    type Err = QrcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(TaskKind::Forward),
            "memory" => Ok(TaskKind::Memory),
            other => Err(QrcError::InvalidParameter(format!(
                "unknown task '{other}', expected forward or memory"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub eta: usize,
    pub eta_max: usize,
}

impl TaskSpec {
    pub fn new(kind: TaskKind, eta: usize, eta_max: usize) -> Result<Self> {
        if eta == 0 || eta > eta_max {
            return Err(QrcError::InvalidParameter(format!(
                "eta must satisfy 1 <= eta <= eta_max, got eta={eta}, eta_max={eta_max}"
            )));
        }
        Ok(Self { kind, eta, eta_max })
    }
}

/// Targets aligned to feature rows: row `first_row + i` pairs with `values[i]`.
#[derive(Clone, Debug)]
pub struct TargetSeries {
    pub values: Vec<f64>,
    pub first_row: usize,
}

/// Shifted target series; rows without a defined target are excluded.
pub fn make_target(series: &TimeSeries, task: &TaskSpec) -> Result<TargetSeries> {
    let k = series.len();
    if task.eta >= k {
        return Err(QrcError::InvalidParameter(format!(
            "eta = {} out of range for series of length {k}",
            task.eta
        )));
    }
    match task.kind {
        TaskKind::Forward => Ok(TargetSeries {
            values: series.values[task.eta..].to_vec(),
            first_row: 0,
        }),
        TaskKind::Memory => Ok(TargetSeries {
            values: series.values[..k - task.eta].to_vec(),
            first_row: task.eta,
        }),
    }
}

/// Trained linear predictor: weights over feature columns plus an intercept.
#[derive(Clone, Debug)]
pub struct Readout {
    pub weights: DVector<f64>,
    pub intercept: f64,
}

impl Readout {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(row)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.intercept
    }
}

/// Least squares with intercept via SVD pseudo-inverse, relative cutoff
/// `SVD_CUTOFF`. Rows are (already aligned) feature rows.
pub fn train_readout(features: &DMatrix<f64>, targets: &[f64]) -> Result<Readout> {
    let rows = features.nrows();
    let cols = features.ncols();
    if rows != targets.len() {
        return Err(QrcError::DimensionMismatch { left: rows, right: targets.len() });
    }
    if rows < cols + 1 {
        return Err(QrcError::IllPosed(format!(
            "{rows} training rows for {cols} features (+ intercept)"
        )));
    }
    // augment with an intercept column
    let mut design = DMatrix::zeros(rows, cols + 1);
    design.view_mut((0, 0), (rows, cols)).copy_from(features);
    for r in 0..rows {
        design[(r, cols)] = 1.0;
    }
    let y = DVector::from_column_slice(targets);
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = SVD_CUTOFF * max_sv;
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    // w = V S^+ U^T y
    let uty = u.transpose() * &y;
    let mut scaled = DVector::zeros(svd.singular_values.len());
    for (i, s) in svd.singular_values.iter().enumerate() {
        scaled[i] = if *s > cutoff { uty[i] / s } else { 0.0 };
    }
    let w_full = vt.transpose() * scaled;
    let intercept = w_full[cols];
    let weights = DVector::from_iterator(cols, w_full.iter().take(cols).cloned());
    Ok(Readout { weights, intercept })
}

/// Squared Pearson correlation of predictions and targets; 0 by convention if
/// either side has zero variance.
pub fn capacity(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(QrcError::DimensionMismatch {
            left: predictions.len(),
            right: targets.len(),
        });
    }
    let n = predictions.len();
    if n < 2 {
        return Err(QrcError::InvalidParameter(
            "capacity needs at least 2 points".into(),
        ));
    }
    let nf = n as f64;
    let mean_p: f64 = predictions.iter().sum::<f64>() / nf;
    let mean_t: f64 = targets.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var_p = 0.0;
    let mut var_t = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        let dp = p - mean_p;
        let dt = t - mean_t;
        cov += dp * dt;
        var_p += dp * dp;
        var_t += dt * dt;
    }
    if var_p <= 0.0 || var_t <= 0.0 {
        return Ok(0.0);
    }
    Ok(((cov * cov) / (var_p * var_t)).min(1.0))
}

/// Per-delay capacities and their sum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapacityReport {
    pub capacities: Vec<f64>,
    pub sum_capacity: f64,
}

impl CapacityReport {
    pub fn from_capacities(capacities: Vec<f64>) -> Self {
        let sum_capacity = capacities.iter().sum();
        Self { capacities, sum_capacity }
    }
}

/// Train and score one sub-task: discard washout, align targets, train on the
/// first contiguous 70%, evaluate capacity on the held-out 30%.
pub fn evaluate_subtask(
    table: &FeatureTable,
    series: &TimeSeries,
    task: &TaskSpec,
) -> Result<f64> {
    let target = make_target(series, task)?;
    let first = target.first_row.max(table.washout);
    let last = target.first_row + target.values.len(); // exclusive row bound
    if last <= first {
        return Err(QrcError::IllPosed("no aligned rows after washout".into()));
    }
    let aligned = last - first;
    let n_train = ((aligned as f64) * TRAIN_FRACTION).floor() as usize;
    let n_test = aligned - n_train;
    if n_test < 2 {
        return Err(QrcError::IllPosed("held-out split too small".into()));
    }

    let x = table.data.rows(first, aligned).into_owned();
    let y: Vec<f64> = (0..aligned)
        .map(|i| target.values[first - target.first_row + i])
        .collect();

    let x_train = x.rows(0, n_train).into_owned();
    let readout = train_readout(&x_train, &y[..n_train])?;

    let mut preds = Vec::with_capacity(n_test);
    for r in n_train..aligned {
        let row: Vec<f64> = x.row(r).iter().cloned().collect();
        preds.push(readout.predict_row(&row));
    }
    capacity(&preds, &y[n_train..])
}

/// Capacities for eta = 1..=eta_max, each with an independently trained
/// readout, plus the sum capacity.
pub fn capacity_report(
    table: &FeatureTable,
    series: &TimeSeries,
    kind: TaskKind,
    eta_max: usize,
) -> Result<CapacityReport> {
    let mut caps = Vec::with_capacity(eta_max);
    for eta in 1..=eta_max {
        let task = TaskSpec::new(kind, eta, eta_max)?;
        caps.push(evaluate_subtask(table, series, &task)?);
    }
    Ok(CapacityReport::from_capacities(caps))
}

/// P_R = OLP sum capacity over the h-optimized RSP sum capacity.
pub fn performance_ratio(olp_sum: f64, rsp_best_sum: f64) -> Result<f64> {
    if rsp_best_sum <= 0.0 {
        return Err(QrcError::InvalidParameter(format!(
            "performance ratio undefined for RSP best sum capacity {rsp_best_sum}"
        )));
    }
    Ok(olp_sum / rsp_best_sum)
}

/// Indices of non-constant-by-construction columns (everything but variances).
pub fn informative_columns(table: &FeatureTable) -> Vec<usize> {
    table
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind != ColumnKind::Variance)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{ColumnInfo, ColumnKind};
    use crate::state::Axis;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn table_from(data: DMatrix<f64>, washout: usize) -> FeatureTable {
        let columns = (0..data.ncols())
            .map(|_| ColumnInfo { axis: Axis::Z, kind: ColumnKind::Single })
            .collect();
        FeatureTable { data, columns, washout }
    }

    #[test]
    fn santafe_loading_normalizes_to_unit_range() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for i in 0..2500 {
            writeln!(f, "{}", (i % 137) as f64).unwrap();
        }
        let s = load_santafe(f.path()).unwrap();
        assert_eq!(s.len(), 2000);
        assert_eq!(s.origin, SeriesOrigin::SantaFe);
        let min = s.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = s.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(min, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(max, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn santafe_rejects_short_constant_and_bad_files() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for _ in 0..100 {
            writeln!(f, "1.0").unwrap();
        }
        assert!(load_santafe(f.path()).is_err()); // too short

        let mut f = tempfile::NamedTempFile::new().unwrap();
        for _ in 0..2000 {
            writeln!(f, "3.5").unwrap();
        }
        assert!(load_santafe(f.path()).is_err()); // constant

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1.0\nnot-a-number").unwrap();
        assert!(load_santafe(f.path()).is_err());

        assert!(load_santafe(Path::new("/nonexistent/santafe.txt")).is_err());
    }

    #[test]
    fn memory_series_shape_and_determinism() {
        let a = gen_memory_series(3);
        let b = gen_memory_series(3);
        assert_eq!(a.values, b.values);
        assert_eq!(a.len(), 1000);
        assert!(a.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn target_alignment_forward() {
        let s = TimeSeries::from_values(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let t = make_target(&s, &TaskSpec::new(TaskKind::Forward, 1, 5).unwrap()).unwrap();
        assert_eq!(t.first_row, 0);
        assert_eq!(t.values, vec![0.2, 0.3, 0.4]);
    }

    #[test]
    fn target_alignment_memory() {
        let s = TimeSeries::from_values(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let t = make_target(&s, &TaskSpec::new(TaskKind::Memory, 2, 5).unwrap()).unwrap();
        assert_eq!(t.first_row, 2);
        assert_eq!(t.values, vec![0.1, 0.2]);
    }

    #[test]
    fn eta_zero_is_rejected() {
        assert!(TaskSpec::new(TaskKind::Memory, 0, 5).is_err());
    }

    #[test]
    fn eta_beyond_series_is_rejected() {
        let s = TimeSeries::from_values(vec![0.1, 0.2]).unwrap();
        assert!(make_target(&s, &TaskSpec::new(TaskKind::Forward, 2, 2).unwrap()).is_err());
    }

    #[test]
    fn readout_recovers_exact_linear_relation() {
        let mut rng = crate::rng::stream_rng(2, &[0]);
        let rows = 40;
        let cols = 5;
        let x = DMatrix::from_fn(rows, cols, |_, _| rand::Rng::gen::<f64>(&mut rng));
        let w_true = [1.5, -2.0, 0.25, 3.0, -0.5];
        let y: Vec<f64> = (0..rows)
            .map(|r| {
                (0..cols).map(|c| x[(r, c)] * w_true[c]).sum::<f64>() + 0.7
            })
            .collect();
        let readout = train_readout(&x, &y).unwrap();
        for r in 0..rows {
            let row: Vec<f64> = x.row(r).iter().cloned().collect();
            assert!((readout.predict_row(&row) - y[r]).abs() < 1e-8);
        }
    }

    #[test]
    fn readout_handles_constant_columns() {
        // a constant (variance-style) column gets no effective weight
        let mut rng = crate::rng::stream_rng(4, &[0]);
        let rows = 50;
        let mut x = DMatrix::from_fn(rows, 4, |_, _| rand::Rng::gen::<f64>(&mut rng));
        for r in 0..rows {
            x[(r, 3)] = 1.0;
        }
        let y: Vec<f64> = (0..rows).map(|r| 2.0 * x[(r, 0)] - x[(r, 1)]).collect();
        let full = train_readout(&x, &y).unwrap();
        let reduced = train_readout(&x.columns(0, 3).into_owned(), &y).unwrap();
        for r in 0..rows {
            let row_full: Vec<f64> = x.row(r).iter().cloned().collect();
            let row_red: Vec<f64> = row_full[..3].to_vec();
            assert!(
                (full.predict_row(&row_full) - reduced.predict_row(&row_red)).abs() < 1e-8
            );
        }
    }

    #[test]
    fn readout_matches_normal_equations_oracle() {
        let mut rng = crate::rng::stream_rng(6, &[0]);
        let rows = 120;
        let cols = 6;
        let x = DMatrix::from_fn(rows, cols, |_, _| rand::Rng::gen::<f64>(&mut rng));
        let y: Vec<f64> = (0..rows).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
        let readout = train_readout(&x, &y).unwrap();

        // normal equations with tiny ridge
        let mut design = DMatrix::zeros(rows, cols + 1);
        design.view_mut((0, 0), (rows, cols)).copy_from(&x);
        for r in 0..rows {
            design[(r, cols)] = 1.0;
        }
        let yv = DVector::from_column_slice(&y);
        let gram = design.transpose() * &design
            + DMatrix::identity(cols + 1, cols + 1).scale(1e-12);
        let rhs = design.transpose() * yv;
        let w = gram.lu().solve(&rhs).unwrap();
        for c in 0..cols {
            assert!(
                (readout.weights[c] - w[c]).abs() < 1e-6,
                "column {c}: {} vs {}",
                readout.weights[c],
                w[c]
            );
        }
        assert!((readout.intercept - w[cols]).abs() < 1e-6);
    }

    #[test]
    fn readout_rejects_ill_posed_systems() {
        let x = DMatrix::from_element(3, 5, 0.5);
        assert!(train_readout(&x, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn capacity_of_perfect_and_affine_predictions() {
        let t: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
        assert_abs_diff_eq!(capacity(&t, &t).unwrap(), 1.0, epsilon = 1e-12);
        let p: Vec<f64> = t.iter().map(|v| -v + 5.0).collect();
        assert_abs_diff_eq!(capacity(&p, &t).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn capacity_zero_variance_convention() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let p = vec![3.0; 10];
        assert_eq!(capacity(&p, &t).unwrap(), 0.0);
        assert_eq!(capacity(&t, &p).unwrap(), 0.0);
    }

    #[test]
    fn capacity_of_independent_noise_is_small() {
        // Monte-Carlo null distribution: independent p of length 300
        let mut rng = crate::rng::stream_rng(8, &[0]);
        let mut failures = 0;
        for _ in 0..50 {
            let p: Vec<f64> = (0..300).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
            let t: Vec<f64> = (0..300).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
            if capacity(&p, &t).unwrap() >= 0.05 {
                failures += 1;
            }
        }
        assert!(failures <= 2, "{failures} of 50 null capacities above 0.05");
    }

    #[test]
    fn sum_capacity_is_plain_sum() {
        let r = CapacityReport::from_capacities(vec![1.0; 10]);
        assert_abs_diff_eq!(r.sum_capacity, 10.0, epsilon = 1e-12);
        let z = CapacityReport::from_capacities(vec![0.0; 4]);
        assert_eq!(z.sum_capacity, 0.0);
    }

    #[test]
    fn performance_ratio_basics() {
        assert_abs_diff_eq!(performance_ratio(2.0, 2.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(performance_ratio(1.0, 0.0).is_err());
    }

    #[test]
    fn forward_reversal_symmetry() {
        // forward(eta) of a series equals memory(eta) of the reversed series
        // with reversed targets
        let s = TimeSeries::from_values(vec![0.1, 0.5, 0.3, 0.9, 0.2, 0.7]).unwrap();
        let mut rev_values = s.values.clone();
        rev_values.reverse();
        let rev = TimeSeries::from_values(rev_values).unwrap();
        for eta in 1..=3usize {
            let fwd = make_target(&s, &TaskSpec::new(TaskKind::Forward, eta, 5).unwrap())
                .unwrap();
            let mem = make_target(&rev, &TaskSpec::new(TaskKind::Memory, eta, 5).unwrap())
                .unwrap();
            let mut mem_rev = mem.values.clone();
            mem_rev.reverse();
            assert_eq!(fwd.values, mem_rev);
        }
    }

    #[test]
    fn subtask_evaluation_on_synthetic_linear_table() {
        // features literally contain the delayed input, so capacity is 1
        let series = gen_memory_series_k(5, 200);
        let eta = 3usize;
        let mut data = DMatrix::zeros(200, 2);
        for k in 0..200 {
            data[(k, 0)] = if k >= eta { series.values[k - eta] } else { 0.0 };
            data[(k, 1)] = 1.0;
        }
        let table = table_from(data, 20);
        let c = evaluate_subtask(
            &table,
            &series,
            &TaskSpec::new(TaskKind::Memory, eta, 10).unwrap(),
        )
        .unwrap();
        assert!(c > 1.0 - 1e-9, "capacity {c}");
    }

    #[test]
    fn per_eta_readouts_are_independent() {
        let series = gen_memory_series_k(9, 150);
        let mut data = DMatrix::zeros(150, 3);
        for k in 0..150 {
            for (c, eta) in [1usize, 2, 3].iter().enumerate() {
                data[(k, c)] = if k >= *eta { series.values[k - *eta] } else { 0.0 };
            }
        }
        let table = table_from(data, 20);
        let full = capacity_report(&table, &series, TaskKind::Memory, 3).unwrap();
        // recompute eta = 2 alone; must be unchanged
        let solo = evaluate_subtask(
            &table,
            &series,
            &TaskSpec::new(TaskKind::Memory, 2, 3).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(full.capacities[1], solo, epsilon = 1e-15);
    }
}
