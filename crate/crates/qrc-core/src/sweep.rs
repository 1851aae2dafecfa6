//! (g, h) grid sweeps over reservoir realizations, per-direction optimization
//! and result persistence.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::{
    capacity_report, gen_memory_series_k, load_santafe_k, performance_ratio, TaskKind, TimeSeries,
};
use crate::error::{QrcError, Result};
use crate::measurement::backaction_mask;
use crate::protocols::{run_feedback, run_olp_with_mask, run_rsp, FeatureTable, FeedbackSpec};
use crate::reservoir::{ReservoirSpec, DEFAULT_DT, DEFAULT_N_SPINS, DEFAULT_WASHOUT};
use crate::resource::{apply_shot_noise, shots_rsp_equivalent, NoiseStrength};
use crate::rng::derive_seed;
use crate::state::Axis;

// seed-stream tags
const STREAM_SERIES: u64 = 0x11;
const STREAM_COUPLINGS: u64 = 0x22;
const STREAM_NOISE_RSP: u64 = 0x33;
const STREAM_NOISE_OLP: u64 = 0x44;
const STREAM_NOISE_FB: u64 = 0x55;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "n_shots_olp")]
pub enum ShotMode {
    Infinite,
    Finite(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionFilter {
    All,
    X,
    Y,
    Z,
}

impl DirectionFilter {
    pub fn axis(self) -> Option<Axis> {
        match self {
            DirectionFilter::All => None,
            DirectionFilter::X => Some(Axis::X),
            DirectionFilter::Y => Some(Axis::Y),
            DirectionFilter::Z => Some(Axis::Z),
        }
    }

    pub fn from_axis(axis: Axis) -> Self {
        match axis {
            Axis::X => DirectionFilter::X,
            Axis::Y => DirectionFilter::Y,
            Axis::Z => DirectionFilter::Z,
        }
    }
}

impl std::str::FromStr for DirectionFilter {
    type Err = QrcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(DirectionFilter::All),
            "x" => Ok(DirectionFilter::X),
            "y" => Ok(DirectionFilter::Y),
            "z" => Ok(DirectionFilter::Z),
            other => Err(QrcError::InvalidParameter(format!(
                "unknown direction filter '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub task: TaskKind,
    pub g_grid: Vec<f64>,
    pub h_grid: Vec<f64>,
    pub realizations: usize,
    /// Series length (inputs per trajectory).
    pub k: usize,
    pub eta_max: usize,
    pub n_spins: usize,
    pub dt: f64,
    pub washout: usize,
    pub shot_mode: ShotMode,
    pub direction_filter: DirectionFilter,
    pub master_seed: u64,
    pub santafe_path: Option<PathBuf>,
}

impl SweepConfig {
    /// Desk-scale short-term-memory defaults; finishes in minutes.
    pub fn desk_memory() -> Self {
        Self {
            task: TaskKind::Memory,
            g_grid: vec![0.1, 0.26, 0.5, 1.0, 2.0],
            h_grid: vec![0.03, 0.066, 0.1, 0.3, 1.0],
            realizations: 5,
            k: 300,
            eta_max: 25,
            n_spins: DEFAULT_N_SPINS,
            dt: DEFAULT_DT,
            washout: DEFAULT_WASHOUT,
            shot_mode: ShotMode::Infinite,
            direction_filter: DirectionFilter::All,
            master_seed: 42,
            santafe_path: None,
        }
    }

    /// Full-scale grids matching the reference study: 33 log-spaced g in
    /// [0.03, 3], 40 log-spaced h in [0.01, 40], 50 realizations.
    pub fn full_scale(task: TaskKind) -> Self {
        Self {
            task,
            g_grid: log_spaced(0.03, 3.0, 33),
            h_grid: log_spaced(0.01, 40.0, 40),
            realizations: 50,
            k: if task == TaskKind::Forward { 2000 } else { 1000 },
            eta_max: if task == TaskKind::Forward { 10 } else { 25 },
            n_spins: DEFAULT_N_SPINS,
            dt: DEFAULT_DT,
            washout: DEFAULT_WASHOUT,
            shot_mode: ShotMode::Infinite,
            direction_filter: DirectionFilter::All,
            master_seed: 42,
            santafe_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.g_grid.is_empty() || self.h_grid.is_empty() {
            return Err(QrcError::InvalidParameter("empty parameter grid".into()));
        }
        if !is_strictly_increasing(&self.g_grid) || !is_strictly_increasing(&self.h_grid) {
            return Err(QrcError::InvalidParameter(
                "grids must be strictly increasing".into(),
            ));
        }
        if self.g_grid.iter().any(|&g| g < 0.0) {
            return Err(QrcError::InvalidParameter("g values must be >= 0".into()));
        }
        if self.realizations == 0 {
            return Err(QrcError::InvalidParameter("need at least 1 realization".into()));
        }
        if self.k <= self.washout {
            return Err(QrcError::InvalidParameter(format!(
                "series length {} must exceed washout {}",
                self.k, self.washout
            )));
        }
        if self.task == TaskKind::Forward && self.santafe_path.is_none() {
            return Err(QrcError::InvalidParameter(
                "forward task needs a Santa Fe data file (santafe_path)".into(),
            ));
        }
        Ok(())
    }

    /// The shared input series for every cell of the sweep.
    pub fn input_series(&self) -> Result<TimeSeries> {
        match self.task {
            TaskKind::Memory => {
                Ok(gen_memory_series_k(derive_seed(self.master_seed, &[STREAM_SERIES]), self.k))
            }
            TaskKind::Forward => {
                let path = self.santafe_path.as_ref().ok_or_else(|| {
                    QrcError::InvalidParameter("forward task needs santafe_path".into())
                })?;
                load_santafe_k(path, self.k)
            }
        }
    }

    fn realization_spec(&self, h: f64, realization: usize) -> Result<ReservoirSpec> {
        // couplings are paired across protocols and cells per realization index
        let seed = derive_seed(self.master_seed, &[STREAM_COUPLINGS, realization as u64]);
        ReservoirSpec::sampled(self.n_spins, h, self.dt, seed)
    }

    fn rsp_noise(&self) -> Result<Option<(NoiseStrength, f64)>> {
        match self.shot_mode {
            ShotMode::Infinite => Ok(None),
            ShotMode::Finite(n_olp) => {
                let n_rsp = shots_rsp_equivalent(n_olp, self.k, self.washout)?;
                Ok(Some((NoiseStrength::Projective, n_rsp)))
            }
        }
    }

    fn olp_noise(&self, g: f64) -> Option<(NoiseStrength, f64)> {
        match self.shot_mode {
            ShotMode::Infinite => None,
            ShotMode::Finite(n_olp) => Some((NoiseStrength::Finite(g), n_olp)),
        }
    }
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn is_strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Rsp,
    Olp,
    Feedback,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::Rsp => write!(f, "rsp"),
            Protocol::Olp => write!(f, "olp"),
            Protocol::Feedback => write!(f, "feedback"),
        }
    }
}

/// One simulated (protocol, cell, realization) outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellRecord {
    pub protocol: Protocol,
    /// None for the RSP (no measurement-strength parameter).
    pub g: Option<f64>,
    pub h: f64,
    pub realization: usize,
    pub sum_capacity: f64,
    pub capacities: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RspSweepResult {
    pub records: Vec<CellRecord>,
    /// Mean sum capacity per h grid point.
    pub mean_by_h: Vec<(f64, f64)>,
    pub best_h: f64,
    pub best_mean: f64,
    /// max over h of each realization's sum capacity; P_R denominators.
    pub best_per_realization: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OlpCellAggregate {
    pub g: f64,
    pub h: f64,
    pub mean_pr: f64,
    pub std_pr: f64,
    pub mean_sum_capacity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OlpSweepResult {
    pub records: Vec<CellRecord>,
    /// Per-realization performance ratios, row-major over (g, h) cells.
    pub pr_records: Vec<f64>,
    pub aggregates: Vec<OlpCellAggregate>,
    pub best: OlpCellAggregate,
}

/// C_Sigma^RSP(h') on every h grid point, averaged over realizations.
pub fn sweep_rsp(config: &SweepConfig, series: &TimeSeries) -> Result<RspSweepResult> {
    config.validate()?;
    let noise = config.rsp_noise()?;
    let axis = config.direction_filter.axis();

    let jobs: Vec<(usize, usize)> = (0..config.h_grid.len())
        .flat_map(|h_ix| (0..config.realizations).map(move |r| (h_ix, r)))
        .collect();
    let mut records: Vec<(usize, usize, CellRecord)> = jobs
        .par_iter()
        .map(|&(h_ix, r)| -> Result<(usize, usize, CellRecord)> {
            let h = config.h_grid[h_ix];
            let spec = config.realization_spec(h, r)?;
            let mut table = run_rsp(series, &spec)?;
            table.washout = config.washout;
            if let Some((strength, shots)) = noise {
                let seed =
                    derive_seed(config.master_seed, &[STREAM_NOISE_RSP, h_ix as u64, r as u64]);
                table = apply_shot_noise(&table, strength, shots, seed)?;
            }
            let table = match axis {
                Some(a) => table.select_axis(a),
                None => table,
            };
            let report = capacity_report(&table, series, config.task, config.eta_max)?;
            Ok((
                h_ix,
                r,
                CellRecord {
                    protocol: Protocol::Rsp,
                    g: None,
                    h,
                    realization: r,
                    sum_capacity: report.sum_capacity,
                    capacities: report.capacities,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|(h_ix, r, _)| (*h_ix, *r));
    let records: Vec<CellRecord> = records.into_iter().map(|(_, _, rec)| rec).collect();

    let n_h = config.h_grid.len();
    let n_r = config.realizations;
    let mut mean_by_h = Vec::with_capacity(n_h);
    for h_ix in 0..n_h {
        let sum: f64 = (0..n_r).map(|r| records[h_ix * n_r + r].sum_capacity).sum();
        mean_by_h.push((config.h_grid[h_ix], sum / n_r as f64));
    }
    let (best_h, best_mean) = mean_by_h
        .iter()
        .cloned()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let best_per_realization: Vec<f64> = (0..n_r)
        .map(|r| {
            (0..n_h)
                .map(|h_ix| records[h_ix * n_r + r].sum_capacity)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();

    Ok(RspSweepResult { records, mean_by_h, best_h, best_mean, best_per_realization })
}

/// P_R(g, h) on every grid cell, mean and std over realizations. P_R pairs
/// each realization's OLP run against the same realization's best RSP.
pub fn sweep_olp(
    config: &SweepConfig,
    series: &TimeSeries,
    rsp: &RspSweepResult,
) -> Result<OlpSweepResult> {
    config.validate()?;
    if rsp.best_per_realization.iter().any(|&b| b <= 0.0) {
        return Err(QrcError::InvalidParameter(
            "RSP best sum capacity must be positive to form P_R".into(),
        ));
    }
    let directions: Vec<Axis> = match config.direction_filter.axis() {
        Some(a) => vec![a],
        None => Axis::ALL.to_vec(),
    };

    let jobs: Vec<(usize, usize, usize)> = (0..config.g_grid.len())
        .flat_map(|g_ix| {
            (0..config.h_grid.len()).flat_map(move |h_ix| {
                (0..config.realizations).map(move |r| (g_ix, h_ix, r))
            })
        })
        .collect();

    let mut results: Vec<(usize, usize, usize, CellRecord, f64)> = jobs
        .par_iter()
        .map(|&(g_ix, h_ix, r)| -> Result<(usize, usize, usize, CellRecord, f64)> {
            let g = config.g_grid[g_ix];
            let h = config.h_grid[h_ix];
            // g = 0: the measurement record is uninformative; P_R is 0 by definition
            if g == 0.0 {
                let rec = CellRecord {
                    protocol: Protocol::Olp,
                    g: Some(g),
                    h,
                    realization: r,
                    sum_capacity: 0.0,
                    capacities: vec![0.0; config.eta_max],
                };
                return Ok((g_ix, h_ix, r, rec, 0.0));
            }
            let spec = config.realization_spec(h, r)?;
            let mask = backaction_mask(g, config.n_spins)?;
            let mut table = run_olp_with_mask(series, &spec, &mask, &directions)?;
            table.washout = config.washout;
            if let Some((strength, shots)) = config.olp_noise(g) {
                let seed = derive_seed(
                    config.master_seed,
                    &[STREAM_NOISE_OLP, g_ix as u64, h_ix as u64, r as u64],
                );
                table = apply_shot_noise(&table, strength, shots, seed)?;
            }
            let report = capacity_report(&table, series, config.task, config.eta_max)?;
            let pr = performance_ratio(report.sum_capacity, rsp.best_per_realization[r])?;
            let rec = CellRecord {
                protocol: Protocol::Olp,
                g: Some(g),
                h,
                realization: r,
                sum_capacity: report.sum_capacity,
                capacities: report.capacities,
            };
            Ok((g_ix, h_ix, r, rec, pr))
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by_key(|(g_ix, h_ix, r, _, _)| (*g_ix, *h_ix, *r));

    let records: Vec<CellRecord> = results.iter().map(|(_, _, _, rec, _)| rec.clone()).collect();
    let pr_records: Vec<f64> = results.iter().map(|(_, _, _, _, pr)| *pr).collect();

    let n_r = config.realizations;
    let mut aggregates = Vec::with_capacity(config.g_grid.len() * config.h_grid.len());
    for g_ix in 0..config.g_grid.len() {
        for h_ix in 0..config.h_grid.len() {
            let base = (g_ix * config.h_grid.len() + h_ix) * n_r;
            let prs = &pr_records[base..base + n_r];
            let mean_pr = prs.iter().sum::<f64>() / n_r as f64;
            let std_pr = if n_r > 1 {
                (prs.iter().map(|p| (p - mean_pr).powi(2)).sum::<f64>() / (n_r - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            let mean_sum = records[base..base + n_r]
                .iter()
                .map(|rec| rec.sum_capacity)
                .sum::<f64>()
                / n_r as f64;
            aggregates.push(OlpCellAggregate {
                g: config.g_grid[g_ix],
                h: config.h_grid[h_ix],
                mean_pr,
                std_pr,
                mean_sum_capacity: mean_sum,
            });
        }
    }
    let best = aggregates
        .iter()
        .cloned()
        .max_by(|a, b| a.mean_pr.partial_cmp(&b.mean_pr).unwrap())
        .unwrap();

    Ok(OlpSweepResult { records, pr_records, aggregates, best })
}

/// Full sweep output: the RSP slice, the OLP map and the config echo.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub rsp: RspSweepResult,
    pub olp: OlpSweepResult,
}

/// Run the complete sweep (RSP slice, then OLP map).
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let series = config.input_series()?;
    let rsp = sweep_rsp(config, &series)?;
    let olp = sweep_olp(config, &series, &rsp)?;
    Ok(SweepResult { config: config.clone(), rsp, olp })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionOptimum {
    pub axis: Axis,
    pub g_star: f64,
    pub h_star: f64,
    pub pr: f64,
    pub rsp_best_h: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerDirectionResult {
    pub per_direction: Vec<DirectionOptimum>,
    /// P_R of the dataset combining each direction's columns at its own
    /// optimum, against the jointly optimized RSP denominator.
    pub combined_pr: f64,
    /// P_R of the jointly optimized OLP, for comparison.
    pub joint_pr: f64,
}

/// Appendix-style per-direction optimization: find (g*, h*) for each axis
/// using only that axis' columns, then score a combined dataset built from
/// each direction's own optimum.
pub fn per_direction_optimize(config: &SweepConfig) -> Result<PerDirectionResult> {
    config.validate()?;
    let series = config.input_series()?;

    // joint baseline: full-observable RSP denominator and jointly-optimal OLP
    let joint_cfg = SweepConfig { direction_filter: DirectionFilter::All, ..config.clone() };
    let joint_rsp = sweep_rsp(&joint_cfg, &series)?;
    let joint_olp = sweep_olp(&joint_cfg, &series, &joint_rsp)?;

    let mut per_direction = Vec::with_capacity(3);
    let mut optima = Vec::with_capacity(3);
    for axis in Axis::ALL {
        let cfg = SweepConfig {
            direction_filter: DirectionFilter::from_axis(axis),
            ..config.clone()
        };
        let rsp = sweep_rsp(&cfg, &series)?;
        let olp = sweep_olp(&cfg, &series, &rsp)?;
        per_direction.push(DirectionOptimum {
            axis,
            g_star: olp.best.g,
            h_star: olp.best.h,
            pr: olp.best.mean_pr,
            rsp_best_h: rsp.best_h,
        });
        optima.push((axis, olp.best.g, olp.best.h));
    }

    // combined dataset: each direction's columns generated at its own optimum
    let combined_prs: Vec<f64> = (0..config.realizations)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut blocks = Vec::with_capacity(3);
            for &(axis, g, h) in &optima {
                let spec = config.realization_spec(h, r)?;
                let mask = backaction_mask(g, config.n_spins)?;
                let mut table = run_olp_with_mask(&series, &spec, &mask, &[axis])?;
                table.washout = config.washout;
                if let Some((strength, shots)) = config.olp_noise(g) {
                    let seed = derive_seed(
                        config.master_seed,
                        &[STREAM_NOISE_OLP, 0x600 + axis as u64, r as u64],
                    );
                    table = apply_shot_noise(&table, strength, shots, seed)?;
                }
                blocks.push(table);
            }
            let refs: Vec<&FeatureTable> = blocks.iter().collect();
            let combined = FeatureTable::hconcat(&refs)?;
            let report = capacity_report(&combined, &series, config.task, config.eta_max)?;
            performance_ratio(report.sum_capacity, joint_rsp.best_per_realization[r])
        })
        .collect::<Result<Vec<_>>>()?;
    let combined_pr = combined_prs.iter().sum::<f64>() / config.realizations as f64;

    Ok(PerDirectionResult {
        per_direction,
        combined_pr,
        joint_pr: joint_olp.best.mean_pr,
    })
}

/// Configuration of the feedback-vs-OLP head-to-head comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeedbackCompareConfig {
    /// Field for the feedback-driven reservoir.
    pub h_feedback: f64,
    pub a_fb_grid: Vec<f64>,
    /// OLP comparison point.
    pub g_olp: f64,
    pub h_olp: f64,
    pub realizations: usize,
    pub k: usize,
    pub eta_max: usize,
    pub n_spins: usize,
    pub dt: f64,
    pub washout: usize,
    pub master_seed: u64,
    pub shot_mode: ShotMode,
}

impl FeedbackCompareConfig {
    pub fn desk() -> Self {
        Self {
            h_feedback: 10.0,
            a_fb_grid: vec![0.2, 0.4, 0.63, 0.8, 1.0],
            g_olp: 0.355,
            h_olp: 0.066,
            realizations: 5,
            k: 300,
            eta_max: 10,
            n_spins: DEFAULT_N_SPINS,
            dt: DEFAULT_DT,
            washout: DEFAULT_WASHOUT,
            master_seed: 42,
            shot_mode: ShotMode::Infinite,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeedbackCompareResult {
    pub config: FeedbackCompareConfig,
    /// Per realization: the best feedback strength and its capacities.
    pub feedback_best_a_fb: Vec<f64>,
    pub feedback_capacities: Vec<Vec<f64>>,
    pub olp_capacities: Vec<Vec<f64>>,
    /// Mean per-delay capacities across realizations.
    pub feedback_mean: Vec<f64>,
    pub olp_mean: Vec<f64>,
}

/// Short-term-memory head-to-head: feedback protocol (best a_fb per
/// realization, by sum capacity) against the OLP at a fixed (g, h).
pub fn compare_feedback(config: &FeedbackCompareConfig) -> Result<FeedbackCompareResult> {
    if config.a_fb_grid.is_empty() {
        return Err(QrcError::InvalidParameter("empty a_fb grid".into()));
    }
    let series = gen_memory_series_k(derive_seed(config.master_seed, &[STREAM_SERIES]), config.k);

    let per_real: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..config.realizations)
        .into_par_iter()
        .map(|r| -> Result<(f64, Vec<f64>, Vec<f64>)> {
            let coupling_seed = derive_seed(config.master_seed, &[STREAM_COUPLINGS, r as u64]);
            // feedback protocol over the a_fb grid
            let fb_spec =
                ReservoirSpec::sampled(config.n_spins, config.h_feedback, config.dt, coupling_seed)?;
            let mut best: Option<(f64, crate::benchmark::CapacityReport)> = None;
            for (a_ix, &a_fb) in config.a_fb_grid.iter().enumerate() {
                let fb = FeedbackSpec::brick_wall(a_fb, config.n_spins);
                let mut table = run_feedback(&series, &fb_spec, &fb)?;
                table.washout = config.washout;
                if let ShotMode::Finite(n_shots) = config.shot_mode {
                    let seed = derive_seed(
                        config.master_seed,
                        &[STREAM_NOISE_FB, a_ix as u64, r as u64],
                    );
                    // projective readout per step
                    table = apply_shot_noise(&table, NoiseStrength::Projective, n_shots, seed)?;
                }
                let report = capacity_report(&table, &series, TaskKind::Memory, config.eta_max)?;
                let better = match &best {
                    Some((_, b)) => report.sum_capacity > b.sum_capacity,
                    None => true,
                };
                if better {
                    best = Some((a_fb, report));
                }
            }
            let (best_a, fb_report) = best.unwrap();

            // OLP at the fixed comparison point, same couplings
            let olp_spec =
                ReservoirSpec::sampled(config.n_spins, config.h_olp, config.dt, coupling_seed)?;
            let mask = backaction_mask(config.g_olp, config.n_spins)?;
            let mut olp_table = run_olp_with_mask(&series, &olp_spec, &mask, &Axis::ALL)?;
            olp_table.washout = config.washout;
            if let ShotMode::Finite(n_shots) = config.shot_mode {
                let seed = derive_seed(config.master_seed, &[STREAM_NOISE_OLP, 0x900, r as u64]);
                olp_table = apply_shot_noise(
                    &olp_table,
                    NoiseStrength::Finite(config.g_olp),
                    n_shots,
                    seed,
                )?;
            }
            let olp_report =
                capacity_report(&olp_table, &series, TaskKind::Memory, config.eta_max)?;
            Ok((best_a, fb_report.capacities, olp_report.capacities))
        })
        .collect::<Result<Vec<_>>>()?;

    let n_r = config.realizations as f64;
    let mut feedback_mean = vec![0.0; config.eta_max];
    let mut olp_mean = vec![0.0; config.eta_max];
    for (_, fb_caps, olp_caps) in &per_real {
        for eta in 0..config.eta_max {
            feedback_mean[eta] += fb_caps[eta] / n_r;
            olp_mean[eta] += olp_caps[eta] / n_r;
        }
    }
    Ok(FeedbackCompareResult {
        config: config.clone(),
        feedback_best_a_fb: per_real.iter().map(|(a, _, _)| *a).collect(),
        feedback_capacities: per_real.iter().map(|(_, f, _)| f.clone()).collect(),
        olp_capacities: per_real.iter().map(|(_, _, o)| o.clone()).collect(),
        feedback_mean,
        olp_mean,
    })
}

/// Write per-cell CSV, aggregate CSV, JSON summary and per-delay capacity
/// CSVs for the best RSP and OLP cells.
pub fn emit_results(result: &SweepResult, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let task = match result.config.task {
        TaskKind::Forward => "forward",
        TaskKind::Memory => "memory",
    };

    // per-cell records
    let mut w = csv::Writer::from_path(out_dir.join("per_cell.csv"))?;
    w.write_record(["task", "protocol", "g", "h", "realization", "sum_capacity"])?;
    for rec in result.rsp.records.iter().chain(result.olp.records.iter()) {
        w.write_record([
            task.to_string(),
            rec.protocol.to_string(),
            rec.g.map(|g| format!("{g:.17e}")).unwrap_or_default(),
            format!("{:.17e}", rec.h),
            rec.realization.to_string(),
            format!("{:.17e}", rec.sum_capacity),
        ])?;
    }
    w.flush()?;

    // aggregate P_R map
    let mut w = csv::Writer::from_path(out_dir.join("aggregate.csv"))?;
    w.write_record(["g", "h", "mean_PR", "std_PR"])?;
    for agg in &result.olp.aggregates {
        w.write_record([
            format!("{:.17e}", agg.g),
            format!("{:.17e}", agg.h),
            format!("{:.17e}", agg.mean_pr),
            format!("{:.17e}", agg.std_pr),
        ])?;
    }
    w.flush()?;

    // per-delay capacities at the best cells, averaged over realizations
    emit_capacity_csv(
        &out_dir.join("capacity_rsp.csv"),
        &mean_capacities_at(
            &result.rsp.records,
            |rec| rec.h == result.rsp.best_h,
            result.config.eta_max,
        ),
    )?;
    emit_capacity_csv(
        &out_dir.join("capacity_olp.csv"),
        &mean_capacities_at(
            &result.olp.records,
            |rec| rec.g == Some(result.olp.best.g) && rec.h == result.olp.best.h,
            result.config.eta_max,
        ),
    )?;

    // JSON summary with config echo
    let summary = serde_json::json!({
        "config": result.config,
        "rsp_best": { "h": result.rsp.best_h, "mean_sum_capacity": result.rsp.best_mean },
        "olp_best": {
            "g": result.olp.best.g,
            "h": result.olp.best.h,
            "mean_pr": result.olp.best.mean_pr,
            "std_pr": result.olp.best.std_pr,
        },
        "aggregates": result.olp.aggregates,
    });
    let mut f = std::fs::File::create(out_dir.join("summary.json"))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn mean_capacities_at(
    records: &[CellRecord],
    select: impl Fn(&CellRecord) -> bool,
    eta_max: usize,
) -> Vec<f64> {
    let picked: Vec<&CellRecord> = records.iter().filter(|r| select(r)).collect();
    let mut mean = vec![0.0; eta_max];
    if picked.is_empty() {
        return mean;
    }
    for rec in &picked {
        for (eta, c) in rec.capacities.iter().enumerate() {
            mean[eta] += c / picked.len() as f64;
        }
    }
    mean
}

fn emit_capacity_csv(path: &Path, capacities: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["eta", "capacity"])?;
    for (i, c) in capacities.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{c:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}
