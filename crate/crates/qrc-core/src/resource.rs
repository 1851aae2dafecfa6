//! Finite-shot noise injection and experimental time / shot-budget accounting.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{QrcError, Result};
use crate::protocols::{ColumnKind, FeatureTable};
use crate::rng::stream_rng;

/// Measurement strength as seen by the shot-noise model; RSP measurements are
/// projective, i.e. the g -> infinity limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseStrength {
    Finite(f64),
    Projective,
}

impl NoiseStrength {
    fn validate(self) -> Result<Self> {
        match self {
            NoiseStrength::Finite(g) if g <= 0.0 => Err(QrcError::InvalidStrength(
                g,
                "shot noise diverges at g = 0; use Projective for the RSP limit",
            )),
            other => Ok(other),
        }
    }
}

/// Shot budget for one protocol comparison at equal wall-clock time.
#[derive(Clone, Copy, Debug)]
pub struct ShotBudget {
    pub n_shots_olp: f64,
    pub n_shots_rsp: f64,
    pub k: usize,
    pub k_wo: usize,
}

impl ShotBudget {
    pub fn from_olp_shots(n_shots_olp: f64, k: usize, k_wo: usize) -> Result<Self> {
        let n_shots_rsp = shots_rsp_equivalent(n_shots_olp, k, k_wo)?;
        Ok(Self { n_shots_olp, n_shots_rsp, k, k_wo })
    }
}

/// Standard deviation of a single-spin expectation estimate.
pub fn sigma_single(g: NoiseStrength, n_shots: f64) -> Result<f64> {
    let g = g.validate()?;
    if n_shots <= 0.0 {
        return Err(QrcError::InvalidParameter(format!(
            "shot count must be positive, got {n_shots}"
        )));
    }
    Ok(match g {
        NoiseStrength::Projective => 1.0 / n_shots.sqrt(),
        NoiseStrength::Finite(g) => ((g * g + 1.0) / (g * g * n_shots)).sqrt(),
    })
}

/// Standard deviation of a two-spin expectation estimate.
pub fn sigma_pair(g: NoiseStrength, n_shots: f64) -> Result<f64> {
    let g = g.validate()?;
    if n_shots <= 0.0 {
        return Err(QrcError::InvalidParameter(format!(
            "shot count must be positive, got {n_shots}"
        )));
    }
    Ok(match g {
        NoiseStrength::Projective => 1.0 / n_shots.sqrt(),
        NoiseStrength::Finite(g) => {
            let g2 = g * g;
            ((g2 * g2 + 2.0 * g2 + 1.0) / (g2 * g2 * n_shots)).sqrt()
        }
    })
}

/// Add i.i.d. Gaussian shot noise to every entry, column-type aware: single
/// and variance columns get the single-spin sigma, pair columns the two-spin
/// sigma. Streams are keyed by (seed, row, column), so results are identical
/// regardless of evaluation order. Values are not clipped.
pub fn apply_shot_noise(
    table: &FeatureTable,
    g: NoiseStrength,
    n_shots: f64,
    seed: u64,
) -> Result<FeatureTable> {
    let s_single = sigma_single(g, n_shots)?;
    let s_pair = sigma_pair(g, n_shots)?;
    if s_single == 0.0 && s_pair == 0.0 {
        return Ok(table.clone());
    }
    let mut out = table.clone();
    for r in 0..table.n_rows() {
        for c in 0..table.n_cols() {
            let sigma = match table.columns[c].kind {
                ColumnKind::Pair => s_pair,
                ColumnKind::Single | ColumnKind::Variance => s_single,
            };
            let mut rng = stream_rng(seed, &[0x7a0, r as u64, c as u64]);
            let z: f64 = StandardNormal.sample(&mut rng);
            out.data[(r, c)] += sigma * z;
        }
    }
    Ok(out)
}

/// Experimental time for the RSP: quadratic in the series length because every
/// input requires reprocessing the history.
pub fn time_rsp(k: usize, k_wo: usize, dt: f64, n_shots: f64) -> f64 {
    let k_eff = (k - k_wo) as f64;
    let tau_wo = k_wo as f64 * dt;
    3.0 * n_shots * (k_eff * tau_wo + 0.5 * (k_eff + 1.0) * k_eff * dt)
}

/// Experimental time for the OLP: linear in the series length. The factor 3
/// accounts for the three measurement directions.
pub fn time_olp(k: usize, dt: f64, n_shots: f64) -> f64 {
    3.0 * n_shots * (k as f64) * dt
}

/// RSP shot budget at equal wall-clock time with the OLP.
pub fn shots_rsp_equivalent(n_shots_olp: f64, k: usize, k_wo: usize) -> Result<f64> {
    if k <= k_wo {
        return Err(QrcError::InvalidParameter(format!(
            "series length {k} must exceed washout {k_wo}"
        )));
    }
    let k_eff = (k - k_wo) as f64;
    Ok(n_shots_olp * 2.0 * (k as f64) / (k_eff * k_eff + k_eff * (2.0 * k_wo as f64 + 1.0)))
}
