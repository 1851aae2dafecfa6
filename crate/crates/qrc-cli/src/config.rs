//! Flat key=value sweep configuration files.
//!
//! ```text
//! # short-term memory, desk scale
//! task = memory
//! g_grid = 0.1,0.26,0.5,1,2
//! h_grid = logspace(0.01,40,40)
//! realizations = 5
//! master_seed = 42
//! shot_mode = finite(1.5e6)
//! ```

use std::path::PathBuf;

use anyhow::{bail, Context};

use qrc_core::benchmark::TaskKind;
use qrc_core::sweep::{log_spaced, DirectionFilter, ShotMode, SweepConfig};

/// Comma-separated reals, or `logspace(lo,hi,n)`.
pub fn parse_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    let text = text.trim();
    if let Some(inner) = text
        .strip_prefix("logspace(")
        .and_then(|rest| rest.strip_suffix(')'))
    {
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            bail!("logspace takes (lo, hi, n), got '{text}'");
        }
        let lo: f64 = parts[0].parse().context("logspace lo")?;
        let hi: f64 = parts[1].parse().context("logspace hi")?;
        let n: usize = parts[2].parse().context("logspace n")?;
        return Ok(log_spaced(lo, hi, n));
    }
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("bad grid value '{}'", p.trim()))
        })
        .collect()
}

fn parse_shot_mode(text: &str) -> anyhow::Result<ShotMode> {
    let text = text.trim();
    if text == "infinite" {
        return Ok(ShotMode::Infinite);
    }
    if let Some(inner) = text
        .strip_prefix("finite(")
        .and_then(|rest| rest.strip_suffix(')'))
    {
        let n: f64 = inner.trim().parse().context("finite shot count")?;
        return Ok(ShotMode::Finite(n));
    }
    bail!("shot_mode must be 'infinite' or 'finite(<N_s>)', got '{text}'");
}

/// Parse a config file body. Unset keys keep the desk-scale defaults; the
/// Santa Fe path also falls back to $QRC_SANTAFE_PATH for the forward task.
pub fn parse_sweep_config(text: &str) -> anyhow::Result<SweepConfig> {
    let mut config = SweepConfig::desk_memory();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key = value, got '{line}'", ln + 1))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "task" => {
                config.task = value
                    .parse::<TaskKind>()
                    .map_err(|e| anyhow::anyhow!("line {}: {e}", ln + 1))?
            }
            "g_grid" => config.g_grid = parse_grid(value)?,
            "h_grid" => config.h_grid = parse_grid(value)?,
            "realizations" => config.realizations = value.parse().context("realizations")?,
            "k" => config.k = value.parse().context("k")?,
            "eta_max" => config.eta_max = value.parse().context("eta_max")?,
            "n_spins" => config.n_spins = value.parse().context("n_spins")?,
            "dt" => config.dt = value.parse().context("dt")?,
            "washout" => config.washout = value.parse().context("washout")?,
            "shot_mode" => config.shot_mode = parse_shot_mode(value)?,
            "direction_filter" => {
                config.direction_filter = value
                    .parse::<DirectionFilter>()
                    .map_err(|e| anyhow::anyhow!("line {}: {e}", ln + 1))?
            }
            "master_seed" => config.master_seed = value.parse().context("master_seed")?,
            "santafe_path" => config.santafe_path = Some(PathBuf::from(value)),
            other => bail!("line {}: unknown config key '{other}'", ln + 1),
        }
    }
    if config.task == TaskKind::Forward && config.santafe_path.is_none() {
        config.santafe_path = std::env::var_os(crate::SANTAFE_ENV).map(PathBuf::from);
    }
    config.validate()?;
    Ok(config)
}
