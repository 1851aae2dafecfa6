//! Fast invariant suite behind `qrc check`.

use anyhow::{ensure, Context};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use qrc_core::benchmark::{capacity, gen_memory_series_k, train_readout};
use qrc_core::measurement::{apply_backaction, backaction_mask, measurement_kernel, BackActionMask};
use qrc_core::protocols::{run_olp_with_mask, run_rsp};
use qrc_core::reservoir::ReservoirSpec;
use qrc_core::resource::shots_rsp_equivalent;
use qrc_core::rng::stream_rng;
use qrc_core::state::{hermiticity_deviation, min_eigenvalue, Axis, C64, CMatrix, QuantumState};

pub fn run_all() -> anyhow::Result<()> {
    let checks: &[(&str, fn() -> anyhow::Result<()>)] = &[
        ("equal-time shot budget", shot_budget),
        ("back-action channel", backaction_channel),
        ("measurement kernel completeness", kernel_completeness),
        ("trivial-mask protocol identity", protocol_identity),
        ("linear readout vs normal equations", readout_oracle),
        ("capacity bounds", capacity_bounds),
    ];
    for (name, check) in checks {
        check().with_context(|| format!("check failed: {name}"))?;
        println!("ok - {name}");
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

fn random_state(n_spins: usize, seed: u64) -> QuantumState {
    let dim = 1usize << n_spins;
    let mut rng = stream_rng(seed, &[0xc4ec]);
    let mut a = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            a[(i, j)] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
    }
    let rho = &a * a.adjoint();
    let tr = rho.trace().re;
    QuantumState::from_parts_unchecked(rho.scale(1.0 / tr), n_spins)
}

fn shot_budget() -> anyhow::Result<()> {
    let a = shots_rsp_equivalent(1.5e6, 2000, 20)?;
    ensure!((1484.0..=1514.0).contains(&a), "K=2000 budget {a} out of range");
    let b = shots_rsp_equivalent(1.5e6, 1000, 20)?;
    ensure!((2968.0..=3028.0).contains(&b), "K=1000 budget {b} out of range");
    Ok(())
}

fn backaction_channel() -> anyhow::Result<()> {
    for &g in &[0.0, 0.5, 2.0] {
        let mask = backaction_mask(g, 4)?;
        for k in 0..10 {
            let rho = random_state(4, 31 * k + 7);
            let out = apply_backaction(&rho, &mask)?;
            ensure!(
                (out.rho().trace() - rho.rho().trace()).norm() < 1e-12,
                "trace drift at g={g}"
            );
            ensure!(hermiticity_deviation(out.rho()) < 1e-12, "hermiticity at g={g}");
            ensure!(min_eigenvalue(out.rho()) > -1e-9, "positivity at g={g}");
        }
    }
    Ok(())
}

fn kernel_completeness() -> anyhow::Result<()> {
    for &g in &[0.25, 1.0, 3.0] {
        let (lo, hi, n) = (-40.0, 40.0, 20_000usize);
        let dv = (hi - lo) / n as f64;
        let mut total = CMatrix::zeros(2, 2);
        for i in 0..=n {
            let v = lo + i as f64 * dv;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let omega = measurement_kernel(v, g)?.mat;
            total += (omega.adjoint() * &omega).scale(w * dv / 3.0);
        }
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                ensure!(
                    (total[(i, j)] - C64::new(expect, 0.0)).norm() < 1e-8,
                    "kernel does not resolve the identity at g={g}"
                );
            }
        }
    }
    Ok(())
}

fn protocol_identity() -> anyhow::Result<()> {
    let spec = ReservoirSpec::sampled(4, 0.5, 10.0, 11)?;
    let series = gen_memory_series_k(3, 100);
    let rsp = run_rsp(&series, &spec)?;
    let olp = run_olp_with_mask(&series, &spec, &BackActionMask::all_ones(4), &Axis::ALL)?;
    for r in 0..rsp.data.nrows() {
        for c in 0..rsp.data.ncols() {
            ensure!(
                rsp.data[(r, c)].to_bits() == olp.data[(r, c)].to_bits(),
                "tables differ at ({r}, {c})"
            );
        }
    }
    Ok(())
}

fn readout_oracle() -> anyhow::Result<()> {
    let (rows, cols) = (80, 6);
    let mut rng = stream_rng(5, &[0xc4ec, 1]);
    let x = DMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>() - 0.5);
    let y: Vec<f64> = (0..rows)
        .map(|r| x.row(r).sum() * 0.3 + 0.1 + 0.01 * (rng.gen::<f64>() - 0.5))
        .collect();
    let readout = train_readout(&x, &y)?;

    let mut design = DMatrix::zeros(rows, cols + 1);
    design.view_mut((0, 0), (rows, cols)).copy_from(&x);
    for r in 0..rows {
        design[(r, cols)] = 1.0;
    }
    let gram = design.transpose() * &design + DMatrix::identity(cols + 1, cols + 1) * 1e-12;
    let rhs = design.transpose() * DVector::from_column_slice(&y);
    let oracle = gram.lu().solve(&rhs).context("singular normal equations")?;
    for c in 0..cols {
        ensure!(
            (readout.weights[c] - oracle[c]).abs() < 1e-6,
            "weight {c} deviates from the oracle"
        );
    }
    ensure!((readout.intercept - oracle[cols]).abs() < 1e-6, "intercept deviates");
    Ok(())
}

fn capacity_bounds() -> anyhow::Result<()> {
    let t: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
    let c = capacity(&t, &t)?;
    ensure!((c - 1.0).abs() < 1e-12, "self-capacity {c}");
    let shifted: Vec<f64> = t.iter().map(|v| 3.0 * v + 2.0).collect();
    let c2 = capacity(&shifted, &t)?;
    ensure!((c2 - 1.0).abs() < 1e-10, "affine capacity {c2}");
    let flat = vec![0.5; 50];
    ensure!(capacity(&flat, &t)? == 0.0, "constant predictor must score 0");
    Ok(())
}
