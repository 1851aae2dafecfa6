//! `qrc` — simulate quantum reservoir computing protocols, sweep measurement
//! strength and field grids, and emit plot-ready CSV/JSON.

mod checks;
mod config;

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use qrc_core::benchmark::{capacity_report, gen_memory_series_k, load_santafe_k, TaskKind, TimeSeries};
use qrc_core::measurement::backaction_mask;
use qrc_core::protocols::{run_feedback, run_olp_with_mask, run_rsp, FeedbackSpec};
use qrc_core::reservoir::ReservoirSpec;
use qrc_core::resource::{apply_shot_noise, NoiseStrength};
use qrc_core::rng::derive_seed;
use qrc_core::state::Axis;
use qrc_core::sweep::{
    compare_feedback, emit_results, run_sweep, FeedbackCompareConfig, ShotMode,
};

pub const SANTAFE_ENV: &str = "QRC_SANTAFE_PATH";

#[derive(Parser)]
#[command(name = "qrc", version, about = "Quantum reservoir computing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum TaskArg {
    Memory,
    Forward,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ProtocolArg {
    Rsp,
    Olp,
    Feedback,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and report per-delay capacities
    Run {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        /// Measurement strength (online protocol only)
        #[arg(long)]
        g: Option<f64>,
        /// Transverse field
        #[arg(long, default_value_t = 0.066)]
        h: f64,
        /// Feedback strength (feedback protocol only)
        #[arg(long, default_value_t = 0.63)]
        a_fb: f64,
        /// Shots per expectation value; omit for exact expectations
        #[arg(long)]
        shots: Option<f64>,
        /// Delays 1..=eta_max; defaults to 25 (memory) or 10 (forward)
        #[arg(long)]
        eta_max: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Series length
        #[arg(long, default_value_t = 300)]
        k: usize,
        #[arg(long, default_value_t = 6)]
        n_spins: usize,
        #[arg(long, default_value_t = 20)]
        washout: usize,
        /// Santa Fe data file (forward task); falls back to $QRC_SANTAFE_PATH
        #[arg(long)]
        santafe_file: Option<PathBuf>,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid sweep over (g, h) from a key=value config file
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "sweep-out")]
        out_dir: PathBuf,
    },
    /// Head-to-head: feedback-driven protocol vs the online protocol
    CompareFeedback {
        #[arg(long, default_value_t = 10.0)]
        h_feedback: f64,
        /// Comma-separated feedback strengths to scan
        #[arg(long, default_value = "0.2,0.4,0.63,0.8,1.0")]
        a_fb_grid: String,
        #[arg(long, default_value_t = 0.355)]
        g_olp: f64,
        #[arg(long, default_value_t = 0.066)]
        h_olp: f64,
        #[arg(long, default_value_t = 5)]
        realizations: usize,
        #[arg(long, default_value_t = 300)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        eta_max: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        shots: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the fast invariant suite; exit 0 when everything holds
    Check,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Run {
            task,
            protocol,
            g,
            h,
            a_fb,
            shots,
            eta_max,
            seed,
            k,
            n_spins,
            washout,
            santafe_file,
            out,
        } => cmd_run(RunArgs {
            task,
            protocol,
            g,
            h,
            a_fb,
            shots,
            eta_max,
            seed,
            k,
            n_spins,
            washout,
            santafe_file,
            out,
        }),
        Command::Sweep { config, out_dir } => cmd_sweep(&config, &out_dir),
        Command::CompareFeedback {
            h_feedback,
            a_fb_grid,
            g_olp,
            h_olp,
            realizations,
            k,
            eta_max,
            seed,
            shots,
            out,
        } => {
            let a_fb_grid = config::parse_grid(&a_fb_grid)
                .context("invalid --a-fb-grid")?;
            let cfg = FeedbackCompareConfig {
                h_feedback,
                a_fb_grid,
                g_olp,
                h_olp,
                realizations,
                k,
                eta_max,
                n_spins: 6,
                dt: 10.0,
                washout: 20,
                master_seed: seed,
                shot_mode: match shots {
                    Some(n) => ShotMode::Finite(n),
                    None => ShotMode::Infinite,
                },
            };
            let result = compare_feedback(&cfg).context("feedback comparison failed")?;
            emit_json(&serde_json::to_value(&result)?, out.as_deref())
        }
        Command::Check => checks::run_all(),
    }
}

struct RunArgs {
    task: TaskArg,
    protocol: ProtocolArg,
    g: Option<f64>,
    h: f64,
    a_fb: f64,
    shots: Option<f64>,
    eta_max: Option<usize>,
    seed: u64,
    k: usize,
    n_spins: usize,
    washout: usize,
    santafe_file: Option<PathBuf>,
    out: Option<PathBuf>,
}

pub fn santafe_path(flag: Option<PathBuf>) -> anyhow::Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p);
    }
    match std::env::var_os(SANTAFE_ENV) {
        Some(p) => Ok(PathBuf::from(p)),
        None => bail!("forward task needs --santafe-file or ${SANTAFE_ENV}"),
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let task = match args.task {
        TaskArg::Memory => TaskKind::Memory,
        TaskArg::Forward => TaskKind::Forward,
    };
    let eta_max = args.eta_max.unwrap_or(match task {
        TaskKind::Memory => 25,
        TaskKind::Forward => 10,
    });
    let series: TimeSeries = match task {
        TaskKind::Memory => gen_memory_series_k(derive_seed(args.seed, &[0x11]), args.k),
        TaskKind::Forward => {
            let path = santafe_path(args.santafe_file)?;
            load_santafe_k(&path, args.k)
                .with_context(|| format!("cannot load series from {}", path.display()))?
        }
    };
    let spec = ReservoirSpec::sampled(
        args.n_spins,
        args.h,
        10.0,
        derive_seed(args.seed, &[0x22, 0]),
    )?;

    let (mut table, g_used) = match args.protocol {
        ProtocolArg::Rsp => (run_rsp(&series, &spec)?, None),
        ProtocolArg::Olp => {
            let g = args.g.context("--g is required for the online protocol")?;
            let mask = backaction_mask(g, args.n_spins)?;
            (run_olp_with_mask(&series, &spec, &mask, &Axis::ALL)?, Some(g))
        }
        ProtocolArg::Feedback => {
            let fb = FeedbackSpec::brick_wall(args.a_fb, args.n_spins);
            (run_feedback(&series, &spec, &fb)?, None)
        }
    };
    table.washout = args.washout;

    if let Some(n_shots) = args.shots {
        // equal-time budgets are a sweep concern; here shots apply directly
        let strength = match args.protocol {
            ProtocolArg::Olp => NoiseStrength::Finite(g_used.unwrap()),
            _ => NoiseStrength::Projective,
        };
        table = apply_shot_noise(&table, strength, n_shots, derive_seed(args.seed, &[0x77]))?;
    }

    let report = capacity_report(&table, &series, task, eta_max)?;
    let payload = serde_json::json!({
        "task": task,
        "protocol": match args.protocol {
            ProtocolArg::Rsp => "rsp",
            ProtocolArg::Olp => "olp",
            ProtocolArg::Feedback => "feedback",
        },
        "g": g_used,
        "h": args.h,
        "a_fb": if args.protocol == ProtocolArg::Feedback { Some(args.a_fb) } else { None },
        "shots": args.shots,
        "n_spins": args.n_spins,
        "k": args.k,
        "washout": args.washout,
        "seed": args.seed,
        "capacities": report.capacities,
        "sum_capacity": report.sum_capacity,
    });
    emit_json(&payload, args.out.as_deref())
}

fn cmd_sweep(config_path: &std::path::Path, out_dir: &std::path::Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("cannot read config {}", config_path.display()))?;
    let config = config::parse_sweep_config(&text)
        .with_context(|| format!("invalid config {}", config_path.display()))?;
    let result = run_sweep(&config).context("sweep failed")?;
    emit_results(&result, out_dir)
        .with_context(|| format!("cannot write results to {}", out_dir.display()))?;
    println!(
        "best RSP: h'={} (mean sum capacity {:.4})",
        result.rsp.best_h, result.rsp.best_mean
    );
    println!(
        "best OLP: g={} h={} mean P_R {:.4} (std {:.4})",
        result.olp.best.g, result.olp.best.h, result.olp.best.mean_pr, result.olp.best.std_pr
    );
    println!("results written to {}", out_dir.display());
    Ok(())
}

fn emit_json(value: &serde_json::Value, out: Option<&std::path::Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}
