//! `peel`: run peeling experiments, compare their metrics, calibrate adhesion.
//!
//! Exit codes:
//!   0  every requested run completed (or the calibration criterion was met)
//!   1  error: bad config, unreadable input, nothing to compare
//!   2  bad command line
//!   3  a run stopped at the step limit (or calibration found no passing pair)
//!   4  a run failed (solver divergence or controller error)

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use peel_core::calibrate::{calibrate, CalibrationSweep};
use peel_core::export::{find_metrics, read_metrics, write_json, write_run_dir};
use peel_core::metrics::{compare_table, table_to_csv, table_to_text};
use peel_core::peeler::{run_baseline, run_peel};
use peel_core::{build_scene, ExperimentConfig, Length, Method, PeelError, RunMetrics, RunStatus};

const EXIT_ERROR: u8 = 1;
const EXIT_INCOMPLETE: u8 = 3;
const EXIT_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "peel", version, about = "Soft-body dressing peeling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method for a number of seeded repetitions.
    Run(RunArgs),
    /// Tabulate metrics.json files found in run directories.
    Compare(CompareArgs),
    /// Sweep adhesion stiffness and fracture threshold under a vertical pull.
    Calibrate(CalibrateArgs),
    /// Validate a config and print it with every default filled in.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "mpc")]
    method: Method,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Base seed. Repetition r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root. One directory per run is created under it.
    #[arg(long, env = "PEEL_OUT_DIR", default_value = "runs")]
    out: PathBuf,
    /// Repetitions run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Dump every MPC candidate's action, loss and gradient to candidates.csv.
    #[arg(long)]
    dump_candidates: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Run directories, or parents of run directories.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    #[arg(long, default_value = "comparison.csv")]
    csv: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Adhesion stiffness grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    stiffness: Vec<f64>,
    /// Fracture threshold grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long)]
    lift_min: Option<Length>,
    #[arg(long)]
    lift_max: Option<Length>,
    #[arg(long)]
    lift_target: Option<Length>,
    #[arg(long, default_value = "calibration.json")]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, PeelError> {
    let cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

struct Outcome {
    line: String,
    status: RunStatus,
}

fn run_one(cfg: &ExperimentConfig, method: Method, rep: usize, out: &Path) -> Result<Outcome, PeelError> {
    let started = Instant::now();
    let scene = build_scene(&cfg.scene)?;
    let record = match method {
        Method::Mpc => run_peel(&scene, &cfg.mpc, &cfg.loss, &cfg.solver, &cfg.limits),
        _ => run_baseline(method, &scene, cfg.mpc.step_size, &cfg.solver, &cfg.limits)?,
    };
    let seed = cfg.mpc.rng_seed;
    let metrics = RunMetrics::from_run(&record, &scene.landmarks, seed, &cfg.scene.scene_id())?;
    let dir = out.join(format!("{}_{}_{}", method.name(), rep, seed));
    let groups = [
        ("skin", scene.skin_grid.triangles()),
        ("dressing", scene.dressing_grid.triangles()),
    ];
    write_run_dir(&dir, &record, cfg, &scene.landmarks, &metrics, &scene.particles, &groups)?;
    let line = format!(
        "{:<4} rep {:<3} seed {:<6} {:<10} steps {:>5}  D_max {:>8.3} mm  D_mean {:>8.3} mm  {:.1}s  -> {}",
        method.name(),
        rep,
        seed,
        metrics.status,
        metrics.steps,
        metrics.d_max_mm,
        metrics.d_mean_mm,
        started.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(Outcome {
        line,
        status: record.status,
    })
}

fn cmd_run(args: RunArgs) -> Result<u8, PeelError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(n) = args.snapshot_every {
        cfg.limits.snapshot_every = n;
    }
    if let Some(n) = args.max_steps {
        cfg.limits.max_steps = n;
    }
    cfg.mpc.debug_candidates |= args.dump_candidates;
    cfg.validate()?;
    if args.reps == 0 {
        return Err(PeelError::config("reps", "must be >= 1"));
    }
    let base = args.seed.unwrap_or(cfg.mpc.rng_seed);
    std::fs::create_dir_all(&args.out).map_err(|e| PeelError::io(&args.out, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| PeelError::Controller(e.to_string()))?;
    let results: Vec<Result<Outcome, PeelError>> = pool.install(|| {
        (0..args.reps)
            .into_par_iter()
            .map(|rep| {
                let mut c = cfg.clone();
                c.mpc.rng_seed = base.wrapping_add(rep as u64);
                let r = run_one(&c, args.method, rep, &args.out);
                if let Ok(o) = &r {
                    println!("{}", o.line);
                }
                r
            })
            .collect()
    });

    let mut code = 0;
    for r in results {
        match r {
            Ok(o) => match o.status {
                RunStatus::Complete => {}
                RunStatus::Incomplete => code = code.max(EXIT_INCOMPLETE),
                RunStatus::Failed(_) => code = code.max(EXIT_FAILED),
            },
            Err(e) => {
                eprintln!("error: {e}");
                code = code.max(EXIT_FAILED);
            }
        }
    }
    Ok(code)
}

fn cmd_compare(args: CompareArgs) -> Result<u8, PeelError> {
    let mut empty = Vec::new();
    let mut runs = Vec::new();
    for dir in &args.dirs {
        let found = find_metrics(dir)?;
        if found.is_empty() {
            empty.push(dir.display().to_string());
        }
        for path in found {
            runs.push(read_metrics(&path)?);
        }
    }
    if !empty.is_empty() {
        return Err(PeelError::Metrics(format!(
            "no metrics.json found in: {}",
            empty.join(", ")
        )));
    }
    let mut scenes: Vec<&str> = runs.iter().map(|r| r.scene_id.as_str()).collect();
    scenes.sort_unstable();
    scenes.dedup();
    if scenes.len() > 1 {
        eprintln!(
            "warning: runs come from {} different scene configs ({}); comparing anyway",
            scenes.len(),
            scenes.join(", ")
        );
    }
    let table = compare_table(&runs);
    print!("{}", table_to_text(&table));
    std::fs::write(&args.csv, table_to_csv(&table)).map_err(|e| PeelError::io(&args.csv, e))?;
    println!("wrote {}", args.csv.display());
    Ok(0)
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<u8, PeelError> {
    let cfg = load_config(args.config.as_deref())?;
    let mut sweep = CalibrationSweep::default();
    if !args.stiffness.is_empty() {
        sweep.adhesion_stiffness = args.stiffness;
    }
    if !args.eps.is_empty() {
        sweep.eps = args.eps;
    }
    if let Some(l) = args.lift_min {
        sweep.lift_min = l.meters();
    }
    if let Some(l) = args.lift_max {
        sweep.lift_max = l.meters();
    }
    if let Some(l) = args.lift_target {
        sweep.lift_target = l.meters();
    }
    let report = calibrate(&cfg, &sweep)?;
    let show = |p: &peel_core::calibrate::CalibrationPoint| {
        format!(
            "adhesion_stiffness = {}  fracture_threshold_eps = {}  lift {}  steps {}{}",
            p.adhesion_stiffness,
            p.eps,
            p.lift_at_first_row
                .map(|l| format!("{:.2} mm", l * 1e3))
                .unwrap_or_else(|| "n/a".into()),
            p.steps,
            if p.complete { "" } else { "  (incomplete)" }
        )
    };
    let code = match &report.chosen {
        Some(p) => {
            println!("suggested: {}", show(p));
            0
        }
        None => {
            println!(
                "no pair lifted the skin between {:.1} and {:.1} mm before the grasped row let go; closest:",
                sweep.lift_min * 1e3,
                sweep.lift_max * 1e3
            );
            for p in report.closest(3) {
                println!("  {}", show(p));
            }
            EXIT_INCOMPLETE
        }
    };
    write_json(&args.out, &report)?;
    println!("wrote {}", args.out.display());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Check { config } => load_config(config.as_deref()).map(|c| {
            print!("{}", c.to_resolved_toml());
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
