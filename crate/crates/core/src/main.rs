use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bistatic_sync::crb::{crb_report, write_crb_csv, CrbScene};
use bistatic_sync::harness::seed::{stream_seed, Purpose};
use bistatic_sync::harness::{
    calibrate, draw_scene, emit_csv, estimate_angles, matched_combiner, measure_path, run_sweep_with, run_trial_at,
    sensing_frame, write_misses_csv, ExperimentConfig, HarnessError, Method, SweepAxis,
};
use bistatic_sync::subspace::{combine, separation_weights};
use bistatic_sync::Exec;

#[derive(Parser, Debug)]
#[command(
    name = "bistatic-sync",
    version,
    about = "Offset tracking and subspace sensing for bistatic OFDM"
)]
struct Cli {
    /// TOML experiment file; defaults to the built-in desk profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Sweep axis: sinr, beta_r, to or cfo.
    #[arg(long, global = true)]
    sweep: Option<SweepAxis>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Comma-separated methods to report, e.g. TVOE,STATIC.
    #[arg(long, global = true, value_delimiter = ',')]
    method: Vec<Method>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    serial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One trial at the configured operating point: trial.json and track.csv.
    Simulate {
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Monte Carlo sweep: rmse.csv and misses.csv.
    Sweep,
    /// Bound curves versus SINR for the first target of trial 0: crb.csv.
    Crb,
    /// Angle and delay-Doppler pseudo-spectra of a sensing frame.
    Spectrum {
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(axis) = cli.sweep {
        if axis != cfg.sweep.axis {
            cfg.sweep.axis = axis;
            cfg.sweep.points = axis.default_points();
        }
    }
    if !cli.method.is_empty() {
        cfg.methods = cli.method.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let cfg = load_config(&cli)?;
    let exec = if cli.serial { Exec::Serial } else { Exec::default() };
    fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Simulate { trial } => simulate(&cfg, trial, exec, &cli.out),
        Command::Sweep => sweep(&cfg, exec, &cli.out),
        Command::Crb => crb(&cfg, &cli.out),
        Command::Spectrum { trial } => spectrum(&cfg, trial, exec, &cli.out),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn simulate(cfg: &ExperimentConfig, trial: u64, exec: Exec, out: &Path) -> Result<(), HarnessError> {
    let calib = calibrate(cfg)?;
    let value = cfg.value_of(cfg.sweep.axis);
    let result = run_trial_at(cfg, value, trial, &calib, exec)?;
    serde_json::to_writer_pretty(create(out, "trial.json")?, &result).map_err(std::io::Error::other)?;
    result.track.write_csv(create(out, "track.csv")?)?;
    println!(
        "trial {trial}: mdl order {} (true {}), los {}",
        result.mdl_order,
        result.true_order,
        if result.los_found { "found" } else { "missed" }
    );
    for s in &result.samples {
        println!("  {:<8} {:<13} {:+.6e}", s.method, s.quantity, s.error);
    }
    for m in &result.misses {
        println!("  {:<8} {:<13} miss", m.method, m.quantity);
    }
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, exec: Exec, out: &Path) -> Result<(), HarnessError> {
    let report = run_sweep_with(cfg, exec)?;
    emit_csv(&report, &out.join("rmse.csv"))?;
    write_misses_csv(&report, create(out, "misses.csv")?)?;
    println!(
        "{} rows over {} points x {} trials -> {}",
        report.rows.len(),
        cfg.sweep.points.len(),
        cfg.trials,
        out.join("rmse.csv").display()
    );
    Ok(())
}

fn crb(cfg: &ExperimentConfig, out: &Path) -> Result<(), HarnessError> {
    let scene = draw_scene(cfg, stream_seed(cfg.seed, 0, Purpose::Scene, 0))?;
    let truth = scene.frame(cfg, 0.0)?;
    let idx = if truth.paths.len() > 1 { 1 } else { 0 };
    let upa = cfg.rx_upa();
    let aoas: Vec<_> = truth.paths.iter().map(|p| p.aoa).collect();
    let w = separation_weights(&aoas, &upa)?;
    let points = if cfg.sweep.axis == SweepAxis::Sinr {
        cfg.sweep.points.clone()
    } else {
        SweepAxis::Sinr.default_points()
    };
    let crb_scene = CrbScene {
        path: truth.paths[idx],
        chi: truth.chi[idx],
        upa,
        grid: cfg.grid()?,
        combiner_gain: w[idx].norm_squared(),
        reference_power: 1.0,
    };
    let curve = crb_report(&crb_scene, &points)?;
    write_crb_csv(&curve, create(out, "crb.csv")?)?;
    println!("{} points -> {}", curve.len(), out.join("crb.csv").display());
    Ok(())
}

fn spectrum(cfg: &ExperimentConfig, trial: u64, exec: Exec, out: &Path) -> Result<(), HarnessError> {
    let (scene, truth, csi) = sensing_frame(cfg, trial)?;
    let angles = estimate_angles(cfg, &csi, false, exec)?;
    angles.ssmusic.spectrum.write_csv(create(out, "spectrum_aoa.csv")?)?;
    let los = truth.los().aoa;
    let h = combine(&csi, &matched_combiner(&cfg.rx_upa(), &los));
    let dd = measure_path(cfg, &cfg.grid()?, &h, exec)?;
    dd.spectrum.write_csv(create(out, "spectrum_dd.csv")?)?;
    println!(
        "order {}, {} arrivals, {} targets; los delay {:.6e} s, doppler {:.4} Hz",
        angles.order,
        angles.ssmusic.angles.len(),
        scene.amplitudes.len() - 1,
        dd.tau,
        dd.doppler
    );
    Ok(())
}
