use std::error::Error;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use racestack::analysis::{self, DynamicsSource, Replay};
use racestack::sim::{self, scenario::Scenario, RunOptions};
use racestack::track::shapes::OvalLayout;
use racestack::track::{load_boundaries, BoundaryFormat, Raceline, RacelineOptions};

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "racestack", version, about = "Time-trial racing stack and simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its log, metrics and manifest.
    Run {
        scenario: PathBuf,
        /// Output directory (default: runs/<run id>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pace the run against the wall clock (1.0 = real time).
        #[arg(long)]
        realtime: Option<f64>,
    },
    /// Per-lap tracking metrics of a logged run.
    Metrics {
        log: PathBuf,
        /// Print JSON instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// G-G and front-tire dataset as CSV.
    Dynamics {
        log: PathBuf,
        /// Use simulator ground truth instead of IMU + estimator.
        #[arg(long)]
        truth: bool,
        /// Skip samples slower than this (m/s).
        #[arg(long, default_value_t = 5.0)]
        v_min: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Read a log back and report topics, gaps, events and verdicts.
    Replay {
        log: PathBuf,
        /// Also list every event.
        #[arg(long)]
        events: bool,
    },
    /// Generate a minimum-curvature raceline.
    Raceline {
        /// Boundary file (KML or CSV); the built-in oval when omitted.
        #[arg(long)]
        boundaries: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long, default_value_t = 2.0)]
        spacing: f64,
        #[arg(long, default_value_t = 2.0)]
        vehicle_width: f64,
        #[arg(long, default_value_t = 1.5)]
        margin: f64,
        #[arg(long, default_value_t = 1)]
        smoothing_window: usize,
        #[arg(long)]
        v_cap: Option<f64>,
        /// Output CSV; a JSON sidecar is written next to it.
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Kml,
    Csv,
}

#[derive(Serialize)]
struct Manifest<'a> {
    run_id: &'a str,
    scenario: &'a str,
    seed: u64,
    sim_time: f64,
    wall_time: f64,
    laps: u32,
    emergency: bool,
    expectation_met: bool,
    chunks: Vec<String>,
    log_error: Option<&'a str>,
    metrics: &'a str,
    laps_csv: &'a str,
}

fn cmd_run(path: &Path, out: Option<PathBuf>, realtime: Option<f64>) -> Result<bool> {
    let mut stdout = std::io::stdout().lock();
    let sc = Scenario::load(path)?;
    let dir = out.unwrap_or_else(|| Path::new("runs").join(sim::run_id(&sc)));
    std::fs::create_dir_all(&dir)?;
    let res = sim::run(&sc, &RunOptions { out_dir: Some(dir.clone()), realtime })?;
    let data = analysis::RunData::from_records(&res.records)?;
    let metrics = analysis::run_metrics(&data);
    std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
    std::fs::write(dir.join("laps.csv"), analysis::laps_csv(&metrics.laps))?;
    let manifest = Manifest {
        run_id: &res.run_id,
        scenario: &sc.name,
        seed: sc.seed,
        sim_time: res.sim_time,
        wall_time: res.wall_time.as_secs_f64(),
        laps: res.laps,
        emergency: res.emergency_occurred(),
        expectation_met: res.expectation_met,
        chunks: res.chunks.iter().filter_map(|c| c.file_name()).map(|c| c.to_string_lossy().into_owned()).collect(),
        log_error: res.log_error.as_deref(),
        metrics: "metrics.json",
        laps_csv: "laps.csv",
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;

    writeln!(
        stdout,
        "{}: {:.1} s simulated in {:.2} s, {} laps, {} chunks in {}",
        res.run_id,
        res.sim_time,
        res.wall_time.as_secs_f64(),
        res.laps,
        res.chunks.len(),
        dir.display()
    )?;
    for l in &metrics.laps {
        writeln!(
            stdout,
            "  lap {}: {:.2} s, {:.2} m/s, cross-track {:+.3}/{:+.3} m, velocity error {:.2} m/s",
            l.lap, l.lap_time, l.mean_speed, l.cross_track_min, l.cross_track_max, l.velocity_error_mean
        )?;
    }
    for v in &res.verdicts {
        writeln!(stdout, "  verdict at {:.2} s: {:?} ({})", v.stamp, v.action, v.cause)?;
    }
    if let Some(e) = &res.log_error {
        eprintln!("warning: logging stopped: {e}");
    }
    if !res.expectation_met {
        eprintln!("run did not meet the scenario expectation");
    }
    Ok(res.expectation_met)
}

fn cmd_metrics(log: &Path, json: bool) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    let r = Replay::open(log)?;
    if !r.gaps.is_complete() {
        eprintln!("warning: {}", r.gaps);
    }
    let m = analysis::run_metrics(&r.data);
    if json {
        writeln!(stdout, "{}", serde_json::to_string_pretty(&m)?)?;
    } else {
        write!(stdout, "{}", analysis::laps_csv(&m.laps))?;
    }
    Ok(())
}

fn cmd_dynamics(log: &Path, truth: bool, v_min: f64, out: Option<PathBuf>) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    let r = Replay::open(log)?;
    let src = if truth { DynamicsSource::Truth } else { DynamicsSource::Measured };
    let samples = analysis::export_dynamics(&r.data, src, v_min);
    let csv = analysis::dynamics_csv(&samples);
    match out {
        Some(p) => {
            std::fs::write(&p, csv)?;
            let k = analysis::slope_through_origin(samples.iter().map(|s| (s.sigma_f, s.f_yf)));
            eprintln!("{} samples to {}", samples.len(), p.display());
            if let Some(k) = k {
                eprintln!("front cornering stiffness fit: {k:.0} N/rad");
            }
        }
        None => write!(stdout, "{csv}")?,
    }
    Ok(())
}

fn cmd_replay(log: &Path, events: bool) -> Result<bool> {
    let mut stdout = std::io::stdout().lock();
    let r = Replay::open(log)?;
    let d = &r.data;
    writeln!(stdout, "run {} (scenario {}, seed {})", d.meta.run_id, d.meta.scenario, d.meta.seed)?;
    writeln!(stdout, "log: {}", r.gaps)?;
    for (name, n) in r.topic_counts() {
        writeln!(stdout, "  {name:<12} {n}")?;
    }
    if d.bad_frames > 0 {
        writeln!(stdout, "undecodable frames: {}", d.bad_frames)?;
    }
    for (t, v) in &d.verdicts {
        writeln!(stdout, "verdict at {t:.2} s: {:?} ({})", v.action, v.cause)?;
    }
    if events {
        for (t, e) in &d.events {
            writeln!(stdout, "{t:10.3} {}: {}", e.source, e.message)?;
        }
    }
    Ok(r.gaps.is_complete())
}

#[allow(clippy::too_many_arguments)]
fn cmd_raceline(
    boundaries: Option<PathBuf>,
    format: Option<Format>,
    spacing: f64,
    vehicle_width: f64,
    margin: f64,
    smoothing_window: usize,
    v_cap: Option<f64>,
    out: &Path,
) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    let b = match boundaries {
        Some(p) => {
            let fmt = match format {
                Some(Format::Kml) => BoundaryFormat::Kml,
                Some(Format::Csv) => BoundaryFormat::Csv,
                None if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("kml")) => BoundaryFormat::Kml,
                None => BoundaryFormat::Csv,
            };
            load_boundaries(&p, fmt, spacing, vehicle_width)?
        }
        None => OvalLayout::default().boundaries(spacing)?,
    };
    let mut opts = RacelineOptions { margin, smoothing_window, ..Default::default() };
    if let Some(v) = v_cap {
        opts.profile.v_cap = v;
    }
    let rl = Raceline::generate(&b, &opts)?;
    rl.save(out)?;
    writeln!(
        stdout,
        "{} samples, length {:.2} m, peak curvature {:.6} 1/m -> {}",
        rl.samples().len(),
        rl.length(),
        rl.max_abs_curvature(0.5),
        out.display()
    )?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run { scenario, out, realtime } => cmd_run(&scenario, out, realtime),
        Cmd::Metrics { log, json } => cmd_metrics(&log, json).map(|_| true),
        Cmd::Dynamics { log, truth, v_min, out } => cmd_dynamics(&log, truth, v_min, out).map(|_| true),
        Cmd::Replay { log, events } => cmd_replay(&log, events),
        Cmd::Raceline { boundaries, format, spacing, vehicle_width, margin, smoothing_window, v_cap, out } => {
            cmd_raceline(boundaries, format, spacing, vehicle_width, margin, smoothing_window, v_cap, &out)
                .map(|_| true)
        }
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
