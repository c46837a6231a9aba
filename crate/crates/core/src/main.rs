use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use nanowall::chart::WallChart;
use nanowall::dynamics::Frame;
use nanowall::experiments::{
    run_lyapunov, run_simulate, run_stability, run_sweep, run_travel, sweep_csv, trajectory_csv, ExperimentConfig,
    ExperimentKind, ExperimentReport,
};
use nanowall::grid::{Grid, NormKind, Sobolev};
use nanowall::profiles::{kernel_modes, CollectiveCoordinates};
use nanowall::snapshot::{read_snapshot, write_snapshot};
use nanowall::spectral::{build_drifted, estimate_delta0, restricted_spectrum};

#[derive(Parser)]
#[command(name = "nanowall", version, about = "Domain-wall dynamics and stability in a ferromagnetic nanowire")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress summaries on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    /// Extra `key=value` assignment applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a state and write its trajectory and terminal snapshot.
    Simulate {
        /// Start from this snapshot instead of the perturbed wall.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Laboratory-frame run from the static wall; fits speed and rotation rate.
    Travel,
    /// Perturbed wall in the co-moving frame; decay and convergence checks.
    Stability,
    /// As `stability`, also checking that ||LW|| does not increase.
    Lyapunov,
    /// Restricted spectrum of the linearized operator at the configured delta.
    Spectrum,
    /// Bisection for the linear stability bound; prints `delta,abscissa`.
    Delta0 {
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        target: f64,
    },
    /// Collective coordinates and residual of a snapshot.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        /// Snapshot time, used to centre the chart for laboratory-frame states.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
    /// Cartesian sweep over delta, epsilon and seed lists.
    Sweep,
}

fn load_config(global: &Global, kind: Option<ExperimentKind>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    for assignment in &global.set {
        let Some((k, v)) = assignment.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{assignment}`");
        };
        cfg.set(k.trim(), v.trim(), 0).map_err(|e| match e {
            nanowall::Error::Parse { msg, .. } => anyhow::anyhow!("--set {assignment}: {msg}"),
            other => other.into(),
        })?;
    }
    if let Some(kind) = kind {
        cfg.experiment = kind;
    }
    if let Some(seed) = global.seed {
        cfg.seeds = vec![seed];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_out(global: &Global, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(&global.out).with_context(|| format!("creating {}", global.out.display()))?;
    let path = global.out.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn say(global: &Global, text: impl AsRef<str>) {
    if !global.quiet {
        emit(text.as_ref());
    }
}

/// Writes the trajectory and terminal snapshot; returns whether the run passed.
fn emit_report(global: &Global, report: &ExperimentReport) -> anyhow::Result<bool> {
    let stem = report.kind.name();
    let csv = write_out(global, &format!("{stem}_trajectory.csv"), &trajectory_csv(&report.series))?;
    if let Some(u) = &report.terminal {
        std::fs::create_dir_all(&global.out)?;
        write_snapshot(&global.out.join(format!("{stem}_terminal.snap")), u)?;
    }
    say(global, report.summary());
    say(global, format!("  trajectory: {}\n", csv.display()));
    Ok(report.pass())
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate { input } => {
            let cfg = load_config(g, None)?;
            let initial = input.as_deref().map(read_snapshot).transpose()?;
            let report = run_simulate(&cfg, initial)?;
            let csv = write_out(g, "simulate_trajectory.csv", &trajectory_csv(&report.series))?;
            if let Some(u) = &report.terminal {
                write_snapshot(&g.out.join("simulate_terminal.snap"), u)?;
            }
            say(g, format!("{} records written to {}\n", report.series.len(), csv.display()));
            if let Some(reason) = &report.aborted {
                bail!("simulation stopped: {reason}");
            }
            Ok(true)
        }
        Command::Travel => emit_report(g, &run_travel(&load_config(g, Some(ExperimentKind::Travel))?)?),
        Command::Stability => emit_report(g, &run_stability(&load_config(g, Some(ExperimentKind::Stability))?)?),
        Command::Lyapunov => emit_report(g, &run_lyapunov(&load_config(g, Some(ExperimentKind::Lyapunov))?)?),
        Command::Spectrum => {
            let cfg = load_config(g, None)?;
            let delta = cfg.delta()?;
            let grid = Grid::new(cfg.x_max, cfg.n)?;
            let report = restricted_spectrum(&build_drifted(&grid, delta), &kernel_modes(&grid))?;
            let mut csv = String::from("re_lambda,im_lambda,kernel_overlap\n");
            for (z, overlap) in report.eigenvalues.iter().zip(&report.kernel_overlaps) {
                csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", z.re, z.im, overlap));
            }
            let path = write_out(g, "spectrum.csv", &csv)?;
            say(g, format!("delta={delta} abscissa={:.10e}\n  spectrum: {}\n", report.abscissa, path.display()));
            Ok(true)
        }
        Command::Delta0 { target } => {
            let cfg = load_config(g, None)?;
            let grid = Grid::new(cfg.x_max, cfg.n)?;
            let est = estimate_delta0(&grid, *target)?;
            let mut csv = String::from("delta,abscissa\n");
            for (d, a) in &est.trace {
                csv.push_str(&format!("{d:.16e},{a:.16e}\n"));
            }
            emit(&csv);
            write_out(g, "delta0.csv", &csv)?;
            if !g.quiet {
                eprintln!("delta0 = {:.6} (bracket [{:.6}, {:.6}])", est.delta0, est.bracket.0, est.bracket.1);
            }
            Ok(est.delta0 > 0.0)
        }
        Command::Decompose { input, time } => {
            let cfg = load_config(g, None)?;
            let u = read_snapshot(input)?;
            let reference = match cfg.frame.unwrap_or(Frame::Moving) {
                Frame::Lab => {
                    let d = cfg.delta()?;
                    CollectiveCoordinates::new(d * time, -d * time)
                }
                Frame::Moving => CollectiveCoordinates::ZERO,
            };
            let d = WallChart::centered(&u.grid, reference).decompose_state(&u)?;
            emit(&format!(
                "theta,sigma,w_h1,w_h2,iterations\n{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                d.lambda.theta,
                d.lambda.sigma,
                d.w.norm(NormKind::H1),
                d.w.norm(NormKind::H2),
                d.iterations
            ));
            Ok(true)
        }
        Command::Sweep => {
            let cfg = load_config(g, Some(ExperimentKind::Sweep))?;
            let reports = run_sweep(&cfg)?;
            let path = write_out(g, "sweep.csv", &sweep_csv(&reports))?;
            let passed = reports.iter().filter(|r| r.pass()).count();
            say(g, format!("{passed}/{} rows pass; table: {}\n", reports.len(), path.display()));
            for r in reports.iter().filter(|r| !r.pass()) {
                say(g, r.summary());
            }
            Ok(passed == reports.len())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
