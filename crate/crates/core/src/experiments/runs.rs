//! Experiment drivers: traveling-wall kinematics, stability of the wall in
//! the co-moving frame, the `||LW||` Lyapunov check, and parameter sweeps.

use std::collections::HashMap;
use std::ops::ControlFlow;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::chart::{zero_crossing, WallChart, WallDecomposition};
use crate::dynamics::{energy, evolve_with, Frame};
use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, ExperimentKind};
use crate::experiments::perturb::perturb;
use crate::experiments::report::{Check, ExperimentReport, SeriesRow};
use crate::grid::{FieldPair, Grid, NormKind, Sobolev, VectorField3};
use crate::profiles::{wall_family, wall_profile, CollectiveCoordinates};
use crate::spectral::{build_schrodinger, estimate_delta0, fit_line, DiscreteOperator, OperatorBoundary, PotentialStencil};

/// Abscissa target defining the linear stability bound.
pub const DELTA0_TARGET: f64 = -0.5;
/// Size of the steady discretization error of the wall on the default grid;
/// thresholds that would otherwise be zero are raised to this.
pub const DISCRETIZATION_FLOOR: f64 = 1e-3;
pub const LAMBDA_CAUCHY_TOL: f64 = 1e-3;
pub const RECONSTRUCTION_FACTOR: f64 = 5.0;
pub const LYAPUNOV_TOL: f64 = 1e-8;
pub const LYAPUNOV_TRANSIENT: f64 = 1.0;
pub const ENVELOPE_WINDOW: f64 = 1.0;
pub const DECAY_RESOLUTION: f64 = 1e-4;
pub const TRAVEL_FIT_TOL: f64 = 0.01;
pub const STEADY_FIT_TOL: f64 = 1e-4;
/// Distance from the domain end at which a traveling wall is stopped.
pub const WALL_MARGIN: f64 = 5.0;

/// `δ̂₀` for the grid, cached per `(x_max, n)`.
pub fn linear_stability_bound(grid: &Arc<Grid>) -> Result<f64> {
    static CACHE: Mutex<Option<HashMap<(u64, usize), f64>>> = Mutex::new(None);
    let key = (grid.x_max().to_bits(), grid.len());
    if let Some(&d) = CACHE.lock().unwrap().get_or_insert_with(HashMap::new).get(&key) {
        return Ok(d);
    }
    let d = estimate_delta0(grid, DELTA0_TARGET)?.delta0;
    CACHE.lock().unwrap().get_or_insert_with(HashMap::new).insert(key, d);
    Ok(d)
}

/// Wall family member that is static in the given frame at time `t`.
fn reference(frame: Frame, delta: f64, t: f64) -> CollectiveCoordinates {
    match frame {
        Frame::Lab => CollectiveCoordinates::new(delta * t, -delta * t),
        Frame::Moving => CollectiveCoordinates::ZERO,
    }
}

/// Per-record measurements shared by all runs.
struct Meter {
    grid: Arc<Grid>,
    frame: Frame,
    delta: f64,
    l: DiscreteOperator,
    moving_chart: WallChart,
}

impl Meter {
    fn new(grid: &Arc<Grid>, frame: Frame, delta: f64) -> Self {
        Meter {
            grid: Arc::clone(grid),
            frame,
            delta,
            l: build_schrodinger(grid, OperatorBoundary::Dirichlet, PotentialStencil::default()),
            moving_chart: WallChart::new(grid),
        }
    }

    fn chart(&self, t: f64) -> WallChart {
        match self.frame {
            Frame::Moving => self.moving_chart.clone(),
            Frame::Lab => WallChart::centered(&self.grid, reference(Frame::Lab, self.delta, t)),
        }
    }

    fn decompose(&self, t: f64, u: &VectorField3) -> Result<WallDecomposition> {
        match self.frame {
            Frame::Moving => self.moving_chart.decompose_state(u),
            Frame::Lab => self.chart(t).decompose_state(u),
        }
    }

    fn row(&self, t: f64, u: &VectorField3, d: &WallDecomposition) -> Result<SeriesRow> {
        let lw1 = self.l.apply_scalar(&d.w.first)?;
        let lw2 = self.l.apply_scalar(&d.w.second)?;
        Ok(SeriesRow {
            t,
            w_h1: d.w.norm(NormKind::H1),
            w_h2: d.w.norm(NormKind::H2),
            lw_l2: (lw1.norm_squared(NormKind::L2) + lw2.norm_squared(NormKind::L2)).sqrt(),
            theta: d.lambda.theta,
            sigma: d.lambda.sigma,
            energy: energy(u, self.delta),
        })
    }

    /// Absolute wall coordinates of `Λ` (relative to the frame reference).
    fn absolute(&self, t: f64, lambda: CollectiveCoordinates) -> CollectiveCoordinates {
        let r = reference(self.frame, self.delta, t);
        CollectiveCoordinates::new(lambda.theta + r.theta, lambda.sigma + r.sigma)
    }
}

/// Wall centre (zero of `u1`) and phase `atan2(-u2, u3)` there.
pub fn wall_kinematics(u: &VectorField3) -> Option<(f64, f64)> {
    let x = u.grid.nodes();
    let u1: Vec<f64> = u.values.iter().map(|v| v[0]).collect();
    let sigma = zero_crossing(x, &u1)?;
    let i = x.partition_point(|&xi| xi <= sigma).clamp(1, x.len() - 1) - 1;
    let s = (sigma - x[i]) / (x[i + 1] - x[i]);
    let lerp = |k: usize| u.values[i][k] + s * (u.values[i + 1][k] - u.values[i][k]);
    Some((sigma, (-lerp(1)).atan2(lerp(2))))
}

fn unwrap_angle(previous: f64, raw: f64) -> f64 {
    use std::f64::consts::TAU;
    raw + TAU * ((previous - raw) / TAU).round()
}

fn grid_of(cfg: &ExperimentConfig) -> Result<Arc<Grid>> {
    Grid::new(cfg.x_max, cfg.n)
}

/// Laboratory-frame run from the static wall; fits speed and rotation rate.
pub fn run_travel(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let delta = cfg.delta()?;
    let spec = cfg.dynamics(delta);
    if spec.frame != Frame::Lab {
        return Err(Error::Config("travel runs use the laboratory frame".into()));
    }
    let grid = grid_of(cfg)?;
    spec.validate(&grid)?;
    let meter = Meter::new(&grid, Frame::Lab, delta);
    let mut report = ExperimentReport::new(ExperimentKind::Travel, delta, 0.0, cfg.seed()?);
    let limit = cfg.x_max - WALL_MARGIN;
    let mut theta_prev = 0.0;
    let mut abort = None;
    let result = evolve_with(&wall_profile(&grid), &spec, |_, t, u| {
        report.max_unit_defect = report.max_unit_defect.max(u.max_unit_defect());
        let Some((sigma, raw)) = wall_kinematics(u) else {
            abort = Some(format!("no wall found at t = {t}"));
            return ControlFlow::Break(());
        };
        let theta = unwrap_angle(theta_prev, raw);
        theta_prev = theta;
        let mut row = match meter.decompose(t, u).and_then(|d| meter.row(t, u, &d)) {
            Ok(r) => r,
            Err(_) => SeriesRow {
                t,
                w_h1: f64::NAN,
                w_h2: f64::NAN,
                lw_l2: f64::NAN,
                theta,
                sigma,
                energy: energy(u, delta),
            },
        };
        row.theta = theta;
        row.sigma = sigma;
        report.series.push(row);
        if sigma.abs() > limit {
            abort = Some(format!("wall left the domain interior at t = {t} (sigma = {sigma})"));
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    match result {
        Ok(u) => report.terminal = Some(u),
        Err(e) => abort = Some(e.to_string()),
    }
    report.aborted = abort;
    if report.series.len() >= 2 {
        let t: Vec<f64> = report.series.iter().map(|r| r.t).collect();
        let s: Vec<f64> = report.series.iter().map(|r| r.sigma).collect();
        let th: Vec<f64> = report.series.iter().map(|r| r.theta).collect();
        let speed = fit_line(&t, &s).1;
        let rate = fit_line(&t, &th).1;
        report.speed_fit = Some(speed);
        report.rate_fit = Some(rate);
        if delta == 0.0 {
            report.checks.push(Check::at_most("speed_error", speed.abs(), STEADY_FIT_TOL));
            report.checks.push(Check::at_most("rate_error", rate.abs(), STEADY_FIT_TOL));
        } else {
            report.checks.push(Check::at_most("speed_error", (speed + delta).abs() / delta.abs(), TRAVEL_FIT_TOL));
            report.checks.push(Check::at_most("rate_error", (rate - delta).abs() / delta.abs(), TRAVEL_FIT_TOL));
        }
    }
    Ok(report)
}

/// Running maximum over the trailing window `[t - width, t]`.
pub fn trailing_envelope(t: &[f64], y: &[f64], width: f64) -> Vec<f64> {
    let mut start = 0;
    (0..t.len())
        .map(|k| {
            while t[start] < t[k] - width - 1e-12 {
                start += 1;
            }
            y[start..=k].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Decay rate and amplitude constant of `||W(t) - W(t_end)||_{H1}`. The
/// terminal residual is the steady discretization error of the wall, so the
/// difference isolates the decaying part. The fit uses the trailing envelope
/// over the second half of the interval on which that part stays above
/// `DECAY_RESOLUTION` times its initial size.
pub fn floor_corrected_decay(t: &[f64], residuals: &[FieldPair]) -> Option<(f64, f64)> {
    let last = residuals.last()?;
    let d: Vec<f64> = residuals.iter().map(|w| w.sub(last).map_or(f64::NAN, |x| x.norm(NormKind::H1))).collect();
    let d0 = d[0];
    if !(d0 > 0.0) {
        return None;
    }
    let env = trailing_envelope(&t[..d.len()], &d, ENVELOPE_WINDOW);
    let end = env.iter().rposition(|&e| e >= DECAY_RESOLUTION * d0)?;
    let start = t.partition_point(|&s| s < 0.5 * t[end]);
    if end < start + 2 {
        return None;
    }
    let logs: Vec<f64> = env[start..=end].iter().map(|e| e.ln()).collect();
    let (intercept, slope) = fit_line(&t[start..=end], &logs);
    (slope < 0.0).then(|| (-slope, intercept.exp() / d0))
}

/// `||L(W(t) - W(t_end))||_{L2}` per record.
fn floor_corrected_lw(meter: &Meter, residuals: &[FieldPair]) -> Result<Vec<f64>> {
    let Some(last) = residuals.last() else {
        return Ok(Vec::new());
    };
    residuals
        .iter()
        .map(|w| {
            let d = w.sub(last)?;
            let a = meter.l.apply_scalar(&d.first)?;
            let b = meter.l.apply_scalar(&d.second)?;
            Ok((a.norm_squared(NormKind::L2) + b.norm_squared(NormKind::L2)).sqrt())
        })
        .collect()
}

/// Fills the derived quantities and checks of a co-moving stability run.
fn assess(
    report: &mut ExperimentReport,
    meter: &Meter,
    residuals: &[FieldPair],
    lyapunov: bool,
    epsilon: f64,
    dt: f64,
) -> Result<()> {
    let series = &report.series;
    if series.len() < 2 {
        return Ok(());
    }
    let t: Vec<f64> = series.iter().map(|r| r.t).collect();
    let w: Vec<f64> = series.iter().map(|r| r.w_h1).collect();
    let t_end = *t.last().unwrap();
    let w0 = w[0];
    let w_end = *w.last().unwrap();

    let h2_max = series.iter().map(|r| r.w_h2).fold(0.0, f64::max);
    report.checks.push(Check::at_most("w_h2_max", h2_max, (2.0 * epsilon).max(DISCRETIZATION_FLOOR)));

    let env = trailing_envelope(&t, &w, ENVELOPE_WINDOW);
    report.checks.push(Check::at_most("envelope_decay", *env.last().unwrap(), (w0 / 10.0).max(DISCRETIZATION_FLOOR)));

    let lambda: Vec<CollectiveCoordinates> =
        series.iter().map(|r| CollectiveCoordinates::new(r.theta, r.sigma)).collect();
    let half = t.iter().enumerate().min_by(|a, b| (a.1 - 0.5 * t_end).abs().total_cmp(&(b.1 - 0.5 * t_end).abs())).unwrap().0;
    let cauchy = lambda.last().unwrap().distance(&lambda[half]);
    report.checks.push(Check::at_most("lambda_cauchy", cauchy, LAMBDA_CAUCHY_TOL));

    let tail = t.partition_point(|&s| s < 0.9 * t_end).min(t.len() - 1);
    let m = (t.len() - tail) as f64;
    let lambda_inf = CollectiveCoordinates::new(
        lambda[tail..].iter().map(|l| l.theta).sum::<f64>() / m,
        lambda[tail..].iter().map(|l| l.sigma).sum::<f64>() / m,
    );
    report.lambda_inf = Some(lambda_inf);

    if let Some(u) = &report.terminal {
        let target = wall_family(meter.absolute(t_end, lambda_inf), &meter.grid);
        let gap = u.sub(&target)?.norm(NormKind::H1);
        report.checks.push(Check::at_most("reconstruction", gap, RECONSTRUCTION_FACTOR * w_end));
    }

    let mut k3: f64 = 0.0;
    for k in 0..t.len() - 1 {
        let wm = 0.5 * (w[k] + w[k + 1]);
        if wm > 0.0 {
            k3 = k3.max(lambda[k + 1].distance(&lambda[k]) / (t[k + 1] - t[k]) / wm);
        }
    }
    report.k3_ratio = Some(k3);
    report.g_max = Some(t.iter().zip(&w).map(|(s, v)| (1.0 + s).powi(2) * v).fold(0.0, f64::max));

    let slow = t.partition_point(|&s| s < 0.5 * t_end);
    if t.len() - slow >= 2 {
        let (ts, th, si) = (&t[slow..], &lambda[slow..], &lambda[slow..]);
        let theta: Vec<f64> = th.iter().map(|l| l.theta).collect();
        let sigma: Vec<f64> = si.iter().map(|l| l.sigma).collect();
        let (drift_s, drift_t) = match meter.frame {
            Frame::Moving => (-meter.delta, meter.delta),
            Frame::Lab => (0.0, 0.0),
        };
        report.speed_fit = Some(drift_s + fit_line(ts, &sigma).1);
        report.rate_fit = Some(drift_t + fit_line(ts, &theta).1);
    }

    if let Some(fit) = floor_corrected_decay(&t, residuals) {
        report.beta_fit = Some(fit.0);
        report.k4_fit = Some(fit.1);
    }

    let lw_dyn = floor_corrected_lw(meter, residuals)?;
    let mut worst: f64 = 0.0;
    let mut worst_step: f64 = 0.0;
    let mut worst_dyn: f64 = 0.0;
    for k in 1..t.len() {
        if t[k - 1] >= LYAPUNOV_TRANSIENT {
            let rise = series[k].lw_l2 - series[k - 1].lw_l2;
            let steps = ((t[k] - t[k - 1]) / dt).round().max(1.0);
            worst = worst.max(rise);
            worst_step = worst_step.max(rise / steps);
            if let (Some(a), Some(b)) = (lw_dyn.get(k - 1), lw_dyn.get(k)) {
                worst_dyn = worst_dyn.max(b - a);
            }
        }
    }
    report.lyapunov_max_increase = Some(worst);
    report.lyapunov_step_increase = Some(worst_step);
    report.lyapunov_dynamic_increase = Some(worst_dyn);
    if lyapunov {
        report.checks.push(Check::at_most("lyapunov_step_increase", worst_step, LYAPUNOV_TOL));
    }
    Ok(())
}

fn run_comoving(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (delta, epsilon, seed) = (cfg.delta()?, cfg.epsilon()?, cfg.seed()?);
    let spec = cfg.dynamics(delta);
    if spec.frame != Frame::Moving {
        return Err(Error::Config(format!("{} runs use the co-moving frame", kind.name())));
    }
    let grid = grid_of(cfg)?;
    spec.validate(&grid)?;
    let bound = linear_stability_bound(&grid)?;
    if delta.abs() >= bound {
        return Err(Error::Config(format!("|delta| = {} is not below the linear stability bound {bound:.4}", delta.abs())));
    }
    let initial = perturb(&wall_profile(&grid), cfg.shape, epsilon, seed)?;
    let meter = Meter::new(&grid, Frame::Moving, delta);
    let mut report = ExperimentReport::new(kind, delta, epsilon, seed);
    let mut residuals = Vec::new();
    let mut abort = None;
    let result = evolve_with(&initial, &spec, |_, t, u| {
        report.max_unit_defect = report.max_unit_defect.max(u.max_unit_defect());
        match meter.decompose(t, u).and_then(|d| Ok((meter.row(t, u, &d)?, d.w))) {
            Ok((row, w)) => {
                report.series.push(row);
                residuals.push(w);
                ControlFlow::Continue(())
            }
            Err(e) => {
                abort = Some(format!("decomposition failed at t = {t}: {e}"));
                ControlFlow::Break(())
            }
        }
    });
    match result {
        Ok(u) if abort.is_none() => report.terminal = Some(u),
        Ok(_) => {}
        Err(e) => abort = Some(e.to_string()),
    }
    report.aborted = abort;
    assess(&mut report, &meter, &residuals, kind == ExperimentKind::Lyapunov, epsilon, spec.dt)?;
    Ok(report)
}

/// Perturbed static wall evolved in the co-moving frame.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_comoving(cfg, ExperimentKind::Stability)
}

/// As [`run_stability`], additionally requiring `||LW||` to be
/// non-increasing after the initial transient.
pub fn run_lyapunov(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_comoving(cfg, ExperimentKind::Lyapunov)
}

/// Cartesian product of the configured `delta`, `epsilon` and `seed` lists,
/// each point run as a stability experiment. Failures are recorded per row.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    cfg.validate()?;
    linear_stability_bound(&grid_of(cfg)?)?;
    let points: Vec<(f64, f64, u64)> = cfg
        .deltas
        .iter()
        .flat_map(|&d| cfg.epsilons.iter().flat_map(move |&e| cfg.seeds.iter().map(move |&s| (d, e, s))))
        .collect();
    Ok(points
        .par_iter()
        .map(|&(d, e, s)| {
            let point = cfg.point(d, e, s);
            run_stability(&point).unwrap_or_else(|err| {
                let mut r = ExperimentReport::new(ExperimentKind::Stability, d, e, s);
                r.aborted = Some(err.to_string());
                r
            })
        })
        .collect())
}

/// Plain evolution from `initial` (the perturbed wall by default) in the
/// configured frame, with best-effort decomposition at each record.
pub fn run_simulate(cfg: &ExperimentConfig, initial: Option<VectorField3>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (delta, epsilon, seed) = (cfg.delta()?, cfg.epsilon()?, cfg.seed()?);
    let spec = cfg.dynamics(delta);
    let initial = match initial {
        Some(u) => u,
        None => {
            let grid = grid_of(cfg)?;
            perturb(&wall_profile(&grid), cfg.shape, epsilon, seed)?
        }
    };
    let grid = Arc::clone(&initial.grid);
    spec.validate(&grid)?;
    let meter = Meter::new(&grid, spec.frame, delta);
    let mut report = ExperimentReport::new(cfg.experiment, delta, epsilon, seed);
    let result = evolve_with(&initial, &spec, |_, t, u| {
        report.max_unit_defect = report.max_unit_defect.max(u.max_unit_defect());
        let row = meter.decompose(t, u).and_then(|d| meter.row(t, u, &d)).unwrap_or(SeriesRow {
            t,
            w_h1: f64::NAN,
            w_h2: f64::NAN,
            lw_l2: f64::NAN,
            theta: f64::NAN,
            sigma: f64::NAN,
            energy: energy(u, delta),
        });
        report.series.push(row);
        ControlFlow::Continue(())
    });
    match result {
        Ok(u) => report.terminal = Some(u),
        Err(e) => report.aborted = Some(e.to_string()),
    }
    Ok(report)
}
