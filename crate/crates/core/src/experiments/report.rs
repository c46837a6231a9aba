//! Experiment reports and their CSV forms.

use std::fmt::Write as _;

use crate::experiments::config::ExperimentKind;
use crate::grid::VectorField3;
use crate::profiles::CollectiveCoordinates;

/// One record step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub w_h1: f64,
    pub w_h2: f64,
    pub lw_l2: f64,
    pub theta: f64,
    pub sigma: f64,
    pub energy: f64,
}

/// A thresholded quantity; `pass` is `value <= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Check { name, value, threshold, pass: value <= threshold }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub delta: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub series: Vec<SeriesRow>,
    /// Laboratory-frame wall speed and rotation rate.
    pub speed_fit: Option<f64>,
    pub rate_fit: Option<f64>,
    /// Fitted decay rate of the `||W||_{H1}` envelope.
    pub beta_fit: Option<f64>,
    pub k4_fit: Option<f64>,
    pub lambda_inf: Option<CollectiveCoordinates>,
    /// `max |dΛ/dt| / ||W||_{H1}` over consecutive records.
    pub k3_ratio: Option<f64>,
    /// `max (1 + t)^2 ||W(t)||_{H1}`.
    pub g_max: Option<f64>,
    /// Largest increase of `||LW||` between records with `t >= 1`.
    pub lyapunov_max_increase: Option<f64>,
    /// The same increase divided by the integrator steps between records.
    pub lyapunov_step_increase: Option<f64>,
    /// Largest increase of `||L(W - W(t_end))||` between records with `t >= 1`.
    pub lyapunov_dynamic_increase: Option<f64>,
    /// Largest node-wise `| |u| - 1 |` over the recorded states.
    pub max_unit_defect: f64,
    pub checks: Vec<Check>,
    /// Reason the run stopped early, if it did.
    pub aborted: Option<String>,
    pub terminal: Option<VectorField3>,
}

impl ExperimentReport {
    pub fn new(kind: ExperimentKind, delta: f64, epsilon: f64, seed: u64) -> Self {
        ExperimentReport {
            kind,
            delta,
            epsilon,
            seed,
            series: Vec::new(),
            speed_fit: None,
            rate_fit: None,
            beta_fit: None,
            k4_fit: None,
            lambda_inf: None,
            k3_ratio: None,
            g_max: None,
            lyapunov_max_increase: None,
            lyapunov_step_increase: None,
            lyapunov_dynamic_increase: None,
            max_unit_defect: 0.0,
            checks: Vec::new(),
            aborted: None,
            terminal: None,
        }
    }

    pub fn pass(&self) -> bool {
        self.aborted.is_none() && self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Human-readable summary, one item per line.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} delta={} epsilon={} seed={}", self.kind.name(), self.delta, self.epsilon, self.seed).unwrap();
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        writeln!(s, "  records: {}", self.series.len()).unwrap();
        for (label, v) in [
            ("speed_fit", self.speed_fit),
            ("rate_fit", self.rate_fit),
            ("beta_fit", self.beta_fit),
            ("k4_fit", self.k4_fit),
            ("k3_ratio", self.k3_ratio),
            ("g_max", self.g_max),
            ("lyapunov_max_increase", self.lyapunov_max_increase),
            ("lyapunov_step_increase", self.lyapunov_step_increase),
            ("lyapunov_dynamic_increase", self.lyapunov_dynamic_increase),
        ] {
            if v.is_some() {
                writeln!(s, "  {label}: {}", opt(v)).unwrap();
            }
        }
        if let Some(l) = self.lambda_inf {
            writeln!(s, "  lambda_inf: theta={:.6e} sigma={:.6e}", l.theta, l.sigma).unwrap();
        }
        for c in &self.checks {
            let tag = if c.pass { "ok  " } else { "FAIL" };
            writeln!(s, "  [{tag}] {}: {:.6e} <= {:.3e}", c.name, c.value, c.threshold).unwrap();
        }
        if let Some(reason) = &self.aborted {
            writeln!(s, "  aborted: {reason}").unwrap();
        }
        writeln!(s, "  pass: {}", self.pass()).unwrap();
        s
    }
}

pub const TRAJECTORY_HEADER: &str = "t,w_h1,w_h2,lw_l2,theta,sigma,energy";
pub const SWEEP_HEADER: &str = "delta,epsilon,seed,speed_fit,rate_fit,beta_fit,theta_inf,sigma_inf,k3_ratio,pass";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_csv(series: &[SeriesRow]) -> String {
    let mut out = String::with_capacity(170 * (series.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in series {
        let cols = [r.t, r.w_h1, r.w_h2, r.lw_l2, r.theta, r.sigma, r.energy].map(num);
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn sweep_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in reports {
        let or_nan = |v: Option<f64>| num(v.unwrap_or(f64::NAN));
        let row = [
            num(r.delta),
            num(r.epsilon),
            r.seed.to_string(),
            or_nan(r.speed_fit),
            or_nan(r.rate_fit),
            or_nan(r.beta_fit),
            or_nan(r.lambda_inf.map(|l| l.theta)),
            or_nan(r.lambda_inf.map(|l| l.sigma)),
            or_nan(r.k3_ratio),
            r.pass().to_string(),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
