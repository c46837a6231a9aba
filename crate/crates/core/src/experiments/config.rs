//! `key = value` experiment configuration.

use std::path::Path;
use std::str::FromStr;

use crate::dynamics::{Boundary, DynamicsSpec, Frame};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Travel,
    Stability,
    Lyapunov,
    Sweep,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "travel" => Ok(ExperimentKind::Travel),
            "stability" => Ok(ExperimentKind::Stability),
            "lyapunov" => Ok(ExperimentKind::Lyapunov),
            "sweep" => Ok(ExperimentKind::Sweep),
            other => Err(Error::Config(format!("unknown experiment `{other}`"))),
        }
    }
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Travel => "travel",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Lyapunov => "lyapunov",
            ExperimentKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Bump,
    RandomSmooth,
    KernelTangent,
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(Shape::Bump),
            "random-smooth" => Ok(Shape::RandomSmooth),
            "kernel-tangent" => Ok(Shape::KernelTangent),
            other => Err(Error::Config(format!("unknown perturbation shape `{other}`"))),
        }
    }
}

/// One experiment, or a sweep when any of `deltas`, `epsilons`, `seeds`
/// holds more than one value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub x_max: f64,
    pub n: usize,
    pub deltas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub shape: Shape,
    pub seeds: Vec<u64>,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub boundary: Boundary,
    /// `None` selects the experiment's natural frame.
    pub frame: Option<Frame>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Stability,
            x_max: 20.0,
            n: 2001,
            deltas: vec![0.0],
            epsilons: vec![0.05],
            shape: Shape::Bump,
            seeds: vec![0],
            dt: 5e-5,
            t_end: 20.0,
            record_every: 200,
            boundary: Boundary::ClampToProfile,
            frame: None,
        }
    }
}

pub const KEYS: [&str; 12] = [
    "experiment",
    "x_max",
    "n",
    "delta",
    "epsilon",
    "shape",
    "seed",
    "dt",
    "t_end",
    "record_every",
    "boundary",
    "frame",
];

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("invalid value `{value}` for `{key}`") })
}

fn parse_list<T: FromStr>(key: &str, value: &str, line: usize) -> Result<Vec<T>> {
    let items: Vec<&str> = value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(Error::Parse { line, msg: format!("empty item in list for `{key}`") });
    }
    items.into_iter().map(|s| parse_value(key, s, line)).collect()
}

impl ExperimentConfig {
    /// Applies one `key = value` assignment; `line` labels errors.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let perr = |e: Error| match e {
            Error::Config(msg) => Error::Parse { line, msg },
            other => other,
        };
        match key {
            "experiment" => self.experiment = value.parse().map_err(perr)?,
            "x_max" => self.x_max = parse_value(key, value, line)?,
            "n" => self.n = parse_value(key, value, line)?,
            "delta" => self.deltas = parse_list(key, value, line)?,
            "epsilon" => self.epsilons = parse_list(key, value, line)?,
            "shape" => self.shape = value.parse().map_err(perr)?,
            "seed" => self.seeds = parse_list(key, value, line)?,
            "dt" => self.dt = parse_value(key, value, line)?,
            "t_end" => self.t_end = parse_value(key, value, line)?,
            "record_every" => self.record_every = parse_value(key, value, line)?,
            "boundary" => self.boundary = value.parse().map_err(perr)?,
            "frame" => self.frame = Some(value.parse().map_err(perr)?),
            other => return Err(Error::Parse { line, msg: format!("unknown key `{other}`") }),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, msg: format!("expected `key = value`, got `{content}`") })?;
            cfg.set(key.trim(), value.trim(), line)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn is_sweep(&self) -> bool {
        self.experiment == ExperimentKind::Sweep
    }

    fn single<T: Copy>(&self, key: &str, values: &[T]) -> Result<T> {
        match values {
            [v] => Ok(*v),
            _ => Err(Error::Config(format!(
                "`{key}` lists {} values; lists are only allowed for sweeps",
                values.len()
            ))),
        }
    }

    pub fn delta(&self) -> Result<f64> {
        self.single("delta", &self.deltas)
    }

    pub fn epsilon(&self) -> Result<f64> {
        self.single("epsilon", &self.epsilons)
    }

    pub fn seed(&self) -> Result<u64> {
        self.single("seed", &self.seeds)
    }

    /// Frame actually used: lab for travel runs, moving otherwise.
    pub fn effective_frame(&self) -> Frame {
        self.frame.unwrap_or(match self.experiment {
            ExperimentKind::Travel => Frame::Lab,
            _ => Frame::Moving,
        })
    }

    /// Checks invariants that do not depend on a grid.
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Config("epsilon must be finite and non-negative".into()));
        }
        if self.deltas.iter().any(|d| !d.is_finite()) {
            return Err(Error::Config("delta must be finite".into()));
        }
        if !self.is_sweep() {
            self.delta()?;
            self.epsilon()?;
            self.seed()?;
        }
        Ok(())
    }

    /// The same configuration pinned to one sweep point.
    pub fn point(&self, delta: f64, epsilon: f64, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            experiment: if self.is_sweep() { ExperimentKind::Stability } else { self.experiment },
            deltas: vec![delta],
            epsilons: vec![epsilon],
            seeds: vec![seed],
            ..self.clone()
        }
    }

    pub fn dynamics(&self, delta: f64) -> DynamicsSpec {
        DynamicsSpec {
            frame: self.effective_frame(),
            delta,
            dt: self.dt,
            t_end: self.t_end,
            boundary: self.boundary,
            record_every: self.record_every,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "\
# stability run
experiment = lyapunov
x_max = 15   # half width
n = 1501
delta = 0.1
epsilon = 0.02
shape = random-smooth
seed = 9
dt = 4e-5
t_end = 5
record_every = 100
boundary = homogeneous-neumann
frame = moving
";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Lyapunov);
        assert_eq!((c.x_max, c.n), (15.0, 1501));
        assert_eq!((c.delta().unwrap(), c.epsilon().unwrap(), c.seed().unwrap()), (0.1, 0.02, 9));
        assert_eq!(c.shape, Shape::RandomSmooth);
        assert_eq!((c.dt, c.t_end, c.record_every), (4e-5, 5.0, 100));
        assert_eq!(c.boundary, Boundary::HomogeneousNeumann);
        assert_eq!(c.effective_frame(), Frame::Moving);
        c.validate().unwrap();
    }

    #[test]
    fn defaults_and_frames() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let t = ExperimentConfig::parse("experiment = travel").unwrap();
        assert_eq!(t.effective_frame(), Frame::Lab);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = ExperimentConfig::parse("n = 11\n\ncolour = red\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = ExperimentConfig::parse("n = eleven").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = ExperimentConfig::parse("just words").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = ExperimentConfig::parse("shape = square").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = ExperimentConfig::parse("delta = 0.1,,0.2").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn lists_only_for_sweeps() {
        let c = ExperimentConfig::parse("delta = 0, 0.01, 0.02\nseed = 1,2").unwrap();
        assert!(c.validate().is_err());
        let s = ExperimentConfig::parse("experiment = sweep\ndelta = 0, 0.01, 0.02\nseed = 1,2").unwrap();
        s.validate().unwrap();
        assert_eq!(s.deltas, vec![0.0, 0.01, 0.02]);
        assert_eq!(s.seeds, vec![1, 2]);
        let p = s.point(0.01, 0.05, 2);
        assert_eq!(p.experiment, ExperimentKind::Stability);
        p.validate().unwrap();
    }

    #[test]
    fn rejects_negative_epsilon() {
        let c = ExperimentConfig::parse("epsilon = -0.1").unwrap();
        assert!(c.validate().is_err());
    }
}
