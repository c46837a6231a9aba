use std::path::Path;
use std::process::{Command, Output};

use nanowall::experiments::{Shape, SWEEP_HEADER, TRAJECTORY_HEADER};
use nanowall::grid::{Grid, NormKind, Sobolev};
use nanowall::profiles::wall_profile;
use proptest::prelude::*;

const SMALL: &str = "x_max = 12\nn = 481\ndt = 4e-4\nt_end = 2\nrecord_every = 25\nepsilon = 0.05\n";

fn nanowall(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanowall")).current_dir(dir).args(args).output().unwrap()
}

fn small_config(dir: &Path, extra: &str) {
    std::fs::write(dir.join("run.cfg"), format!("{SMALL}{extra}")).unwrap();
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn stability_writes_trajectory_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path(), "");
    let out = nanowall(dir.path(), &["stability", "--config", "run.cfg", "--out", "res"]);
    assert!(out.status.code() == Some(0) || out.status.code() == Some(1), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("beta_fit"));

    let csv = dir.path().join("res/stability_trajectory.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some(TRAJECTORY_HEADER));
    let table = rows(&csv);
    // 2 / (25 * 4e-4) records after the initial one
    assert_eq!(table.len(), 201);
    assert!(table.iter().all(|r| r.len() == 7));
    assert!(table.windows(2).all(|w| w[1][0] > w[0][0]));

    let snap = dir.path().join("res/stability_terminal.snap");
    let out = nanowall(dir.path(), &["decompose", "--config", "run.cfg", "--input", snap.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("theta,sigma,w_h1,w_h2,iterations"));
    let cols: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    let last = table.last().unwrap();
    // the decomposition of the terminal snapshot reproduces the last record
    assert!((cols[0] - last[4]).abs() <= 1e-10 && (cols[1] - last[5]).abs() <= 1e-10);
    assert!((cols[2] - last[1]).abs() <= 1e-10 * last[1].max(1.0));
}

#[test]
fn simulate_resumes_from_a_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path(), "t_end = 1\n");
    let first = nanowall(dir.path(), &["simulate", "--config", "run.cfg", "--quiet"]);
    assert_eq!(first.status.code(), Some(0), "{first:?}");
    assert!(first.stdout.is_empty());
    std::fs::rename(dir.path().join("simulate_terminal.snap"), dir.path().join("start.snap")).unwrap();
    let second = nanowall(dir.path(), &["simulate", "--config", "run.cfg", "--input", "start.snap", "--quiet"]);
    assert_eq!(second.status.code(), Some(0), "{second:?}");
    let table = rows(&dir.path().join("simulate_trajectory.csv"));
    assert_eq!(table[0][0], 0.0);
    assert!(table.iter().all(|r| r[1] < 0.1));
}

#[test]
fn sweep_table_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    small_config(dir.path(), "delta = 0, 0.01\nseed = 1, 2\n");
    let out = nanowall(dir.path(), &["sweep", "--config", "run.cfg", "--quiet"]);
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER);
    assert_eq!(lines.len(), 5);
    let keys: Vec<(String, String)> = lines[1..]
        .iter()
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].to_string(), c[2].to_string())
        })
        .collect();
    assert_eq!(keys[0].1, "1");
    assert_eq!(keys[1].1, "2");
    assert_eq!(keys[0].0, keys[1].0);
    let all_pass = lines[1..].iter().all(|l| l.ends_with(",true"));
    assert_eq!(out.status.code(), Some(if all_pass { 0 } else { 1 }));

    let bad = nanowall(dir.path(), &["stability", "--config", "run.cfg", "--set", "colour=blue"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8(bad.stderr).unwrap().contains("colour"));
    let missing = nanowall(dir.path(), &["stability", "--config", "absent.cfg"]);
    assert_eq!(missing.status.code(), Some(2));
    let far = nanowall(dir.path(), &["stability", "--config", "run.cfg", "--set", "epsilon=0.9"]);
    assert_eq!(far.status.code(), Some(2));
}

#[test]
fn spectrum_and_delta0_outputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "x_max = 10\nn = 201\n").unwrap();
    let out = nanowall(dir.path(), &["spectrum", "--config", "run.cfg", "--set", "delta=0.1", "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("re_lambda,im_lambda,kernel_overlap"));
    let table = rows(&dir.path().join("spectrum.csv"));
    assert!(!table.is_empty() && table.iter().all(|r| r[0] < 0.0));

    let out = nanowall(dir.path(), &["delta0", "--config", "run.cfg", "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout, std::fs::read_to_string(dir.path().join("delta0.csv")).unwrap());
    assert!(stdout.starts_with("delta,abscissa\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn perturbations_are_unit_and_sized(eps in 0.0f64..0.3, seed in 0u64..1000, pick in 0usize..3) {
        let g = Grid::new(10.0, 201).unwrap();
        let base = wall_profile(&g);
        let shape = [Shape::Bump, Shape::RandomSmooth, Shape::KernelTangent][pick];
        let u = nanowall::experiments::perturb(&base, shape, eps, seed).unwrap();
        prop_assert!(u.max_unit_defect() <= 1e-12);
        let gap = u.sub(&base).unwrap().norm(NormKind::H2);
        prop_assert!((gap - eps).abs() <= 2.0 * eps * eps + 1e-12);
        let again = nanowall::experiments::perturb(&base, shape, eps, seed).unwrap();
        prop_assert_eq!(u.values, again.values);
    }
}
