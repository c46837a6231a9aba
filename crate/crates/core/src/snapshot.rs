//! Plain-text snapshots of a magnetization state.
//!
//! ```text
//! # nanowall-snapshot v1 n=<n> x_max=<x_max>
//! x u1 u2 u3
//! ```
//!
//! One node per line, 17 significant digits, LF endings.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField3};

const MAGIC: &str = "# nanowall-snapshot v1";

pub fn format_snapshot(u: &VectorField3) -> String {
    let g = &u.grid;
    let mut out = String::with_capacity(80 * (g.len() + 1));
    writeln!(out, "{MAGIC} n={} x_max={:.16e}", g.len(), g.x_max()).unwrap();
    for (x, v) in g.nodes().iter().zip(&u.values) {
        writeln!(out, "{x:.16e} {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]).unwrap();
    }
    out
}

fn header_field<T: std::str::FromStr>(header: &str, key: &str) -> Result<T> {
    header
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse { line: 1, msg: format!("snapshot header lacks a valid `{key}`") })
}

pub fn parse_snapshot(text: &str) -> Result<VectorField3> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if !header.starts_with(MAGIC) {
        return Err(Error::Parse { line: 1, msg: "missing snapshot header".into() });
    }
    let n: usize = header_field(header, "n")?;
    let x_max: f64 = header_field(header, "x_max")?;
    let grid = Grid::new(x_max, n)?;
    let mut values = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
        let [x, u1, u2, u3] = cols[..] else {
            return Err(Error::Parse { line: line_no, msg: format!("expected 4 columns, got {}", cols.len()) });
        };
        let Some(&node) = grid.nodes().get(values.len()) else {
            return Err(Error::Parse { line: line_no, msg: format!("more than n = {n} rows") });
        };
        if (x - node).abs() > 1e-9 * x_max.max(1.0) {
            return Err(Error::Parse { line: line_no, msg: format!("abscissa {x} does not match grid node {node}") });
        }
        values.push([u1, u2, u3]);
    }
    if values.len() != n {
        return Err(Error::Parse { line: 1, msg: format!("header promises {n} rows, found {}", values.len()) });
    }
    VectorField3::new(grid, values)
}

pub fn write_snapshot(path: &Path, u: &VectorField3) -> Result<()> {
    std::fs::write(path, format_snapshot(u))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<VectorField3> {
    parse_snapshot(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{traveling_wall, wall_profile};

    #[test]
    fn round_trip_is_exact() {
        let g = Grid::new(7.5, 61).unwrap();
        let u = traveling_wall(0.3, 1.7, &g);
        let text = format_snapshot(&u);
        assert!(text.starts_with("# nanowall-snapshot v1 n=61 x_max="));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 62);
        let back = parse_snapshot(&text).unwrap();
        assert_eq!(back, u);
        assert_eq!(back.grid.x_max(), 7.5);
    }

    #[test]
    fn rejects_malformed_files() {
        let g = Grid::new(5.0, 11).unwrap();
        let text = format_snapshot(&wall_profile(&g));
        assert!(parse_snapshot(&text.replacen("nanowall-snapshot", "other", 1)).is_err());
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(parse_snapshot(&truncated).is_err());
        let mut lines: Vec<&str> = text.lines().collect();
        lines[3] = "0.0 1.0 0.0";
        let err = parse_snapshot(&lines.join("\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }
}
