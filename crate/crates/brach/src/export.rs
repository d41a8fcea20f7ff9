//! Protocol files and plot-ready tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use brach_core::reduced::Protocol;
use brach_core::trajectories::{TimingMethod, TrajectoryTiming};
use brach_core::warmstart::SolutionRecord;
use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::error::{CliError, Result};

pub fn write_protocol(path: &Path, protocol: &Protocol) -> Result<()> {
    let text = serde_json::to_string_pretty(protocol).map_err(|source| CliError::Json { path: path.into(), source })?;
    write_file(path, text.as_bytes())
}

pub fn read_protocol(path: &Path) -> Result<Protocol> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Coupling series as CSV: `t, j0_t, J_m_n...` over every allowed pair (1-based labels).
pub fn protocol_csv<W: Write>(protocol: &Protocol, out: W) -> Result<()> {
    let pairs = protocol.spec.allowed_pairs();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::from("t"), String::from("j0_t")];
    header.extend(pairs.iter().map(|(m, n)| format!("J_{}_{}", m + 1, n + 1)));
    w.write_record(&header)?;
    let j0 = protocol.spec.j0();
    for (t, j) in protocol.times.iter().zip(&protocol.couplings) {
        let mut row = vec![fmt(*t), fmt(j0 * t)];
        row.extend(pairs.iter().map(|&(m, n)| fmt(j.get(m, n))));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io("<csv>", e))?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{:?}", v)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// One point of a labelled curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

/// Diagnostic columns of size-sweep exports; missing values stay empty.
pub const RECORD_DIAGNOSTICS: [&str; 5] = ["fidelity", "constraint_drift", "lax_drift", "chirality", "alpha_norm_drift"];

/// Size-sweep row: `n, j0_tau, l0, classical_bound, <diagnostics>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub j0_tau: f64,
    pub l0: f64,
    pub classical_bound: f64,
    pub diagnostics: std::collections::BTreeMap<String, f64>,
}

impl SweepRow {
    pub fn from_record(r: &SolutionRecord) -> Self {
        Self {
            n: r.n,
            j0_tau: r.j0_tau,
            l0: r.l0,
            classical_bound: brach_core::oracles::classical_bound(r.n),
            diagnostics: r.diagnostics.clone(),
        }
    }
}

pub fn series_csv<W: Write>(rows: &[SeriesPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "x", "y"])?;
    for r in rows {
        w.write_record([r.series.clone(), fmt(r.x), fmt(r.y)])?;
    }
    w.flush().map_err(|e| CliError::io("<csv>", e))?;
    Ok(())
}

pub fn sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n", "j0_tau", "l0", "classical_bound"];
    header.extend(RECORD_DIAGNOSTICS);
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![r.n.to_string(), fmt(r.j0_tau), fmt(r.l0), fmt(r.classical_bound)];
        row.extend(RECORD_DIAGNOSTICS.iter().map(|k| opt(r.diagnostics.get(*k).copied())));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io("<csv>", e))?;
    Ok(())
}

pub fn timings_csv<W: Write>(rows: &[TrajectoryTiming], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "trajectory", "hops", "j0_tau", "converged", "method", "cross_check"])?;
    for t in rows {
        let method = match t.method {
            TimingMethod::ClosedForm => "closed_form",
            TimingMethod::Shooting => "shooting",
        };
        w.write_record([
            t.spec.n().to_string(),
            t.spec.label(),
            t.spec.n_hops().to_string(),
            fmt(t.j0_tau),
            t.converged.to_string(),
            method.to_string(),
            opt(t.cross_check),
        ])?;
    }
    w.flush().map_err(|e| CliError::io("<csv>", e))?;
    Ok(())
}

/// Serializes `rows` as CSV through `csv_fn` or as a JSON array.
pub fn render<T: Serialize>(
    rows: &[T],
    format: Format,
    csv_fn: impl Fn(&[T], &mut Vec<u8>) -> Result<()>,
) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return Err(CliError::Config(String::from("nothing to export")));
    }
    match format {
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(rows).map_err(|source| CliError::Json { path: "<json>".into(), source })?;
            v.push(b'\n');
            Ok(v)
        }
        _ => {
            let mut buf = Vec::new();
            csv_fn(rows, &mut buf)?;
            Ok(buf)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use brach_core::lattice::{CouplingMatrix, LatticeSpec, WeightProfile};
    use brach_core::trajectories::TrajectorySpec;
    use std::collections::BTreeMap;

    #[test]
    fn protocol_round_trip_and_csv() {
        let spec = LatticeSpec::all_to_all(3, WeightProfile::quadratic()).unwrap();
        let p = Protocol::from_fn(&spec, 1.0, 3, |t| CouplingMatrix::from_pairs(3, &[(0, 1, t), (0, 2, 0.5)])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/p.json");
        write_protocol(&path, &p).unwrap();
        assert_eq!(read_protocol(&path).unwrap(), p);
        let mut buf = Vec::new();
        protocol_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,j0_t,J_1_2,J_1_3,J_2_3");
        assert_eq!(lines[2], "0.5,0.5,0.5,0.5,0.0");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn empty_diagnostics_keep_columns() {
        let row = SweepRow { n: 3, j0_tau: 2.5, l0: 1.0, classical_bound: 2.26, diagnostics: BTreeMap::new() };
        let mut buf = Vec::new();
        sweep_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
        assert!(lines[1].ends_with(",,,,,"));
    }

    #[test]
    fn timings_rows() {
        let t = TrajectoryTiming {
            spec: TrajectorySpec::new(vec![1, 3]).unwrap(),
            j0_tau: std::f64::consts::PI,
            converged: true,
            method: TimingMethod::ClosedForm,
            cross_check: None,
        };
        let mut buf = Vec::new();
        timings_csv(&[t], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("3,\"1,3\",1,3.14159"));
    }

    #[test]
    fn render_rejects_empty() {
        let rows: Vec<SeriesPoint> = Vec::new();
        assert!(render(&rows, Format::Csv, |r, b| series_csv(r, b)).is_err());
        let rows = vec![SeriesPoint { series: String::from("optimal"), x: 3.0, y: 2.48 }];
        let json = render(&rows, Format::Json, |r, b| series_csv(r, b)).unwrap();
        assert!(String::from_utf8(json).unwrap().contains("\"series\": \"optimal\""));
    }
}
