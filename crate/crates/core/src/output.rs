//! Result files: one CSV per probe and VTK snapshots of the nodal fields.
//!
//! Floats are written with 17 significant digits so that files round-trip
//! exactly and are byte-stable across runs.

use std::path::{Path, PathBuf};

use crate::cases::{Scenario, SimulationResult};
use crate::error::{Error, Result};
use crate::mesh::vtk::write_vtk;
use crate::solver::{FieldState, Problem};

/// Full-precision float formatting used in every output file.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a two-column `(t, value)` CSV with a `quantity [unit]` header.
pub fn write_series_csv(path: &Path, name: &str, unit: &str, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t [s]".to_string(), format!("{name} [{unit}]")])?;
    for &(t, v) in rows {
        w.write_record([fmt_f64(t), fmt_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// `(t, value)` rows of one probe.
pub type SeriesRows = Vec<(f64, f64)>;

/// Read a file written by [`write_series_csv`]: header and rows.
pub fn read_series_csv(path: &Path) -> Result<(Vec<String>, SeriesRows)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Scenario(format!("{}: malformed row {rec:?}", path.display())))
        };
        rows.push((parse(0)?, parse(1)?));
    }
    Ok((header, rows))
}

/// Nodal fields of a state as written to VTK.
pub fn snapshot_fields(problem: &Problem, state: &FieldState) -> Vec<(&'static str, Vec<f64>)> {
    let mut fields = vec![("saturation", state.s.clone())];
    if problem.carbonation {
        fields.push(("co2", state.c.clone()));
        fields.push(("caoh2", state.ch.clone()));
        fields.push(("ph", state.ph()));
        fields.push(("carbonation_front", state.varphi(&problem.params)));
    }
    fields.push(("porosity", state.theta(&problem.theta0, &problem.params)));
    if problem.cracks.phi.iter().any(|&p| p > 0.0) {
        fields.push(("phase_field", problem.cracks.phi.clone()));
    }
    fields
}

pub fn write_snapshot(path: &Path, problem: &Problem, state: &FieldState, title: &str) -> Result<()> {
    let fields = snapshot_fields(problem, state);
    let refs: Vec<(&str, &[f64])> = fields.iter().map(|(n, v)| (*n, v.as_slice())).collect();
    write_vtk(path, &problem.mesh, &format!("{title} t={}", fmt_f64(state.t)), &refs)
}

/// Write all result files of a run into `dir`:
/// `<probe>.csv` per probe, `snapshot_<k>.vtk` per snapshot time (listed
/// in `snapshots.csv`) and `final.vtk`. Returns the written paths.
pub fn write_results(dir: &Path, scenario: &Scenario, result: &SimulationResult) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let snap_times: Vec<f64> = result.snapshots.iter().map(|s| s.t).collect();
    for (k, spec) in scenario.probes.iter().enumerate() {
        let rows: Vec<(f64, f64)> = result
            .probes
            .records
            .iter()
            .filter(|r| !spec.at_snapshots || snap_times.contains(&r.t))
            .map(|r| (r.t, r.values[k]))
            .collect();
        let path = dir.join(format!("{}.csv", spec.name));
        write_series_csv(&path, &spec.name, spec.kind.unit(), &rows)?;
        written.push(path);
    }
    if !result.snapshots.is_empty() {
        let index = dir.join("snapshots.csv");
        let mut w = csv::Writer::from_path(&index)?;
        w.write_record(["index [-]", "t [s]", "file [-]"])?;
        for (k, st) in result.snapshots.iter().enumerate() {
            let name = format!("snapshot_{k:03}.vtk");
            let path = dir.join(&name);
            write_snapshot(&path, &result.problem, st, &scenario.name)?;
            w.write_record([k.to_string(), fmt_f64(st.t), name])?;
            written.push(path);
        }
        w.flush()?;
        written.push(index);
    }
    let path = dir.join("final.vtk");
    write_snapshot(&path, &result.problem, &result.final_state, &scenario.name)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let rows = vec![(0.0, 0.1), (1.0 / 3.0, -2.5e-300), (86400.0, f64::MAX)];
        write_series_csv(&path, "x", "m", &rows).unwrap();
        let (header, back) = read_series_csv(&path).unwrap();
        assert_eq!(header, vec!["t [s]", "x [m]"]);
        assert_eq!(back, rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(2).unwrap().starts_with("3.3333333333333331e-1,"));
    }
}
