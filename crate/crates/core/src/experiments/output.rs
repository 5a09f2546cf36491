use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{ConvergenceRow, FlowField, SweepResult, YawResolutionRow};
use crate::control::TrajectoryRow;
use crate::error::{FvwError, Result};

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| FvwError::io(dir, e))?;
    }
    File::create(path).map_err(|e| FvwError::io(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| FvwError::io(path, e))
}

fn num(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(|e| FvwError::io(path, e))
}

/// Columns: parameter, `P_<t>` per turbine, `P_total`, `pbar_<t>` when
/// defined anywhere (blank where not), `variation`.
pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<()> {
    let mut w = writer(path)?;
    let n_t = sweep.points.first().map_or(0, |p| p.powers.len());
    let normalized = sweep.points.iter().any(|p| p.normalized.is_some());
    let mut header = vec![sweep.parameter.clone()];
    header.extend((0..n_t).map(|t| format!("P_{t}")));
    header.push("P_total".into());
    if normalized {
        header.extend((0..2).map(|t| format!("pbar_{t}")));
    }
    header.push("variation".into());
    w.write_record(&header)?;
    for p in &sweep.points {
        let mut rec = vec![num(p.value)];
        rec.extend(p.powers.iter().map(|&v| num(v)));
        rec.push(num(p.total));
        if normalized {
            match &p.normalized {
                Some(n) => rec.extend(n.iter().map(|&v| num(v))),
                None => rec.extend([String::new(), String::new()]),
            }
        }
        rec.push(num(p.variation));
        w.write_record(&rec)?;
    }
    finish(w, path)
}

pub fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    finish(w, path)
}

pub fn write_yaw_resolution_csv(path: &Path, rows: &[YawResolutionRow]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    finish(w, path)
}

/// Columns: step, time, `a_<t>`, `psi_<t>` (radians), `P_<t>`, J.
pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = writer(path)?;
    let n_t = rows.first().map_or(0, |r| r.outputs.len());
    let mut header = vec!["step".to_string(), "time".into()];
    for t in 0..n_t {
        header.push(format!("a_{t}"));
        header.push(format!("psi_{t}"));
    }
    header.extend((0..n_t).map(|t| format!("P_{t}")));
    header.push("J".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.step.to_string(), num(r.time)];
        rec.extend(r.controls.iter().map(|&v| num(v)));
        rec.extend(r.outputs.iter().map(|&v| num(v)));
        rec.push(num(r.objective));
        w.write_record(&rec)?;
    }
    finish(w, path)
}

/// Columns: x, y, u, v, w.
pub fn write_flowfield_csv(path: &Path, field: &FlowField) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "y", "u", "v", "w"])?;
    for (j, &y) in field.ys.iter().enumerate() {
        for (i, &x) in field.xs.iter().enumerate() {
            let u = field.at(i, j);
            w.write_record([num(x), num(y), num(u[0]), num(u[1]), num(u[2])])?;
        }
    }
    finish(w, path)
}
