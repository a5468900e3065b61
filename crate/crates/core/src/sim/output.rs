use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::SimError;
use crate::uvlm::{Vec3, WakeState};

pub const TIMESERIES_HEADER: &str = "time,ux,uy,uz,cl,res_norm,newton_steps,refine_steps";

/// One accepted time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRow {
    pub time: f64,
    /// Mid-span mid-chord displacement [m].
    pub displacement: Vec3,
    pub cl: f64,
    pub res_norm: f64,
    pub newton_steps: usize,
    pub refine_steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeriesOutput {
    pub rows: Vec<TimeSeriesRow>,
}

impl TimeSeriesOutput {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TIMESERIES_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{},{}",
                r.time,
                r.displacement.x,
                r.displacement.y,
                r.displacement.z,
                r.cl,
                r.res_norm,
                r.newton_steps,
                r.refine_steps
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some(TIMESERIES_HEADER) {
            return Err("missing or wrong header".into());
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(format!("row {}: expected 8 fields, found {}", i + 1, f.len()));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1));
            let int = |k: usize| f[k].parse::<usize>().map_err(|e| format!("row {}: {e}", i + 1));
            rows.push(TimeSeriesRow {
                time: num(0)?,
                displacement: Vec3::new(num(1)?, num(2)?, num(3)?),
                cl: num(4)?,
                res_norm: num(5)?,
                newton_steps: int(6)?,
                refine_steps: int(7)?,
            });
        }
        Ok(Self { rows })
    }
}

pub fn write_timeseries(out: &TimeSeriesOutput, path: &Path) -> Result<(), SimError> {
    fs::write(path, out.to_csv()).map_err(|e| SimError::io(path, e))
}

pub fn write_timing_report(ledger: &super::TimingLedger, path: &Path) -> Result<(), SimError> {
    fs::write(path, ledger.report()).map_err(|e| SimError::io(path, e))
}

/// Wake node dump: `row,node,x,y,z,gamma` with the trailing edge as row 0.
pub fn write_wake(trailing_edge: &[Vec3], wake: &WakeState, path: &Path) -> Result<(), SimError> {
    let mut s = String::from("row,node,x,y,z,gamma\n");
    for (j, p) in trailing_edge.iter().enumerate() {
        let _ = writeln!(s, "0,{j},{:.14e},{:.14e},{:.14e},", p.x, p.y, p.z);
    }
    for (i, row) in wake.rows.iter().rev().enumerate() {
        for (j, p) in row.line.iter().enumerate() {
            let g = row.gamma.get(j).map(|g| format!("{g:.14e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{j},{:.14e},{:.14e},{:.14e},{g}", i + 1, p.x, p.y, p.z);
        }
    }
    fs::write(path, s).map_err(|e| SimError::io(path, e))
}
