//! Raw field export (flat little-endian `f64` plus a JSON metadata record)
//! and delimiter-separated report tables.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ensemble_stats::{DissipationReport, MomentSeries};
use crate::error::{Error, Result};
use crate::field::FieldRealization;
use crate::grid::Grid;
use crate::mild_solver::{PicardDiagnostics, Trajectory};

/// Sidecar for a `.f64` array of `shape[0]` fields of `shape[1]` points,
/// stored row-major in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayMetadata {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub shape: [usize; 2],
    pub dtype: String,
    pub content: String,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("f64"), stem.with_extension("json"))
}

/// Writes fields as `<stem>.f64` and `<stem>.json`.
pub fn write_fields(stem: &Path, fields: &[FieldRealization], content: &str) -> Result<ArrayMetadata> {
    let first = fields.first().ok_or(Error::EmptyEnsemble)?;
    let mut bytes = Vec::with_capacity(fields.len() * first.values.len() * 8);
    for f in fields {
        f.grid.ensure_same(&first.grid)?;
        for v in &f.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let meta = ArrayMetadata {
        grid: first.grid,
        times: fields.iter().map(|f| f.time).collect(),
        shape: [fields.len(), first.values.len()],
        dtype: "f64-le".into(),
        content: content.into(),
    };
    let (data, side) = paths(stem);
    fs::write(data, bytes)?;
    fs::write(side, serde_json::to_string_pretty(&meta).map_err(|e| Error::Parse(e.to_string()))?)?;
    Ok(meta)
}

pub fn read_fields(stem: &Path) -> Result<(ArrayMetadata, Vec<FieldRealization>)> {
    let (data, side) = paths(stem);
    let meta: ArrayMetadata =
        serde_json::from_str(&fs::read_to_string(side)?).map_err(|e| Error::Parse(e.to_string()))?;
    let bytes = fs::read(data)?;
    let [rows, cols] = meta.shape;
    if bytes.len() != rows * cols * 8 || cols != meta.grid.size() || meta.times.len() != rows {
        return Err(Error::Parse(format!("array file does not match shape {:?}", meta.shape)));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let fields = values
        .chunks_exact(cols)
        .zip(&meta.times)
        .map(|(v, &t)| FieldRealization::new(meta.grid, v.to_vec(), t))
        .collect::<Result<Vec<_>>>()?;
    Ok((meta, fields))
}

pub fn write_trajectory(stem: &Path, traj: &Trajectory) -> Result<ArrayMetadata> {
    write_fields(stem, &traj.states, "trajectory")
}

pub fn read_trajectory(stem: &Path) -> Result<Trajectory> {
    Trajectory::new(read_fields(stem)?.1)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Flag(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

/// Numbers are written with 17 significant digits so that tables round-trip
/// and compare byte for byte.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match c {
                    Cell::Num(v) => {
                        let _ = write!(out, "{v:.16e}");
                    }
                    Cell::Int(v) => {
                        let _ = write!(out, "{v}");
                    }
                    Cell::Text(s) => out.push_str(&s.replace([',', '\n'], ";")),
                    Cell::Flag(b) => out.push_str(if *b { "pass" } else { "fail" }),
                }
            }
            out.push('\n');
        }
        out
    }
}

impl MomentSeries {
    /// `t, estimate, stderr, bound, pass` with the initial value as bound.
    pub fn to_table(&self, sigmas: f64) -> Table {
        let bad: Vec<usize> = self.violations(sigmas).iter().map(|v| v.node).collect();
        let mut t = Table::new(&["t", "estimate", "stderr", "bound", "pass"]);
        for j in 0..self.times.len() {
            t.push(vec![
                self.times[j].into(),
                self.values[j].into(),
                self.stderr[j].into(),
                self.values[0].into(),
                (!bad.contains(&j)).into(),
            ]);
        }
        t
    }
}

impl DissipationReport {
    pub fn to_table(&self, rel: f64, sigmas: f64) -> Table {
        let mut t = Table::new(&["t", "lhs", "rhs", "residual", "stderr", "bound", "pass"]);
        for r in &self.rows {
            let bound = (rel * r.rhs.abs()).max(sigmas * r.stderr);
            let pass = r.low_confidence || r.residual.abs() <= bound;
            t.push(vec![
                r.time.into(),
                r.lhs.into(),
                r.rhs.into(),
                r.residual.into(),
                r.stderr.into(),
                bound.into(),
                pass.into(),
            ]);
        }
        t
    }
}

impl PicardDiagnostics {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["iteration", "residual", "ratio", "bound"]);
        for (m, (r, q)) in self.residuals.iter().zip(&self.ratios).enumerate() {
            t.push(vec![
                (m + 1).into(),
                (*r).into(),
                q.unwrap_or(f64::NAN).into(),
                self.bound.unwrap_or(f64::NAN).into(),
            ]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(2, 8, 3.0).unwrap();
        let states: Vec<FieldRealization> = (0..3)
            .map(|j| FieldRealization::from_fn(g, |x| (x[0] + 2.0 * x[1]).sin() * j as f64).with_time(0.5 * j as f64))
            .collect();
        let traj = Trajectory::new(states).unwrap();
        let stem = dir.path().join("member_0");
        let meta = write_trajectory(&stem, &traj).unwrap();
        assert_eq!(meta.shape, [3, 64]);
        assert_eq!(fs::metadata(stem.with_extension("f64")).unwrap().len(), 3 * 64 * 8);
        assert_eq!(read_trajectory(&stem).unwrap(), traj);
    }

    #[test]
    fn truncated_array_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::periodic_1d(8).unwrap();
        let stem = dir.path().join("x");
        write_fields(&stem, &[FieldRealization::constant(g, 1.0)], "test").unwrap();
        fs::write(stem.with_extension("f64"), [0u8; 12]).unwrap();
        assert!(read_fields(&stem).is_err());
    }

    #[test]
    fn csv_formatting() {
        let mut t = Table::new(&["a", "b", "c", "d"]);
        t.push(vec![0.1.into(), 3usize.into(), "x,y".into(), true.into()]);
        assert_eq!(t.to_csv(), "a,b,c,d\n1.0000000000000001e-1,3,x;y,pass\n");
    }
}
