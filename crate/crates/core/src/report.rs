//! Tabular outputs: CSV tables, the value of information, sigma sweeps and
//! the run manifest.
//!
//! CSV dialect: comma separator, header row, LF line endings, floats written
//! with 17 significant digits (`{:.16e}`), booleans as `0`/`1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::first_best::principal_value_fb;
use crate::hjbvi::{howard_solve, Grid, HowardConfig, SecondBestSolution};
use crate::model::{ModelParams, Primitives};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

fn write_cell(out: &mut String, cell: &Cell) {
    match cell {
        Cell::Float(v) => write!(out, "{v:.16e}"),
        Cell::Int(v) => write!(out, "{v}"),
        Cell::Bool(b) => write!(out, "{}", u8::from(*b)),
        Cell::Text(s) => write!(out, "{s}"),
    }
    .expect("writing to a String cannot fail");
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_cell(&mut out, cell);
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints exact.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VoiRow {
    pub x: f64,
    pub v_fb: f64,
    pub v_sb: f64,
    pub voi: f64,
}

/// First-best minus second-best principal value on `xs`. The second-best
/// value is linearly interpolated from the grid solution.
pub fn value_of_information<M: Primitives + ?Sized>(
    model: &M,
    solution: &SecondBestSolution,
    xs: &[f64],
) -> Result<Vec<VoiRow>> {
    xs.iter()
        .map(|&x| {
            let v_fb = principal_value_fb(model, x)?.value;
            let v_sb = solution.value_at(x)?;
            Ok(VoiRow {
                x,
                v_fb,
                v_sb,
                voi: v_fb - v_sb,
            })
        })
        .collect()
}

pub fn voi_table(rows: &[VoiRow]) -> Table {
    let mut t = Table::new(&["x", "v_fb", "v_sb", "voi"]);
    for r in rows {
        t.push(vec![r.x.into(), r.v_fb.into(), r.v_sb.into(), r.voi.into()]);
    }
    t
}

pub fn second_best_table(solution: &SecondBestSolution) -> Table {
    let mut t = Table::new(&["x", "w", "r_star", "a_star", "stop"]);
    for i in 0..solution.grid.n {
        t.push(vec![
            solution.grid.x(i).into(),
            solution.w[i].into(),
            solution.r_star[i].into(),
            solution.a_star[i].into(),
            solution.stop[i].into(),
        ]);
    }
    t
}

/// One second-best solve per sigma on a shared grid, in input order. A
/// failing sigma is reported in place and does not stop the others.
pub fn sigma_sweep(
    model: &ModelParams,
    sigmas: &[f64],
    grid: &Grid,
    howard: &HowardConfig,
) -> Result<Vec<(f64, Result<SecondBestSolution>)>> {
    if sigmas.is_empty() {
        return Err(Error::Config("sigma sweep needs at least one sigma".into()));
    }
    Ok(sigmas
        .par_iter()
        .map(|&s| (s, model.with_sigma(s).and_then(|m| howard_solve(&m, grid, howard))))
        .collect())
}

pub fn sweep_table(sweep: &[(f64, Result<SecondBestSolution>)]) -> Table {
    let mut t = Table::new(&["sigma", "x", "w"]);
    for (sigma, res) in sweep {
        if let Ok(sol) = res {
            for i in 0..sol.grid.n {
                t.push(vec![(*sigma).into(), sol.grid.x(i).into(), sol.w[i].into()]);
            }
        }
    }
    t
}

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
    pub files: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            diagnostics: BTreeMap::new(),
            files: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn diagnostic(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.diagnostics.insert(key.to_string(), v);
    }

    pub fn record_file(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    /// Writes `manifest.json` into `dir`, listing itself among the files.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        self.record_file(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join(MANIFEST_NAME), text + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_dialect() {
        let mut t = Table::new(&["x", "n", "flag", "name"]);
        t.push(vec![0.1.into(), 3usize.into(), true.into(), "zero".into()]);
        t.push(vec![(-2.5f64).into(), 0u64.into(), false.into(), "half".into()]);
        let csv = t.to_csv();
        assert_eq!(
            csv,
            "x,n,flag,name\n1.0000000000000001e-1,3,1,zero\n-2.5000000000000000e0,0,0,half\n"
        );
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn floats_round_trip_through_csv() {
        for &v in &[0.1, 1.0 / 3.0, -1e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let mut s = String::new();
            write_cell(&mut s, &Cell::Float(v));
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 0.95, 96);
        assert_eq!(v.len(), 96);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[95], 0.95);
        assert!((v[1] - 0.01).abs() < 1e-15);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let m = ModelParams::default();
        let err = sigma_sweep(&m, &[], &Grid::default(), &HowardConfig::default()).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn manifest_lists_itself() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("voi", BTreeMap::new());
        m.record_file("voi.csv");
        m.record_file("voi.csv");
        m.write(dir.path()).unwrap();
        assert_eq!(m.files, ["voi.csv", MANIFEST_NAME]);
        let text = fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["files"][1], MANIFEST_NAME);
    }
}
