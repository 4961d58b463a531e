#![allow(dead_code)]

use std::sync::OnceLock;

use contract_solve::hjbvi::{howard_solve, Grid, HowardConfig, SecondBestSolution};
use contract_solve::ModelParams;

pub fn model() -> ModelParams {
    ModelParams::default()
}

/// Default solve (sigma = 1.85, x_max = 1, n = 2001), shared by the tests of one binary.
pub fn default_solution() -> &'static SecondBestSolution {
    static SOL: OnceLock<SecondBestSolution> = OnceLock::new();
    SOL.get_or_init(|| howard_solve(&model(), &Grid::default(), &HowardConfig::default()).expect("default solve"))
}

pub fn solve(model: &ModelParams, grid: &Grid) -> SecondBestSolution {
    howard_solve(model, grid, &HowardConfig::default()).expect("solve")
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
