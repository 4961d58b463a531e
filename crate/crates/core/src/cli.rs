//! Command-line front end.
//!
//! Subcommands are trait objects held in a [`CommandRegistry`]; the clap
//! parser is assembled from whatever is registered. Exit status: 0 on
//! success (and for `--help`/`--version`), 1 on usage or validation errors,
//! 2 on solver or I/O failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Arg, ArgAction, ArgMatches};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::first_best::{continuation_boundary, principal_value_fb};
use crate::hjbvi::{howard_solve, residual_check, SecondBestSolution};
use crate::model::ModelParams;
use crate::report::{
    linspace, second_best_table, sigma_sweep, sweep_table, value_of_information, voi_table, RunManifest, Table,
};
use crate::simulate::{
    incentive_check, martingale_drift, simulate_paths, DeviationRegistry, MonteCarloValue, Termination,
};

pub const OUT_ENV: &str = "CONTRACT_SOLVE_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

/// Boundary bisection tolerance used when checking the value-of-information range.
const FB_BOUNDARY_TOL: f64 = 1e-6;

/// State shared by the subcommands of one invocation.
pub struct RunContext {
    pub config: Config,
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    model: Option<ModelParams>,
    second_best: Option<SecondBestSolution>,
}

impl RunContext {
    pub fn new(command: &str, config: Config, out_dir: PathBuf) -> Self {
        let manifest = RunManifest::new(command, config.snapshot().clone());
        Self {
            config,
            out_dir,
            manifest,
            model: None,
            second_best: None,
        }
    }

    pub fn model(&mut self) -> Result<ModelParams> {
        if self.model.is_none() {
            self.model = Some(self.config.model()?);
        }
        Ok(self.model.expect("set above"))
    }

    /// Default-sigma second-best solution, solved once per invocation.
    pub fn second_best(&mut self) -> Result<&SecondBestSolution> {
        if self.second_best.is_none() {
            let model = self.model()?;
            let grid = self.config.grid()?;
            let howard = self.config.howard()?;
            let sol = self.timed("second_best", || howard_solve(&model, &grid, &howard))?;
            let m = &mut self.manifest;
            m.diagnostic("second_best.iterations", sol.iterations);
            m.diagnostic("second_best.residual", sol.residual);
            m.diagnostic("second_best.residual_check", residual_check(&model, &sol));
            m.diagnostic("second_best.b_hat", sol.b_hat);
            m.diagnostic("second_best.growth_constant", sol.growth_constant);
            m.diagnostic("second_best.max_second_difference", sol.max_second_difference());
            self.second_best = Some(sol);
        }
        Ok(self.second_best.as_ref().expect("set above"))
    }

    pub fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let v = f();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        self.manifest.timings_ms.insert(label.to_string(), ms);
        v
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<()> {
        table.write(&self.out_dir.join(name))?;
        self.manifest.record_file(name);
        Ok(())
    }
}

pub trait Command: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, ctx: &mut RunContext) -> Result<()>;
}

struct FirstBest;

impl Command for FirstBest {
    fn name(&self) -> &'static str {
        "first-best"
    }
    fn about(&self) -> &'static str {
        "Full-information contract: multiplier, stopping rule and value per x, schedules at x_reserve"
    }
    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let model = ctx.model()?;
        let xs = linspace(0.0, ctx.config.float("fb.x_max"), ctx.config.count("fb.n"));
        let ts = linspace(0.0, ctx.config.float("fb.t_max"), ctx.config.count("fb.nt"));
        if xs.is_empty() || ts.is_empty() {
            return Err(Error::Config("fb.n and fb.nt must be >= 1".into()));
        }

        let rows = ctx.timed("first_best", || {
            xs.iter().map(|&x| principal_value_fb(&model, x)).collect::<Result<Vec<_>>>()
        })?;
        let mut values = Table::new(&["x", "lambda_lag", "tau_star", "value"]);
        for s in &rows {
            values.push(vec![s.x.into(), s.lambda_lag.into(), s.tau_star.as_str().into(), s.value.into()]);
        }
        ctx.write_table("fb_value.csv", &values)?;

        let reserve = principal_value_fb(&model, model.x_reserve)?;
        let mut schedule = Table::new(&["t", "rent", "effort", "H"]);
        for &t in &ts {
            let s = reserve.schedule(&model, t)?;
            schedule.push(vec![t.into(), s.rent.into(), s.effort.into(), s.surplus.into()]);
        }
        ctx.write_table("fb_schedule.csv", &schedule)?;

        let boundary = ctx.timed("fb_boundary", || continuation_boundary(&model, FB_BOUNDARY_TOL))?;
        ctx.manifest.diagnostic("first_best.x_max", boundary);
        ctx.manifest.diagnostic("first_best.lambda_lag_at_reserve", reserve.lambda_lag);
        Ok(())
    }
}

struct SecondBest;

impl Command for SecondBest {
    fn name(&self) -> &'static str {
        "second-best"
    }
    fn about(&self) -> &'static str {
        "Moral-hazard contract: value function, rent, effort and stop region on the grid"
    }
    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let table = second_best_table(ctx.second_best()?);
        ctx.write_table("sb_solution.csv", &table)
    }
}

struct Simulate;

impl Command for Simulate {
    fn name(&self) -> &'static str {
        "simulate"
    }
    fn about(&self) -> &'static str {
        "Monte Carlo of the second-best contract: principal value, incentive check, sample paths"
    }
    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let model = ctx.model()?;
        let sim = ctx.config.sim()?;
        let x0 = ctx.config.float("sim.x0");
        let deviations = DeviationRegistry::default().parse_list(ctx.config.get("sim.deviations"))?;
        let sol = ctx.second_best()?.clone();
        if !(x0 > 0.0 && x0 < sol.b_hat) {
            return Err(Error::Config(format!(
                "sim.x0 = {x0} must lie in the continuation region (0, {})",
                sol.b_hat
            )));
        }

        let bundle = ctx.timed("simulate", || simulate_paths(&model, &sol, x0, &sim))?;
        let mc = MonteCarloValue::from_bundle(&model, &sol, &bundle);
        let mut value = Table::new(&[
            "x0",
            "estimate",
            "std_error",
            "w",
            "n_paths",
            "stopped",
            "floored",
            "censored",
            "censoring_bias_bound",
        ]);
        value.push(vec![
            x0.into(),
            mc.estimate.into(),
            mc.std_error.into(),
            sol.value_at(x0)?.into(),
            mc.n_paths.into(),
            mc.stopped.into(),
            mc.floored.into(),
            mc.censored.into(),
            mc.censoring_bias_bound.into(),
        ]);
        ctx.write_table("mc_value.csv", &value)?;

        let mut paths = Table::new(&["path_id", "t", "j", "x", "dw", "stopped"]);
        for tr in &bundle.trajectories {
            let last = tr.j.len() - 1;
            for k in 0..=last {
                // dw[k] is the increment leading to step k.
                let dw = if k == 0 { 0.0 } else { tr.dw[k - 1] };
                let stopped = k == last && tr.termination == Termination::Stopped;
                paths.push(vec![
                    tr.path_id.into(),
                    tr.time(k).into(),
                    tr.j[k].into(),
                    tr.x[k].into(),
                    dw.into(),
                    stopped.into(),
                ]);
            }
        }
        ctx.write_table("paths.csv", &paths)?;
        ctx.manifest.diagnostic("simulate.martingale_drift_se", martingale_drift(&bundle));
        ctx.manifest.diagnostic("simulate.mc_value", mc);

        let report = ctx.timed("incentive", || incentive_check(&model, &sol, x0, &sim, &deviations))?;
        let mut inc = Table::new(&[
            "deviation",
            "agent_objective",
            "agent_objective_se",
            "advantage",
            "advantage_se",
            "violated",
        ]);
        inc.push(vec![
            "baseline".into(),
            report.baseline.mean.into(),
            report.baseline.std_error.into(),
            0.0.into(),
            0.0.into(),
            false.into(),
        ]);
        for arm in &report.arms {
            inc.push(vec![
                arm.name.clone().into(),
                arm.agent_objective.mean.into(),
                arm.agent_objective.std_error.into(),
                arm.advantage.mean.into(),
                arm.advantage.std_error.into(),
                arm.violated.into(),
            ]);
        }
        ctx.write_table("incentive.csv", &inc)?;
        ctx.manifest.diagnostic("simulate.incentive_violation", report.any_violation());
        Ok(())
    }
}

struct Voi;

impl Command for Voi {
    fn name(&self) -> &'static str {
        "voi"
    }
    fn about(&self) -> &'static str {
        "Value of information: first-best minus second-best principal value"
    }
    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        let model = ctx.model()?;
        let hi = ctx.config.float("voi.x_max");
        let n = ctx.config.count("voi.n");
        let sol = ctx.second_best()?.clone();
        let fb_max = ctx.timed("fb_boundary", || continuation_boundary(&model, FB_BOUNDARY_TOL))?;
        let limit = fb_max.min(sol.grid.x_max);
        if !(hi >= 0.0 && hi <= limit) || n == 0 {
            return Err(Error::Config(format!(
                "voi grid [0, {hi}] with {n} points must lie within [0, {limit}]"
            )));
        }
        let rows = ctx.timed("voi", || value_of_information(&model, &sol, &linspace(0.0, hi, n)))?;
        let min_voi = rows.iter().map(|r| r.voi).fold(f64::INFINITY, f64::min);
        ctx.manifest.diagnostic("voi.min", min_voi);
        ctx.write_table("voi.csv", &voi_table(&rows))
    }
}

struct Report;

impl Command for Report {
    fn name(&self) -> &'static str {
        "report"
    }
    fn about(&self) -> &'static str {
        "Every dataset: first-best, second-best, simulation, value of information and the sigma sweep"
    }
    fn run(&self, ctx: &mut RunContext) -> Result<()> {
        FirstBest.run(ctx)?;
        SecondBest.run(ctx)?;
        Simulate.run(ctx)?;
        Voi.run(ctx)?;

        let model = ctx.model()?;
        let sigmas = ctx.config.floats("sweep.sigmas");
        let grid = ctx.config.grid()?;
        let howard = ctx.config.howard()?;
        let sweep = ctx.timed("sweep", || sigma_sweep(&model, &sigmas, &grid, &howard))?;
        ctx.write_table("sweep.csv", &sweep_table(&sweep))?;
        let failures: BTreeMap<String, String> = sweep
            .iter()
            .filter_map(|(s, r)| r.as_ref().err().map(|e| (s.to_string(), e.to_string())))
            .collect();
        for (s, e) in &failures {
            eprintln!("sweep: sigma = {s} failed: {e}");
        }
        ctx.manifest.diagnostic("sweep.failures", &failures);
        match sweep.into_iter().find_map(|(_, r)| r.err()) {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Subcommands by name, in registration order.
pub struct CommandRegistry {
    commands: Vec<Box<dyn Command>>,
}

impl Default for CommandRegistry {
    fn default() -> Self {
        let mut r = Self { commands: Vec::new() };
        r.register(Box::new(FirstBest));
        r.register(Box::new(SecondBest));
        r.register(Box::new(Simulate));
        r.register(Box::new(Voi));
        r.register(Box::new(Report));
        r
    }
}

impl CommandRegistry {
    /// Adds a subcommand, replacing any with the same name.
    pub fn register(&mut self, cmd: Box<dyn Command>) {
        self.commands.retain(|c| c.name() != cmd.name());
        self.commands.push(cmd);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Command> {
        self.commands.iter().find(|c| c.name() == name).map(|c| c.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.commands.iter().map(|c| c.name())
    }

    pub fn clap_command(&self) -> clap::Command {
        let mut app = clap::Command::new(env!("CARGO_PKG_NAME"))
            .version(env!("CARGO_PKG_VERSION"))
            .about("Continuous-time principal-agent contract solver")
            .subcommand_required(true)
            .arg_required_else_help(true);
        for c in &self.commands {
            app = app.subcommand(
                clap::Command::new(c.name())
                    .about(c.about())
                    .arg(
                        Arg::new("config")
                            .long("config")
                            .value_name("PATH")
                            .value_parser(clap::value_parser!(PathBuf))
                            .help("key = value config file; unset keys use defaults"),
                    )
                    .arg(
                        Arg::new("out")
                            .long("out")
                            .value_name("DIR")
                            .value_parser(clap::value_parser!(PathBuf))
                            .help(format!("output directory (default: current directory; {OUT_ENV} overrides)")),
                    )
                    .arg(
                        Arg::new("set")
                            .long("set")
                            .value_name("KEY=VALUE")
                            .action(ArgAction::Append)
                            .help("override one config key; repeatable"),
                    ),
            );
        }
        app
    }

    /// Parses `args` (program name first) and runs the chosen subcommand.
    /// `env_out` takes precedence over `--out`.
    pub fn dispatch<I, T>(&self, args: I, env_out: Option<PathBuf>) -> i32
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        let matches = match self.clap_command().try_get_matches_from(args) {
            Ok(m) => m,
            Err(e) => {
                let _ = e.print();
                return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            }
        };
        let (name, sub) = matches.subcommand().expect("subcommand is required");
        let cmd = self.get(name).expect("clap only accepts registered names");
        match execute(cmd, sub, env_out) {
            Ok(dir) => {
                eprintln!("{name}: wrote outputs to {}", dir.display());
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                if e.is_validation() {
                    EXIT_USAGE
                } else {
                    EXIT_FAILURE
                }
            }
        }
    }
}

fn resolve_config(sub: &ArgMatches) -> Result<Config> {
    let mut cfg = match sub.get_one::<PathBuf>("config") {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    for s in sub.get_many::<String>("set").into_iter().flatten() {
        cfg.apply(s)?;
    }
    Ok(cfg)
}

fn execute(cmd: &dyn Command, sub: &ArgMatches, env_out: Option<PathBuf>) -> Result<PathBuf> {
    let config = resolve_config(sub)?;
    let out_dir = env_out
        .or_else(|| sub.get_one::<PathBuf>("out").cloned())
        .unwrap_or_else(|| PathBuf::from("."));
    create_dir(&out_dir)?;
    let mut ctx = RunContext::new(cmd.name(), config, out_dir.clone());
    let start = Instant::now();
    let outcome = cmd.run(&mut ctx);
    ctx.manifest
        .timings_ms
        .insert("total".into(), start.elapsed().as_secs_f64() * 1e3);
    if let Err(e) = &outcome {
        ctx.manifest.diagnostic("error", e.to_string());
    }
    ctx.manifest.write(&out_dir)?;
    outcome.map(|_| out_dir)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Entry point used by the binary: reads the output override from the
/// environment.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_out = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    CommandRegistry::default().dispatch(args, env_out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_builds_every_subcommand() {
        let reg = CommandRegistry::default();
        let names: Vec<_> = reg.names().collect();
        assert_eq!(names, ["first-best", "second-best", "simulate", "voi", "report"]);
        let app = reg.clap_command();
        for n in names {
            assert!(app.find_subcommand(n).is_some(), "{n}");
        }
        app.debug_assert();
    }

    #[test]
    fn usage_errors_exit_one() {
        let reg = CommandRegistry::default();
        assert_eq!(reg.dispatch(["cs", "bogus"], None), EXIT_USAGE);
        assert_eq!(reg.dispatch(["cs"], None), EXIT_USAGE);
        assert_eq!(reg.dispatch(["cs", "--help"], None), EXIT_OK);
        assert_eq!(reg.dispatch(["cs", "voi", "--help"], None), EXIT_OK);
        assert_eq!(reg.dispatch(["cs", "--version"], None), EXIT_OK);
    }

    struct Echo;
    impl Command for Echo {
        fn name(&self) -> &'static str {
            "echo"
        }
        fn about(&self) -> &'static str {
            "writes the resolved sigma"
        }
        fn run(&self, ctx: &mut RunContext) -> Result<()> {
            let mut t = Table::new(&["sigma"]);
            t.push(vec![ctx.config.float("sigma").into()]);
            ctx.write_table("echo.csv", &t)
        }
    }

    #[test]
    fn custom_command_with_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let mut reg = CommandRegistry::default();
        reg.register(Box::new(Echo));
        let out = dir.path().to_str().unwrap();
        assert_eq!(reg.dispatch(["cs", "echo", "--out", out, "--set", "sigma=2.5"], None), EXIT_OK);
        let text = fs::read_to_string(dir.path().join("echo.csv")).unwrap();
        assert_eq!(text, "sigma\n2.5000000000000000e0\n");
        assert!(dir.path().join("manifest.json").exists());

        assert_eq!(reg.dispatch(["cs", "echo", "--out", out, "--set", "gamma=1"], None), EXIT_USAGE);
        assert_eq!(reg.dispatch(["cs", "echo", "--out", out, "--set", "sigma"], None), EXIT_USAGE);
    }

    #[test]
    fn env_override_wins() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut reg = CommandRegistry::default();
        reg.register(Box::new(Echo));
        let code = reg.dispatch(
            ["cs", "echo", "--out", a.path().to_str().unwrap()],
            Some(b.path().to_path_buf()),
        );
        assert_eq!(code, EXIT_OK);
        assert!(b.path().join("echo.csv").exists());
        assert!(!a.path().join("echo.csv").exists());
    }
}
