use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::erf::erf;

use super::config::RunConfig;
use super::output::{boundaries_csv, csv, snapshot_csv, snapshot_name, write_atomic, write_json};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fields::trajectory_snapshot;
use crate::kernels::GreenKernel;
use crate::oracle::{classical_stefan_via_machinery, fd_solve, neumann_lambda};
use crate::quad::{abel_integrate, gaussian_convolve, time_integral, SampledFunction, TimeGrid, Tolerance};
use crate::volterra::{advance, PinchOffEvent, Trajectory};

/// Process exit classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Config = 1,
    Solver = 2,
    CheckFailed = 3,
}

pub struct Options {
    pub out: Option<PathBuf>,
    pub quiet: bool,
    pub seed: Option<u64>,
}

impl Options {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

#[derive(Serialize)]
struct Failure<'a> {
    status: &'static str,
    reason: &'a str,
    message: String,
}

fn load(path: &Path, opts: &Options) -> std::result::Result<(RunConfig, PathBuf), Exit> {
    let mut cfg = match RunConfig::load(path).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Err(Exit::Config);
        }
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let dir = opts.out.clone().unwrap_or_else(|| cfg.outputs.dir.clone());
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create output directory {}: {e}", dir.display());
        return Err(Exit::Config);
    }
    Ok((cfg, dir))
}

/// Reports a solver failure on stderr and in `diagnostics.json`.
fn solver_failure(dir: &Path, e: &Error) -> Exit {
    eprintln!("error: {e}");
    let f = Failure { status: "error", reason: e.reason(), message: e.to_string() };
    if let Err(w) = write_json(&dir.join("diagnostics.json"), &f) {
        eprintln!("error: {w}");
    }
    Exit::Solver
}

#[derive(Serialize)]
struct StepDiagnostics {
    t_start: f64,
    sigma: f64,
    m_bound: f64,
    sigma_halvings: usize,
    m_doublings: usize,
    iterations: usize,
    residual_history: Vec<f64>,
    ratio_history: Vec<f64>,
    min_gap: f64,
    final_norm: f64,
}

#[derive(Serialize)]
struct RunDiagnostics {
    status: &'static str,
    reason: Option<&'static str>,
    t_reached: f64,
    profile_width: f64,
    joint_mismatch: f64,
    pinch_off: Option<PinchOffEvent>,
    snapshots: Vec<String>,
    /// Requested times past a pinch-off.
    skipped_snapshots: Vec<f64>,
    steps: Vec<StepDiagnostics>,
}

fn step_diagnostics(traj: &Trajectory) -> Vec<StepDiagnostics> {
    traj.steps
        .iter()
        .map(|s| StepDiagnostics {
            t_start: s.t_start,
            sigma: s.sigma,
            m_bound: s.m_bound,
            sigma_halvings: s.sigma_halvings,
            m_doublings: s.m_doublings,
            iterations: s.diagnostics.iterates,
            residual_history: s.diagnostics.residual_history.clone(),
            ratio_history: s.diagnostics.ratio_history.clone(),
            min_gap: s.diagnostics.min_gap,
            final_norm: s.diagnostics.final_norm,
        })
        .collect()
}

pub fn simulate(path: &Path, opts: &Options) -> Exit {
    let (cfg, dir) = match load(path, opts) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let setup = cfg.setup();
    opts.say(format!("simulating to t = {} s", cfg.solver.t_end));
    let traj = match advance(&setup, &cfg.solver) {
        Ok(t) => t,
        Err(e) => return solver_failure(&dir, &e),
    };
    match write_simulation(&cfg, &dir, &traj, opts) {
        Ok(()) => Exit::Ok,
        Err(e) => solver_failure(&dir, &e),
    }
}

fn write_simulation(cfg: &RunConfig, dir: &Path, traj: &Trajectory, opts: &Options) -> Result<()> {
    write_atomic(&dir.join("boundaries.csv"), boundaries_csv(&traj.boundary_rows()).as_bytes())?;
    let xs = cfg.snapshot_grid().nodes()?;
    let mut written = Vec::new();
    let mut skipped = Vec::new();
    let reached = traj.t_reached();
    for &t in &cfg.outputs.snapshot_times {
        if t > reached * (1.0 + 1e-12) {
            skipped.push(t);
            continue;
        }
        let snap = trajectory_snapshot(traj, t, xs.clone(), cfg.solver.execution)?;
        let name = snapshot_name(t);
        write_atomic(&dir.join(&name), snapshot_csv(&snap).as_bytes())?;
        written.push(name);
    }
    let diag = RunDiagnostics {
        status: if traj.pinch_off.is_some() { "pinch_off" } else { "completed" },
        reason: traj.pinch_off.map(|_| "pinch_off"),
        t_reached: reached,
        profile_width: traj.profile_width,
        joint_mismatch: traj.joint_mismatch(),
        pinch_off: traj.pinch_off,
        snapshots: written,
        skipped_snapshots: skipped,
        steps: step_diagnostics(traj),
    };
    write_json(&dir.join("diagnostics.json"), &diag)?;
    match traj.pinch_off {
        Some(p) => opts.say(format!("pinch-off at t = {} s after {} steps", p.t, traj.steps.len())),
        None => opts.say(format!("reached t = {reached} s in {} steps", traj.steps.len())),
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: measured <= tolerance, measured, tolerance }
    }

    fn at_least(name: &str, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: measured >= tolerance, measured, tolerance }
    }
}

#[derive(Serialize)]
struct ValidationOutput {
    passed: bool,
    seed: u64,
    checks: Vec<Check>,
}

fn kernel_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) -> Result<()> {
    let mut norm_err = 0.0_f64;
    let mut sym_err = 0.0_f64;
    for _ in 0..16 {
        let kappa = 10f64.powf(rng.random_range(-7.0..0.0));
        let g = GreenKernel::new(kappa)?;
        let t = rng.random_range(0.1..10.0);
        let x = rng.random_range(-1.0..1.0) * (kappa * t).sqrt();
        let mass = gaussian_convolve(&g, x, t, |_| 1.0, None, None)?;
        norm_err = norm_err.max((mass - 1.0).abs());
        let xi = x + rng.random_range(-3.0..3.0) * (kappa * t).sqrt();
        let tau = rng.random_range(0.0..t);
        let (gx, gxi) = (g.dx(x, t, xi, tau)?, g.dxi(x, t, xi, tau)?);
        let scale = gx.abs().max(f64::MIN_POSITIVE);
        sym_err = sym_err.max((gx + gxi).abs() / scale);
    }
    out.push(Check::at_most("kernel_normalization", norm_err, 1e-10));
    out.push(Check::at_most("kernel_dx_dxi_antisymmetry", sym_err, 1e-14));
    Ok(())
}

fn abel_check(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) -> Result<()> {
    let grid = TimeGrid::new(0.0, 1.0, 16)?;
    let values: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g = SampledFunction::new(grid, values)?;
    let tol = Tolerance { abs: 1e-15, rel: 1e-14, max_subdivisions: 4000 };
    let mut worst = 0.0_f64;
    for k in 1..grid.len() {
        let t = grid.node(k);
        let approx = abel_integrate(&g, k)?;
        let exact = time_integral(&grid, t, |tau| g.value_at(tau) / (t - tau).sqrt(), &[], tol);
        worst = worst.max((approx - exact).abs() / exact.abs().max(1.0));
    }
    out.push(Check::at_most("abel_piecewise_linear_exactness", worst, 1e-12));
    Ok(())
}

/// Relative error of the front at `n_steps` for the one-phase problem with
/// root `lambda`, started from the similarity profile at `s = 1`.
pub fn neumann_case(lambda: f64, n_steps: usize, exec: Execution) -> Result<f64> {
    let st = std::f64::consts::PI.sqrt() * lambda * (lambda * lambda).exp() * erf(lambda);
    let root = neumann_lambda(st)?;
    let t_virtual = 1.0 / (4.0 * root * root);
    let run = classical_stefan_via_machinery(1.0, 1.0, st, 1.0, 2.0 * t_virtual, n_steps, exec)?;
    Ok(run.relative_error(1.0))
}

fn solution_checks(cfg: &RunConfig, traj: &Trajectory, out: &mut Vec<Check>) -> Result<()> {
    let samples = cfg.checks.psi_samples;
    let mut psi = 0.0_f64;
    let mut separation = f64::INFINITY;
    let mut budget = 0.0_f64;
    for step in &traj.steps {
        let ctx = step.context()?;
        for i in 1..=samples {
            let t = step.sigma * i as f64 / samples as f64;
            psi = psi.max(ctx.psi_residuals(t)?.max_scaled());
        }
        separation = separation.min(step.diagnostics.min_gap / (0.5 * step.setup.gap()));
        let d = step.setup.params.d;
        let x_lo = step.setup.h0_init - 2.0 * (d * step.sigma).sqrt();
        let b = ctx.salt_budget(x_lo, 0.25 * step.sigma, 0.75 * step.sigma)?;
        budget = budget.max(b.relative_error());
    }
    out.push(Check::at_most("psi_residuals", psi, cfg.checks.psi_tolerance));
    out.push(Check::at_least("interface_separation", separation, 1.0));
    out.push(Check::at_most("salt_budget", budget, 0.01));
    Ok(())
}

pub fn validate(path: &Path, opts: &Options) -> Exit {
    let (cfg, dir) = match load(path, opts) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();
    let mut run = || -> Result<()> {
        kernel_checks(&mut rng, &mut checks)?;
        abel_check(&mut rng, &mut checks)?;
        let err = neumann_case(0.25, cfg.checks.benchmark_steps, cfg.solver.execution)?;
        checks.push(Check::at_most("neumann_benchmark", err, 1e-3));
        let traj = advance(&cfg.setup(), &cfg.solver)?;
        solution_checks(&cfg, &traj, &mut checks)
    };
    if let Err(e) = run() {
        return solver_failure(&dir, &e);
    }
    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        opts.say(format!(
            "{} {}: {} (tolerance {})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance
        ));
    }
    let report = ValidationOutput { passed, seed: cfg.seed, checks };
    if let Err(e) = write_json(&dir.join("validation.json"), &report) {
        return solver_failure(&dir, &e);
    }
    if passed {
        Exit::Ok
    } else {
        Exit::CheckFailed
    }
}

#[derive(Serialize)]
struct CompareSummary {
    passed: bool,
    initial_gap: f64,
    max_abs_diff_h0: f64,
    max_abs_diff_hu: f64,
    /// Largest difference over the initial gap.
    max_relative_diff: f64,
    tolerance: f64,
    fd_salt_closure: f64,
    warning: Option<String>,
}

pub fn compare(path: &Path, opts: &Options) -> Exit {
    let (cfg, dir) = match load(path, opts) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let Some(oracle) = cfg.oracle.clone() else {
        eprintln!("error: config error: compare needs an `oracle` section");
        return Exit::Config;
    };
    let setup = cfg.setup();
    let warning = oracle.far_field_warning(&setup, cfg.solver.t_end);
    if let Some(w) = &warning {
        eprintln!("warning: {w}");
    }
    let traj = match advance(&setup, &cfg.solver) {
        Ok(t) => t,
        Err(e) => return solver_failure(&dir, &e),
    };
    let fd = match fd_solve(&setup, &oracle, traj.t_reached()) {
        Ok(f) => f,
        Err(e) => return solver_failure(&dir, &e),
    };
    let mut rows = Vec::new();
    let (mut d0, mut du) = (0.0_f64, 0.0_f64);
    for r in traj.boundary_rows() {
        let (h0_fd, hu_fd) = fd.interfaces_at(r[0]);
        let (e0, eu) = ((r[1] - h0_fd).abs(), (r[2] - hu_fd).abs());
        d0 = d0.max(e0);
        du = du.max(eu);
        rows.push([r[0], r[1], h0_fd, r[2], hu_fd, e0, eu]);
    }
    let header = ["t", "h0_int", "h0_fd", "hu_int", "hu_fd", "abs_diff_h0", "abs_diff_hu"];
    let gap = setup.gap();
    let rel = d0.max(du) / gap;
    let passed = rel <= cfg.checks.compare_tolerance;
    let summary = CompareSummary {
        passed,
        initial_gap: gap,
        max_abs_diff_h0: d0,
        max_abs_diff_hu: du,
        max_relative_diff: rel,
        tolerance: cfg.checks.compare_tolerance,
        fd_salt_closure: fd.salt_closure(),
        warning,
    };
    let written = write_atomic(&dir.join("compare.csv"), csv(header, &rows).as_bytes())
        .and_then(|_| write_json(&dir.join("compare_summary.json"), &summary));
    if let Err(e) = written {
        return solver_failure(&dir, &e);
    }
    opts.say(format!("max relative difference {rel} (tolerance {})", cfg.checks.compare_tolerance));
    if passed {
        Exit::Ok
    } else {
        Exit::CheckFailed
    }
}

#[derive(Serialize)]
struct BenchmarkCase {
    lambda: f64,
    n_steps: Vec<usize>,
    relative_error: Vec<f64>,
    /// Error ratio per halving of the time step.
    convergence_factor: Vec<f64>,
    passed: bool,
}

pub const BENCHMARK_LAMBDAS: [f64; 3] = [0.1, 0.25, 0.5];
pub const BENCHMARK_STEPS: [usize; 4] = [64, 128, 256, 512];

pub fn benchmark(opts: &Options) -> Exit {
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: cannot create output directory {}: {e}", dir.display());
        return Exit::Config;
    }
    let mut cases = Vec::new();
    for &lambda in &BENCHMARK_LAMBDAS {
        let mut errors = Vec::new();
        for &n in &BENCHMARK_STEPS {
            match neumann_case(lambda, n, Execution::default()) {
                Ok(e) => errors.push(e),
                Err(e) => return solver_failure(&dir, &e),
            }
        }
        let factors: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
        let passed = errors.last().is_some_and(|&e| e <= 1e-3) && factors.iter().all(|&f| f >= 1.5);
        opts.say(format!(
            "{} lambda {lambda}: error {:?}, factors {:?}",
            if passed { "PASS" } else { "FAIL" },
            errors,
            factors
        ));
        cases.push(BenchmarkCase {
            lambda,
            n_steps: BENCHMARK_STEPS.to_vec(),
            relative_error: errors,
            convergence_factor: factors,
            passed,
        });
    }
    let passed = cases.iter().all(|c| c.passed);
    if let Err(e) = write_json(&dir.join("benchmark.json"), &cases) {
        return solver_failure(&dir, &e);
    }
    if passed {
        Exit::Ok
    } else {
        Exit::CheckFailed
    }
}
