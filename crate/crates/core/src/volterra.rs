//! The fixed-point map `v = Pv` for the four boundary traces, its Picard
//! iteration on `C(σ, M)`, the step-length rule and time extension by
//! prolongation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::fields::{interface_traces, FieldContext, InterfaceTraces};
use crate::kernels::{EvalPoint, FactoredBoundaryKernel, GreenKernel, KernelVariant};
use crate::model::{validate_setup, BoundaryPath, PhysicalParams, ProblemSetup, Profile, VState};
use crate::quad::{gaussian_convolve, running_integral, AbelWeights, SampledFunction, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Ball radius `M`; derived from `‖P(0)‖` when absent.
    pub m_bound: Option<f64>,
    pub sigma_cap: f64,
    /// Extra halvings applied to the step from [`choose_sigma`].
    pub sigma_halvings: u32,
    /// Time steps per prolongation step.
    pub n_steps: usize,
    pub picard_tol: f64,
    pub max_picard_iters: usize,
    pub contraction_guard: f64,
    pub t_end: f64,
    /// Pinch-off fires once `hu − h0` drops below this fraction of the initial gap.
    pub pinch_off_fraction: f64,
    pub max_steps: usize,
    /// σ-halvings and M-doublings allowed within one step.
    pub max_retries: usize,
    /// Width `W` of the reconstructed ocean profiles; derived when absent.
    pub profile_width: Option<f64>,
    pub ocean_nodes: usize,
    pub ice_nodes: usize,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            m_bound: None,
            sigma_cap: f64::INFINITY,
            sigma_halvings: 0,
            n_steps: 128,
            picard_tol: 1e-10,
            max_picard_iters: 200,
            contraction_guard: 0.9,
            t_end: 1.0,
            pinch_off_fraction: 1e-6,
            max_steps: 10_000,
            max_retries: 40,
            profile_width: None,
            ocean_nodes: 200,
            ice_nodes: 64,
            execution: Execution::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if let Some(m) = self.m_bound {
            if !(m.is_finite() && m > 0.0) {
                return bad(format!("M must be positive, got {m}"));
            }
        }
        if !(self.sigma_cap > 0.0) {
            return bad(format!("sigma_cap must be positive, got {}", self.sigma_cap));
        }
        if self.n_steps < 8 {
            return bad(format!("n_steps must be at least 8, got {}", self.n_steps));
        }
        if !(self.picard_tol.is_finite() && self.picard_tol > 0.0) {
            return bad(format!("picard_tol must be positive, got {}", self.picard_tol));
        }
        if self.max_picard_iters == 0 {
            return bad("max_picard_iters must be at least 1".into());
        }
        if !(self.contraction_guard > 0.0 && self.contraction_guard < 1.0) {
            return bad(format!("contraction_guard must lie in (0, 1), got {}", self.contraction_guard));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.pinch_off_fraction > 0.0 && self.pinch_off_fraction < 1.0) {
            return bad(format!("pinch_off_fraction must lie in (0, 1), got {}", self.pinch_off_fraction));
        }
        if let Some(w) = self.profile_width {
            if !(w.is_finite() && w > 0.0) {
                return bad(format!("profile_width must be positive, got {w}"));
            }
        }
        if self.ocean_nodes < 8 || self.ice_nodes < 8 {
            return bad("reconstruction grids need at least 8 nodes".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardDiagnostics {
    pub iterates: usize,
    /// `‖v^(k+1) − v^(k)‖` per iteration.
    pub residual_history: Vec<f64>,
    /// `residual[k+1] / residual[k]` whenever `residual[k] > 0`.
    pub ratio_history: Vec<f64>,
    pub sigma_used: f64,
    pub m_bound: f64,
    /// Smallest `hu − h0` seen over every iterate's boundaries.
    pub min_gap: f64,
    pub final_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PicardStart {
    #[default]
    Zero,
    /// `v^(0) = P(0)`.
    POfZero,
}

/// Interfaces as running integrals of the traces.
pub fn boundaries_from_v(
    v: &VState,
    params: &PhysicalParams,
    h0_start: f64,
    hu_start: f64,
) -> BoundaryPath {
    let grid = *v.grid();
    let (li, lo) = (params.lambda_i_tilde, params.lambda_o_tilde);
    let i1 = running_integral(&v.components[1]);
    let i2 = running_integral(&v.components[2]);
    let i3 = running_integral(&v.components[3]);
    let h0: Vec<f64> = i1
        .values()
        .iter()
        .zip(i2.values())
        .map(|(a, b)| h0_start + li * b - lo * a)
        .collect();
    let hu: Vec<f64> = i3.values().iter().map(|c| hu_start + li * c).collect();
    let dh0: Vec<f64> = v.v(1).iter().zip(v.v(2)).map(|(a, b)| li * b - lo * a).collect();
    let dhu: Vec<f64> = v.v(3).iter().map(|c| li * c).collect();
    BoundaryPath {
        h0: SampledFunction::from_raw(grid, h0),
        hu: SampledFunction::from_raw(grid, hu),
        dh0: SampledFunction::from_raw(grid, dh0),
        dhu: SampledFunction::from_raw(grid, dhu),
    }
}

/// `P` frozen to one setup and grid; reusable across iterations.
pub struct Operator<'a> {
    setup: &'a ProblemSetup,
    grid: TimeGrid,
    g1: GreenKernel,
    g2: GreenKernel,
    g3: GreenKernel,
    weights: AbelWeights,
    exec: Execution,
}

impl<'a> Operator<'a> {
    pub fn new(setup: &'a ProblemSetup, grid: TimeGrid, exec: Execution) -> Result<Self> {
        let p = &setup.params;
        Ok(Self {
            setup,
            grid,
            g1: GreenKernel::new(p.d)?,
            g2: GreenKernel::new(p.d_o)?,
            g3: GreenKernel::new(p.d_i)?,
            weights: AbelWeights::new(&grid),
            exec,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn apply(&self, v: &VState) -> Result<VState> {
        if *v.grid() != self.grid {
            return Err(Error::InvalidArgument("iterate grid differs from operator grid".into()));
        }
        let s = self.setup;
        let p = &s.params;
        let paths = boundaries_from_v(v, p, s.h0_init, s.hu_init);
        let lower = paths.lower();
        let upper = paths.upper();
        let tbar = s.interface_temperature();
        let i0 = running_integral(&v.components[0]);
        let bracket: Vec<f64> = (0..self.grid.len())
            .map(|j| tbar + i0.values()[j] + p.n0 * v.v(0)[j])
            .collect();

        use EvalPoint::{OnSource, Path};
        use KernelVariant::{Dx, Value};
        let fk = FactoredBoundaryKernel::new;
        let k1_dx = fk(self.g1, lower, OnSource, Dx);
        let k2_dx = fk(self.g2, lower, OnSource, Dx);
        let k2_val = fk(self.g2, lower, OnSource, Value);
        let k3_dx_u_at_0 = fk(self.g3, upper, Path(lower), Dx);
        let k3_dx_0_at_0 = fk(self.g3, lower, OnSource, Dx);
        let k3_val_0_at_0 = fk(self.g3, lower, OnSource, Value);
        let k3_dx_u_at_u = fk(self.g3, upper, OnSource, Dx);
        let k3_dx_0_at_u = fk(self.g3, lower, Path(upper), Dx);
        let k3_val_0_at_u = fk(self.g3, lower, Path(upper), Value);

        let (h0i, hui) = (s.h0_init, s.hu_init);
        let [v0, v1, v2, v3] = [v.v(0), v.v(1), v.v(2), v.v(3)];
        let w = &self.weights;

        let node = |k: usize| -> Result<[f64; 4]> {
            if k == 0 {
                return Ok([
                    -(tbar + p.m0 * s.s_init.value(h0i)) / p.n0,
                    s.t_ocean_init.slope(h0i),
                    s.t_ice_init.slope(h0i),
                    s.t_ice_init.slope(hui),
                ]);
            }
            let t = self.grid.elapsed(k);
            let x0 = lower.pos[k];
            let xu = upper.pos[k];
            let abel = |kern: &FactoredBoundaryKernel, dens: &[f64]| {
                w.integrate(k, |j| kern.at_nodes(k, j) * dens[j])
            };
            let salt0 = gaussian_convolve(&self.g1, x0, t, |xi| s.s_init.value(xi), None, Some(h0i))?;
            let ocean0 =
                gaussian_convolve(&self.g2, x0, t, |xi| s.t_ocean_init.slope(xi), None, Some(h0i))?;
            let ice_lo = |x| {
                gaussian_convolve(&self.g3, x, t, |xi| s.t_ice_init.slope(xi), Some(h0i), Some(hui))
            };

            let p0 = -(tbar + i0.values()[k]) / p.n0 - 2.0 * p.m0 / p.n0 * salt0
                + 2.0 * p.d / p.n0 * abel(&k1_dx, &bracket);
            let p1 = 2.0 * p.d_o * abel(&k2_dx, v1) + 2.0 * abel(&k2_val, v0) + 2.0 * ocean0;
            let p2 = 2.0 * p.d_i * abel(&k3_dx_u_at_0, v3) - 2.0 * p.d_i * abel(&k3_dx_0_at_0, v2)
                - 2.0 * abel(&k3_val_0_at_0, v0)
                + 2.0 * ice_lo(x0)?;
            let p3 = 2.0 * p.d_i * abel(&k3_dx_u_at_u, v3) - 2.0 * p.d_i * abel(&k3_dx_0_at_u, v2)
                - 2.0 * abel(&k3_val_0_at_u, v0)
                + 2.0 * ice_lo(xu)?;
            Ok([p0, p1, p2, p3])
        };

        let rows = map_indices(self.exec, self.grid.len(), node);
        let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(rows.len()));
        for (k, row) in rows.into_iter().enumerate() {
            let row = row?;
            for (c, value) in row.into_iter().enumerate() {
                if !value.is_finite() {
                    return Err(Error::Diverged { component: c, node: k });
                }
                out[c].push(value);
            }
        }
        let [a, b, c, d] = out;
        Ok(VState {
            components: [
                SampledFunction::from_raw(self.grid, a),
                SampledFunction::from_raw(self.grid, b),
                SampledFunction::from_raw(self.grid, c),
                SampledFunction::from_raw(self.grid, d),
            ],
        })
    }
}

/// One application of `P`; boundaries are built from `v` itself.
pub fn apply_p(v: &VState, setup: &ProblemSetup, exec: Execution) -> Result<VState> {
    Operator::new(setup, *v.grid(), exec)?.apply(v)
}

/// `min(σ_cap, (hu − h0) / (2(λ̃_I + λ̃_O) M))`.
pub fn choose_sigma(setup: &ProblemSetup, cfg: &SolverConfig, m_bound: f64) -> Result<f64> {
    let gap = setup.gap();
    if !(gap > 0.0) {
        return Err(Error::PinchOff { t: 0.0, gap });
    }
    if !(m_bound > 0.0) {
        return Err(Error::InvalidArgument(format!("M must be positive, got {m_bound}")));
    }
    let bound = gap / (2.0 * setup.params.lambda_sum() * m_bound);
    Ok(cfg.sigma_cap.min(bound))
}

/// `M` from the config, or `2‖P(0)‖` on `[0, min(σ_cap, horizon)]`.
pub fn resolve_bound(setup: &ProblemSetup, cfg: &SolverConfig, horizon: f64) -> Result<f64> {
    if let Some(m) = cfg.m_bound {
        return Ok(m);
    }
    let probe = TimeGrid::new(0.0, cfg.sigma_cap.min(horizon), cfg.n_steps)?;
    let p0 = apply_p(&VState::zeros(probe), setup, cfg.execution)?;
    let m = 2.0 * p0.sup_norm();
    Ok(if m > 0.0 { m } else { 1.0 })
}

/// Picard iteration on `[0, σ]` with `M` resolved from the config.
pub fn picard_solve(
    setup: &ProblemSetup,
    cfg: &SolverConfig,
    sigma: f64,
) -> Result<(VState, PicardDiagnostics)> {
    let m = resolve_bound(setup, cfg, sigma)?;
    let grid = TimeGrid::new(0.0, sigma, cfg.n_steps)?;
    picard_iterate(setup, cfg, grid, m, PicardStart::Zero)
}

pub fn picard_iterate(
    setup: &ProblemSetup,
    cfg: &SolverConfig,
    grid: TimeGrid,
    m_bound: f64,
    start: PicardStart,
) -> Result<(VState, PicardDiagnostics)> {
    let op = Operator::new(setup, grid, cfg.execution)?;
    let v0 = match start {
        PicardStart::Zero => VState::zeros(grid),
        PicardStart::POfZero => op.apply(&VState::zeros(grid))?,
    };
    iterate_with(&op, setup, cfg, m_bound, v0)
}

/// Picard iteration from an arbitrary `v0` on its own grid.
pub fn picard_iterate_from(
    setup: &ProblemSetup,
    cfg: &SolverConfig,
    m_bound: f64,
    v0: VState,
) -> Result<(VState, PicardDiagnostics)> {
    let op = Operator::new(setup, *v0.grid(), cfg.execution)?;
    iterate_with(&op, setup, cfg, m_bound, v0)
}

fn iterate_with(
    op: &Operator,
    setup: &ProblemSetup,
    cfg: &SolverConfig,
    m_bound: f64,
    mut v: VState,
) -> Result<(VState, PicardDiagnostics)> {
    let grid = *v.grid();
    let p = &setup.params;
    let gap_of = |v: &VState| boundaries_from_v(v, p, setup.h0_init, setup.hu_init).min_gap();
    let mut diag = PicardDiagnostics {
        iterates: 0,
        residual_history: Vec::new(),
        ratio_history: Vec::new(),
        sigma_used: grid.t_end() - grid.t_start(),
        m_bound,
        min_gap: gap_of(&v),
        final_norm: v.sup_norm(),
    };
    let mut strikes = 0;
    for _ in 0..cfg.max_picard_iters {
        let next = op.apply(&v)?;
        let residual = next.distance(&v);
        let norm = next.sup_norm();
        diag.iterates += 1;
        diag.min_gap = diag.min_gap.min(gap_of(&next));
        diag.final_norm = norm;
        if let Some(&prev) = diag.residual_history.last() {
            if prev > 0.0 {
                let ratio = residual / prev;
                diag.ratio_history.push(ratio);
                if ratio > cfg.contraction_guard {
                    strikes += 1;
                    if strikes >= 2 {
                        return Err(Error::ContractionLost { ratio, guard: cfg.contraction_guard });
                    }
                } else {
                    strikes = 0;
                }
            }
        }
        diag.residual_history.push(residual);
        if norm > m_bound {
            return Err(Error::BallEscape { norm, bound: m_bound });
        }
        v = next;
        if residual <= cfg.picard_tol * (1.0 + norm) {
            return Ok((v, diag));
        }
    }
    Err(Error::NonConvergence {
        iterations: diag.iterates,
        residual: diag.residual_history.last().copied().unwrap_or(f64::NAN),
    })
}

/// One accepted prolongation step on local time `[0, σ]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    /// Global time at the start of the step.
    pub t_start: f64,
    pub sigma: f64,
    pub m_bound: f64,
    pub sigma_halvings: usize,
    pub m_doublings: usize,
    /// Initial data the step started from.
    pub setup: ProblemSetup,
    pub v: VState,
    pub paths: BoundaryPath,
    pub traces: InterfaceTraces,
    pub diagnostics: PicardDiagnostics,
}

impl StepRecord {
    pub fn t_end(&self) -> f64 {
        self.t_start + self.sigma
    }

    pub fn context(&self) -> Result<FieldContext<'_>> {
        FieldContext::new(&self.setup, &self.v, &self.paths, &self.traces)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchOffEvent {
    pub t: f64,
    pub gap: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: ProblemSetup,
    pub steps: Vec<StepRecord>,
    pub pinch_off: Option<PinchOffEvent>,
    pub profile_width: f64,
}

impl Trajectory {
    pub fn t_reached(&self) -> f64 {
        self.steps.last().map_or(0.0, StepRecord::t_end)
    }

    /// Step whose interval `(t_start, t_end]` holds global time `t`.
    pub fn step_at(&self, t: f64) -> Option<&StepRecord> {
        let slack = 1e-12 * self.t_reached().max(1.0);
        self.steps
            .iter()
            .find(|s| t > s.t_start && t <= s.t_end() + slack)
    }

    /// `(t, h0, hu, dh0, dhu, T0, S0)` rows over all steps; joint nodes appear once,
    /// taken from the step that ends there.
    pub fn boundary_rows(&self) -> Vec<[f64; 7]> {
        let mut rows = Vec::new();
        for (i, s) in self.steps.iter().enumerate() {
            let grid = s.paths.grid();
            let first = if i == 0 { 0 } else { 1 };
            for k in first..grid.len() {
                rows.push([
                    s.t_start + grid.elapsed(k),
                    s.paths.h0.values()[k],
                    s.paths.hu.values()[k],
                    s.paths.dh0.values()[k],
                    s.paths.dhu.values()[k],
                    s.traces.t0.values()[k],
                    s.traces.s0.values()[k],
                ]);
            }
        }
        rows
    }

    /// Largest position jump between consecutive steps.
    pub fn joint_mismatch(&self) -> f64 {
        self.steps
            .windows(2)
            .map(|w| {
                let a = &w[0].paths;
                let n = a.grid().n_steps();
                let d0 = (a.h0.values()[n] - w[1].paths.h0.values()[0]).abs();
                let du = (a.hu.values()[n] - w[1].paths.hu.values()[0]).abs();
                d0.max(du)
            })
            .fold(0.0, f64::max)
    }
}

/// Width of the reconstructed ocean profiles.
pub fn profile_width(initial: &ProblemSetup, cfg: &SolverConfig) -> f64 {
    if let Some(w) = cfg.profile_width {
        return w;
    }
    let p = &initial.params;
    let hint = [&initial.t_ocean_init, &initial.s_init]
        .iter()
        .filter_map(|q| q.hint_width())
        .fold(0.0, f64::max);
    hint.max(12.0 * (p.d.max(p.d_o) * cfg.t_end).sqrt())
}

/// Solve on one step, shrinking σ on lost contraction and growing `M` on escape.
fn solve_step(
    setup: &ProblemSetup,
    cfg: &SolverConfig,
    remaining: f64,
) -> Result<(VState, PicardDiagnostics, f64, usize, usize)> {
    let mut m = resolve_bound(setup, cfg, remaining)?;
    let scale = 0.5f64.powi(cfg.sigma_halvings as i32);
    let mut sigma = choose_sigma(setup, cfg, m)? * scale;
    let (mut halvings, mut doublings) = (0, 0);
    loop {
        let sigma_try = sigma.min(remaining);
        let grid = TimeGrid::new(0.0, sigma_try, cfg.n_steps)?;
        match picard_iterate(setup, cfg, grid, m, PicardStart::Zero) {
            Ok((v, diag)) => return Ok((v, diag, m, halvings, doublings)),
            Err(Error::ContractionLost { .. } | Error::NonConvergence { .. })
                if halvings + doublings < cfg.max_retries =>
            {
                sigma = 0.5 * sigma_try;
                halvings += 1;
            }
            Err(Error::BallEscape { .. }) if halvings + doublings < cfg.max_retries => {
                m *= 2.0;
                sigma = sigma.min(choose_sigma(setup, cfg, m)? * scale);
                doublings += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Geometric clustering towards `s = 1` on `[0, 1]`.
fn graded(n: usize, beta: f64) -> Vec<f64> {
    let denom = beta.exp_m1();
    (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            1.0 - (beta * (1.0 - s)).exp_m1() / denom
        })
        .collect()
}

/// Initial data at the end of `step` for the next one.
pub fn prolong(step: &StepRecord, width: f64, cfg: &SolverConfig) -> Result<ProblemSetup> {
    let ctx = step.context()?;
    let grid = *step.paths.grid();
    let n = grid.n_steps();
    let t = grid.elapsed(n);
    let h0 = step.paths.h0.values()[n];
    let hu = step.paths.hu.values()[n];
    let t0 = step.traces.t0.values()[n];
    let s0 = step.traces.s0.values()[n];
    let exec = cfg.execution;

    let ys = graded(cfg.ocean_nodes, 8.0);
    let xo: Vec<f64> = ys.iter().map(|y| h0 - width * (1.0 - y)).collect();
    let no = xo.len() - 1;
    let ocean = map_indices(exec, no, |i| -> Result<[f64; 3]> {
        let x = xo[i];
        Ok([ctx.temperature(x, t)?, ctx.temperature_gradient(x, t)?, ctx.salinity(x, t)?])
    });
    let mut to = Vec::with_capacity(no + 1);
    let mut tox = Vec::with_capacity(no + 1);
    let mut so = Vec::with_capacity(no + 1);
    for row in ocean {
        let [a, b, c] = row?;
        to.push(a);
        tox.push(b);
        so.push(c);
    }
    to.push(t0);
    tox.push(step.v.v(1)[n]);
    so.push(s0);

    let ni = cfg.ice_nodes;
    let gap = hu - h0;
    let xi: Vec<f64> = (0..=ni)
        .map(|j| h0 + gap * 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / ni as f64).cos()))
        .collect();
    let ice = map_indices(exec, ni - 1, |j| -> Result<[f64; 2]> {
        let x = xi[j + 1];
        Ok([ctx.temperature(x, t)?, ctx.temperature_gradient(x, t)?])
    });
    let mut ti = vec![t0];
    let mut tix = vec![step.v.v(2)[n]];
    for row in ice {
        let [a, b] = row?;
        ti.push(a);
        tix.push(b);
    }
    ti.push(0.0);
    tix.push(step.v.v(3)[n]);

    let next = ProblemSetup {
        params: step.setup.params,
        h0_init: h0,
        hu_init: hu,
        t_ocean_init: Profile::table(xo.clone(), to, Some(tox))?,
        t_ice_init: Profile::table(xi, ti, Some(tix))?,
        s_init: Profile::table(xo, so, None)?,
    };
    let report = validate_setup(&next);
    if !report.is_ok() {
        return Err(Error::Prolongation(report));
    }
    Ok(next)
}

/// Local solve plus repeated prolongation until `t_end` or pinch-off.
pub fn advance(setup: &ProblemSetup, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    setup.ensure_valid()?;
    let width = profile_width(setup, cfg);
    let gap0 = setup.gap();
    let threshold = cfg.pinch_off_fraction * gap0;
    let mut traj = Trajectory {
        initial: setup.clone(),
        steps: Vec::new(),
        pinch_off: None,
        profile_width: width,
    };
    let mut current = setup.clone();
    let mut t = 0.0;
    let end_slack = 1e-12 * cfg.t_end;
    while t < cfg.t_end - end_slack {
        if traj.steps.len() >= cfg.max_steps {
            return Err(Error::StepBudget(cfg.max_steps));
        }
        let (v, diagnostics, m, halvings, doublings) = solve_step(&current, cfg, cfg.t_end - t)?;
        let p = &current.params;
        let paths = boundaries_from_v(&v, p, current.h0_init, current.hu_init);
        let traces = interface_traces(&v, &current)?;
        let grid = *v.grid();
        let sigma = grid.t_end() - grid.t_start();
        let pinch = (0..grid.len()).find_map(|k| {
            let g = paths.hu.values()[k] - paths.h0.values()[k];
            (g < threshold).then(|| PinchOffEvent { t: t + grid.elapsed(k), gap: g, threshold })
        });
        let record = StepRecord {
            t_start: t,
            sigma,
            m_bound: m,
            sigma_halvings: halvings,
            m_doublings: doublings,
            setup: current.clone(),
            v,
            paths,
            traces,
            diagnostics,
        };
        t = if (cfg.t_end - (t + sigma)).abs() <= end_slack { cfg.t_end } else { t + sigma };
        if pinch.is_some() {
            traj.steps.push(record);
            traj.pinch_off = pinch;
            break;
        }
        if t < cfg.t_end - end_slack {
            current = prolong(&record, width, cfg)?;
        }
        traj.steps.push(record);
    }
    Ok(traj)
}

/// Solves the lower-triangular product-trapezoid system for
/// `ψ(t) = f(t) + ∫₀ᵗ K(t,τ) ψ(τ) dτ`, `K = g/√(t−τ)` given through `g(k, j)`.
pub fn solve_second_kind(
    grid: &TimeGrid,
    g: impl Fn(usize, usize) -> f64,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    if rhs.len() != grid.len() {
        return Err(Error::InvalidArgument("right-hand side length mismatch".into()));
    }
    let w = AbelWeights::new(grid);
    let mut psi = Vec::with_capacity(grid.len());
    psi.push(rhs[0]);
    for k in 1..grid.len() {
        let mut acc = rhs[k];
        for (j, &pj) in psi.iter().enumerate() {
            acc += w.weight(k, j) * g(k, j) * pj;
        }
        let diag = 1.0 - w.weight(k, k) * g(k, k);
        if diag == 0.0 || !diag.is_finite() {
            return Err(Error::Domain(format!("singular diagonal at node {k}")));
        }
        psi.push(acc / diag);
    }
    Ok(psi)
}

/// Solution of `Ψ(t) = −2∫₀ᵗ G_{1x}(h0(t),t;h0(τ),τ) Ψ(τ) dτ` on the path's grid.
pub fn homogeneous_null_solution(paths: &BoundaryPath, params: &PhysicalParams) -> Result<Vec<f64>> {
    let g1 = GreenKernel::new(params.d)?;
    let k = FactoredBoundaryKernel::new(g1, paths.lower(), EvalPoint::OnSource, KernelVariant::Dx);
    let zeros = vec![0.0; paths.grid().len()];
    solve_second_kind(paths.grid(), |a, b| -2.0 * k.at_nodes(a, b), &zeros)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhysicalParams {
        PhysicalParams {
            lambda_i_tilde: 1e-4,
            lambda_o_tilde: 2e-4,
            d_i: 1e-6,
            d_o: 1e-6,
            d: 1e-7,
            m0: 0.054,
            n0: 100.0,
            raw: None,
        }
    }

    fn zero_setup() -> ProblemSetup {
        ProblemSetup {
            params: params(),
            h0_init: 0.0,
            hu_init: 0.05,
            t_ocean_init: Profile::constant(0.0),
            t_ice_init: Profile::constant(0.0),
            s_init: Profile::constant(0.0),
        }
    }

    #[test]
    fn zero_v_freezes_boundaries() {
        let grid = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let b = boundaries_from_v(&VState::zeros(grid), &params(), 0.1, 0.2);
        assert!(b.h0.values().iter().all(|&h| h == 0.1));
        assert!(b.hu.values().iter().all(|&h| h == 0.2));
    }

    #[test]
    fn constant_v2_moves_h0_linearly() {
        let grid = TimeGrid::new(0.0, 2.0, 10).unwrap();
        let mut v = VState::zeros(grid);
        v.components[2] = SampledFunction::new(grid, vec![3.0; 11]).unwrap();
        let b = boundaries_from_v(&v, &params(), 0.0, 1.0);
        for (k, t) in grid.nodes().into_iter().enumerate() {
            assert!((b.h0.values()[k] - 1e-4 * 3.0 * t).abs() < 1e-15);
            assert!((b.dh0.values()[k] - 3e-4).abs() < 1e-18);
        }
        assert!(b.hu.values().iter().all(|&h| h == 1.0));
    }

    #[test]
    fn sigma_formula() {
        let cfg = SolverConfig { sigma_cap: 100.0, ..SolverConfig::default() };
        let mut s = zero_setup();
        s.params.lambda_i_tilde = 5e-5;
        s.params.lambda_o_tilde = 5e-5;
        assert!((choose_sigma(&s, &cfg, 50.0).unwrap() - 5.0).abs() < 1e-12);
        let capped = SolverConfig { sigma_cap: 1.0, ..cfg.clone() };
        assert_eq!(choose_sigma(&s, &capped, 50.0).unwrap(), 1.0);
        s.hu_init = s.h0_init;
        assert!(matches!(choose_sigma(&s, &cfg, 50.0), Err(Error::PinchOff { .. })));
    }

    #[test]
    fn zero_problem_is_a_fixed_point() {
        let cfg = SolverConfig { t_end: 10.0, sigma_cap: 5.0, n_steps: 16, ..SolverConfig::default() };
        let (v, d) = picard_solve(&zero_setup(), &cfg, 5.0).unwrap();
        assert_eq!(d.iterates, 1);
        assert_eq!(v.sup_norm(), 0.0);
    }

    #[test]
    fn graded_grid_ends() {
        let g = graded(10, 8.0);
        assert!(g[0].abs() < 1e-15 && (g[10] - 1.0).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(g[10] - g[9] < g[1] - g[0]);
    }

    #[test]
    fn second_kind_solver_matches_closed_form() {
        // ψ = 1 + ∫ ψ/√(t−τ) with constant kernel factor 0: ψ ≡ 1.
        let grid = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let psi = solve_second_kind(&grid, |_, _| 0.0, &vec![1.0; 17]).unwrap();
        assert!(psi.iter().all(|&p| p == 1.0));
    }
}
