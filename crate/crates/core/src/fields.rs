//! Temperature and salinity fields rebuilt from solved traces, interface
//! traces `T_0`, `S_0`, and the consistency residuals `Ψ_1..Ψ_4`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::kernels::{heat_dx, heat_value, CurveRef, GreenKernel, KernelVariant};
use crate::model::{freezing_salinity, BoundaryPath, ProblemSetup, VState};
use crate::quad::{
    gaussian_convolve, integrate_adaptive, running_integral, time_integral, SampledFunction,
    TimeGrid, Tolerance,
};
use crate::volterra::Trajectory;

/// `T_0(t) = T^0(h_0^0) + ∫v_0` and `S_0 = −(T_0 + n_0 v_0)/m_0` at the nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceTraces {
    pub t0: SampledFunction,
    pub s0: SampledFunction,
}

pub fn interface_traces(v: &VState, setup: &ProblemSetup) -> Result<InterfaceTraces> {
    let grid = *v.grid();
    let tbar = setup.interface_temperature();
    let i0 = running_integral(&v.components[0]);
    let t0: Vec<f64> = i0.values().iter().map(|i| tbar + i).collect();
    let s0 = t0
        .iter()
        .zip(v.v(0))
        .map(|(&a, &b)| freezing_salinity(a, b, &setup.params))
        .collect::<Result<Vec<_>>>()?;
    Ok(InterfaceTraces {
        t0: SampledFunction::new(grid, t0)?,
        s0: SampledFunction::new(grid, s0)?,
    })
}

/// Everything the representation formulas need on one step, in local time.
#[derive(Debug, Clone, Copy)]
pub struct FieldContext<'a> {
    pub setup: &'a ProblemSetup,
    pub v: &'a VState,
    pub paths: &'a BoundaryPath,
    pub traces: &'a InterfaceTraces,
    pub tol: Tolerance,
    g1: GreenKernel,
    g2: GreenKernel,
    g3: GreenKernel,
}

impl<'a> FieldContext<'a> {
    pub fn new(
        setup: &'a ProblemSetup,
        v: &'a VState,
        paths: &'a BoundaryPath,
        traces: &'a InterfaceTraces,
    ) -> Result<Self> {
        let grid = v.grid();
        if paths.grid() != grid || traces.t0.grid() != grid {
            return Err(Error::InvalidArgument("field inputs live on different grids".into()));
        }
        let p = &setup.params;
        Ok(Self {
            setup,
            v,
            paths,
            traces,
            tol: Tolerance::default(),
            g1: GreenKernel::new(p.d)?,
            g2: GreenKernel::new(p.d_o)?,
            g3: GreenKernel::new(p.d_i)?,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.v.grid()
    }

    /// Local time at the grid end.
    pub fn span(&self) -> f64 {
        self.grid().t_end() - self.grid().t_start()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t > 0.0 && self.grid().contains(self.grid().t_start() + t)) {
            return Err(Error::Domain(format!("time {t} outside (0, {}]", self.span())));
        }
        Ok(())
    }

    pub fn h0(&self, t: f64) -> f64 {
        self.paths.lower().position(t)
    }

    pub fn hu(&self, t: f64) -> f64 {
        self.paths.upper().position(t)
    }

    /// `T_0` between nodes, exact for piecewise-linear `v_0`.
    pub fn t0_at(&self, tau: f64) -> f64 {
        let (j, s) = self.grid().locate(tau);
        let v0 = self.v.v(0);
        let dt = self.grid().dt();
        self.traces.t0.values()[j] + v0[j] * s + (v0[j + 1] - v0[j]) * s * s / (2.0 * dt)
    }

    pub fn s0_at(&self, tau: f64) -> f64 {
        let p = &self.setup.params;
        -(self.t0_at(tau) + p.n0 * self.v.components[0].value_at(tau)) / p.m0
    }

    fn s0_rate(&self, tau: f64) -> f64 {
        let p = &self.setup.params;
        let v0 = &self.v.components[0];
        -(v0.value_at(tau) + p.n0 * v0.slope_at(tau)) / p.m0
    }

    fn vi(&self, i: usize, tau: f64) -> f64 {
        self.v.components[i].value_at(tau)
    }

    /// `∫₀ᵗ K(x,t;h(τ),τ) ρ(τ) dτ` for `K = G` or `G_x`.
    fn boundary_integral(
        &self,
        kernel: &GreenKernel,
        curve: CurveRef<'_>,
        variant: KernelVariant,
        x: f64,
        t: f64,
        density: impl Fn(f64) -> f64,
    ) -> f64 {
        let kappa = kernel.kappa();
        let d = (x - curve.position(t)).abs();
        let u_star = d / (2.0 * kappa.sqrt());
        let hints = [0.25 * u_star, 0.5 * u_star, u_star, 2.0 * u_star, 4.0 * u_star];
        let f = |tau: f64| {
            let sep = x - curve.position(tau);
            let dt = t - tau;
            let k = match variant {
                KernelVariant::Value => heat_value(kappa, sep, dt),
                KernelVariant::Dx => heat_dx(kappa, sep, dt),
            };
            if k == 0.0 {
                0.0
            } else {
                k * density(tau)
            }
        };
        time_integral(self.grid(), t, f, &hints, self.tol)
    }

    /// Salinity below the interface, `x < h_0(t)`.
    pub fn salinity(&self, x: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if !(x < self.h0(t)) {
            return Err(Error::Domain(format!("salinity needs x < h0(t) = {}, got {x}", self.h0(t))));
        }
        let s = self.setup;
        let lower = self.paths.lower();
        let layer = self.boundary_integral(&self.g1, lower, KernelVariant::Dx, x, t, |tau| {
            self.s0_at(tau)
        });
        let initial = gaussian_convolve(&self.g1, x, t, |xi| s.s_init.value(xi), None, Some(s.h0_init))?;
        Ok(s.params.d * layer + initial)
    }

    /// `S_x`, written after integration by parts so no kernel is hypersingular.
    pub fn salinity_gradient(&self, x: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if !(x < self.h0(t)) {
            return Err(Error::Domain(format!("salinity needs x < h0(t) = {}, got {x}", self.h0(t))));
        }
        let s = self.setup;
        let lower = self.paths.lower();
        let a = self.boundary_integral(&self.g1, lower, KernelVariant::Value, x, t, |tau| {
            self.s0_rate(tau)
        });
        let b = self.boundary_integral(&self.g1, lower, KernelVariant::Dx, x, t, |tau| {
            lower.velocity(tau) * self.s0_at(tau)
        });
        let c = gaussian_convolve(&self.g1, x, t, |xi| s.s_init.slope(xi), None, Some(s.h0_init))?;
        let corner = heat_value(s.params.d, x - s.h0_init, t)
            * (self.s0_at(0.0) - s.s_init.value(s.h0_init));
        Ok(a - b + c + corner)
    }

    /// `T` in the ocean and the ice; `T_0(t)` on `h_0(t)`.
    pub fn temperature(&self, x: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let (h0, hu) = (self.h0(t), self.hu(t));
        let s = self.setup;
        let p = &s.params;
        let lower = self.paths.lower();
        if x == h0 {
            return Ok(self.t0_at(t));
        }
        if x < h0 {
            let a = self.boundary_integral(&self.g2, lower, KernelVariant::Value, x, t, |tau| {
                p.d_o * self.vi(1, tau) + self.t0_at(tau) * lower.velocity(tau)
            });
            let b = self.boundary_integral(&self.g2, lower, KernelVariant::Dx, x, t, |tau| {
                self.t0_at(tau)
            });
            let c = gaussian_convolve(&self.g2, x, t, |xi| s.t_ocean_init.value(xi), None, Some(s.h0_init))?;
            return Ok(a + p.d_o * b + c);
        }
        if x < hu {
            let upper = self.paths.upper();
            let a = self.boundary_integral(&self.g3, upper, KernelVariant::Value, x, t, |tau| {
                self.vi(3, tau)
            });
            let b = self.boundary_integral(&self.g3, lower, KernelVariant::Value, x, t, |tau| {
                p.d_i * self.vi(2, tau) + self.t0_at(tau) * lower.velocity(tau)
            });
            let c = self.boundary_integral(&self.g3, lower, KernelVariant::Dx, x, t, |tau| {
                self.t0_at(tau)
            });
            let d = gaussian_convolve(
                &self.g3,
                x,
                t,
                |xi| s.t_ice_init.value(xi),
                Some(s.h0_init),
                Some(s.hu_init),
            )?;
            return Ok(p.d_i * a - b - p.d_i * c + d);
        }
        Err(Error::Domain(format!("temperature needs x < hu(t) = {hu}, got {x}")))
    }

    /// `T_x` in the ocean and the ice.
    pub fn temperature_gradient(&self, x: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let (h0, hu) = (self.h0(t), self.hu(t));
        let s = self.setup;
        let p = &s.params;
        let lower = self.paths.lower();
        if x < h0 {
            let a = self.boundary_integral(&self.g2, lower, KernelVariant::Dx, x, t, |tau| {
                self.vi(1, tau)
            });
            let b = self.boundary_integral(&self.g2, lower, KernelVariant::Value, x, t, |tau| {
                self.vi(0, tau)
            });
            let c = gaussian_convolve(&self.g2, x, t, |xi| s.t_ocean_init.slope(xi), None, Some(s.h0_init))?;
            return Ok(p.d_o * a + b + c);
        }
        if x > h0 && x < hu {
            let upper = self.paths.upper();
            let a = self.boundary_integral(&self.g3, upper, KernelVariant::Dx, x, t, |tau| {
                self.vi(3, tau)
            });
            let b = self.boundary_integral(&self.g3, lower, KernelVariant::Dx, x, t, |tau| {
                self.vi(2, tau)
            });
            let c = self.boundary_integral(&self.g3, lower, KernelVariant::Value, x, t, |tau| {
                self.vi(0, tau)
            });
            let d = gaussian_convolve(
                &self.g3,
                x,
                t,
                |xi| s.t_ice_init.slope(xi),
                Some(s.h0_init),
                Some(s.hu_init),
            )?;
            return Ok(p.d_i * a - p.d_i * b - c + d);
        }
        Err(Error::Domain(format!(
            "temperature gradient needs x in (-inf, {h0}) or ({h0}, {hu}), got {x}"
        )))
    }

    /// Richardson offset for limits towards an interface on the `kappa` side.
    fn offset(&self, kappa: f64) -> f64 {
        0.02 * (kappa * self.grid().dt()).sqrt()
    }

    pub fn psi_residuals(&self, t: f64) -> Result<PsiResiduals> {
        self.check_time(t)?;
        let p = &self.setup.params;
        let (h0, hu) = (self.h0(t), self.hu(t));
        let t0 = self.t0_at(t);
        let s0 = self.s0_at(t);
        let dh0 = self.paths.lower().velocity(t);

        let ds = self.offset(p.d);
        let sx = extrapolate(|e| self.salinity_gradient(h0 - e * ds, t))?;
        let dv = self.offset(p.d_o);
        let below = extrapolate(|e| self.temperature(h0 - e * dv, t))?;
        let di = self.offset(p.d_i);
        let above = extrapolate(|e| self.temperature(h0 + e * di, t))?;
        let top = extrapolate(|e| self.temperature(hu - e * di, t))?;

        let raw = [p.d * sx + s0 * dh0, below - t0, above - t0, top];
        let (s_scale, v_scale, t_scale) = self.scales();
        let scaled = [
            raw[0] / (s_scale * v_scale),
            raw[1] / t_scale,
            raw[2] / t_scale,
            raw[3] / t_scale,
        ];
        Ok(PsiResiduals { t, raw, scaled })
    }

    /// Salinity, interface-speed and temperature scales for natural units.
    pub fn scales(&self) -> (f64, f64, f64) {
        let or_one = |x: f64| if x > 0.0 { x } else { 1.0 };
        let s = or_one(self.traces.s0.sup_norm());
        let v = or_one(self.paths.dh0.sup_norm());
        let st = self.setup;
        let mut t = self.traces.t0.sup_norm();
        if let Some(f) = st.t_ocean_init.far_field() {
            t = t.max(f.abs());
        }
        for k in 0..=32 {
            let x = st.h0_init + (st.hu_init - st.h0_init) * k as f64 / 32.0;
            t = t.max(st.t_ice_init.value(x).abs());
        }
        (s, v, or_one(t))
    }

    /// Salt content `∫_{x_lo}^{h_0(t)} S dx`, with the `x`-integral of each
    /// kernel taken in closed form.
    pub fn salt_content(&self, x_lo: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let h0 = self.h0(t);
        if !(x_lo < h0) {
            return Err(Error::Domain("x_lo must lie below h0(t)".into()));
        }
        if t <= 0.0 {
            return Err(Error::Domain("salt content needs t > 0".into()));
        }
        let s = self.setup;
        let d = s.params.d;
        let lower = self.paths.lower();
        // ∫ G_x dx = G(h0(t)) − G(x_lo)
        let at_top = self.boundary_integral(&self.g1, lower, KernelVariant::Value, h0, t, |tau| self.s0_at(tau));
        let at_lo = self.boundary_integral(&self.g1, lower, KernelVariant::Value, x_lo, t, |tau| self.s0_at(tau));
        let layer = d * (at_top - at_lo);
        let w = (4.0 * d * t).sqrt();
        let weight = |xi: f64| 0.5 * (erf((h0 - xi) / w) - erf((x_lo - xi) / w));
        let lo = x_lo - 12.0 * w;
        let hi = s.h0_init;
        let initial = if lo < hi {
            let n = 48;
            let breaks: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
            let tol = Tolerance { abs: 1e-15, rel: 1e-13, max_subdivisions: 4000 };
            integrate_adaptive(|xi| s.s_init.value(xi) * weight(xi), &breaks, tol)
        } else {
            0.0
        };
        Ok(layer + initial)
    }

    /// Ocean salt budget over `[t1, t2]`: measured change of salt content in
    /// `[x_lo, h_0(t)]` against `−D S_x(x_lo)`.
    pub fn salt_budget(&self, x_lo: f64, t1: f64, t2: f64) -> Result<SaltBudget> {
        if !(t2 > t1) {
            return Err(Error::InvalidArgument("salt budget needs t2 > t1".into()));
        }
        let rate = (self.salt_content(x_lo, t2)? - self.salt_content(x_lo, t1)?) / (t2 - t1);
        let d = self.setup.params.d;
        let tm = 0.5 * (t1 + t2);
        let flux = |t: f64| -> Result<f64> { Ok(-d * self.salinity_gradient(x_lo, t)?) };
        let expected = (flux(t1)? + 4.0 * flux(tm)? + flux(t2)?) / 6.0;
        let scale = (self.s0_at(tm) * self.paths.lower().velocity(tm)).abs();
        Ok(SaltBudget { rate, expected, scale })
    }
}

/// `(8 f(1) − 6 f(2) + f(4)) / 3`: removes the linear and quadratic terms of
/// `f(ε)` for offsets `{1, 2, 4}` in units of the base step.
fn extrapolate(f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let (a, b, c) = (f(1.0)?, f(2.0)?, f(4.0)?);
    Ok((8.0 * a - 6.0 * b + c) / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiResiduals {
    pub t: f64,
    /// `(Ψ_1, Ψ_2, Ψ_3, Ψ_4)` in SI units.
    pub raw: [f64; 4],
    /// `Ψ_1/(S·V)` and `Ψ_{2..4}/T` with the context's scales.
    pub scaled: [f64; 4],
}

impl PsiResiduals {
    pub fn max_scaled(&self) -> f64 {
        self.scaled.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaltBudget {
    /// `d/dt ∫ S dx`.
    pub rate: f64,
    /// `−D S_x(x_lo)`.
    pub expected: f64,
    /// `|S_0 h_0'|`.
    pub scale: f64,
}

impl SaltBudget {
    pub fn relative_error(&self) -> f64 {
        let scale = if self.scale > 0.0 { self.scale } else { 1.0 };
        (self.rate - self.expected).abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Ocean,
    /// Node exactly on `h_0(t)`.
    OceanIce,
    Ice,
    /// Node exactly on `h_u(t)`.
    IceFresh,
    Fresh,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Ocean => "ocean",
            Region::OceanIce => "ocean_ice",
            Region::Ice => "ice",
            Region::IceFresh => "ice_fresh",
            Region::Fresh => "fresh",
        }
    }

    pub fn classify(x: f64, h0: f64, hu: f64) -> Self {
        if x < h0 {
            Region::Ocean
        } else if x == h0 {
            Region::OceanIce
        } else if x < hu {
            Region::Ice
        } else if x == hu {
            Region::IceFresh
        } else {
            Region::Fresh
        }
    }
}

/// Fields at one time on a set of nodes.
///
/// Interface nodes carry the one-sided gradient from below; `salinity` is
/// `None` off the ocean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub t: f64,
    pub h0: f64,
    pub hu: f64,
    pub x: Vec<f64>,
    pub region: Vec<Region>,
    pub temperature: Vec<f64>,
    pub gradient: Vec<f64>,
    pub salinity: Vec<Option<f64>>,
}

/// Uniform spatial grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n: usize,
}

impl SpatialGrid {
    pub fn nodes(&self) -> Result<Vec<f64>> {
        if !(self.x_hi > self.x_lo) || self.n < 2 {
            return Err(Error::InvalidArgument("spatial grid needs x_hi > x_lo and n >= 2".into()));
        }
        let h = (self.x_hi - self.x_lo) / (self.n - 1) as f64;
        Ok((0..self.n)
            .map(|i| if i + 1 == self.n { self.x_hi } else { self.x_lo + h * i as f64 })
            .collect())
    }
}

type Row = (Region, f64, f64, Option<f64>);

fn finish(t: f64, h0: f64, hu: f64, xs: Vec<f64>, rows: Vec<Result<Row>>) -> Result<FieldSnapshot> {
    let mut snap = FieldSnapshot {
        t,
        h0,
        hu,
        region: Vec::with_capacity(xs.len()),
        temperature: Vec::with_capacity(xs.len()),
        gradient: Vec::with_capacity(xs.len()),
        salinity: Vec::with_capacity(xs.len()),
        x: xs,
    };
    for row in rows {
        let (r, temp, grad, sal) = row?;
        snap.region.push(r);
        snap.temperature.push(temp);
        snap.gradient.push(grad);
        snap.salinity.push(sal);
    }
    Ok(snap)
}

/// Snapshot at local time `t` of one step.
pub fn snapshot(ctx: &FieldContext<'_>, t: f64, xs: Vec<f64>, exec: Execution) -> Result<FieldSnapshot> {
    ctx.check_time(t)?;
    let (h0, hu) = (ctx.h0(t), ctx.hu(t));
    let n = ctx.grid().n_steps();
    let at_end = (t - ctx.span()).abs() <= 1e-12 * ctx.span();
    let rows = map_indices(exec, xs.len(), |i| -> Result<Row> {
        let x = xs[i];
        let region = Region::classify(x, h0, hu);
        Ok(match region {
            Region::Ocean => (
                region,
                ctx.temperature(x, t)?,
                ctx.temperature_gradient(x, t)?,
                Some(ctx.salinity(x, t)?),
            ),
            Region::OceanIce => {
                let v1 = if at_end { ctx.v.v(1)[n] } else { ctx.vi(1, t) };
                (region, ctx.t0_at(t), v1, Some(ctx.s0_at(t)))
            }
            Region::Ice => (region, ctx.temperature(x, t)?, ctx.temperature_gradient(x, t)?, None),
            Region::IceFresh => (region, 0.0, ctx.vi(3, t), None),
            Region::Fresh => (region, 0.0, 0.0, None),
        })
    });
    finish(t, h0, hu, xs, rows)
}

/// Snapshot at global time `t` of a trajectory; `t = 0` reads the initial data.
pub fn trajectory_snapshot(
    traj: &Trajectory,
    t: f64,
    xs: Vec<f64>,
    exec: Execution,
) -> Result<FieldSnapshot> {
    if t == 0.0 {
        let s = &traj.initial;
        let (h0, hu) = (s.h0_init, s.hu_init);
        let rows = xs
            .iter()
            .map(|&x| -> Result<Row> {
                let region = Region::classify(x, h0, hu);
                Ok(match region {
                    Region::Ocean => (region, s.t_ocean_init.value(x), s.t_ocean_init.slope(x), Some(s.s_init.value(x))),
                    Region::OceanIce => (region, s.interface_temperature(), s.t_ocean_init.slope(x), Some(s.s_init.value(x))),
                    Region::Ice => (region, s.t_ice_init.value(x), s.t_ice_init.slope(x), None),
                    Region::IceFresh => (region, 0.0, s.t_ice_init.slope(x), None),
                    Region::Fresh => (region, 0.0, 0.0, None),
                })
            })
            .collect();
        return finish(t, h0, hu, xs, rows);
    }
    let step = traj
        .step_at(t)
        .ok_or_else(|| Error::Domain(format!("time {t} outside the solved range")))?;
    let ctx = step.context()?;
    let local = (t - step.t_start).min(step.sigma);
    snapshot(&ctx, local, xs, exec)
}

/// Right-hand side of the Green representation on a strip `a(t) < x < b(t)`
/// for a known solution `u`; `a`, `b` return `(position, velocity)`.
#[allow(clippy::too_many_arguments)]
pub fn green_representation(
    kernel: &GreenKernel,
    x: f64,
    t: f64,
    a: &dyn Fn(f64) -> (f64, f64),
    b: &dyn Fn(f64) -> (f64, f64),
    u: &dyn Fn(f64, f64) -> f64,
    u_x: &dyn Fn(f64, f64) -> f64,
) -> Result<f64> {
    let (xa, _) = a(t);
    let (xb, _) = b(t);
    if !(t > 0.0 && xa < x && x < xb) {
        return Err(Error::Domain("representation needs t > 0 and a(t) < x < b(t)".into()));
    }
    let kappa = kernel.kappa();
    let grid = TimeGrid::new(0.0, t, 16)?;
    let tol = Tolerance::default();
    let side = |curve: &dyn Fn(f64) -> (f64, f64), sign: f64| {
        let d = (x - curve(t).0).abs();
        let u_star = d / (2.0 * kappa.sqrt());
        let hints = [0.5 * u_star, u_star, 2.0 * u_star];
        time_integral(
            &grid,
            t,
            |tau| {
                let (c, dc) = curve(tau);
                let dt = t - tau;
                let g = heat_value(kappa, x - c, dt);
                let g_xi = -heat_dx(kappa, x - c, dt);
                let uc = u(c, tau);
                sign * (g * (kappa * u_x(c, tau) + uc * dc) - kappa * g_xi * uc)
            },
            &hints,
            tol,
        )
    };
    let initial = gaussian_convolve(kernel, x, t, |xi| u(xi, 0.0), Some(a(0.0).0), Some(b(0.0).0))?;
    Ok(side(b, 1.0) + side(a, -1.0) + initial)
}
