//! Front-tracking finite volumes on boundary-fixed coordinates.
//!
//! The ocean `[L, h0(t)]` and the ice `[h0(t), hu(t)]` are each mapped
//! affinely onto `[0, 1]`. Nodes are vertices of a fixed nonuniform grid in
//! the mapped variable; control volumes move with the mesh, so the discrete
//! equations carry the mesh velocity as an advective flux and conserve salt
//! exactly when the interface flux vanishes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemSetup;
use crate::volterra::PinchOffEvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    /// Depth of the truncated ocean, `L < h_0^0`.
    pub l: f64,
    pub n_ocean: usize,
    pub n_ice: usize,
    pub dt: f64,
    #[serde(default = "one")]
    pub theta: f64,
    /// Dirichlet data at `L`.
    pub far_t: f64,
    pub far_s: f64,
    #[serde(default = "pinch_default")]
    pub pinch_off_fraction: f64,
}

fn one() -> f64 {
    1.0
}

fn pinch_default() -> f64 {
    1e-6
}

impl FdConfig {
    pub fn validate(&self, setup: &ProblemSetup) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.l.is_finite() && self.l < setup.h0_init) {
            return bad(format!("L = {} must lie below h0 = {}", self.l, setup.h0_init));
        }
        if self.n_ocean < 16 || self.n_ice < 16 {
            return bad("oracle grids need at least 16 nodes".into());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return bad(format!("theta must lie in [1/2, 1], got {}", self.theta));
        }
        if !(self.far_t.is_finite() && self.far_s.is_finite()) {
            return bad("far-field data must be finite".into());
        }
        if !(self.pinch_off_fraction > 0.0 && self.pinch_off_fraction < 1.0) {
            return bad("pinch_off_fraction must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// Describes the violated bound when `L` is too shallow for the far
    /// boundary to stay out of the interface's reach by `t_end`.
    pub fn far_field_warning(&self, setup: &ProblemSetup, t_end: f64) -> Option<String> {
        let p = &setup.params;
        let reach = 12.0 * (p.d_o.max(p.d) * t_end).sqrt();
        let depth = setup.h0_init - self.l;
        (depth < reach).then(|| {
            format!("far boundary at depth {depth} m is inside the diffusive reach {reach} m by t_end")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdFields {
    pub x_ocean: Vec<f64>,
    pub t_ocean: Vec<f64>,
    pub s_ocean: Vec<f64>,
    pub x_ice: Vec<f64>,
    pub t_ice: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdTrajectory {
    pub t: Vec<f64>,
    pub h0: Vec<f64>,
    pub hu: Vec<f64>,
    pub t0: Vec<f64>,
    pub s0: Vec<f64>,
    /// Salt content of the ocean volumes above the fixed node at `L`.
    pub salt: Vec<f64>,
    /// Cumulative salt entering through the face next to `L`.
    pub salt_inflow: Vec<f64>,
    pub pinch_off: Option<PinchOffEvent>,
    pub terminal: FdFields,
}

impl FdTrajectory {
    /// `(h0, hu)` linearly interpolated at `t`.
    pub fn interfaces_at(&self, t: f64) -> (f64, f64) {
        let n = self.t.len();
        if t <= self.t[0] {
            return (self.h0[0], self.hu[0]);
        }
        if t >= self.t[n - 1] {
            return (self.h0[n - 1], self.hu[n - 1]);
        }
        let i = self.t.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        let w = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
        (
            self.h0[i] + w * (self.h0[i + 1] - self.h0[i]),
            self.hu[i] + w * (self.hu[i + 1] - self.hu[i]),
        )
    }

    /// Largest `|ΔM − inflow|` relative to `∫|S_0 h_0'| dt` since the start.
    pub fn salt_closure(&self) -> f64 {
        let mut worst = 0.0_f64;
        let mut scale = 0.0;
        for k in 1..self.t.len() {
            let dh = (self.h0[k] - self.h0[k - 1]).abs();
            scale += 0.5 * (self.s0[k].abs() + self.s0[k - 1].abs()) * dh;
            let change = self.salt[k] - self.salt[0];
            let err = (change - self.salt_inflow[k]).abs();
            if scale > 0.0 {
                worst = worst.max(err / scale);
            }
        }
        worst
    }
}

/// Mapped coordinates in `[0, 1]`, geometric clustering towards `y = 1`.
fn clustered_high(n: usize, beta: f64) -> Vec<f64> {
    let denom = beta.exp_m1();
    (0..=n)
        .map(|i| {
            let s = i as f64 / n as f64;
            1.0 - (beta * (1.0 - s)).exp_m1() / denom
        })
        .collect()
}

/// Clustered towards both ends.
fn clustered_both(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

fn map(y: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    y.iter().map(|s| lo + s * (hi - lo)).collect()
}

#[derive(Debug, Clone, Copy)]
enum Bc {
    Dirichlet(f64),
    NoFlux,
}

fn thomas(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = r[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        dp[i] = (r[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

fn volumes(x: &[f64]) -> Vec<f64> {
    let n = x.len() - 1;
    (0..=n)
        .map(|i| {
            let right = if i == n { x[n] } else { 0.5 * (x[i] + x[i + 1]) };
            let left = if i == 0 { x[0] } else { 0.5 * (x[i - 1] + x[i]) };
            right - left
        })
        .collect()
}

/// Face flux `κ u_x + w u` between nodes `i` and `i+1`, as coefficients of
/// `(u_i, u_{i+1})`.
fn face(kappa: f64, dx: f64, w: f64) -> (f64, f64) {
    (-kappa / dx + 0.5 * w, kappa / dx + 0.5 * w)
}

/// θ-step of `u_t = κ u_xx` on a moving mesh; returns the new values and the
/// time-weighted flux through the first interior face.
#[allow(clippy::too_many_arguments)]
fn advance_field(
    u: &[f64],
    x_old: &[f64],
    x_new: &[f64],
    kappa: f64,
    dt: f64,
    theta: f64,
    left: Bc,
    right: Bc,
) -> (Vec<f64>, f64) {
    let n = u.len() - 1;
    let v_old = volumes(x_old);
    let v_new = volumes(x_new);
    let w: Vec<f64> = (0..n)
        .map(|i| 0.5 * ((x_new[i] + x_new[i + 1]) - (x_old[i] + x_old[i + 1])) / dt)
        .collect();
    let c_old: Vec<(f64, f64)> = (0..n).map(|i| face(kappa, x_old[i + 1] - x_old[i], w[i])).collect();
    let c_new: Vec<(f64, f64)> = (0..n).map(|i| face(kappa, x_new[i + 1] - x_new[i], w[i])).collect();
    let flux_old: Vec<f64> = (0..n).map(|i| c_old[i].0 * u[i] + c_old[i].1 * u[i + 1]).collect();

    let (mut a, mut b, mut c, mut r) = (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]);
    for i in 0..=n {
        b[i] = v_new[i] / dt;
        r[i] = v_old[i] * u[i] / dt;
        if i < n {
            let (p, q) = c_new[i];
            b[i] -= theta * p;
            c[i] -= theta * q;
            r[i] += (1.0 - theta) * flux_old[i];
        }
        if i > 0 {
            let (p, q) = c_new[i - 1];
            a[i] += theta * p;
            b[i] += theta * q;
            r[i] -= (1.0 - theta) * flux_old[i - 1];
        }
    }
    for (idx, bc) in [(0, left), (n, right)] {
        if let Bc::Dirichlet(value) = bc {
            a[idx] = 0.0;
            b[idx] = 1.0;
            c[idx] = 0.0;
            r[idx] = value;
        }
    }
    let out = thomas(&a, &b, &c, &r);
    let (p, q) = c_new[0];
    let face_flux = theta * (p * out[0] + q * out[1]) + (1.0 - theta) * flux_old[0];
    (out, face_flux)
}

/// Second-order one-sided derivative at `x[0]` from three points.
fn one_sided(x: [f64; 3], f: [f64; 3]) -> f64 {
    let h1 = x[1] - x[0];
    let h2 = x[2] - x[0];
    -(h1 + h2) / (h1 * h2) * f[0] + h2 / (h1 * (h2 - h1)) * f[1] - h1 / (h2 * (h2 - h1)) * f[2]
}

fn salt_content(x: &[f64], s: &[f64]) -> f64 {
    volumes(x).iter().zip(s).skip(1).map(|(v, s)| v * s).sum()
}

/// Runs the oracle to `t_end` or pinch-off.
pub fn fd_solve(setup: &ProblemSetup, cfg: &FdConfig, t_end: f64) -> Result<FdTrajectory> {
    setup.ensure_valid()?;
    cfg.validate(setup)?;
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    let p = setup.params;
    let yo = clustered_high(cfg.n_ocean, 6.0);
    let yi = clustered_both(cfg.n_ice);
    let (mut h0, mut hu) = (setup.h0_init, setup.hu_init);
    let gap0 = hu - h0;
    let threshold = cfg.pinch_off_fraction * gap0;
    let mut xo = map(&yo, cfg.l, h0);
    let mut xi = map(&yi, h0, hu);
    let no = cfg.n_ocean;
    let ni = cfg.n_ice;

    let mut t0 = setup.interface_temperature();
    let mut to: Vec<f64> = xo.iter().map(|&x| setup.t_ocean_init.value(x)).collect();
    let mut so: Vec<f64> = xo.iter().map(|&x| setup.s_init.value(x)).collect();
    let mut ti: Vec<f64> = xi.iter().map(|&x| setup.t_ice_init.value(x)).collect();
    to[0] = cfg.far_t;
    so[0] = cfg.far_s;
    to[no] = t0;
    ti[0] = t0;
    ti[ni] = 0.0;
    let scale = to
        .iter()
        .chain(&ti)
        .chain(&so)
        .fold(1.0_f64, |m, v| m.max(v.abs()));

    let mut out = FdTrajectory {
        t: vec![0.0],
        h0: vec![h0],
        hu: vec![hu],
        t0: vec![t0],
        s0: vec![so[no]],
        salt: vec![salt_content(&xo, &so)],
        salt_inflow: vec![0.0],
        pinch_off: None,
        terminal: FdFields {
            x_ocean: Vec::new(),
            t_ocean: Vec::new(),
            s_ocean: Vec::new(),
            x_ice: Vec::new(),
            t_ice: Vec::new(),
        },
    };
    let mut t = 0.0;
    let mut inflow = 0.0;
    let eps = 1e-12 * t_end;
    while t < t_end - eps {
        let dt = cfg.dt.min(t_end - t);
        let g_below = one_sided([xo[no], xo[no - 1], xo[no - 2]], [to[no], to[no - 1], to[no - 2]]);
        let g_above = one_sided([xi[0], xi[1], xi[2]], [ti[0], ti[1], ti[2]]);
        let g_top = one_sided([xi[ni], xi[ni - 1], xi[ni - 2]], [ti[ni], ti[ni - 1], ti[ni - 2]]);
        let h0_new = h0 + dt * (p.lambda_i_tilde * g_above - p.lambda_o_tilde * g_below);
        let hu_new = hu + dt * p.lambda_i_tilde * g_top;
        let gap = hu_new - h0_new;
        if gap < threshold {
            let prev = hu - h0;
            let frac = ((prev - threshold) / (prev - gap)).clamp(0.0, 1.0);
            out.pinch_off = Some(PinchOffEvent { t: t + frac * dt, gap: gap.max(0.0), threshold });
            break;
        }

        let xo_new = map(&yo, cfg.l, h0_new);
        let xi_new = map(&yi, h0_new, hu_new);
        let (s_new, face_flux) =
            advance_field(&so, &xo, &xo_new, p.d, dt, cfg.theta, Bc::Dirichlet(cfg.far_s), Bc::NoFlux);
        let s0 = s_new[no];
        let t0_new = (p.n0 * t0 / dt - p.m0 * s0) / (1.0 + p.n0 / dt);
        let (to_new, _) = advance_field(
            &to,
            &xo,
            &xo_new,
            p.d_o,
            dt,
            cfg.theta,
            Bc::Dirichlet(cfg.far_t),
            Bc::Dirichlet(t0_new),
        );
        let (ti_new, _) = advance_field(
            &ti,
            &xi,
            &xi_new,
            p.d_i,
            dt,
            cfg.theta,
            Bc::Dirichlet(t0_new),
            Bc::Dirichlet(0.0),
        );

        t += dt;
        let finite = to_new.iter().chain(&ti_new).chain(&s_new).all(|v| v.is_finite());
        let peak = to_new.iter().chain(&ti_new).chain(&s_new).fold(0.0_f64, |m, v| m.max(v.abs()));
        if !finite || peak > 1e6 * scale || !(h0_new.is_finite() && hu_new.is_finite()) {
            return Err(Error::Unstable { t });
        }
        inflow -= face_flux * dt;
        so = s_new;
        to = to_new;
        ti = ti_new;
        xo = xo_new;
        xi = xi_new;
        t0 = t0_new;
        h0 = h0_new;
        hu = hu_new;

        out.t.push(t);
        out.h0.push(h0);
        out.hu.push(hu);
        out.t0.push(t0);
        out.s0.push(s0);
        out.salt.push(salt_content(&xo, &so));
        out.salt_inflow.push(inflow);
    }
    out.terminal = FdFields { x_ocean: xo, t_ocean: to, s_ocean: so, x_ice: xi, t_ice: ti };
    Ok(out)
}
