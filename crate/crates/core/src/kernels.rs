//! Heat-equation Green's function, its spatial derivatives, the half-line
//! image kernel, and boundary-restricted kernels with the `1/√(t−τ)`
//! singularity factored out.

use std::f64::consts::PI;

use crate::error::{ensure_finite, Error, Result};
use crate::quad::TimeGrid;

/// Exponents below this underflow to subnormals; the kernel returns exact 0.
const EXP_FLOOR: f64 = -745.0;

#[inline]
fn gaussian(d: f64, kappa: f64, dt: f64) -> f64 {
    if !(dt > 0.0) {
        return 0.0;
    }
    let e = -d * d / (4.0 * kappa * dt);
    if e <= EXP_FLOOR {
        0.0
    } else {
        e.exp()
    }
}

/// `G` for separation `d = x − ξ` and lag `dt = t − τ > 0`.
#[inline]
pub(crate) fn heat_value(kappa: f64, d: f64, dt: f64) -> f64 {
    if !(dt > 0.0) {
        return 0.0;
    }
    gaussian(d, kappa, dt) / (2.0 * (PI * kappa * dt).sqrt())
}

/// `∂G/∂x` for separation `d = x − ξ` and lag `dt = t − τ > 0`.
#[inline]
pub(crate) fn heat_dx(kappa: f64, d: f64, dt: f64) -> f64 {
    if !(dt > 0.0) {
        return 0.0;
    }
    -d * gaussian(d, kappa, dt) / (4.0 * (PI * kappa.powi(3)).sqrt() * dt.powf(1.5))
}

/// Fundamental solution of `u_t = κ u_xx`:
/// `G(x,t;ξ,τ) = H(t−τ) exp(−(x−ξ)²/(4κ(t−τ))) / (2√(πκ(t−τ)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenKernel {
    kappa: f64,
}

impl GreenKernel {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidArgument(format!("diffusivity must be positive, got {kappa}")));
        }
        Ok(Self { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    fn check(x: f64, t: f64, xi: f64, tau: f64) -> Result<()> {
        ensure_finite("x", x)?;
        ensure_finite("t", t)?;
        ensure_finite("xi", xi)?;
        ensure_finite("tau", tau)
    }

    /// `G(x,t;ξ,τ)`, zero for `τ ≥ t`.
    pub fn eval(&self, x: f64, t: f64, xi: f64, tau: f64) -> Result<f64> {
        Self::check(x, t, xi, tau)?;
        if tau >= t {
            return Ok(0.0);
        }
        Ok(heat_value(self.kappa, x - xi, t - tau))
    }

    /// `G_x(x,t;ξ,τ)`, defined for `t > τ`.
    pub fn dx(&self, x: f64, t: f64, xi: f64, tau: f64) -> Result<f64> {
        Self::check(x, t, xi, tau)?;
        if t <= tau {
            return Err(Error::Domain(format!("G_x needs t > tau, got t={t}, tau={tau}")));
        }
        Ok(heat_dx(self.kappa, x - xi, t - tau))
    }

    /// `G_ξ = −G_x`.
    pub fn dxi(&self, x: f64, t: f64, xi: f64, tau: f64) -> Result<f64> {
        self.dx(x, t, xi, tau).map(|v| -v)
    }

    /// Dirichlet Green's function of the half-line `x > L`:
    /// `G(x,t;ξ,τ) − G(2L−x,t;ξ,τ)`.
    pub fn image_eval(&self, wall: f64, x: f64, t: f64, xi: f64, tau: f64) -> Result<f64> {
        ensure_finite("wall", wall)?;
        if x < wall || xi < wall {
            return Err(Error::Domain(format!(
                "image kernel needs x, xi >= L = {wall}, got x={x}, xi={xi}"
            )));
        }
        Ok(self.eval(x, t, xi, tau)? - self.eval(2.0 * wall - x, t, xi, tau)?)
    }
}

/// Borrowed view of a sampled trajectory `h(t)` with its velocity.
///
/// Between nodes the position is the exact integral of the piecewise-linear
/// velocity, corrected linearly so the sampled positions are interpolated.
#[derive(Debug, Clone, Copy)]
pub struct CurveRef<'a> {
    pub grid: &'a TimeGrid,
    pub pos: &'a [f64],
    pub vel: &'a [f64],
}

impl<'a> CurveRef<'a> {
    pub fn new(grid: &'a TimeGrid, pos: &'a [f64], vel: &'a [f64]) -> Result<Self> {
        if pos.len() != grid.len() || vel.len() != grid.len() {
            return Err(Error::InvalidArgument("curve samples do not match grid".into()));
        }
        Ok(Self { grid, pos, vel })
    }

    pub fn position(&self, tau: f64) -> f64 {
        let (j, s) = self.grid.locate(tau);
        let h = self.grid.dt();
        let (v0, v1) = (self.vel[j], self.vel[j + 1]);
        let mismatch = self.pos[j + 1] - self.pos[j] - 0.5 * h * (v0 + v1);
        self.pos[j] + v0 * s + (v1 - v0) * s * s / (2.0 * h) + mismatch * s / h
    }

    pub fn velocity(&self, tau: f64) -> f64 {
        let (j, s) = self.grid.locate(tau);
        let w = s / self.grid.dt();
        self.vel[j] * (1.0 - w) + self.vel[j + 1] * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelVariant {
    /// `G`
    Value,
    /// `G_x`
    Dx,
}

/// Where the kernel's first argument `x` sits.
#[derive(Debug, Clone, Copy)]
pub enum EvalPoint<'a> {
    Fixed(f64),
    /// `x = h(t)` on the source curve itself.
    OnSource,
    /// `x = h̃(t)` on a second curve that never meets the source.
    Path(CurveRef<'a>),
}

/// `K(t,τ) = G·(x(t), t; h(τ), τ)` written as `g(t,τ)/√(t−τ)` with `g`
/// continuous up to the diagonal.
#[derive(Debug, Clone, Copy)]
pub struct FactoredBoundaryKernel<'a> {
    pub kernel: GreenKernel,
    pub source: CurveRef<'a>,
    pub target: EvalPoint<'a>,
    pub variant: KernelVariant,
}

impl<'a> FactoredBoundaryKernel<'a> {
    pub fn new(
        kernel: GreenKernel,
        source: CurveRef<'a>,
        target: EvalPoint<'a>,
        variant: KernelVariant,
    ) -> Self {
        Self { kernel, source, target, variant }
    }

    #[inline]
    fn smooth(&self, d: f64, dt: f64) -> f64 {
        let kappa = self.kernel.kappa;
        match self.variant {
            KernelVariant::Value => gaussian(d, kappa, dt) / (2.0 * (PI * kappa).sqrt()),
            KernelVariant::Dx => {
                -d * gaussian(d, kappa, dt) / (4.0 * (PI * kappa.powi(3)).sqrt() * dt)
            }
        }
    }

    fn same_curve_diagonal(&self, vel: f64) -> f64 {
        let kappa = self.kernel.kappa;
        match self.variant {
            KernelVariant::Value => 1.0 / (2.0 * (PI * kappa).sqrt()),
            KernelVariant::Dx => -vel / (4.0 * (PI * kappa.powi(3)).sqrt()),
        }
    }

    fn near_diagonal(&self, t: f64, dt: f64) -> bool {
        let elapsed = (t - self.source.grid.t_start()).max(self.source.grid.dt());
        dt < 1e-12 * elapsed
    }

    /// `g(t,τ)` for `t_0 ≤ τ ≤ t ≤ t_end`.
    pub fn eval(&self, t: f64, tau: f64) -> Result<f64> {
        ensure_finite("t", t)?;
        ensure_finite("tau", tau)?;
        let grid = self.source.grid;
        if tau > t {
            return Err(Error::Domain(format!("factored kernel needs tau <= t, got {tau} > {t}")));
        }
        if !grid.contains(t) || !grid.contains(tau) {
            return Err(Error::Domain(format!(
                "times ({t}, {tau}) outside curve range [{}, {}]",
                grid.t_start(),
                grid.t_end()
            )));
        }
        let dt = t - tau;
        let src_t = self.source.position(t);
        let x_t = match self.target {
            EvalPoint::Fixed(x) => x,
            EvalPoint::OnSource => src_t,
            EvalPoint::Path(c) => c.position(t),
        };
        if self.near_diagonal(t, dt) {
            return Ok(self.diagonal(x_t, src_t, self.source.velocity(t)));
        }
        Ok(self.smooth(x_t - self.source.position(tau), dt))
    }

    fn diagonal(&self, x_t: f64, src_t: f64, vel: f64) -> f64 {
        match self.target {
            EvalPoint::OnSource => self.same_curve_diagonal(vel),
            EvalPoint::Fixed(_) if x_t == src_t => self.same_curve_diagonal(vel),
            _ => 0.0,
        }
    }

    /// `g(t_k, t_j)` at grid nodes, `j ≤ k`, without interpolation.
    #[inline]
    pub fn at_nodes(&self, k: usize, j: usize) -> f64 {
        debug_assert!(j <= k);
        let grid = self.source.grid;
        let src_k = self.source.pos[k];
        let x_k = match self.target {
            EvalPoint::Fixed(x) => x,
            EvalPoint::OnSource => src_k,
            EvalPoint::Path(c) => c.pos[k],
        };
        if j == k {
            return self.diagonal(x_k, src_k, self.source.vel[k]);
        }
        let dt = (k - j) as f64 * grid.dt();
        self.smooth(x_k - self.source.pos[j], dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heaviside_cuts_future() {
        let g = GreenKernel::new(1.0).unwrap();
        assert_eq!(g.eval(0.0, 1.0, 0.0, 2.0).unwrap(), 0.0);
        assert_eq!(g.eval(0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn unit_peak() {
        let g = GreenKernel::new(1.0).unwrap();
        let v = g.eval(0.0, 1.0 / (4.0 * PI), 0.0, 0.0).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(GreenKernel::new(0.0).is_err());
        assert!(GreenKernel::new(-1.0).is_err());
        let g = GreenKernel::new(1.0).unwrap();
        assert!(g.eval(f64::NAN, 1.0, 0.0, 0.0).is_err());
        assert!(matches!(g.dx(0.0, 1.0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(g.image_eval(0.0, -0.1, 1.0, 0.2, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn underflow_is_exact_zero() {
        let g = GreenKernel::new(1.0).unwrap();
        assert_eq!(g.eval(100.0, 1.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(g.dx(100.0, 1.0, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn image_vanishes_at_wall() {
        let g = GreenKernel::new(0.7).unwrap();
        for xi in [0.0, 0.3, 2.0] {
            assert_eq!(g.image_eval(0.0, 0.0, 1.0, xi, 0.2).unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_curve_factors() {
        let grid = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let pos = vec![0.3; 9];
        let vel = vec![0.0; 9];
        let c = CurveRef::new(&grid, &pos, &vel).unwrap();
        let k = GreenKernel::new(2.0).unwrap();
        let fv = FactoredBoundaryKernel::new(k, c, EvalPoint::OnSource, KernelVariant::Value);
        let fd = FactoredBoundaryKernel::new(k, c, EvalPoint::OnSource, KernelVariant::Dx);
        let expect = 1.0 / (2.0 * (PI * 2.0).sqrt());
        for tau in [0.0, 0.33, 0.9, 1.0] {
            assert!((fv.eval(1.0, tau).unwrap() - expect).abs() < 1e-15);
            assert_eq!(fd.eval(1.0, tau).unwrap(), 0.0);
        }
        assert!(fv.eval(0.5, 0.6).is_err());
        assert!(fv.eval(1.5, 0.6).is_err());
    }

    #[test]
    fn distinct_curves_vanish_on_diagonal() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let p0 = vec![0.0; 5];
        let p1 = vec![1.0; 5];
        let v = vec![0.0; 5];
        let a = CurveRef::new(&grid, &p0, &v).unwrap();
        let b = CurveRef::new(&grid, &p1, &v).unwrap();
        let k = GreenKernel::new(1.0).unwrap();
        let f = FactoredBoundaryKernel::new(k, a, EvalPoint::Path(b), KernelVariant::Dx);
        assert_eq!(f.at_nodes(3, 3), 0.0);
        assert_eq!(f.eval(0.75, 0.75).unwrap(), 0.0);
    }

    #[test]
    fn curve_interpolation_is_quadratic_integral() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let vel: Vec<f64> = grid.nodes().iter().map(|t| 2.0 * t).collect();
        let pos: Vec<f64> = grid.nodes().iter().map(|t| t * t).collect();
        let c = CurveRef::new(&grid, &pos, &vel).unwrap();
        for tau in [0.1, 0.37, 0.8] {
            assert!((c.position(tau) - tau * tau).abs() < 1e-15);
            assert!((c.velocity(tau) - 2.0 * tau).abs() < 1e-15);
        }
    }
}
