use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::kernels::{EvalPoint, FactoredBoundaryKernel, GreenKernel, KernelVariant, CurveRef};
use crate::quad::{gaussian_convolve, running_integral, AbelWeights, SampledFunction, TimeGrid};

/// Positive root of `λ e^{λ²} erf λ = rhs/√π`.
pub fn neumann_lambda(stefan_rhs: f64) -> Result<f64> {
    if !(stefan_rhs.is_finite() && stefan_rhs > 0.0) {
        return Err(Error::Domain(format!("Stefan number must be positive, got {stefan_rhs}")));
    }
    let target = stefan_rhs / std::f64::consts::PI.sqrt();
    let f = |l: f64| l * (l * l).exp() * erf(l) - target;
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 26.0 {
            return Err(Error::Domain(format!("Stefan number {stefan_rhs} too large to bracket")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One-phase melting of `0 < x < s(t)` held at `u_b` on `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeumannProblem {
    pub kappa: f64,
    /// `k u_b / κ`.
    pub stefan_number: f64,
    pub lambda: f64,
}

impl NeumannProblem {
    pub fn new(kappa: f64, stefan_number: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
        }
        let lambda = neumann_lambda(stefan_number)?;
        Ok(Self { kappa, stefan_number, lambda })
    }

    pub fn front(&self, t: f64) -> f64 {
        2.0 * self.lambda * (self.kappa * t).sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassicalStefanRun {
    pub grid: TimeGrid,
    /// Front position at the nodes.
    pub s: Vec<f64>,
    /// `u_x(s(t)−, t)` at the nodes.
    pub flux: Vec<f64>,
    pub lambda: f64,
    /// Age of the similarity profile at `t = 0`.
    pub t_virtual: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl ClassicalStefanRun {
    /// `max_k |s(t_k) − 2λ√(κ(t_v + t_k))| / s(t_end)`.
    pub fn relative_error(&self, kappa: f64) -> f64 {
        let n = self.s.len() - 1;
        let exact = |k: usize| {
            if self.lambda == 0.0 {
                self.s[0]
            } else {
                2.0 * self.lambda * (kappa * (self.t_virtual + self.grid.elapsed(k))).sqrt()
            }
        };
        (0..=n)
            .map(|k| (self.s[k] - exact(k)).abs())
            .fold(0.0, f64::max)
            / self.s[n].abs()
    }
}

/// Front of the one-phase problem computed with the Volterra machinery.
///
/// Starts from the similarity profile whose front is at `s0`, so the exact
/// answer is `s(t) = 2λ√(κ(t_v + t))` with `s0 = 2λ√(κ t_v)`. The single
/// unknown `v = u_x(s(t)−, t)` solves
/// `v = 2κ∫[G_x(s;s) − G_x(s;−s)] v dτ + 2∫_{−s0}^{s0} G(s,t;ξ,0) w0'(ξ) dξ`
/// with `w0'` the even extension of the initial slope, and `s' = −k v`.
pub fn classical_stefan_via_machinery(
    kappa: f64,
    boundary_temp: f64,
    stefan_coeff: f64,
    s0: f64,
    t_end: f64,
    n_steps: usize,
    exec: Execution,
) -> Result<ClassicalStefanRun> {
    for (name, v) in [("kappa", kappa), ("stefan_coeff", stefan_coeff), ("s0", s0), ("t_end", t_end)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    if !(boundary_temp.is_finite() && boundary_temp >= 0.0) {
        return Err(Error::Domain(format!("boundary temperature must be >= 0, got {boundary_temp}")));
    }
    let grid = TimeGrid::new(0.0, t_end, n_steps)?;
    let g = GreenKernel::new(kappa)?;
    let st = stefan_coeff * boundary_temp / kappa;
    let (lambda, t_virtual) = if st > 0.0 {
        let l = neumann_lambda(st)?;
        (l, s0 * s0 / (4.0 * l * l * kappa))
    } else {
        (0.0, f64::INFINITY)
    };
    let slope0 = move |xi: f64| {
        if lambda == 0.0 || xi.abs() > s0 {
            return 0.0;
        }
        let kt = kappa * t_virtual;
        -boundary_temp / erf(lambda) * (-xi * xi / (4.0 * kt)).exp() / (std::f64::consts::PI * kt).sqrt()
    };
    let weights = AbelWeights::new(&grid);
    let n = grid.len();

    let front = |v: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let vel: Vec<f64> = v.iter().map(|x| -stefan_coeff * x).collect();
        let sv = SampledFunction::from_raw(grid, vel.clone());
        let s = running_integral(&sv).into_values().into_iter().map(|i| s0 + i).collect();
        (s, vel)
    };
    let apply = |v: &[f64]| -> Result<Vec<f64>> {
        let (s, vel) = front(v);
        let ms: Vec<f64> = s.iter().map(|x| -x).collect();
        let mvel: Vec<f64> = vel.iter().map(|x| -x).collect();
        let c = CurveRef::new(&grid, &s, &vel)?;
        let m = CurveRef::new(&grid, &ms, &mvel)?;
        let own = FactoredBoundaryKernel::new(g, c, EvalPoint::OnSource, KernelVariant::Dx);
        let image = FactoredBoundaryKernel::new(g, m, EvalPoint::Path(c), KernelVariant::Dx);
        let rows = map_indices(exec, n, |k| -> Result<f64> {
            if k == 0 {
                return Ok(slope0(s0));
            }
            let layer = weights.integrate(k, |j| (own.at_nodes(k, j) - image.at_nodes(k, j)) * v[j]);
            let init = gaussian_convolve(&g, s[k], grid.elapsed(k), slope0, Some(-s0), Some(s0))?;
            Ok(2.0 * kappa * layer + 2.0 * init)
        });
        rows.into_iter().collect()
    };

    let mut v = vec![0.0; n];
    let tol = 1e-12;
    let mut last = f64::NAN;
    for it in 1..=500 {
        let next = apply(&v)?;
        let res = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let norm = next.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if !res.is_finite() {
            return Err(Error::Diverged { component: 0, node: 0 });
        }
        v = next;
        last = res;
        if res <= tol * (1.0 + norm) {
            let (s, _) = front(&v);
            return Ok(ClassicalStefanRun {
                grid,
                s,
                flux: v,
                lambda,
                t_virtual,
                iterations: it,
                residual: res,
            });
        }
    }
    Err(Error::NonConvergence { iterations: 500, residual: last })
}
