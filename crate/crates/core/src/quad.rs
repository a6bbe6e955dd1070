//! Quadrature for the three integral shapes the reduction needs.
//!
//! * weakly singular Volterra integrals `∫ g(τ)/√(t−τ) dτ` by product
//!   integration of the piecewise-linear interpolant of `g` ([`AbelWeights`]);
//! * Gaussian convolutions against initial profiles ([`semi_infinite_convolve`],
//!   [`interval_convolve`]);
//! * running (cumulative trapezoid) integrals ([`running_integral`]).
//!
//! A global adaptive Gauss–Kronrod driver ([`integrate_adaptive`],
//! [`time_integral`]) is used for off-curve field evaluation, where kernels
//! are smooth but sharply peaked near `τ = t`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::GreenKernel;
use crate::model::Profile;

/// Uniform time grid `t_start = t_0 < t_1 < … < t_n = t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(Error::InvalidArgument("grid bounds must be finite".into()));
        }
        if t_end <= t_start {
            return Err(Error::InvalidArgument(format!(
                "grid end {t_end} must exceed start {t_start}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("grid needs at least one step".into()));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Time elapsed since the grid start at node `k`.
    pub fn elapsed(&self, k: usize) -> f64 {
        self.node(k) - self.t_start
    }

    /// Interval index `j` and offset `s ∈ [0, dt]` with `τ = t_j + s`.
    /// Times outside the grid are clamped to the end intervals.
    pub fn locate(&self, tau: f64) -> (usize, f64) {
        let dt = self.dt();
        let rel = (tau - self.t_start) / dt;
        let j = if rel <= 0.0 {
            0
        } else {
            (rel.floor() as usize).min(self.n_steps - 1)
        };
        (j, tau - self.node(j))
    }

    pub fn contains(&self, tau: f64) -> bool {
        let slack = 1e-12 * (self.t_end - self.t_start);
        tau >= self.t_start - slack && tau <= self.t_end + slack
    }
}

/// Real samples at every node of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {k} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub(crate) fn from_raw(grid: TimeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Piecewise-linear interpolant.
    pub fn value_at(&self, tau: f64) -> f64 {
        let (j, s) = self.grid.locate(tau);
        let w = s / self.grid.dt();
        self.values[j] * (1.0 - w) + self.values[j + 1] * w
    }

    /// Slope of the interpolant on the interval containing `tau`.
    pub fn slope_at(&self, tau: f64) -> f64 {
        let (j, _) = self.grid.locate(tau);
        (self.values[j + 1] - self.values[j]) / self.grid.dt()
    }

    /// Exact integral of the interpolant from the grid start to `tau`.
    pub fn integral_to(&self, cumulative: &SampledFunction, tau: f64) -> f64 {
        let (j, s) = self.grid.locate(tau);
        let dt = self.grid.dt();
        let a = self.values[j];
        let b = self.values[j + 1];
        cumulative.values[j] + a * s + (b - a) * s * s / (2.0 * dt)
    }
}

/// Product-integration weights for `∫_{t_0}^{t_k} ĝ(τ)/√(t_k−τ) dτ` on a
/// uniform grid, `ĝ` the piecewise-linear interpolant of nodal values.
///
/// On interval `[t_j, t_{j+1}]` with `m = k − j − 1` the contribution is
/// `√h (left[m] g_j + right[m] g_{j+1})`; the moments of `s^{-1/2}` against
/// the two hat functions are written in cancellation-free form.
#[derive(Debug, Clone)]
pub struct AbelWeights {
    sqrt_h: f64,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl AbelWeights {
    pub fn new(grid: &TimeGrid) -> Self {
        let n = grid.n_steps();
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for m in 0..n {
            let a = (m as f64).sqrt();
            let b = ((m + 1) as f64).sqrt();
            let d = 1.0 / (a + b);
            let d2 = d * d;
            left.push(2.0 * d2 * (b + 2.0 * a) / 3.0);
            right.push(2.0 * d2 * (2.0 * b + a) / 3.0);
        }
        Self { sqrt_h: grid.dt().sqrt(), left, right }
    }

    /// Integral up to node `k` given nodal values `g(j)` for `j = 0..=k`.
    #[inline]
    pub fn integrate(&self, k: usize, g: impl Fn(usize) -> f64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut g_left = g(0);
        for j in 0..k {
            let g_right = g(j + 1);
            let m = k - j - 1;
            acc += self.left[m] * g_left + self.right[m] * g_right;
            g_left = g_right;
        }
        acc * self.sqrt_h
    }

    /// Weight multiplying `g(j)` in the integral up to node `k`.
    pub fn weight(&self, k: usize, j: usize) -> f64 {
        assert!(j <= k);
        if k == 0 {
            return 0.0;
        }
        let mut w = 0.0;
        if j < k {
            w += self.left[k - j - 1];
        }
        if j > 0 {
            w += self.right[k - j];
        }
        w * self.sqrt_h
    }
}

/// `∫_{t_0}^{t_k} ĝ(τ)/√(t_k−τ) dτ` with `ĝ` the linear interpolant of `g`.
pub fn abel_integrate(g: &SampledFunction, k: usize) -> Result<f64> {
    let n = g.grid().n_steps();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("node index {k} outside 1..={n}")));
    }
    let w = AbelWeights::new(g.grid());
    Ok(w.integrate(k, |j| g.values()[j]))
}

/// Cumulative trapezoid integral, zero at the first node.
pub fn running_integral(v: &SampledFunction) -> SampledFunction {
    let grid = *v.grid();
    let half_dt = 0.5 * grid.dt();
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in v.values().windows(2) {
        acc += half_dt * (w[0] + w[1]);
        out.push(acc);
    }
    SampledFunction::from_raw(grid, out)
}

const GAUSS_TAIL: f64 = 8.0;
const GAUSS_PANELS: f64 = 200.0;
const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// `∫_{lo}^{hi} G(x,t;ξ,0) f(ξ) dξ` with either limit optionally infinite.
///
/// Uses `ξ = x + 2√(κt) z`, which turns the kernel into `e^{−z²}/√π`, truncates
/// to `|z| ≤ 8` and applies composite 4-point Gauss–Legendre on 200 panels per
/// 16 units of `z`.
pub fn gaussian_convolve(
    kernel: &GreenKernel,
    x: f64,
    t: f64,
    f: impl Fn(f64) -> f64,
    lo: Option<f64>,
    hi: Option<f64>,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("convolution needs t > 0, got {t}")));
    }
    let scale = 2.0 * (kernel.kappa() * t).sqrt();
    let z_lo = lo.map_or(-GAUSS_TAIL, |a| ((a - x) / scale).max(-GAUSS_TAIL));
    let z_hi = hi.map_or(GAUSS_TAIL, |b| ((b - x) / scale).min(GAUSS_TAIL));
    if z_hi <= z_lo {
        return Ok(0.0);
    }
    let width = z_hi - z_lo;
    let panels = ((GAUSS_PANELS * width / (2.0 * GAUSS_TAIL)).ceil() as usize).max(8);
    let h = width / panels as f64;
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = z_lo + (p as f64 + 0.5) * h;
        let mut panel = 0.0;
        for (node, weight) in GL4_NODES.iter().zip(GL4_WEIGHTS.iter()) {
            let z = mid + 0.5 * h * node;
            panel += weight * (-z * z).exp() * f(x + scale * z);
        }
        acc += 0.5 * h * panel;
    }
    Ok(acc * inv_sqrt_pi)
}

/// `∫_{−∞}^{b} G(x,t;ξ,0) f(ξ) dξ`; `b = None` integrates the whole line.
pub fn semi_infinite_convolve(
    kernel: &GreenKernel,
    x: f64,
    t: f64,
    f: &Profile,
    b: Option<f64>,
) -> Result<f64> {
    gaussian_convolve(kernel, x, t, |xi| f.value(xi), None, b)
}

/// `∫_{a}^{b} G(x,t;ξ,0) f(ξ) dξ` over a finite interval.
pub fn interval_convolve(
    kernel: &GreenKernel,
    x: f64,
    t: f64,
    f: &Profile,
    a: f64,
    b: f64,
) -> Result<f64> {
    gaussian_convolve(kernel, x, t, |xi| f.value(xi), Some(a), Some(b))
}

const GK15_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK15_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK15_WK[7] * fc;
    let mut gauss = GK15_WG[3] * fc;
    for i in 0..7 {
        let dx = h * GK15_X[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += GK15_WK[i] * s;
        if i % 2 == 1 {
            gauss += GK15_WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Tolerances for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-14, rel: 1e-11, max_subdivisions: 4000 }
    }
}

/// Global adaptive Gauss–Kronrod (7/15) over consecutive `breaks`.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, breaks: &[f64], tol: Tolerance) -> f64 {
    let mut heap = BinaryHeap::with_capacity(breaks.len() + 16);
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, err) = gk15(&f, w[0], w[1]);
            total += value;
            total_err += err;
            heap.push(Segment { a: w[0], b: w[1], value, err });
        }
    }
    let mut splits = 0;
    while total_err > tol.abs.max(tol.rel * total.abs()) && splits < tol.max_subdivisions {
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment { a: seg.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, err: e2 });
        splits += 1;
    }
    total
}

/// `∫_{t_0}^{t} f(τ) dτ` for integrands that may behave like `(t−τ)^{-1/2}`
/// or be sharply peaked as `τ → t`.
///
/// Substitutes `τ = t − u²`, with panel breaks at every grid node below `t`
/// (so piecewise-polynomial data stays smooth per panel) plus any `u_hints`.
pub fn time_integral(
    grid: &TimeGrid,
    t: f64,
    f: impl Fn(f64) -> f64,
    u_hints: &[f64],
    tol: Tolerance,
) -> f64 {
    let span = t - grid.t_start();
    if span <= 0.0 {
        return 0.0;
    }
    let mut breaks: Vec<f64> = Vec::with_capacity(grid.len() + u_hints.len() + 1);
    breaks.push(0.0);
    for k in 0..grid.len() {
        let tk = grid.node(k);
        if tk < t {
            breaks.push((t - tk).sqrt());
        }
    }
    let u_max = span.sqrt();
    for &u in u_hints {
        if u > 0.0 && u < u_max {
            breaks.push(u);
        }
    }
    breaks.push(u_max);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    integrate_adaptive(|u| 2.0 * u * f(t - u * u), &breaks, tol)
}
