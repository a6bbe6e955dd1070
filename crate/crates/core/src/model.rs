//! Physical constants, initial data, the unknown traces `v`, interface
//! trajectories, and the hypotheses every admissible starting state must meet.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::kernels::CurveRef;
use crate::quad::{SampledFunction, TimeGrid};

/// Material constants in SI units, temperatures in °C, salinity in psu.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// `λ_I/(ρ_I L_f)`, multiplies the ice-side gradient in both Stefan conditions.
    pub lambda_i_tilde: f64,
    /// `λ_O/(ρ_I L_f)`, multiplies the ocean-side gradient at the lower interface.
    pub lambda_o_tilde: f64,
    /// Thermal diffusivity of ice.
    pub d_i: f64,
    /// Thermal diffusivity of sea water.
    pub d_o: f64,
    /// Molecular diffusivity of salt.
    pub d: f64,
    /// Freezing-point slope, °C/psu.
    pub m0: f64,
    /// Coefficient of `T_0'` in the freezing relation, s.
    pub n0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawConductivities>,
}

/// Dimensional inputs the Stefan coefficients may be derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawConductivities {
    pub lambda_i: f64,
    pub lambda_o: f64,
    pub rho_i: f64,
    pub l_f: f64,
}

impl PhysicalParams {
    #[allow(clippy::too_many_arguments)]
    pub fn from_raw(
        raw: RawConductivities,
        d_i: f64,
        d_o: f64,
        d: f64,
        m0: f64,
        n0: f64,
    ) -> Result<Self> {
        let (li, lo) = derived_stefan_coefficients(raw.lambda_i, raw.lambda_o, raw.rho_i, raw.l_f)?;
        let p = Self { lambda_i_tilde: li, lambda_o_tilde: lo, d_i, d_o, d, m0, n0, raw: Some(raw) };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_i_tilde", self.lambda_i_tilde),
            ("lambda_o_tilde", self.lambda_o_tilde),
            ("d_i", self.d_i),
            ("d_o", self.d_o),
            ("d", self.d),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("m0", self.m0), ("n0", self.n0)] {
            if !v.is_finite() || v == 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be finite and non-zero, got {v}")));
            }
        }
        if let Some(raw) = self.raw {
            let (li, lo) = derived_stefan_coefficients(raw.lambda_i, raw.lambda_o, raw.rho_i, raw.l_f)?;
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
            if !close(li, self.lambda_i_tilde) || !close(lo, self.lambda_o_tilde) {
                return Err(Error::InvalidArgument(
                    "Stefan coefficients disagree with raw conductivities".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn lambda_sum(&self) -> f64 {
        self.lambda_i_tilde + self.lambda_o_tilde
    }
}

/// `(λ_I/(ρ_I L_f), λ_O/(ρ_I L_f))`.
pub fn derived_stefan_coefficients(
    lambda_i: f64,
    lambda_o: f64,
    rho_i: f64,
    l_f: f64,
) -> Result<(f64, f64)> {
    for (name, v) in [("lambda_i", lambda_i), ("lambda_o", lambda_o), ("rho_i", rho_i), ("l_f", l_f)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    let latent = rho_i * l_f;
    Ok((lambda_i / latent, lambda_o / latent))
}

/// Interface salinity from the freezing relation `T_0 + n_0 T_0' = −m_0 S_0`.
pub fn freezing_salinity(t0: f64, dt0: f64, params: &PhysicalParams) -> Result<f64> {
    if params.m0 == 0.0 {
        return Err(Error::Domain("m0 must be non-zero".into()));
    }
    Ok(-(t0 + params.n0 * dt0) / params.m0)
}

/// One-dimensional initial profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    #[serde(flatten)]
    pub shape: Shape,
    /// Range over which the profile carries structure; sampling and
    /// reconstruction widths use it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_hint: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Constant { value: f64 },
    Linear { x_ref: f64, value: f64, slope: f64 },
    /// `left + (right − left)(1 + erf((x − center)/width))/2`
    ErfStep { center: f64, width: f64, left: f64, right: f64 },
    /// Linear interpolation, or cubic Hermite when `slopes` is given;
    /// constant extrapolation with the end values.
    Table {
        x: Vec<f64>,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slopes: Option<Vec<f64>>,
    },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Self { shape: Shape::Constant { value }, domain_hint: None }
    }

    pub fn linear(x_ref: f64, value: f64, slope: f64) -> Self {
        Self { shape: Shape::Linear { x_ref, value, slope }, domain_hint: None }
    }

    pub fn erf_step(center: f64, width: f64, left: f64, right: f64) -> Self {
        Self { shape: Shape::ErfStep { center, width, left, right }, domain_hint: None }
    }

    pub fn table(x: Vec<f64>, values: Vec<f64>, slopes: Option<Vec<f64>>) -> Result<Self> {
        let hint = match (x.first(), x.last()) {
            (Some(&a), Some(&b)) => Some([a, b]),
            _ => None,
        };
        let p = Self { shape: Shape::Table { x, values, slopes }, domain_hint: hint };
        p.validate()?;
        Ok(p)
    }

    pub fn with_hint(mut self, lo: f64, hi: f64) -> Self {
        self.domain_hint = Some([lo, hi]);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("profile {name} must be finite")))
            }
        };
        match &self.shape {
            Shape::Constant { value } => finite("value", *value)?,
            Shape::Linear { x_ref, value, slope } => {
                finite("x_ref", *x_ref)?;
                finite("value", *value)?;
                finite("slope", *slope)?;
            }
            Shape::ErfStep { center, width, left, right } => {
                finite("center", *center)?;
                finite("left", *left)?;
                finite("right", *right)?;
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::InvalidArgument("erf_step width must be positive".into()));
                }
            }
            Shape::Table { x, values, slopes } => {
                if x.len() < 2 || x.len() != values.len() {
                    return Err(Error::InvalidArgument(
                        "table needs at least two nodes and matching value count".into(),
                    ));
                }
                if slopes.as_ref().is_some_and(|s| s.len() != x.len()) {
                    return Err(Error::InvalidArgument("table slope count mismatch".into()));
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidArgument("table nodes must increase strictly".into()));
                }
                let all = x.iter().chain(values).chain(slopes.iter().flatten());
                if all.into_iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("table entries must be finite".into()));
                }
            }
        }
        if let Some([lo, hi]) = self.domain_hint {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidArgument("domain hint must be an increasing pair".into()));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Constant { value } => *value,
            Shape::Linear { x_ref, value, slope } => value + slope * (x - x_ref),
            Shape::ErfStep { center, width, left, right } => {
                left + (right - left) * 0.5 * (1.0 + erf((x - center) / width))
            }
            Shape::Table { x: xs, values, slopes } => table_eval(xs, values, slopes.as_deref(), x).0,
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Constant { .. } => 0.0,
            Shape::Linear { slope, .. } => *slope,
            Shape::ErfStep { center, width, left, right } => {
                let z = (x - center) / width;
                (right - left) * (-z * z).exp() / (width * std::f64::consts::PI.sqrt())
            }
            Shape::Table { x: xs, values, slopes } => table_eval(xs, values, slopes.as_deref(), x).1,
        }
    }

    /// Limit as `x → −∞`, when the profile has one.
    pub fn far_field(&self) -> Option<f64> {
        match &self.shape {
            Shape::Constant { value } => Some(*value),
            Shape::Linear { slope, value, .. } => (*slope == 0.0).then_some(*value),
            Shape::ErfStep { left, .. } => Some(*left),
            Shape::Table { values, .. } => values.first().copied(),
        }
    }

    pub fn hint_width(&self) -> Option<f64> {
        self.domain_hint.map(|[lo, hi]| hi - lo)
    }
}

fn table_eval(xs: &[f64], values: &[f64], slopes: Option<&[f64]>, x: f64) -> (f64, f64) {
    let n = xs.len();
    if x < xs[0] {
        return (values[0], 0.0);
    }
    if x > xs[n - 1] {
        return (values[n - 1], 0.0);
    }
    let i = xs.partition_point(|&xi| xi <= x).clamp(1, n - 1) - 1;
    let h = xs[i + 1] - xs[i];
    let s = (x - xs[i]) / h;
    let (y0, y1) = (values[i], values[i + 1]);
    match slopes {
        None => (y0 + (y1 - y0) * s, (y1 - y0) / h),
        Some(m) => {
            let (m0, m1) = (m[i] * h, m[i + 1] * h);
            let s2 = s * s;
            let s3 = s2 * s;
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            let value = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
            let d00 = 6.0 * s2 - 6.0 * s;
            let d10 = 3.0 * s2 - 4.0 * s + 1.0;
            let d01 = -6.0 * s2 + 6.0 * s;
            let d11 = 3.0 * s2 - 2.0 * s;
            let slope = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / h;
            (value, slope)
        }
    }
}

/// Initial state: interface positions and the three initial profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSetup {
    pub params: PhysicalParams,
    /// `h_0^0`, ice–ocean interface.
    pub h0_init: f64,
    /// `h_u^0`, ice–pond interface.
    pub hu_init: f64,
    /// Ocean temperature on `(−∞, h_0^0]`.
    pub t_ocean_init: Profile,
    /// Ice temperature on `[h_0^0, h_u^0]`.
    pub t_ice_init: Profile,
    /// Ocean salinity on `(−∞, h_0^0]`.
    pub s_init: Profile,
}

impl ProblemSetup {
    pub fn gap(&self) -> f64 {
        self.hu_init - self.h0_init
    }

    /// Interface temperature `T^0(h_0^0)`, taken from the ice side.
    pub fn interface_temperature(&self) -> f64 {
        self.t_ice_init.value(self.h0_init)
    }

    /// Fails unless [`validate_setup`] reports no violations.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_setup(self);
        if report.is_ok() {
            Ok(())
        } else {
            Err(Error::Prolongation(report))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    Params,
    H1,
    H2,
    H3,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::Params => "params",
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub hypothesis: Hypothesis,
    pub message: String,
    pub measured: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, h: Hypothesis) -> bool {
        self.violations.iter().any(|v| v.hypothesis == h)
    }

    fn push(&mut self, hypothesis: Hypothesis, message: impl Into<String>, measured: f64) {
        self.violations.push(Violation { hypothesis, message: message.into(), measured });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {} (measured {:e})", v.hypothesis, v.message, v.measured)?;
        }
        Ok(())
    }
}

/// Absolute tolerance on the temperature continuity conditions, °C.
pub const CONTINUITY_TOL: f64 = 1e-10;
/// Sampled finite-difference slopes above this count as unbounded, °C/m or psu/m.
pub const SLOPE_LIMIT: f64 = 1e9;
/// Sampled salinities above this count as unbounded, psu.
pub const SALINITY_LIMIT: f64 = 1e6;
const SAMPLES: usize = 10_000;

/// Dense sample over the profile's hint (or `fallback`) plus geometric tails
/// towards `−∞` when `tail` is set.
fn sample_points(lo: f64, hi: f64, tail: bool) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..SAMPLES)
        .map(|i| lo + (hi - lo) * i as f64 / (SAMPLES - 1) as f64)
        .collect();
    if tail {
        let width = (hi - lo).max(1e-6);
        for k in 1..=12 {
            xs.push(lo - width * 2f64.powi(k));
        }
        xs.sort_by(f64::total_cmp);
    }
    xs
}

fn max_fd_slope(p: &Profile, xs: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for w in xs.windows(2) {
        let s = (p.value(w[1]) - p.value(w[0])) / (w[1] - w[0]);
        if !s.is_finite() {
            return f64::INFINITY;
        }
        worst = worst.max(s.abs());
    }
    worst
}

/// Checks (H1)–(H3) on a starting state; violations are returned as data.
pub fn validate_setup(setup: &ProblemSetup) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = setup.params.validate() {
        report.push(Hypothesis::Params, e.to_string(), f64::NAN);
    }
    for (name, p) in [
        ("t_ocean_init", &setup.t_ocean_init),
        ("t_ice_init", &setup.t_ice_init),
        ("s_init", &setup.s_init),
    ] {
        if let Err(e) = p.validate() {
            let h = if name == "s_init" { Hypothesis::H3 } else { Hypothesis::H2 };
            report.push(h, format!("{name}: {e}"), f64::NAN);
        }
    }
    if !report.is_ok() {
        return report;
    }

    let (h0, hu) = (setup.h0_init, setup.hu_init);
    if !(h0.is_finite() && hu.is_finite()) || !(h0 < hu) {
        report.push(Hypothesis::H1, format!("need h0 < hu, got h0={h0}, hu={hu}"), hu - h0);
        return report;
    }

    let jump = setup.t_ocean_init.value(h0) - setup.t_ice_init.value(h0);
    if !(jump.abs() <= CONTINUITY_TOL) {
        report.push(Hypothesis::H2, "T0 discontinuous at h0", jump);
    }
    let top = setup.t_ice_init.value(hu);
    if !(top.abs() <= CONTINUITY_TOL) {
        report.push(Hypothesis::H2, "T0(hu-) must vanish", top);
    }

    let ocean_width = |p: &Profile| p.hint_width().unwrap_or(1.0).max(hu - h0);
    let ocean_lo = |p: &Profile| p.domain_hint.map_or(h0 - ocean_width(p), |[lo, _]| lo.min(h0 - 1e-9));
    let ocean_pts = |p: &Profile| sample_points(ocean_lo(p), h0, true);

    let s_ocean = max_fd_slope(&setup.t_ocean_init, &ocean_pts(&setup.t_ocean_init));
    if !(s_ocean <= SLOPE_LIMIT) {
        report.push(Hypothesis::H2, "ocean temperature slope unbounded", s_ocean);
    }
    let s_ice = max_fd_slope(&setup.t_ice_init, &sample_points(h0, hu, false));
    if !(s_ice <= SLOPE_LIMIT) {
        report.push(Hypothesis::H2, "ice temperature slope unbounded", s_ice);
    }

    let s_pts = ocean_pts(&setup.s_init);
    let s_max = s_pts.iter().map(|&x| setup.s_init.value(x).abs()).fold(0.0, f64::max);
    if !(s_max <= SALINITY_LIMIT) {
        report.push(Hypothesis::H3, "salinity unbounded", s_max);
    }
    let s_slope = max_fd_slope(&setup.s_init, &s_pts);
    if !(s_slope <= SLOPE_LIMIT) {
        report.push(Hypothesis::H3, "salinity discontinuous", s_slope);
    }
    report
}

/// Boundary traces `v = (T_0', T_x(h_0−), T_x(h_0+), T_x(h_u−))` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VState {
    pub components: [SampledFunction; 4],
}

impl VState {
    pub fn new(grid: TimeGrid, values: [Vec<f64>; 4]) -> Result<Self> {
        let [a, b, c, d] = values;
        Ok(Self {
            components: [
                SampledFunction::new(grid, a)?,
                SampledFunction::new(grid, b)?,
                SampledFunction::new(grid, c)?,
                SampledFunction::new(grid, d)?,
            ],
        })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { components: std::array::from_fn(|_| SampledFunction::zeros(grid)) }
    }

    pub fn grid(&self) -> &TimeGrid {
        self.components[0].grid()
    }

    pub fn v(&self, i: usize) -> &[f64] {
        self.components[i].values()
    }

    pub fn sup_norm(&self) -> f64 {
        self.components.iter().map(SampledFunction::sup_norm).fold(0.0, f64::max)
    }

    /// `max_{i,k} |v_i(t_k) − w_i(t_k)|`.
    pub fn distance(&self, other: &VState) -> f64 {
        let mut d = 0.0_f64;
        for i in 0..4 {
            for (a, b) in self.v(i).iter().zip(other.v(i)) {
                d = d.max((a - b).abs());
            }
        }
        d
    }
}

/// Interface trajectories with velocities on the solver grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPath {
    pub h0: SampledFunction,
    pub hu: SampledFunction,
    pub dh0: SampledFunction,
    pub dhu: SampledFunction,
}

impl BoundaryPath {
    pub fn grid(&self) -> &TimeGrid {
        self.h0.grid()
    }

    pub fn lower(&self) -> CurveRef<'_> {
        CurveRef { grid: self.h0.grid(), pos: self.h0.values(), vel: self.dh0.values() }
    }

    pub fn upper(&self) -> CurveRef<'_> {
        CurveRef { grid: self.hu.grid(), pos: self.hu.values(), vel: self.dhu.values() }
    }

    pub fn min_gap(&self) -> f64 {
        self.hu
            .values()
            .iter()
            .zip(self.h0.values())
            .map(|(u, l)| u - l)
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stefan_coefficients() {
        assert_eq!(derived_stefan_coefficients(2.0, 4.0, 1.0, 2.0).unwrap(), (1.0, 2.0));
        let (a, b) = derived_stefan_coefficients(917.0 * 3.34e5, 917.0 * 3.34e5, 917.0, 3.34e5).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        assert!(matches!(derived_stefan_coefficients(1.0, 1.0, 0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn table_hermite_reproduces_quadratic() {
        let f = |x: f64| 1.0 - 2.0 * x + 3.0 * x * x;
        let df = |x: f64| -2.0 + 6.0 * x;
        let xs = vec![0.0, 0.3, 0.5, 1.0];
        let p = Profile::table(
            xs.clone(),
            xs.iter().map(|&x| f(x)).collect(),
            Some(xs.iter().map(|&x| df(x)).collect()),
        )
        .unwrap();
        for x in [0.1, 0.42, 0.77] {
            assert!((p.value(x) - f(x)).abs() < 1e-14);
            assert!((p.slope(x) - df(x)).abs() < 1e-13);
        }
        assert_eq!(p.value(-5.0), f(0.0));
        assert_eq!(p.slope(-5.0), 0.0);
        assert!((p.slope(0.0) - df(0.0)).abs() < 1e-13);
        assert!((p.slope(1.0) - df(1.0)).abs() < 1e-13);
        assert_eq!(p.far_field(), Some(f(0.0)));
    }

    #[test]
    fn table_rejects_unsorted() {
        assert!(Profile::table(vec![0.0, 0.0], vec![1.0, 2.0], None).is_err());
        assert!(Profile::table(vec![0.0], vec![1.0], None).is_err());
    }

    #[test]
    fn profile_json_uses_kind_tag() {
        let p: Profile = serde_json::from_str(r#"{"kind":"linear","x_ref":0,"value":1,"slope":2}"#).unwrap();
        assert_eq!(p.value(1.0), 3.0);
        let q: Profile = serde_json::from_str(r#"{"kind":"constant","value":4,"domain_hint":[-1,0]}"#).unwrap();
        assert_eq!(q.domain_hint, Some([-1.0, 0.0]));
    }
}
