//! Independent reference tools for the integration tests. Nothing here calls
//! into the crate's quadrature.
#![allow(dead_code)]

/// Adaptive Simpson on `[a, b]` to absolute tolerance `eps`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, eps, 48)
}

/// Simpson over consecutive break points.
pub fn simpson_breaks(f: &dyn Fn(f64) -> f64, breaks: &[f64], eps: f64) -> f64 {
    breaks.windows(2).map(|w| simpson(f, w[0], w[1], eps)).sum()
}

/// `∫_{t0}^{t} f(τ)/√(t−τ) dτ` via `τ = t − s²`, which removes the singularity.
pub fn abel(f: &dyn Fn(f64) -> f64, t0: f64, t: f64, eps: f64) -> f64 {
    let r = (t - t0).sqrt();
    2.0 * simpson(&|s: f64| f(t - s * s), 0.0, r, eps)
}

/// The heat kernel written out directly.
pub fn heat(kappa: f64, x: f64, t: f64, xi: f64, tau: f64) -> f64 {
    let dt = t - tau;
    (-(x - xi).powi(2) / (4.0 * kappa * dt)).exp() / (2.0 * (std::f64::consts::PI * kappa * dt).sqrt())
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
