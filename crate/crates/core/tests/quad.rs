mod common;

use common::{abel, rel};
use falsebottom::kernels::GreenKernel;
use falsebottom::model::Profile;
use falsebottom::quad::{
    abel_integrate, gaussian_convolve, interval_convolve, running_integral, semi_infinite_convolve,
    time_integral, AbelWeights, SampledFunction, TimeGrid, Tolerance,
};
use proptest::prelude::*;
use statrs::function::erf::erfc;
use std::f64::consts::PI;

fn sampled(t_end: f64, n: usize, f: impl Fn(f64) -> f64) -> SampledFunction {
    SampledFunction::from_fn(TimeGrid::new(0.0, t_end, n).unwrap(), f).unwrap()
}

#[test]
fn abel_moments() {
    for t in [0.3, 1.0, 7.5] {
        let one = sampled(t, 5, |_| 1.0);
        assert!(rel(abel_integrate(&one, 5).unwrap(), 2.0 * t.sqrt()) < 1e-13);
        let lin = sampled(t, 5, |s| s);
        assert!(rel(abel_integrate(&lin, 5).unwrap(), 4.0 / 3.0 * t.powf(1.5)) < 1e-13);
    }
}

#[test]
fn abel_rejects_bad_index() {
    let g = sampled(1.0, 4, |_| 1.0);
    assert!(abel_integrate(&g, 0).is_err());
    assert!(abel_integrate(&g, 5).is_err());
}

proptest! {
    #[test]
    fn abel_exact_on_piecewise_linear(
        values in prop::collection::vec(-10.0f64..10.0, 2..40),
        t_end in 0.01f64..100.0,
    ) {
        let n = values.len() - 1;
        let grid = TimeGrid::new(0.0, t_end, n).unwrap();
        let g = SampledFunction::new(grid, values.clone()).unwrap();
        let h = grid.dt();
        for k in 1..=n {
            let t = grid.node(k);
            // Closed-form moments of (t−τ)^{-1/2} against each linear piece.
            let mut exact = 0.0;
            for j in 0..k {
                let (a, b) = (t - grid.node(j), t - grid.node(j + 1));
                let (ga, gb) = (values[j], values[j + 1]);
                let m0 = 2.0 * (a.sqrt() - b.sqrt());
                let m1 = 2.0 / 3.0 * (a.powf(1.5) - b.powf(1.5));
                // In s = t − τ the piece is gb + slope·(s − b).
                let slope = (ga - gb) / h;
                exact += (gb - slope * b) * m0 + slope * m1;
            }
            let scale: f64 = values.iter().map(|v| v.abs()).sum::<f64>() * t.sqrt();
            let approx = abel_integrate(&g, k).unwrap();
            prop_assert!((approx - exact).abs() <= 1e-12 * scale.max(exact.abs()).max(1e-300));
        }
    }

    #[test]
    fn weights_reproduce_integrate(
        values in prop::collection::vec(-1.0f64..1.0, 2..20),
    ) {
        let n = values.len() - 1;
        let grid = TimeGrid::new(0.0, 2.0, n).unwrap();
        let w = AbelWeights::new(&grid);
        for k in 0..=n {
            let a = w.integrate(k, |j| values[j]);
            let b: f64 = (0..=k).map(|j| w.weight(k, j) * values[j]).sum();
            prop_assert!((a - b).abs() <= 1e-13);
        }
    }
}

#[test]
fn sqrt_integrand_converges_monotonically() {
    let exact = PI / 2.0;
    let mut last = f64::INFINITY;
    for n in [16, 32, 64, 128, 256] {
        let g = sampled(1.0, n, f64::sqrt);
        let err = (abel_integrate(&g, n).unwrap() - exact).abs();
        if n == 64 {
            assert!(err < 2e-3, "error {err} at 64");
        }
        assert!(err < last, "not monotone at {n}");
        last = err;
    }
    // The reference value itself, by an independent rule.
    assert!((abel(&f64::sqrt, 0.0, 1.0, 1e-13) - exact).abs() < 1e-10);
}

#[test]
fn smooth_integrand_converges_at_second_order() {
    let exact = abel(&|s: f64| (3.0 * s).cos(), 0.0, 1.0, 1e-13);
    let err = |n: usize| (abel_integrate(&sampled(1.0, n, |s| (3.0 * s).cos()), n).unwrap() - exact).abs();
    let (e1, e2) = (err(32), err(64));
    assert!(e1 / e2 > 3.0, "factor {}", e1 / e2);
}

#[test]
fn convolution_closed_forms() {
    let g = GreenKernel::new(0.5).unwrap();
    let (x, t) = (0.2, 0.3);
    let c = Profile::constant(2.5);
    assert!((semi_infinite_convolve(&g, x, t, &c, None).unwrap() - 2.5).abs() < 1e-10);
    for b in [0.5, 0.2, -0.4] {
        let exact = 2.5 * 0.5 * erfc((x - b) / (2.0 * (0.5 * t).sqrt()));
        assert!((semi_infinite_convolve(&g, x, t, &c, Some(b)).unwrap() - exact).abs() < 1e-8);
    }
    let ramp = Profile::linear(0.0, 0.0, 1.0);
    let v = semi_infinite_convolve(&g, x, t, &ramp, Some(0.5)).unwrap();
    assert!(rel(v, -0.046_461_271_845_292_737) < 1e-10);
    let cos = gaussian_convolve(&g, x, t, |xi| (3.0 * xi).cos(), None, None).unwrap();
    assert!(rel(cos, 0.213_960_219_929_522_143) < 1e-10);
    let inside = interval_convolve(&g, x, t, &c, -0.1, 0.5).unwrap();
    let s = 2.0 * (0.5 * t).sqrt();
    let exact = 2.5 * 0.5 * (erfc((x - 0.5) / s) - erfc((x + 0.1) / s));
    assert!((inside - exact).abs() < 1e-8);
    assert!(gaussian_convolve(&g, x, 0.0, |_| 1.0, None, None).is_err());
}

#[test]
fn convolution_delta_limit() {
    let g = GreenKernel::new(1.0).unwrap();
    let f = Profile::linear(0.0, 1.0, 3.0);
    let x = -0.5;
    for t in [1e-2, 1e-4, 1e-6] {
        let v = semi_infinite_convolve(&g, x, t, &f, Some(0.0)).unwrap();
        assert!((v - f.value(x)).abs() <= 3.0 * t.sqrt(), "t={t}: {v}");
    }
}

#[test]
fn running_integral_basics() {
    let z = running_integral(&SampledFunction::zeros(TimeGrid::new(0.0, 1.0, 8).unwrap()));
    assert!(z.values().iter().all(|&v| v == 0.0));
    let lin = running_integral(&sampled(2.0, 8, |s| 3.0 * s + 1.0));
    for (k, &v) in lin.values().iter().enumerate() {
        let t = 0.25 * k as f64;
        assert!((v - (1.5 * t * t + t)).abs() < 1e-14);
    }
}

/// `κ∫_0^t p G_x(s0 + side·ε, t; s0, τ) dτ` on the constant curve `s0`.
fn layer(kappa: f64, p: f64, s0: f64, t: f64, x: f64) -> f64 {
    let g = GreenKernel::new(kappa).unwrap();
    let grid = TimeGrid::new(0.0, t, 1).unwrap();
    let u_star = (x - s0).abs() / (2.0 * kappa.sqrt());
    let tol = Tolerance { abs: 1e-16, rel: 1e-13, max_subdivisions: 20_000 };
    kappa * time_integral(&grid, t, |tau| p * g.dx(x, t, s0, tau).unwrap_or(0.0), &[0.5 * u_star, u_star, 2.0 * u_star], tol)
}

#[test]
fn jump_relation_on_a_constant_curve() {
    let (kappa, p, s0, t): (f64, f64, f64, f64) = (0.3, 1.7, 0.4, 2.0);
    let scale = (kappa * t).sqrt();
    for side in [-1.0, 1.0] {
        let eps: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5].iter().map(|e| e * scale).collect();
        let vals: Vec<f64> = eps.iter().map(|&e| layer(kappa, p, s0, t, s0 + side * e)).collect();
        // Linear in ε near the curve; one Richardson step over the last pair.
        let limit = (10.0 * vals[3] - vals[2]) / 9.0;
        let expected = -side * p / 2.0;
        assert!((limit - expected).abs() < 1e-4, "side {side}: {limit}");
        for (e, v) in eps.iter().zip(&vals) {
            let exact = -side * 0.5 * p * erfc(e / (2.0 * scale));
            assert!((v - exact).abs() < 1e-8, "eps {e}: {v} vs {exact}");
        }
    }
}
