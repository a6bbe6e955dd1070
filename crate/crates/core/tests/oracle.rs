mod common;

use falsebottom::oracle::{classical_stefan_via_machinery, fd_solve, neumann_lambda, FdConfig, NeumannProblem};
use falsebottom::reference::{reference_fd, reference_setup, zero_setup};
use falsebottom::Execution;
use proptest::prelude::*;
use statrs::function::erf::erf;

#[test]
fn lambda_round_trip() {
    // √π·0.5·e^{0.25}·erf(0.5) evaluated at 40 digits.
    let l = neumann_lambda(0.592_296_536_469_326_575_660).unwrap();
    assert!((l - 0.5).abs() < 1e-10, "{l}");
    assert!(neumann_lambda(1e-12).unwrap() < 1e-5);
    assert!(neumann_lambda(0.0).is_err());
    assert!(neumann_lambda(f64::NAN).is_err());
    let p = NeumannProblem::new(2.0, 0.592_296_536_469_326_575_660).unwrap();
    assert!((p.front(0.5) - 2.0 * 0.5 * 1.0).abs() < 1e-9);
}

#[test]
fn lambda_is_increasing_and_continuous() {
    let mut last = 0.0;
    let mut last_st = 0.0;
    for i in 1..=1000 {
        let st = 0.01 * i as f64;
        let l = neumann_lambda(st).unwrap();
        assert!(l > last);
        if i > 1 {
            // Lipschitz on the sampled range: dλ/dSt is bounded by its value near 0.
            assert!((l - last) <= 0.5 * (st - last_st) / l.min(1.0));
        }
        last = l;
        last_st = st;
    }
}

proptest! {
    #[test]
    fn lambda_solves_its_equation(st in 1e-6f64..10.0) {
        let l = neumann_lambda(st).unwrap();
        let lhs = std::f64::consts::PI.sqrt() * l * (l * l).exp() * erf(l);
        prop_assert!((lhs - st).abs() <= 1e-11 * st.max(1e-3));
        prop_assert!(neumann_lambda(2.0 * st).unwrap() > l);
    }
}

#[test]
fn machinery_tracks_the_similarity_front() {
    let lambda: f64 = 0.25;
    let st = std::f64::consts::PI.sqrt() * lambda * (lambda * lambda).exp() * erf(lambda);
    let t_v = 1.0 / (4.0 * lambda * lambda);
    let err = |n: usize| {
        let r = classical_stefan_via_machinery(1.0, 1.0, st, 1.0, 2.0 * t_v, n, Execution::default()).unwrap();
        assert!((r.lambda - lambda).abs() < 1e-12);
        assert!((r.t_virtual - t_v).abs() < 1e-9);
        r.relative_error(1.0)
    };
    let (a, b) = (err(64), err(128));
    assert!(b < 1e-2 && a / b >= 1.5, "{a} {b}");
    let frozen = classical_stefan_via_machinery(1.0, 0.0, 1.0, 0.3, 1.0, 16, Execution::Sequential).unwrap();
    assert!(frozen.s.iter().all(|&s| s == 0.3));
    assert!(classical_stefan_via_machinery(-1.0, 1.0, 1.0, 0.3, 1.0, 16, Execution::Sequential).is_err());
}

#[test]
fn fd_zero_data_is_static() {
    let cfg = FdConfig { far_t: 0.0, far_s: 0.0, n_ocean: 32, n_ice: 16, dt: 10.0, ..reference_fd() };
    let fd = fd_solve(&zero_setup(), &cfg, 1000.0).unwrap();
    assert!(fd.h0.iter().all(|&h| h == 0.0));
    assert!(fd.hu.iter().all(|&h| h == 0.05));
    assert!(fd.pinch_off.is_none());
    assert_eq!(fd.interfaces_at(500.0), (0.0, 0.05));
}

#[test]
fn fd_config_validation() {
    let s = reference_setup();
    assert!(reference_fd().validate(&s).is_ok());
    for bad in [
        FdConfig { l: 0.0, ..reference_fd() },
        FdConfig { n_ocean: 8, ..reference_fd() },
        FdConfig { dt: 0.0, ..reference_fd() },
        FdConfig { theta: 0.2, ..reference_fd() },
        FdConfig { far_s: f64::INFINITY, ..reference_fd() },
    ] {
        assert!(bad.validate(&s).is_err());
    }
    let shallow = FdConfig { l: -0.01, ..reference_fd() };
    assert!(shallow.far_field_warning(&s, 5000.0).is_some());
    assert!(reference_fd().far_field_warning(&s, 5000.0).is_none());
}

#[test]
fn fd_self_converges_and_conserves_salt() {
    let s = reference_setup();
    let t_end = 5000.0;
    let mut ends = Vec::new();
    for (dt, n_o, n_i) in [(4.0, 100, 25), (2.0, 200, 50), (1.0, 400, 100)] {
        let cfg = FdConfig { dt, n_ocean: n_o, n_ice: n_i, ..reference_fd() };
        let fd = fd_solve(&s, &cfg, t_end).unwrap();
        assert!(fd.salt_closure() <= 5e-3, "closure {}", fd.salt_closure());
        assert!((fd.t.last().unwrap() - t_end).abs() < 1e-9);
        ends.push(*fd.h0.last().unwrap());
    }
    let (d1, d2) = ((ends[1] - ends[0]).abs(), (ends[2] - ends[1]).abs());
    assert!(d2 <= 0.005 * ends[2].abs(), "{ends:?}");
    assert!(d1 / d2 >= 2.0, "order {}", (d1 / d2).log2());
    // The warm ice bottom ablates: h0 rises.
    assert!(ends[2] > s.h0_init);
}
