mod common;

use common::simpson;
use falsebottom::model::{
    derived_stefan_coefficients, freezing_salinity, validate_setup, Hypothesis, PhysicalParams,
    ProblemSetup, Profile, RawConductivities, CONTINUITY_TOL,
};
use falsebottom::quad::{SampledFunction, TimeGrid};
use falsebottom::model::VState;
use falsebottom::reference::{reference_params, reference_setup, warm_ocean_setup, zero_setup};
use falsebottom::volterra::boundaries_from_v;
use proptest::prelude::*;

#[test]
fn stefan_coefficients() {
    assert_eq!(derived_stefan_coefficients(2.0, 4.0, 1.0, 2.0).unwrap(), (1.0, 2.0));
    let (a, b) = derived_stefan_coefficients(917.0 * 3.34e5, 917.0 * 3.34e5, 917.0, 3.34e5).unwrap();
    assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
    let (c, d) = derived_stefan_coefficients(2.0, 4.0, 2.0, 2.0).unwrap();
    assert_eq!((c, d), (0.5, 1.0));
    assert!(derived_stefan_coefficients(0.0, 1.0, 1.0, 1.0).is_err());
    assert!(derived_stefan_coefficients(1.0, 1.0, -1.0, 1.0).is_err());
}

#[test]
fn params_from_raw_round_trip() {
    let raw = RawConductivities { lambda_i: 2.0, lambda_o: 0.5, rho_i: 917.0, l_f: 3.34e5 };
    let p = PhysicalParams::from_raw(raw, 1e-6, 1e-6, 1e-9, 0.054, 10.0).unwrap();
    assert!((p.lambda_i_tilde - 2.0 / (917.0 * 3.34e5)).abs() < 1e-20);
    let mut bad = p;
    bad.lambda_i_tilde *= 2.0;
    assert!(bad.validate().is_err());
}

#[test]
fn freezing_salinity_examples() {
    let mut p = reference_params();
    assert_eq!(freezing_salinity(0.0, 0.0, &p).unwrap(), 0.0);
    p.n0 = 0.0;
    assert!((freezing_salinity(-1.836, 0.0, &p).unwrap() - 34.0).abs() < 1e-12);
    p.n0 = 10.0;
    assert!((freezing_salinity(-1.0, 0.01, &p).unwrap() - 0.9 / 0.054).abs() < 1e-12);
    p.m0 = 0.0;
    assert!(freezing_salinity(-1.0, 0.0, &p).is_err());
}

#[test]
fn reference_setups_are_valid() {
    for s in [reference_setup(), zero_setup(), warm_ocean_setup()] {
        let r = validate_setup(&s);
        assert!(r.is_ok(), "{r}");
    }
    assert_eq!(reference_setup().gap(), 0.05);
}

#[test]
fn hypothesis_violations() {
    let mut s = reference_setup();
    s.hu_init = -0.05;
    assert!(validate_setup(&s).violates(Hypothesis::H1));

    let mut s = reference_setup();
    s.t_ice_init = Profile::linear(0.0, -1.836, (0.1 + 1.836) / 0.05);
    let r = validate_setup(&s);
    assert!(r.violates(Hypothesis::H2), "{r}");
    assert!(r.to_string().contains("H2"));

    let mut s = reference_setup();
    s.t_ocean_init = Profile::constant(-1.0);
    assert!(validate_setup(&s).violates(Hypothesis::H2));

    let mut s = reference_setup();
    s.s_init = Profile::constant(2e6);
    assert!(validate_setup(&s).violates(Hypothesis::H3));

    let mut s = reference_setup();
    s.s_init = Profile::constant(f64::NAN);
    assert!(validate_setup(&s).violates(Hypothesis::H3));

    let mut s = reference_setup();
    s.params.d = -1.0;
    assert!(validate_setup(&s).violates(Hypothesis::Params));
}

#[test]
fn profiles() {
    let t = Profile::table(vec![0.0, 1.0, 3.0], vec![1.0, 3.0, -1.0], None).unwrap();
    assert_eq!(t.value(0.5), 2.0);
    assert_eq!(t.value(2.0), 1.0);
    assert_eq!(t.value(-5.0), 1.0);
    assert_eq!(t.value(9.0), -1.0);
    assert_eq!(t.slope(0.5), 2.0);
    assert_eq!(t.far_field(), Some(1.0));
    assert!(Profile::table(vec![0.0, 0.0], vec![1.0, 2.0], None).is_err());
    assert!(Profile::table(vec![0.0], vec![1.0], None).is_err());
    let h = Profile::table(vec![0.0, 1.0], vec![0.0, 1.0], Some(vec![0.0, 3.0])).unwrap();
    // Cubic Hermite with y = s³ data reproduces the cubic.
    assert!((h.value(0.5) - 0.125).abs() < 1e-15);
    assert!((h.slope(0.5) - 0.75).abs() < 1e-15);
    let e = Profile::erf_step(0.0, 0.1, 2.0, -4.0);
    assert_eq!(e.value(0.0), -1.0);
    assert_eq!(e.far_field(), Some(2.0));
    let fd = (e.value(1e-6) - e.value(-1e-6)) / 2e-6;
    assert!((e.slope(0.0) - fd).abs() < 1e-6 * fd.abs());
    assert!(Profile::erf_step(0.0, 0.0, 1.0, 2.0).validate().is_err());
    assert_eq!(Profile::linear(1.0, 2.0, 0.0).far_field(), Some(2.0));
    assert_eq!(Profile::linear(1.0, 2.0, 1.0).far_field(), None);
}

#[test]
fn setup_serde_round_trip() {
    for s in [reference_setup(), warm_ocean_setup()] {
        let json = serde_json::to_string(&s).unwrap();
        let back: ProblemSetup = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}

#[test]
fn boundaries_match_independent_integrals() {
    let p = reference_params();
    let grid = TimeGrid::new(0.0, 100.0, 64).unwrap();
    let f = [|t: f64| 0.1 * t, |t: f64| 2.0 - 0.01 * t, |t: f64| -3.0 + 0.02 * t, |t: f64| 1.0 + 0.5 * t];
    let vals: [Vec<f64>; 4] = std::array::from_fn(|i| grid.nodes().into_iter().map(f[i]).collect());
    let v = VState::new(grid, vals).unwrap();
    let b = boundaries_from_v(&v, &p, 0.01, 0.06);
    for k in [0, 7, 33, 64] {
        let t = grid.node(k);
        let i1 = simpson(&f[1], 0.0, t, 1e-14);
        let i2 = simpson(&f[2], 0.0, t, 1e-14);
        let i3 = simpson(&f[3], 0.0, t, 1e-14);
        assert!((b.hu.values()[k] - (0.06 + p.lambda_i_tilde * i3)).abs() < 1e-10);
        let h0 = 0.01 + p.lambda_i_tilde * i2 - p.lambda_o_tilde * i1;
        assert!((b.h0.values()[k] - h0).abs() < 1e-10);
    }
}

#[test]
fn boundary_velocity_matches_differences() {
    let p = PhysicalParams { lambda_i_tilde: 1e-2, lambda_o_tilde: 2e-2, ..reference_params() };
    let err = |n: usize| {
        let grid = TimeGrid::new(0.0, 1.0, n).unwrap();
        let v = VState {
            components: [
                SampledFunction::zeros(grid),
                SampledFunction::from_fn(grid, |t| (2.0 * t).sin()).unwrap(),
                SampledFunction::from_fn(grid, |t| (3.0 * t).cos()).unwrap(),
                SampledFunction::from_fn(grid, |t| t.exp()).unwrap(),
            ],
        };
        let b = boundaries_from_v(&v, &p, 0.0, 1.0);
        let (h0, dh0) = (b.h0.values(), b.dh0.values());
        (1..n)
            .map(|k| ((h0[k + 1] - h0[k - 1]) / (2.0 * grid.dt()) - dh0[k]).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(32), err(64));
    assert!(e1 < 1e-4 && e1 / e2 > 3.5, "{e1} {e2}");
}

proptest! {
    #[test]
    fn validation_is_the_conjunction(
        h0 in -1.0f64..1.0,
        width in -0.1f64..0.5,
        t_bar in -3.0f64..0.0,
        ocean_shift in prop_oneof![Just(0.0), -1.0f64..1.0],
        top_shift in prop_oneof![Just(0.0), -1.0f64..1.0],
        ocean_slope in -100.0f64..100.0,
        salt in prop_oneof![0.0f64..40.0, Just(2e6)],
    ) {
        let hu = h0 + width;
        let ice_slope = if width > 0.0 { (top_shift - t_bar) / width } else { 0.0 };
        let setup = ProblemSetup {
            params: reference_params(),
            h0_init: h0,
            hu_init: hu,
            t_ocean_init: Profile::linear(h0, t_bar + ocean_shift, ocean_slope),
            t_ice_init: Profile::linear(h0, t_bar, ice_slope),
            s_init: Profile::constant(salt),
        };
        let report = validate_setup(&setup);
        let h1 = h0 < hu;
        let h2 = h1
            && (setup.t_ocean_init.value(h0) - setup.t_ice_init.value(h0)).abs() <= CONTINUITY_TOL
            && setup.t_ice_init.value(hu).abs() <= CONTINUITY_TOL;
        let h3 = salt.abs() <= 1e6;
        prop_assert_eq!(report.is_ok(), h1 && h2 && h3, "{}", report);
        prop_assert_eq!(report.violates(Hypothesis::H1), !h1);
        if h1 {
            prop_assert_eq!(report.violates(Hypothesis::H2), !h2);
            prop_assert_eq!(report.violates(Hypothesis::H3), !h3);
        }
    }

    #[test]
    fn freezing_relation_inverts(t0 in -5.0f64..5.0, dt0 in -1e-2f64..1e-2) {
        let p = reference_params();
        let s0 = freezing_salinity(t0, dt0, &p).unwrap();
        prop_assert!((t0 + p.n0 * dt0 + p.m0 * s0).abs() < 1e-12 * (1.0 + t0.abs() + (p.n0 * dt0).abs()));
    }
}
