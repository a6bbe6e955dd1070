//! Ready-made setups used by the tests, the bench and the bundled configs.

use crate::model::{PhysicalParams, ProblemSetup, Profile};
use crate::oracle::FdConfig;
use crate::volterra::SolverConfig;

/// Interface temperature of the reference setup, °C.
pub const T_BAR: f64 = -1.836;
/// Ocean salinity of the reference setup, psu.
pub const S_BAR: f64 = 34.0;

/// Laboratory-scale constants with eddy-scale ocean diffusivities, for which
/// `P` contracts at the step rule.
pub fn reference_params() -> PhysicalParams {
    PhysicalParams {
        lambda_i_tilde: 6.8e-8,
        lambda_o_tilde: 1.7e-8,
        d_i: 5e-7,
        d_o: 1e-6,
        d: 1e-6,
        m0: 0.054,
        n0: 5000.0,
        raw: None,
    }
}

/// 5 cm of ice over an ocean at its freezing point; ice temperature linear
/// from `T_BAR` at the bottom to 0 at the top.
pub fn reference_setup() -> ProblemSetup {
    let gap = 0.05;
    ProblemSetup {
        params: reference_params(),
        h0_init: 0.0,
        hu_init: gap,
        t_ocean_init: Profile::constant(T_BAR),
        t_ice_init: Profile::linear(0.0, T_BAR, -T_BAR / gap).with_hint(0.0, gap),
        s_init: Profile::constant(S_BAR),
    }
}

pub fn reference_solver() -> SolverConfig {
    SolverConfig {
        sigma_cap: 1e6,
        sigma_halvings: 2,
        n_steps: 128,
        t_end: 5000.0,
        ..SolverConfig::default()
    }
}

pub fn reference_fd() -> FdConfig {
    FdConfig {
        l: -1.0,
        n_ocean: 400,
        n_ice: 100,
        dt: 1.0,
        theta: 1.0,
        far_t: T_BAR,
        far_s: S_BAR,
        pinch_off_fraction: 1e-6,
    }
}

/// All initial data zero: every trace vanishes and nothing moves.
pub fn zero_setup() -> ProblemSetup {
    ProblemSetup {
        params: reference_params(),
        h0_init: 0.0,
        hu_init: 0.05,
        t_ocean_init: Profile::constant(0.0),
        t_ice_init: Profile::constant(0.0),
        s_init: Profile::constant(0.0),
    }
}

/// A 1 cm layer over an ocean that warms with depth to 2 °C: the lower face
/// melts faster than the upper one freezes and the layer closes.
pub fn warm_ocean_setup() -> ProblemSetup {
    let gap = 0.01;
    let warm = 2.0;
    ProblemSetup {
        params: PhysicalParams {
            lambda_o_tilde: 5e-7,
            ..reference_params()
        },
        h0_init: 0.0,
        hu_init: gap,
        t_ocean_init: Profile::erf_step(0.0, 0.05, warm, 2.0 * T_BAR - warm),
        t_ice_init: Profile::linear(0.0, T_BAR, -T_BAR / gap).with_hint(0.0, gap),
        s_init: Profile::constant(S_BAR),
    }
}
