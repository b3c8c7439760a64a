//! Property tests over random inputs.

use proptest::prelude::*;

use stefan_core::constants::decay_profile;
use stefan_core::geometry::ModulusParams;
use stefan_core::graphs::{BetaMap, RegularizedGraph};
use stefan_core::solver::{
    run_simulation, Boundary, BoundaryKind, DtPolicy, Grid, InitialData, Scenario, Tolerances, VectorField,
};

fn beta_maps() -> impl Strategy<Value = BetaMap> {
    prop_oneof![
        Just(BetaMap::Identity),
        (-0.9f64..3.0, 0.05f64..2.0).prop_map(|(amplitude, scale)| BetaMap::TanhPerturbed { amplitude, scale }),
        (-1.0f64..0.0, 0.1f64..1.0, 0.2f64..5.0, 0.2f64..5.0, 0.2f64..5.0).prop_map(|(b0, gap, s0, s1, s2)| {
            BetaMap::PiecewiseLinear {
                breakpoints: vec![b0, b0 + gap],
                slopes: vec![s0, s1, s2],
            }
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn beta_round_trip(beta in beta_maps(), u in -10.0f64..10.0) {
        beta.validate().unwrap();
        let back = beta.inverse(beta.apply(u));
        prop_assert!((back - u).abs() <= 1e-12 * (1.0 + u.abs()), "{u} -> {back}");
    }

    #[test]
    fn beta_is_increasing(beta in beta_maps(), u in -10.0f64..10.0, d in 1e-6f64..1.0) {
        prop_assert!(beta.apply(u + d) > beta.apply(u));
    }

    #[test]
    fn enthalpy_is_increasing(
        a in -1.0f64..1.0,
        lh in 0.0f64..=1.0,
        eps in 0.01f64..0.5,
        u in -2.0f64..2.0,
        d in 1e-6f64..0.5,
    ) {
        let g = RegularizedGraph::new(a, lh, eps, BetaMap::Identity).unwrap();
        prop_assert!(g.solver_enthalpy(u + d).0 > g.solver_enthalpy(u).0);
    }

    #[test]
    fn decay_profile_never_increases(
        k in 0.01f64..5.0,
        c3 in 1.0f64..10.0,
        p in 2.0f64..5.0,
        r0 in 0.01f64..1.0,
        t in 0.0f64..1.0,
        dt in 0.0f64..1.0,
    ) {
        let a = decay_profile(k, t, 0.0, r0, c3, p).unwrap();
        let b = decay_profile(k, t + dt, 0.0, r0, c3, p).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-14));
        prop_assert!(a <= k / c3 * (1.0 + 1e-14));
    }

    #[test]
    fn omega_doubling(alpha in 0.05f64..=0.5, p in 2.0f64..6.0, l in 1.0f64..100.0, x in 0.0f64..50.0) {
        let q = 1.0 / alpha - 1.0;
        let kappa = if q == 1.0 { f64::INFINITY } else { q / (q - 1.0) };
        let m = ModulusParams { n: 2, p, alpha, kappa, l, m: 2.0, r0: 1.0 };
        prop_assert!(m.omega_log(x) <= 32.0 * m.omega_log(x + 32f64.ln()));
    }
}

fn fourier(base: f64, amplitudes: Vec<f64>, p: f64, graph: RegularizedGraph) -> Scenario {
    Scenario {
        grid: Grid::line(21, 1.0).unwrap(),
        p,
        graph,
        vector_field: VectorField::PLaplacian,
        initial: InitialData::Fourier { base, amplitudes },
        boundary: Boundary::uniform(BoundaryKind::ZeroFlux),
        t_end: 0.01,
        dt: DtPolicy::Fixed { dt: 1e-3 },
        tolerances: Tolerances::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ordered_data_stay_ordered(
        p in prop_oneof![Just(2.0), Just(3.0)],
        a in -0.3f64..0.3,
        lh in 0.0f64..=1.0,
        amps in proptest::collection::vec(-0.5f64..0.5, 3),
        lift in 0.0f64..0.3,
    ) {
        let g = RegularizedGraph::new(a, lh, 0.1, BetaMap::Identity).unwrap();
        let lo = run_simulation(&fourier(0.0, amps.clone(), p, g.clone())).unwrap();
        let hi = run_simulation(&fourier(lift, amps, p, g)).unwrap();
        for k in 0..lo.levels() {
            for (x, y) in lo.u[k].iter().zip(&hi.u[k]) {
                prop_assert!(x - y <= 1e-9);
            }
        }
    }
}
