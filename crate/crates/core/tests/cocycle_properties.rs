use approx::assert_abs_diff_eq;
use iel_core::spectra::{gamma_cocycle, kappa_cocycle, CocycleOptions};
use iel_core::system::{flow_end, ControlSignal, ControlSystem, IntegrationOptions, SystemSpec};
use proptest::prelude::*;

fn bundled() -> Vec<ControlSystem> {
    [
        r#"{"dim":1,"params":[1.0],"fields":"scalar_linear","control_box":{"lo":[-1],"hi":[1]},"state_box":{"lo":[-2],"hi":[2]}}"#,
        r#"{"dim":2,"params":[1.0,-1.0],"fields":"diag_linear_2d","control_box":{"lo":[-1,-1],"hi":[1,1]},"state_box":{"lo":[-2,-2],"hi":[2,2]}}"#,
        r#"{"dim":2,"params":[1.0],"fields":"bilinear_2d","control_box":{"lo":[-0.5],"hi":[0.5]},"state_box":{"lo":[-2,-2],"hi":[2,2]}}"#,
        r#"{"dim":1,"params":[1.0,1.0,0.05],"fields":"bistable_1d","control_box":{"lo":[-1],"hi":[1]},"state_box":{"lo":[-1.5],"hi":[1.5]}}"#,
    ]
    .iter()
    .map(|s| SystemSpec::from_json(s).unwrap().build().unwrap())
    .collect()
}

/// Piecewise-constant signal from unit-interval draws, scaled into the control box.
/// Eight pieces of at least 0.4 outlast the longest `t + s`.
fn signal(sys: &ControlSystem, pieces: &[(f64, f64)]) -> ControlSignal {
    let r = sys.control_range();
    let durations: Vec<f64> = pieces.iter().map(|p| 0.4 + 0.6 * p.0).collect();
    let values = pieces
        .iter()
        .map(|p| r.lo.iter().zip(&r.hi).map(|(a, b)| a + (b - a) * p.1).collect())
        .collect();
    ControlSignal::from_pieces(&durations, values).unwrap()
}

fn state(sys: &ControlSystem, w: &[f64]) -> Vec<f64> {
    let b = sys.state_box();
    (0..sys.dim()).map(|i| 0.5 * (b.lo[i] + (b.hi[i] - b.lo[i]) * w[i])).collect()
}

fn case() -> impl Strategy<Value = (usize, f64, f64, Vec<f64>, Vec<(f64, f64)>)> {
    (0usize..4, 0.05f64..1.5, 0.05f64..1.5, prop::collection::vec(0.0f64..1.0, 2), prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 8))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flow_property((i, t, s, w, p) in case()) {
        let sys = &bundled()[i];
        let u = signal(sys, &p);
        let x = state(sys, &w);
        let opts = IntegrationOptions::unbounded(1e-3);
        let direct = flow_end(sys, &x, &u, t + s, &opts).unwrap();
        let mid = flow_end(sys, &x, &u, t, &opts).unwrap();
        let split = flow_end(sys, &mid, &u.shift(t).unwrap(), s, &opts).unwrap();
        for (a, b) in direct.iter().zip(&split) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn gamma_is_additive_and_kappa_subadditive((i, t, s, w, p) in case()) {
        let sys = &bundled()[i];
        let u = signal(sys, &p);
        let x = state(sys, &w);
        let opts = CocycleOptions::default();
        let y = flow_end(sys, &x, &u, t, &opts.integration).unwrap();
        let v = u.shift(t).unwrap();
        let g = |x: &[f64], u: &ControlSignal, t| gamma_cocycle(sys, x, u, t, 1, &opts).unwrap();
        assert_abs_diff_eq!(g(&x, &u, t + s), g(&x, &u, t) + g(&y, &v, s), epsilon = 1e-6);
        let k = |x: &[f64], u: &ControlSignal, t| kappa_cocycle(sys, x, u, t, &opts).unwrap();
        prop_assert!(k(&x, &u, t + s) <= k(&x, &u, t) + k(&y, &v, s) + 1e-8);
    }

    #[test]
    fn kappa_depends_on_the_restriction_only((i, t, _s, w, p) in case()) {
        let sys = &bundled()[i];
        let u = signal(sys, &p);
        let x = state(sys, &w);
        let zero = ControlSignal::constant(vec![0.0; sys.inputs()], 5.0).unwrap();
        let other = u.restrict(t).unwrap().concat(&zero);
        let opts = CocycleOptions::default();
        prop_assert_eq!(kappa_cocycle(sys, &x, &u, t, &opts).unwrap(), kappa_cocycle(sys, &x, &other, t, &opts).unwrap());
    }
}
