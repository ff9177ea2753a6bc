use proptest::prelude::*;

use stefan_limit::grid::{Grid1D, ScalarField, SpaceTimeField};
use stefan_limit::nonlinearity::{Epsilon, NonlinearityKind, NonlinearitySpec};
use stefan_limit::presets::smooth_step;
use stefan_limit::solver::{comparison_check, solve, BoundarySpec, NewtonParams, ProblemSpec};
use stefan_limit::transforms::{w_equation_residual, TimeRule, TransformedRun};

fn problem(grid: Grid1D, eps: f64, f: NonlinearitySpec, u0: Vec<f64>) -> ProblemSpec {
    ProblemSpec::new(
        Epsilon::new(eps).unwrap(),
        f,
        ScalarField::new(grid, u0).unwrap(),
        BoundarySpec::neumann(),
        1.0,
    )
    .unwrap()
}

fn steps(grid: Grid1D, center: f64, left: f64, right: f64) -> Vec<f64> {
    grid.xs()
        .iter()
        .map(|&x| smooth_step(x, center, 0.1, left, right))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ordered_steps_stay_ordered(
        c in -0.5f64..0.5,
        shift in 0.0f64..0.3,
        left in 0.0f64..1.0,
        right in -1.0f64..0.0,
        log_eps in -3.0f64..0.0,
    ) {
        let g = Grid1D::unit(32, 80).unwrap();
        let eps = 10f64.powf(log_eps);
        let f = NonlinearitySpec::zero();
        // moving the step to the right raises the profile
        let lo = solve(&problem(g, eps, f.clone(), steps(g, c, left, right)), &NewtonParams::default()).unwrap();
        let hi = solve(&problem(g, eps, f, steps(g, c + shift, left, right)), &NewtonParams::default()).unwrap();
        let rep = comparison_check(&lo, &hi, 1e-9).unwrap();
        prop_assert_eq!(rep.violations, 0);
    }

    #[test]
    fn scheme_rule_satisfies_the_w_equation(
        c in -0.5f64..0.5,
        left in 0.1f64..1.0,
        right in -1.0f64..0.0,
        log_eps in -3.0f64..0.0,
        shift in 0.0f64..0.5,
        decay in 0.0f64..2.0,
    ) {
        let g = Grid1D::unit(32, 80).unwrap();
        let f = NonlinearitySpec::new(NonlinearityKind::LinearDecay { c: decay }, 1.0).unwrap();
        let spec = problem(g, 10f64.powf(log_eps), f.clone(), steps(g, c, left, right));
        let run = solve(&spec, &NewtonParams::default()).unwrap();
        let tr = TransformedRun::at_time(&run.u, spec.eps, &f, shift, TimeRule::Scheme).unwrap();
        prop_assert!(w_equation_residual(&tr) < 1e-9);
        prop_assert!(tr.invariant_violations(1.0, f.lipschitz_bound(), 1e-9).is_empty());
    }
}

#[test]
fn field_csv_round_trip_is_exact() {
    let g = Grid1D::new(-0.3, 1.7, 20, 0.7, 9).unwrap();
    let u = SpaceTimeField::from_fn(g, |x, t| (x * 3.1).sin() * (-t).exp() / 7.0);
    let mut buf = Vec::new();
    u.write_csv(&mut buf).unwrap();
    let back = SpaceTimeField::read_csv(g, buf.as_slice()).unwrap();
    assert_eq!(back, u);
}

#[test]
fn neumann_ends_conserve_enthalpy() {
    // with f = 0 and no-flux ends the nodal sum of u is conserved per step
    let g = Grid1D::unit(50, 200).unwrap();
    let spec = problem(g, 0.01, NonlinearitySpec::zero(), steps(g, 0.0, 1.0, -1.0));
    let run = solve(&spec, &NewtonParams::default()).unwrap();
    let mass = |n: usize| {
        let r = run.u.row(n);
        let inner: f64 = r[1..r.len() - 1].iter().sum();
        inner + 0.5 * (r[0] + r[r.len() - 1])
    };
    let m0 = mass(0);
    for n in 1..g.n_levels() {
        assert!(
            (mass(n) - m0).abs() < 1e-9,
            "level {n}: {} vs {m0}",
            mass(n)
        );
    }
}
