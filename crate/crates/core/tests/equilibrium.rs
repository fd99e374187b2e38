use matchnet::equilibrium::{
    a_bar, ds_da_implicit, existence_threshold_homogeneous, foc_high_lhs, foc_homogeneous_lhs, global_cost_bound,
    marginal_return_low, solve_heterogeneous, solve_homogeneous, HeterogeneousOptions, HeterogeneousStatus,
};
use matchnet::ModelParams;
use proptest::prelude::*;

fn one_type() -> impl Strategy<Value = ModelParams<f64>> {
    (0.05..0.95f64, 0.003..0.2f64, 1e-5..0.02f64, 1.0..3.0f64).prop_map(|(a, d, c, v)| {
        ModelParams::default()
            .with_arrival(a)
            .with_divorce(d)
            .with_cost(c)
            .with_marriage_value(v)
            .with_high_share(1.0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn one_type_solution_exists_below_the_threshold(p in one_type()) {
        let eq = solve_homogeneous(&p, 1e-12).unwrap();
        let thr = existence_threshold_homogeneous(&p);
        prop_assert_eq!(eq.exists, p.cost < thr);
        if eq.exists {
            prop_assert!(eq.s_star > 0.0);
            let lhs = foc_homogeneous_lhs(eq.s_star, &p).unwrap();
            prop_assert!((lhs - p.cost).abs() <= 1e-12);
        } else {
            prop_assert_eq!(eq.s_star, 0.0);
        }
    }

    #[test]
    fn effort_falls_with_cost(p in one_type(), k in 1.05..2.0f64) {
        let lo = solve_homogeneous(&p, 1e-12).unwrap();
        let hi = solve_homogeneous(&p.with_cost(p.cost * k), 1e-12).unwrap();
        prop_assume!(lo.exists && hi.exists);
        prop_assert!(hi.s_star < lo.s_star);
    }

    #[test]
    fn derivative_sign_switches_at_a_bar(p in one_type()) {
        let eq = solve_homogeneous(&p, 1e-12).unwrap();
        prop_assume!(eq.exists);
        let bar = a_bar(p.divorce, eq.s_star);
        prop_assume!((p.arrival - bar).abs() > 1e-6);
        let slope = ds_da_implicit(eq.s_star, &p).unwrap();
        prop_assert_eq!(slope > 0.0, p.arrival < bar);
        prop_assert!(bar > 0.0 && bar <= 0.5);
    }

    #[test]
    fn two_type_roots_solve_both_conditions(
        a in 0.1..0.9f64,
        d in 0.005..0.1f64,
        h in 0.1..0.9f64,
        y in 1.0..3.0f64,
        frac in 0.05..1.2f64,
    ) {
        let base = ModelParams::default().with_arrival(a).with_divorce(d).with_high_share(h).with_high_gain(y);
        let p = base.with_cost(global_cost_bound(&base) * frac);
        let eq = solve_heterogeneous(&p, &HeterogeneousOptions::default()).unwrap();
        if frac >= 1.0 {
            prop_assert_eq!(eq.status, HeterogeneousStatus::AboveCostBound);
            prop_assert!(!eq.exists && eq.roots.is_empty());
        }
        for r in &eq.roots {
            prop_assert!((foc_high_lhs(r.high, r.low, &p).unwrap() - p.cost).abs() <= 1e-9);
            prop_assert!((marginal_return_low(r.low, r.high, &p).unwrap() - p.cost).abs() <= 1e-9);
        }
        prop_assert!(eq.roots.windows(2).all(|w| w[0].high > w[1].high));
        if eq.exists {
            prop_assert_eq!(eq.profile(), eq.roots[0]);
        }
    }
}

#[test]
fn single_precision_solver_tracks_double() {
    let p64: ModelParams<f64> = ModelParams::default().with_cost(0.005).with_divorce(0.015).with_marriage_value(2.0);
    let p32 = p64.cast::<f32>();
    let s64 = solve_homogeneous(&p64, 1e-12).unwrap().s_star;
    let s32 = solve_homogeneous(&p32, 1e-7).unwrap().s_star;
    assert!(((s32 as f64) - s64).abs() / s64 < 1e-3, "{s32} vs {s64}");
}

#[test]
fn figure_eight_point_has_an_upper_and_a_lower_root() {
    let p: ModelParams<f64> = ModelParams::default()
        .with_cost(0.003)
        .with_divorce(0.015)
        .with_high_share(0.8)
        .with_high_gain(2.0);
    let eq = solve_heterogeneous(&p, &HeterogeneousOptions::default()).unwrap();
    assert_eq!(eq.status, HeterogeneousStatus::Interior);
    assert_eq!(eq.roots.len(), 2);
    assert!((eq.s_h_star - 1.703015).abs() < 1e-6);
    assert!((eq.s_l_star - 1.773328).abs() < 1e-6);
    assert!((eq.roots[1].high - 0.270239).abs() < 1e-6);
    assert!((eq.roots[1].low - 1.427744).abs() < 1e-6);
}

#[test]
fn invalid_inputs_are_rejected() {
    let p: ModelParams<f64> = ModelParams::default();
    assert!(solve_homogeneous(&p.with_arrival(1.0), 1e-10).is_err());
    assert!(solve_homogeneous(&p, -1.0).is_err());
    assert!(solve_heterogeneous(&p.with_high_share(1.0), &HeterogeneousOptions::default()).is_err());
    assert!(foc_homogeneous_lhs(0.0, &p).is_err());
}
