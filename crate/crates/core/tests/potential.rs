use qho_kam::fourier::Mode;
use qho_kam::hermite::default_rule;
use qho_kam::potential::*;

fn grid(x_max: f64) -> ConditionGrid<f64> {
    ConditionGrid {
        x_max,
        nx: 801,
        theta_points: 8,
        omega_samples: vec![vec![1.0], vec![2.0]],
        bound: Some(30.0),
    }
}

#[test]
fn log_decay_satisfies_the_decay_conditions() {
    let rep = verify_conditions(&Potential::<f64>::log_decay(1, 6.0), &grid(50.0)).unwrap();
    assert_eq!(rep.pass, Some(true), "{rep:?}");
    assert!((rep.c0 - 1.0).abs() < 1e-12);
}

#[test]
fn linear_potential_fails_the_decay_conditions() {
    let rep = verify_conditions(&Potential::<f64>::linear(1, 6.0), &grid(50.0)).unwrap();
    assert_eq!(rep.pass, Some(false));
}

#[test]
fn matrix_elements_are_real_symmetric_in_x_and_hermitian_in_theta() {
    let v = Potential::<f64>::analytic_log_decay(1, 6.0, 1.0, 3);
    let el = matrix_elements(&v, 10, 4, &[1.3], &default_rule(10)).unwrap();
    assert!(el.reality_defect() < 1e-14);
    let b = el.get(&Mode(vec![2])).unwrap();
    assert!((b[(2, 5)] - b[(5, 2)]).norm() < 1e-14);
    assert!(el.get(&Mode(vec![4])).is_none());
}

#[test]
fn terms_path_and_lattice_path_agree() {
    let v = Potential::<f64>::log_decay(1, 6.0);
    let prof = Profile::LogDecay { beta: 6.0 };
    let lat = Potential::<f64>::custom(
        1,
        6.0,
        1.0,
        std::sync::Arc::new(move |x: f64, th: &[f64], _: &[f64]| prof.eval(x) * th[0].cos()),
    );
    let rule = default_rule(8);
    let a = matrix_elements(&v, 8, 3, &[1.0], &rule).unwrap();
    let b = matrix_elements(&lat, 8, 3, &[1.0], &rule).unwrap();
    for k in [-1, 1] {
        let d = (a.get(&Mode(vec![k])).unwrap() - b.get(&Mode(vec![k])).unwrap()).norm();
        assert!(d < 1e-13, "k = {k}: {d:e}");
    }
}

#[test]
fn builtin_config_round_trip_and_unknown_name() {
    let cfg: PotentialConfig = serde_json::from_value(
        serde_json::json!({"type": "builtin", "name": "gaussian", "n": 1, "beta": 6.0}),
    )
    .unwrap();
    assert!(Potential::<f64>::from_config(&cfg).is_ok());
    let bad: PotentialConfig = serde_json::from_value(
        serde_json::json!({"type": "builtin", "name": "nope", "n": 1, "beta": 6.0}),
    )
    .unwrap();
    assert!(Potential::<f64>::from_config(&bad).is_err());
}

#[test]
fn omega_gradient_of_omega_linear_potential() {
    let v = Potential::<f64>::omega_linear(1, 6.0);
    let rule = default_rule(6);
    let g = omega_gradient_elements(&v, 6, 2, &[1.5], 1e-4, &rule).unwrap();
    let e = matrix_elements(&v, 6, 2, &[1.0], &rule).unwrap();
    let d = (g[0].get(&Mode(vec![1])).unwrap() - e.get(&Mode(vec![1])).unwrap()).norm();
    assert!(d < 1e-9);
}
