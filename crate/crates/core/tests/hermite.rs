use qho_kam::hermite::{
    default_rule, eval_hermite, weighted_log_norm, weighted_log_norms, HermiteIndex,
};

#[test]
fn weighted_norms_match_golden_quadrature() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/weighted_log_norm.csv"
    ))
    .unwrap();
    let rule = default_rule::<f64>(60);
    let mut checked = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let j: usize = f[0].parse().unwrap();
        let d: f64 = f[1].parse().unwrap();
        let want: f64 = f[2].parse().unwrap();
        let got = weighted_log_norm(HermiteIndex::new(j).unwrap(), d, &rule).unwrap();
        assert!(
            (got - want).abs() <= 1e-10 * want,
            "j = {j}, δ₁ = {d}: {got} vs {want}"
        );
        checked += 1;
    }
    assert_eq!(checked, 14);
}

#[test]
fn batched_norms_agree_with_single_evaluations() {
    let rule = default_rule::<f64>(30);
    let all = weighted_log_norms(&[3, 7, 30], &[1.0, 4.0], &rule).unwrap();
    for (r, j) in [3usize, 7, 30].into_iter().enumerate() {
        for (c, d) in [1.0, 4.0].into_iter().enumerate() {
            let one = weighted_log_norm(HermiteIndex::new(j).unwrap(), d, &rule).unwrap();
            assert!((all[r][c] - one).abs() < 1e-15);
        }
    }
}

#[test]
fn ground_state_closed_form() {
    let x = 0.7f64;
    let h1 = eval_hermite(HermiteIndex::new(1).unwrap(), x).unwrap();
    assert!((h1 - std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp()).abs() < 1e-15);
    let h1f = eval_hermite(HermiteIndex::new(1).unwrap(), 0.7f32).unwrap();
    assert!((h1f as f64 - h1).abs() < 1e-6);
}

#[test]
fn zero_index_and_nonpositive_exponent_are_rejected() {
    assert!(HermiteIndex::new(0).is_err());
    let rule = default_rule::<f64>(4);
    assert!(weighted_log_norms(&[1], &[0.0], &rule).is_err());
}
