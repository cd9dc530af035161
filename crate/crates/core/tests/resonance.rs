use qho_kam::fourier::Mode;
use qho_kam::resonance::*;

fn zone(k: i32, l: NormalIndex, alpha: f64) -> ZoneSpec<f64> {
    ZoneSpec::new(Mode(vec![k]), l, alpha, 3.0, 6.0).unwrap()
}

#[test]
fn monte_carlo_agrees_with_exact_interval_length() {
    let model = FrequencyModel::<f64>::identity(1);
    let zones: Vec<_> = (1..=6)
        .map(|k| zone(k, NormalIndex::difference(1, 2).unwrap(), 0.05))
        .collect();
    let exact = exact_measure_1d(&zones, &model).unwrap();
    let mc = estimate_measure(&zones, &model, 100_000, 42).unwrap();
    assert!(mc.agrees_with(exact, 0.0), "MC {:?} vs exact {exact}", mc);
    let single = zone(1, NormalIndex::zero(), 0.05);
    let m = exact_measure_1d(&[single.clone()], &model).unwrap();
    assert!((m - single.bound()).abs() < 1e-15);
}

#[test]
fn halving_alpha_halves_an_interior_zone() {
    let model = FrequencyModel::<f64>::identity(1);
    let a = exact_measure_1d(
        &[zone(3, NormalIndex::difference(2, 4).unwrap(), 0.02)],
        &model,
    )
    .unwrap();
    let b = exact_measure_1d(
        &[zone(3, NormalIndex::difference(2, 4).unwrap(), 0.01)],
        &model,
    )
    .unwrap();
    assert!((a / b - 2.0).abs() < 1e-12);
}

#[test]
fn unperturbed_difference_zone_at_zero_k_is_empty() {
    let model = FrequencyModel::<f64>::identity(1);
    let z = ZoneSpec::new(
        Mode(vec![0]),
        NormalIndex::difference(2, 5).unwrap(),
        1.0,
        3.0,
        6.0,
    )
    .unwrap();
    for x in [0.1, 1.0, 3.0, 6.0] {
        assert!(!zone_indicator(&[x], &z, &model));
    }
    assert!(ZoneSpec::new(Mode(vec![0]), NormalIndex::zero(), 0.1, 3.0, 6.0).is_err());
}

#[test]
fn perturbed_frequencies_match_hand_arithmetic() {
    let model = FrequencyModel {
        omega_offset: vec![0.0],
        omega_scale: vec![1.0],
        shift_amplitude: 0.01,
        shift_beta: 1.0,
    };
    let l = NormalIndex::difference(1, 3).unwrap();
    let xi = 4.0;
    let om3 = 5.0 + 0.01 * (1.0 + 3f64.ln()).powi(-2);
    let want = 1.0 * xi + (1.0 + 0.01) - om3;
    assert!((model.divisor(&[xi], &Mode(vec![1]), &l) - want).abs() < 1e-14);
    let z = zone(1, l, 0.5);
    assert_eq!(
        zone_indicator(&[xi], &z, &model),
        want.abs() < 2.0 * 0.5 / z.a_k()
    );
}

#[test]
fn union_never_exceeds_sum_of_parts() {
    let model = FrequencyModel::<f64>::identity(1);
    let zones: Vec<_> = (1..=8)
        .flat_map(|k| (1..4).map(move |j| zone(k, NormalIndex::unit(j, 1).unwrap(), 0.05)))
        .collect();
    let union = exact_measure_1d(&zones, &model).unwrap();
    let sum: f64 = zones
        .iter()
        .map(|z| exact_measure_1d(std::slice::from_ref(z), &model).unwrap())
        .sum();
    assert!(union <= sum + 1e-15);
    let mc = estimate_measure(&zones, &model, 20_000, 1).unwrap();
    assert!(mc.value <= sum + mc.ci_halfwidth);
}

#[test]
fn momentum_bound_holds_on_small_support() {
    let rep = check_momentum_bound(60, 6.0);
    assert_eq!(rep.violations, 0);
    assert_eq!(rep.checked, 60 * 2 + 60 * 59);
}

#[test]
fn fitted_c4_covers_other_alphas() {
    let model = FrequencyModel::<f64>::identity(1);
    let mk = |alpha| -> Vec<ZoneSpec<f64>> {
        (3..=12)
            .map(|k| zone(k, NormalIndex::difference(1, 2).unwrap(), alpha))
            .collect()
    };
    let c4 = fit_c4(&mk(1e-2), &model).unwrap();
    for alpha in [1e-1, 1e-3] {
        assert!(zone_table(&mk(alpha), &model, c4)
            .unwrap()
            .iter()
            .all(|r| r.ratio <= 1.0 + 1e-12));
    }
}

#[test]
fn excision_curve_fit_recovers_power_law() {
    let c = excised_fraction_curve(vec![(1e-3, 0.01), (1e-1, 0.1), (1e-2, 0.0316227766)]);
    assert!(c.strictly_decreasing);
    assert!((c.exponent.unwrap() - 0.5).abs() < 1e-6);
    assert_eq!(c.rows[0].0, 1e-1);
}

#[test]
fn union_cutoff_and_exponent() {
    assert!((measure_exponent(-1.0) - 0.5).abs() < 1e-15);
    assert!(union_cutoff(4, 1e-2, 3.0, 6.0, -1.0).unwrap() >= 1.0);
    assert!(union_cutoff(4, 1e-2, 3.0, 6.0, 0.5).is_err());
}
