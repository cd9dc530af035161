use num_complex::Complex64;
use qho_kam::floquet::*;
use qho_kam::hermite::default_rule;
use qho_kam::kam::{run, KamConfig};
use qho_kam::potential::{matrix_elements, Potential, PotentialTerm, Profile};

const GOLDEN: f64 = 1.2360679774997898;

fn reduce(v: &Potential<f64>, j_max: usize, k_max: u32, eps: f64) -> qho_kam::ReducedNormalForm64 {
    let cfg: KamConfig = serde_json::from_value(serde_json::json!({
        "j_max": j_max, "k_max": k_max, "epsilon": eps, "beta": 6.0, "tau": 3.0, "s0": 1.0, "alpha0": 2e-3
    }))
    .unwrap();
    run(v, &cfg, &[vec![GOLDEN]])
        .unwrap()
        .samples
        .remove(0)
        .reduced
        .unwrap()
}

#[test]
fn x_independent_drive_is_diagonal_in_j_and_reduces_exactly() {
    let v = Potential::<f64>::x_independent(1, 6.0);
    let omega = [GOLDEN];
    let el = matrix_elements(&v, 10, 16, &omega, &default_rule(10)).unwrap();
    let k = assemble_floquet(&el, &omega, 1e-2, 10, 8).unwrap();
    for a in 0..k.dim() {
        for b in 0..k.dim() {
            if a % 10 != b % 10 {
                assert!(k.matrix[(a, b)].norm() < 1e-12);
            }
        }
    }
    let rnf = reduce(&v, 10, 8, 1e-2);
    let sp = quasienergies(&k).unwrap();
    let cmp = compare_reduction(&omega, &rnf.big_omega, &sp, 8).unwrap();
    assert!(cmp.max_deviation < 1e-12, "{cmp:?}");
}

#[test]
fn first_order_shift_of_the_ground_level() {
    let terms = vec![PotentialTerm {
        profile: Profile::Gaussian { width: 1.0 },
        k: vec![0],
        cos: 1.0,
        sin: 0.0,
        omega_factor: None,
    }];
    let v = Potential::<f64>::from_terms(1, 6.0, 1.0, terms).unwrap();
    let omega = [GOLDEN];
    let el = matrix_elements(&v, 8, 4, &omega, &default_rule(8)).unwrap();
    let v11 = el.get(&qho_kam::fourier::Mode(vec![0])).unwrap()[(0, 0)].re;
    // ⟨h₁|e^{−x²}|h₁⟩ = 1/√2
    assert!((v11 - 0.5f64.sqrt()).abs() < 1e-12);
    let eps = 1e-5;
    let k = assemble_floquet(&el, &omega, eps, 8, 2).unwrap();
    let sp = quasienergies(&k).unwrap();
    let lv = sp
        .levels
        .iter()
        .find(|l| l.j == 1 && l.k == vec![0])
        .unwrap();
    assert!((lv.value - 1.0 - eps * v11).abs() < 10.0 * eps * eps);
}

#[test]
fn rational_frequency_is_reported_as_clustered() {
    let v = Potential::<f64>::log_decay(1, 6.0);
    let omega = [2.0];
    let el = matrix_elements(&v, 6, 4, &omega, &default_rule(6)).unwrap();
    let k = assemble_floquet(&el, &omega, 0.0, 6, 2).unwrap();
    assert!(quasienergies(&k).unwrap().clustered_pairs > 0);
}

#[test]
fn log_decay_cross_verification_and_reconstruction() {
    let v = Potential::<f64>::log_decay(1, 6.0);
    let omega = [GOLDEN];
    let (j_max, k_max, eps) = (16, 6, 1e-4);
    let rnf = reduce(&v, j_max, k_max, eps);
    let el = matrix_elements(&v, j_max, 2 * k_max, &omega, &default_rule(j_max)).unwrap();
    let k = assemble_floquet(&el, &omega, eps, j_max, k_max).unwrap();
    assert!(k.hermiticity_residual() <= 1e-12);
    let sp = quasienergies(&k).unwrap();
    let cmp = compare_reduction(&omega, &rnf.big_omega, &sp, k_max).unwrap();
    assert!(!cmp.inconclusive && cmp.label_match_rate >= 0.9);
    assert!(cmp.max_deviation <= 1e-10, "{cmp:?}");
    assert!(shift_symmetry_defect(&sp, &omega) <= 1e-10);
    assert_eq!(conjugator_offdiagonal(&rnf), 0.0);

    let mut u0 = vec![Complex64::new(0.0, 0.0); j_max];
    u0[..3]
        .iter_mut()
        .for_each(|x| *x = Complex64::new(3f64.sqrt().recip(), 0.0));
    let (trace, u) = evolve(&el, &omega, eps, &u0, 5.0, 0.002, 2.0, 50).unwrap();
    assert!(trace.l2_drift <= 1e-8);
    let z = reconstruct(&rnf, &u0, 5.0).unwrap();
    let d = u
        .iter()
        .zip(&z)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(d < 1e-9, "reconstruction differs by {d:e}");
}

#[test]
fn oversized_assembly_is_refused() {
    let v = Potential::<f64>::log_decay(2, 6.0);
    let omega = [GOLDEN, 1.7];
    let el = matrix_elements(&v, 40, 2, &omega, &default_rule(40)).unwrap();
    assert!(matches!(
        assemble_floquet(&el, &omega, 1e-3, 40, 10),
        Err(qho_kam::KamError::Budget(_))
    ));
}
