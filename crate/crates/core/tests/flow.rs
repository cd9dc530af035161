mod common;

use common::random_real_part;
use qho_kam::flow::{compose, conjugate, conjugate_by_quadrature, time_t_map, SymplecticMap};
use qho_kam::norms::{gamma_plus_norm, DecayProfile};
use qho_kam::quadratic::{NormalForm, QuadraticHamiltonian};
use qho_kam::scalar::cplx;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_generators_give_symplectic_maps_within_the_norm_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let profile = DecayProfile::new(2.0).unwrap();
    let (dim, k_max) = (8, 8);
    for _ in 0..50 {
        let f = random_real_part::<f64, _>(&mut rng, 1, 1, dim, 2.0, true);
        let g = gamma_plus_norm(&f, &profile, 1.0, 0.0);
        let target = rng.gen_range(0.01..0.1);
        let f = f.scaled(cplx(target / g, 0.0));
        let gp = gamma_plus_norm(&f, &profile, 1.0, 0.0);
        let phi = time_t_map(&f, 1.0, k_max).unwrap();
        assert!(
            phi.symplectic_defect() <= 1e-10,
            "defect {:e} lattice {:e} gp {gp:e}",
            phi.symplectic_defect(),
            phi.lattice_defect
        );
        let lmi = phi.beta_norm(&profile);
        assert!(
            lmi <= 1.5 * gp.exp_m1(),
            "[L − I] = {lmi:e} vs ⟨F⟩⁺ = {gp:e}"
        );
    }
}

#[test]
fn forward_and_backward_flows_compose_to_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = random_real_part::<f64, _>(&mut rng, 1, 1, 5, 1.0, true).scaled(cplx(0.05, 0.0));
    let fwd = time_t_map(&f, 1.0, 6).unwrap();
    let bwd = time_t_map(&f, -1.0, 6).unwrap();
    let id = compose(&fwd, &bwd);
    let err = id.w.values().map(|w| w.frobenius()).fold(0.0, f64::max);
    assert!(err < 1e-10, "composition defect {err:e}");
}

#[test]
fn conjugation_agrees_with_quadrature_of_the_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (dim, k_max) = (5, 6);
    let f = random_real_part::<f64, _>(&mut rng, 1, 1, dim, 1.0, true).scaled(cplx(0.02, 0.0));
    let p = random_real_part::<f64, _>(&mut rng, 1, 1, dim, 1.0, true).scaled(cplx(0.01, 0.0));
    let h = QuadraticHamiltonian::new(NormalForm::harmonic(vec![1.2360679774997898], dim), p);
    let phi = time_t_map(&f, 1.0, k_max).unwrap();
    let a = conjugate(&h, &phi).unwrap().hamiltonian;
    let b = conjugate_by_quadrature(&h, &f, k_max, 16).unwrap();
    let diff = a.pert.sub(&b).max_abs();
    assert!(diff < 1e-10, "closed form vs quadrature differ by {diff:e}");
}

#[test]
fn conjugator_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = random_real_part::<f64, _>(&mut rng, 1, 1, 3, 1.0, false).scaled(cplx(0.05, 0.0));
    let phi = time_t_map(&f, 1.0, 4).unwrap();
    let back = SymplecticMap::<f64>::from_json(&phi.to_json()).unwrap();
    let diff = compose(&back, &time_t_map(&f, -1.0, 4).unwrap())
        .w
        .values()
        .map(|w| w.frobenius())
        .fold(0.0, f64::max);
    assert!(diff < 1e-10);
}
