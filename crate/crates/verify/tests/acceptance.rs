//! Desk-scale acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.
//!
//! Pass criterion numbers as arguments (`cargo test -p qho-kam-verify --test acceptance -- 3 4`)
//! to run a subset.

use num_complex::Complex64;
use qho_kam::floquet::{
    assemble_floquet, boundary_estimate, compare_reduction, evolve, quasienergies, unperturbed_gap,
};
use qho_kam::flow::time_t_map;
use qho_kam::fourier::Mode;
use qho_kam::hermite::{default_rule, weighted_log_norms};
use qho_kam::homological::{check_nonresonance, residual, solve_quiet, SmallDivisorPolicy};
use qho_kam::kam::{kronecker_samples, run, KamConfig, RunReport, SampleStatus};
use qho_kam::norms::{gamma_plus_norm, off_diagonal_log_sum, sobolev_log_sum, DecayProfile};
use qho_kam::potential::{matrix_elements, weighted_block_max, Potential};
use qho_kam::quadratic::NormalForm;
use qho_kam::resonance::{
    check_momentum_bound, excised_fraction_curve, fit_c4, zone_table, FrequencyModel, NormalIndex,
    ZoneSpec,
};
use qho_kam::sampling::random_real_part;
use qho_kam::scalar::cplx;
use qho_kam::{KamError, ReducedNormalForm64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::ExitCode;
use std::time::Instant;

const GOLDEN: f64 = 1.2360679774997898;
const BETA: f64 = 6.0;

struct Verdict {
    pass: bool,
    detail: String,
}

type Check = fn() -> Result<Verdict, KamError>;

fn verdict(pass: bool, detail: String) -> Result<Verdict, KamError> {
    Ok(Verdict { pass, detail })
}

fn kam_config(j_max: usize, k_max: u32, epsilon: f64, alpha0: f64) -> KamConfig {
    serde_json::from_value(serde_json::json!({
        "j_max": j_max, "k_max": k_max, "epsilon": epsilon, "beta": BETA, "tau": 3.0, "s0": 1.0, "alpha0": alpha0
    }))
    .expect("valid KAM config")
}

fn log_spaced(top: usize, points: usize) -> Vec<usize> {
    let lt = (top as f64).ln();
    let mut js: Vec<usize> = (0..points)
        .map(|i| ((lt * i as f64 / (points - 1) as f64).exp().round() as usize).clamp(1, top))
        .collect();
    js.dedup();
    js
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn hermite_decay() -> Result<Verdict, KamError> {
    let js = log_spaced(10_000, 48);
    let deltas = [1.0, 2.0, 4.0];
    let rule = default_rule::<f64>(10_000);
    let norms = weighted_log_norms(&js, &deltas, &rule)?;
    let lnj: Vec<f64> = js.iter().map(|&j| (j as f64).ln()).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, &delta) in deltas.iter().enumerate() {
        let scaled: Vec<f64> = js
            .iter()
            .zip(&norms)
            .map(|(&j, r)| r[d] * (1.0 + (j as f64).ln()).powf(delta))
            .collect();
        let s = slope(&lnj, &scaled);
        let max = scaled.iter().cloned().fold(0.0, f64::max);
        pass &= s <= 0.01 && max.is_finite();
        parts.push(format!("delta1={delta}: slope={s:.4e} max={max:.4e}"));
    }
    verdict(pass, format!("{} points; {}", js.len(), parts.join("; ")))
}

fn matrix_element_decay() -> Result<Verdict, KamError> {
    let v = Potential::<f64>::log_decay(1, BETA);
    let modes = [Mode(vec![1]), Mode(vec![-1])];
    let at = |j: usize| -> Result<f64, KamError> {
        let el = matrix_elements(&v, j, 1, &[GOLDEN], &default_rule(j))?;
        Ok(weighted_block_max(&el, &modes, BETA))
    };
    let (m100, m200) = (at(100)?, at(200)?);
    let change = (m200 - m100).abs() / m100;
    verdict(
        change < 0.10,
        format!("weighted max J=100: {m100:.4e}, J=200: {m200:.4e}, relative change {change:.3e}"),
    )
}

fn diophantine_omega(
    rng: &mut ChaCha8Rng,
    n: usize,
    policy: &SmallDivisorPolicy<f64>,
    dim: usize,
    k_max: u32,
) -> Vec<f64> {
    loop {
        let omega: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        if check_nonresonance(&NormalForm::harmonic(omega.clone(), dim), policy, k_max).is_ok() {
            return omega;
        }
    }
}

fn homological_exactness() -> Result<Verdict, KamError> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (dim, k_max) = (6, 3);
    let policies = [
        SmallDivisorPolicy::new(1e-3, 3.0, 6.0, 1)?,
        SmallDivisorPolicy::new(1e-3, 4.0, 8.0, 2)?,
    ];
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let n = 1 + i % 2;
        let policy = &policies[n - 1];
        let omega = diophantine_omega(&mut rng, n, policy, dim, k_max);
        let normal = NormalForm::harmonic(omega, dim);
        let r = random_real_part::<f64, _>(&mut rng, n, k_max, dim, 2.0, true);
        let sol = solve_quiet(&r, &normal, policy)?;
        worst = worst.max(residual(&r, &sol, &normal) / r.max_abs());
    }
    verdict(
        worst <= 1e-12,
        format!("1000 instances, worst relative residual {worst:.3e}"),
    )
}

fn symplectic_flow() -> Result<Verdict, KamError> {
    let mut rng = ChaCha8Rng::seed_from_u64(4048);
    let profile = DecayProfile::new(2.0)?;
    let (dim, k_max) = (8, 8);
    let (mut defect, mut ratio): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let f = random_real_part::<f64, _>(&mut rng, 1, 1, dim, 2.0, true);
        let g = gamma_plus_norm(&f, &profile, 1.0, 0.0);
        let f = f.scaled(cplx(rng.gen_range(0.01..0.1) / g, 0.0));
        let gp = gamma_plus_norm(&f, &profile, 1.0, 0.0);
        let phi = time_t_map(&f, 1.0, k_max)?;
        defect = defect.max(phi.symplectic_defect());
        ratio = ratio.max(phi.beta_norm(&profile) / gp.exp_m1());
    }
    verdict(
        defect <= 1e-10 && ratio <= 1.5,
        format!("50 generators, max defect {defect:.3e}, max [L-I]/(e^<F>+ - 1) {ratio:.4}"),
    )
}

fn convergence_run() -> Result<RunReport<f64>, KamError> {
    let v = Potential::<f64>::log_decay(1, BETA);
    run(
        &v,
        &kam_config(40, 10, 1e-6, 2e-3),
        &kronecker_samples(1, 64),
    )
}

fn kam_convergence(rep: &RunReport<f64>) -> Result<Verdict, KamError> {
    let survivors: Vec<_> = rep.samples.iter().filter(|s| s.survived()).collect();
    let rate = survivors.len() as f64 / rep.samples.len() as f64;
    let mut ratio_ok = true;
    let mut ratios = Vec::new();
    for nu in 0..=3 {
        let per_sample: Vec<f64> = survivors
            .iter()
            .map(|s| {
                s.steps
                    .get(nu)
                    .map_or(f64::NAN, |st| st.gamma_after.ln() / st.gamma_before.ln())
            })
            .collect();
        let worst = if per_sample.iter().any(|r| r.is_nan()) {
            f64::NAN
        } else {
            per_sample.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        ratio_ok &= worst >= 1.2;
        ratios.push(format!("nu={nu}: {worst:.3}"));
    }
    let residual = survivors
        .iter()
        .filter_map(|s| s.reduced.as_ref())
        .map(|r| r.certificate.residual_from_scratch)
        .fold(0.0, f64::max);
    let gamma0 = survivors
        .iter()
        .filter_map(|s| s.steps.first())
        .map(|s| s.gamma_before)
        .fold(0.0, f64::max);
    verdict(
        rate >= 0.8 && ratio_ok && residual <= 1e-14 && !survivors.is_empty(),
        format!(
            "survival {}/{} ({rate:.3}); min ln-ratio {}; <P_0> max {gamma0:.3e}; max residual {residual:.3e}",
            survivors.len(),
            rep.samples.len(),
            ratios.join(", ")
        ),
    )
}

fn frequency_shift(rep: &RunReport<f64>) -> Result<Verdict, KamError> {
    let eps = rep.config.epsilon;
    let shift = rep
        .samples
        .iter()
        .filter_map(|s| s.reduced.as_ref())
        .map(|r| r.shift_norm(BETA))
        .fold(0.0, f64::max);
    let diverged = rep
        .samples
        .iter()
        .filter(|s| matches!(s.status, SampleStatus::Diverged { .. }))
        .count();
    verdict(
        shift <= 10.0 * eps && rep.survivors() > 0,
        format!("max_j |Omega*_j - (2j-1)|(1+ln j)^(2 beta) = {shift:.3e} vs 10 eps = {:.1e}; diverged samples {diverged}", 10.0 * eps),
    )
}

fn reduce(j_max: usize, k_max: u32, eps: f64) -> Result<ReducedNormalForm64, KamError> {
    let v = Potential::<f64>::log_decay(1, BETA);
    let s = run(&v, &kam_config(j_max, k_max, eps, 2e-3), &[vec![GOLDEN]])?
        .samples
        .remove(0);
    s.reduced.ok_or_else(|| {
        KamError::Numeric(format!("golden-mean sample did not reduce: {:?}", s.status))
    })
}

fn cross_verification() -> Result<Verdict, KamError> {
    let (j_max, k_max, eps) = (40, 10, 1e-4);
    let omega = [GOLDEN];
    let rnf = reduce(j_max, k_max, eps)?;
    let v = Potential::<f64>::log_decay(1, BETA);
    let el = matrix_elements(&v, j_max, 2 * k_max, &omega, &default_rule(j_max))?;
    let sp = quasienergies(&assemble_floquet(&el, &omega, eps, j_max, k_max)?)?;
    let cmp = compare_reduction(&omega, &rnf.big_omega, &sp, k_max)?;
    let coupling = el
        .blocks
        .iter()
        .filter(|(k, _)| !k.is_zero())
        .map(|(_, b)| b.iter().map(|x| x.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let gap = unperturbed_gap(&omega, j_max, 2 * k_max);
    let tail = rnf.certificate.truncation_tail
        + rnf.certificate.final_max_coefficient
        + boundary_estimate(eps, coupling, gap, k_max / 4);
    let tol = (5.0 * tail).max(1e-10);
    verdict(
        cmp.max_deviation <= tol && cmp.label_match_rate >= 0.9,
        format!(
            "{} trusted labels, max deviation {:.3e} vs tolerance {tol:.1e}, label match {:.3}",
            cmp.trusted, cmp.max_deviation, cmp.label_match_rate
        ),
    )
}

fn sobolev_stability() -> Result<Verdict, KamError> {
    let (j_max, k_max) = (40, 10);
    let omega = [GOLDEN];
    let v = Potential::<f64>::log_decay(1, BETA);
    let el = matrix_elements(&v, j_max, 2 * k_max, &omega, &default_rule(j_max))?;
    let mut u0 = vec![Complex64::new(0.0, 0.0); j_max];
    u0[..3]
        .iter_mut()
        .for_each(|x| *x = Complex64::new(3f64.sqrt().recip(), 0.0));
    let dt = 0.05 / (2 * j_max - 1) as f64;
    let mut pass = true;
    let mut parts = Vec::new();
    for (eps, factor) in [(1e-3, 50.0), (1e-2, 500.0)] {
        let (trace, _) = evolve(&el, &omega, eps, &u0, 100.0, dt, 2.0, 100)?;
        let dev = trace.max_relative_deviation();
        pass &= dev <= factor * eps;
        parts.push(format!(
            "eps={eps:e}: max deviation {dev:.3e} ({:.2} eps, limit {factor} eps)",
            dev / eps
        ));
    }
    verdict(pass, parts.join("; "))
}

fn momentum_bound() -> Result<Verdict, KamError> {
    let rep = check_momentum_bound(500, BETA);
    verdict(
        rep.violations == 0,
        format!(
            "{} indices checked, {} violations, min ratio {:.4} at {}",
            rep.checked, rep.violations, rep.min_ratio, rep.argmin
        ),
    )
}

fn measure_scaling() -> Result<Verdict, KamError> {
    let model = FrequencyModel::<f64>::identity(1);
    let l = NormalIndex::difference(1, 2)?;
    let alphas = [1e-1, 1e-2, 1e-3];
    let zones: Vec<ZoneSpec<f64>> = alphas
        .iter()
        .flat_map(|&a| (3..=12).map(move |k| (a, k)))
        .map(|(a, k)| ZoneSpec::new(Mode(vec![k]), l.clone(), a, 3.0, BETA))
        .collect::<Result<_, _>>()?;
    let c4 = fit_c4(&zones, &model)?;
    let rows = zone_table(&zones, &model, c4)?;
    let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let best = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);

    let v = Potential::<f64>::log_decay(1, BETA);
    let xis = kronecker_samples(1, 64);
    let mut pts = Vec::new();
    for &a in &alphas {
        let frac = match run(&v, &kam_config(40, 10, 1e-6, a), &xis) {
            Ok(r) => r.excised_fraction(),
            Err(KamError::EmptyParameterSet) => 1.0,
            Err(e) => return Err(e),
        };
        pts.push((a, frac));
    }
    let curve = excised_fraction_curve(pts);
    let exponent = curve.exponent.unwrap_or(f64::NAN);
    let fr: Vec<String> = curve
        .rows
        .iter()
        .map(|(a, f)| format!("{a:e}->{f:.4}"))
        .collect();
    verdict(
        worst <= 1.0 + 1e-12 && curve.strictly_decreasing && exponent >= 0.4,
        format!(
            "c4 = {c4:.4e} over {} zones, measure/bound in [{best:.4}, {worst:.4}]; excised {}; strictly decreasing {}; exponent {exponent:.4}",
            rows.len(),
            fr.join(", "),
            curve.strictly_decreasing
        ),
    )
}

fn log_weighted_sums() -> Result<Verdict, KamError> {
    let js = log_spaced(10_000, 40);
    let change = |f: &dyn Fn(usize) -> f64| {
        let (short, long) = (f(10_000), f(100_000));
        (long - short).abs() / long
    };
    let mut off: f64 = 0.0;
    let mut sob: f64 = 0.0;
    for &j in &js {
        off = off.max(change(&|l| off_diagonal_log_sum(j, l, 2.0)));
        sob = sob.max(change(&|l| sobolev_log_sum(j, l, 2.0, 1.0)));
    }
    verdict(
        off < 0.01 && sob < 0.01,
        format!("{} values of j <= 1e4; max relative change L=1e4 -> 1e5: off-diagonal {off:.3e}, Sobolev {sob:.3e}", js.len()),
    )
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let wanted = |c: usize| selected.is_empty() || selected.contains(&c);
    let mut failures = 0;
    let mut report = |c: usize, name: &str, start: Instant, out: Result<Verdict, KamError>| {
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(v) => {
                if !v.pass {
                    failures += 1;
                }
                println!(
                    "{} criterion {c} ({name}): {} [{secs:.1} s]",
                    if v.pass { "PASS" } else { "FAIL" },
                    v.detail
                );
            }
            Err(e) => {
                failures += 1;
                println!("FAIL criterion {c} ({name}): error {e} [{secs:.1} s]");
            }
        }
    };

    let simple: [(usize, &str, Check); 4] = [
        (1, "hermite decay", hermite_decay),
        (2, "matrix-element decay", matrix_element_decay),
        (3, "homological exactness", homological_exactness),
        (4, "symplectic flow", symplectic_flow),
    ];
    for (c, name, f) in simple {
        if wanted(c) {
            let t = Instant::now();
            report(c, name, t, f());
        }
    }
    if wanted(5) || wanted(6) {
        let t = Instant::now();
        match convergence_run() {
            Ok(rep) => {
                if wanted(5) {
                    report(5, "KAM convergence", t, kam_convergence(&rep));
                }
                if wanted(6) {
                    report(6, "frequency-shift profile", t, frequency_shift(&rep));
                }
            }
            Err(e) => {
                let msg = e.to_string();
                if wanted(5) {
                    report(5, "KAM convergence", t, Err(KamError::Numeric(msg.clone())));
                }
                if wanted(6) {
                    report(6, "frequency-shift profile", t, Err(KamError::Numeric(msg)));
                }
            }
        }
    }
    let rest: [(usize, &str, Check); 5] = [
        (7, "Floquet cross-verification", cross_verification),
        (8, "Sobolev stability", sobolev_stability),
        (9, "momentum enumeration", momentum_bound),
        (10, "measure scaling", measure_scaling),
        (11, "log-weighted sums", log_weighted_sums),
    ];
    for (c, name, f) in rest {
        if wanted(c) {
            let t = Instant::now();
            report(c, name, t, f());
        }
    }
    println!("acceptance: {failures} criteria failed");
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
