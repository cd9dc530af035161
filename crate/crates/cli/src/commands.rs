use crate::artifacts::Artifacts;
use crate::config::{FloquetSpec, MeasureSpec, RunConfig};
use num_complex::Complex64;
use qho_kam::floquet::{
    assemble_floquet, boundary_estimate, compare_reduction, evolve, j_margin, quasienergies,
    reconstruct, shift_symmetry_defect, unperturbed_gap, write_spectrum_csv, write_trace_csv,
};
use qho_kam::fourier::{modes, Mode};
use qho_kam::hermite::{default_rule, weighted_log_norms};
use qho_kam::kam::{frequency_shift_check, run, KamConfig, SampleStatus};
use qho_kam::potential::{matrix_elements, verify_conditions, ConditionGrid, Potential};
use qho_kam::resonance::{
    enumerate_normal_indices, estimate_measure, exact_measure_1d, excised_fraction_curve, fit_c4,
    write_zone_csv, zone_table, FrequencyModel, NormalIndex, ZoneSpec,
};
use qho_kam::{KamError, ReducedNormalForm64, Result};
use serde_json::json;

/// What the caller turns into an exit status.
pub struct Outcome {
    pub diverged: bool,
    pub summary: serde_json::Value,
}

impl Outcome {
    fn ok(summary: serde_json::Value) -> Self {
        Self {
            diverged: false,
            summary,
        }
    }
}

/// `points` log-spaced indices in `1..=jmax`, deduplicated.
pub fn log_spaced(jmax: usize, points: usize) -> Vec<usize> {
    let top = (jmax as f64).ln();
    let mut js: Vec<usize> = (0..points)
        .map(|i| (top * i as f64 / (points.max(2) - 1) as f64).exp().round() as usize)
        .map(|j| j.clamp(1, jmax))
        .collect();
    js.dedup();
    js
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn hermite_check(
    art: &mut Artifacts,
    jmax: usize,
    delta1: f64,
    points: usize,
) -> Result<Outcome> {
    if jmax == 0 || points < 2 {
        return Err(KamError::Invalid(
            "need jmax >= 1 and at least two points".into(),
        ));
    }
    let js = log_spaced(jmax, points);
    let rule = default_rule::<f64>(jmax);
    let norms = weighted_log_norms(&js, &[delta1], &rule)?;
    let scaled: Vec<f64> = js
        .iter()
        .zip(&norms)
        .map(|(&j, r)| r[0] * (1.0 + (j as f64).ln()).powf(delta1))
        .collect();
    art.csv("hermite_check.csv", |w| {
        writeln!(w, "j,weighted_norm,scaled_norm")?;
        for ((j, r), s) in js.iter().zip(&norms).zip(&scaled) {
            writeln!(w, "{j},{:.17e},{:.17e}", r[0], s)?;
        }
        Ok(())
    })?;
    let lnj: Vec<f64> = js.iter().map(|&j| (j as f64).ln()).collect();
    Ok(Outcome::ok(json!({
        "points": js.len(),
        "slope_in_ln_j": slope(&lnj, &scaled),
        "max_scaled": scaled.iter().cloned().fold(0.0, f64::max),
    })))
}

pub fn potential_check(art: &mut Artifacts, cfg: &RunConfig) -> Result<Outcome> {
    let v = Potential::<f64>::from_config(&cfg.potential)?;
    let n = cfg.n();
    let omega = cfg
        .omega_samples()
        .into_iter()
        .next()
        .unwrap_or_else(|| vec![1.0; n]);
    let grid = ConditionGrid {
        x_max: 60.0,
        nx: 1201,
        theta_points: 16,
        omega_samples: vec![omega.clone()],
        bound: None,
    };
    let rep = verify_conditions(&v, &grid)?;
    let (j_max, k_max, beta) = cfg
        .kam
        .as_ref()
        .map_or((40, 4, 6.0), |k| (k.j_max, k.k_max, k.beta));
    let el = matrix_elements(&v, j_max, k_max, &omega, &default_rule(j_max))?;
    let w = |j: usize| (1.0 + (j as f64).ln()).powf(beta);
    let mut max_weighted: f64 = 0.0;
    art.csv("matrix_elements.csv", |out| {
        writeln!(out, "k,j,l,abs,weighted")?;
        for (k, b) in &el.blocks {
            for j in 0..j_max {
                for l in 0..j_max {
                    let a = b[(j, l)].norm();
                    let ww = a * w(j + 1) * w(l + 1);
                    max_weighted = max_weighted.max(ww);
                    let ks: Vec<String> = k.0.iter().map(|x| x.to_string()).collect();
                    writeln!(
                        out,
                        "{},{},{},{a:.17e},{ww:.17e}",
                        ks.join(";"),
                        j + 1,
                        l + 1
                    )?;
                }
            }
        }
        Ok(())
    })?;
    let summary =
        json!({ "conditions": rep, "max_weighted_element": max_weighted, "j_max": j_max });
    art.json("potential_check.json", summary.clone())?;
    Ok(Outcome::ok(summary))
}

fn kam_config(cfg: &RunConfig) -> Result<&KamConfig> {
    cfg.kam
        .as_ref()
        .ok_or_else(|| KamError::Invalid("config lacks a [kam] table".into()))
}

pub fn kam_run(art: &mut Artifacts, cfg: &RunConfig) -> Result<Outcome> {
    let kc = kam_config(cfg)?;
    let v = Potential::<f64>::from_config(&cfg.potential)?;
    let xis = cfg.omega_samples();
    let rep = run(&v, kc, &xis)?;
    art.csv("kam_steps.csv", |w| rep.write_step_csv(w))?;
    art.json("certificate.json", rep.certificate_json())?;
    if let Some(r) = rep.samples.iter().find_map(|s| s.reduced.as_ref()) {
        art.json("reduced.json", r.to_json())?;
    }
    let diverged = rep
        .samples
        .iter()
        .any(|s| matches!(s.status, SampleStatus::Diverged { .. }));
    let shift = rep
        .samples
        .iter()
        .filter_map(|s| s.reduced.as_ref())
        .map(|r| r.shift_norm(kc.beta))
        .fold(0.0, f64::max);
    let profile = rep
        .samples
        .iter()
        .map(|s| frequency_shift_check(&s.steps).max)
        .fold(0.0, f64::max);
    Ok(Outcome {
        diverged,
        summary: json!({
            "samples": rep.samples.len(),
            "survivors": rep.survivors(),
            "excised_fraction": rep.excised_fraction(),
            "max_shift_norm": shift,
            "max_shift_profile": profile,
            "diverged": diverged,
        }),
    })
}

fn zones_for(m: &MeasureSpec, n: usize, alpha: f64) -> Result<Vec<ZoneSpec<f64>>> {
    let ls = enumerate_normal_indices(m.j_max);
    let mut out = Vec::new();
    for k in modes(n, m.k_max as u32) {
        if (k.norm() as i32) < m.k_min {
            continue;
        }
        out.push(ZoneSpec::new(
            k.clone(),
            NormalIndex::zero(),
            alpha,
            m.tau,
            m.beta,
        )?);
        for l in &ls {
            out.push(ZoneSpec::new(k.clone(), l.clone(), alpha, m.tau, m.beta)?);
        }
    }
    Ok(out)
}

pub fn measure_estimate(art: &mut Artifacts, cfg: &RunConfig) -> Result<Outcome> {
    let m = cfg
        .measure
        .as_ref()
        .ok_or_else(|| KamError::Invalid("config lacks a [measure] table".into()))?;
    let n = cfg.n();
    let model = FrequencyModel::<f64>::identity(n);
    let mut rows = Vec::new();
    let mut single_zones = Vec::new();
    for &alpha in &m.alpha {
        let zones = zones_for(m, n, alpha)?;
        let mc = estimate_measure(&zones, &model, m.mc_samples, cfg.seed)?;
        let exact = if n == 1 {
            Some(exact_measure_1d(&zones, &model)?)
        } else {
            None
        };
        rows.push((alpha, mc, exact));
        if n == 1 {
            let l = NormalIndex::difference(1, 2)?;
            single_zones.push(
                (m.k_min..=m.k_max)
                    .map(|k| ZoneSpec::new(Mode(vec![k]), l.clone(), alpha, m.tau, m.beta))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
    }
    let seed = cfg.seed;
    art.csv("measure.csv", |w| {
        writeln!(
            w,
            "alpha,mc_measure,ci_halfwidth,hits,samples,seed,exact_measure"
        )?;
        for (a, mc, ex) in &rows {
            let ex = ex.map(|x| format!("{x:.17e}")).unwrap_or_default();
            writeln!(
                w,
                "{a:e},{:.17e},{:.17e},{},{},{seed},{ex}",
                mc.value, mc.ci_halfwidth, mc.hits, mc.sample_count
            )?;
        }
        Ok(())
    })?;
    let mut c4 = None;
    if let Some(first) = single_zones.first() {
        let c = fit_c4(first, &model)?;
        let table: Vec<_> = single_zones
            .iter()
            .map(|z| zone_table(z, &model, c))
            .collect::<Result<Vec<_>>>()?
            .concat();
        art.csv("zones.csv", |w| write_zone_csv(&table, Some(seed), None, w))?;
        c4 = Some(c);
    }
    let mut curve = None;
    if let Some(kc) = &cfg.kam {
        let v = Potential::<f64>::from_config(&cfg.potential)?;
        let xis = cfg.omega_samples();
        let mut pts = Vec::new();
        for &alpha in &m.alpha {
            let mut c = kc.clone();
            c.alpha0 = alpha;
            let frac = match run(&v, &c, &xis) {
                Ok(r) => r.excised_fraction(),
                Err(KamError::EmptyParameterSet) => 1.0,
                Err(e) => return Err(e),
            };
            pts.push((alpha, frac));
        }
        let cv = excised_fraction_curve(pts);
        art.csv("excision.csv", |w| {
            writeln!(w, "alpha,excised_fraction")?;
            for (a, f) in &cv.rows {
                writeln!(w, "{a:e},{f:.17e}")?;
            }
            Ok(())
        })?;
        curve = Some(cv);
    }
    Ok(Outcome::ok(json!({
        "measures": rows.iter().map(|(a, mc, ex)| json!({"alpha": a, "mc": mc, "exact": ex})).collect::<Vec<_>>(),
        "c4": c4,
        "excision": curve,
    })))
}

fn reduce_for(cfg: &RunConfig, f: &FloquetSpec) -> Result<ReducedNormalForm64> {
    let base = kam_config(cfg)?;
    let mut kc = base.clone();
    kc.j_max = f.j_max;
    kc.k_max = f.k_max;
    kc.epsilon = f.epsilon;
    let v = Potential::<f64>::from_config(&cfg.potential)?;
    let rep = run(&v, &kc, &[f.omega.clone()])?;
    let s = rep.samples.into_iter().next().expect("one sample");
    match (s.status, s.reduced) {
        (_, Some(r)) => Ok(r),
        (SampleStatus::Excised { witness, .. }, None) => Err(KamError::Resonance(witness)),
        (status, None) => Err(KamError::Numeric(format!(
            "reduction did not converge: {status:?}"
        ))),
    }
}

pub fn floquet_verify(
    art: &mut Artifacts,
    cfg: &RunConfig,
    reduced: Option<ReducedNormalForm64>,
) -> Result<Outcome> {
    let f = cfg
        .floquet
        .as_ref()
        .ok_or_else(|| KamError::Invalid("config lacks a [floquet] table".into()))?;
    let rnf = match reduced {
        Some(r) => r,
        None => reduce_for(cfg, f)?,
    };
    if rnf.big_omega.len() != f.j_max {
        return Err(KamError::Invalid(format!(
            "imported reduction has J = {}, floquet table asks {}",
            rnf.big_omega.len(),
            f.j_max
        )));
    }
    let v = Potential::<f64>::from_config(&cfg.potential)?;
    let el = matrix_elements(&v, f.j_max, 2 * f.k_max, &f.omega, &default_rule(f.j_max))?;
    let k = assemble_floquet(&el, &f.omega, f.epsilon, f.j_max, f.k_max)?;
    let herm = k.hermiticity_residual();
    let sp = quasienergies(&k)?;
    let cmp = compare_reduction(&f.omega, &rnf.big_omega, &sp, f.k_max)?;
    let coupling = el
        .blocks
        .iter()
        .filter(|(k, _)| !k.is_zero())
        .map(|(_, b)| b.iter().map(|x| x.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let gap = unperturbed_gap(&f.omega, f.j_max, 2 * f.k_max);
    let tail = rnf.certificate.truncation_tail
        + rnf.certificate.final_max_coefficient
        + boundary_estimate(f.epsilon, coupling, gap, f.k_max / 4);
    let tol = (5.0 * tail).max(1e-10);
    art.csv("spectrum.csv", |w| write_spectrum_csv(&sp, w))?;

    let dt = f.dt.unwrap_or(0.05 / (2 * f.j_max - 1) as f64);
    let mut u0 = vec![Complex64::new(0.0, 0.0); f.j_max];
    let amp = (f.initial_modes as f64).sqrt().recip();
    u0[..f.initial_modes]
        .iter_mut()
        .for_each(|x| *x = Complex64::new(amp, 0.0));
    let every = ((0.1 / dt).round() as usize).max(1);
    let (trace, u) = evolve(&el, &f.omega, f.epsilon, &u0, f.t_end, dt, f.p, every)?;
    art.csv("trace.csv", |w| write_trace_csv(&trace, w))?;
    let z = reconstruct(&rnf, &u0, f.t_end)?;
    let trusted = f.j_max.saturating_sub(j_margin(f.j_max));
    let recon = u
        .iter()
        .zip(&z)
        .take(trusted)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    let summary = json!({
        "hermiticity_residual": herm,
        "comparison": cmp,
        "tolerance": tol,
        "truncation_tail_estimate": tail,
        "within_tolerance": cmp.max_deviation <= tol,
        "clustered_pairs": sp.clustered_pairs,
        "shift_symmetry_defect": shift_symmetry_defect(&sp, &f.omega),
        "sobolev_max_relative_deviation": trace.max_relative_deviation(),
        "sobolev_constant": trace.max_relative_deviation() / f.epsilon.max(f64::MIN_POSITIVE),
        "l2_drift": trace.l2_drift,
        "reconstruction_error": recon,
        "dt": dt,
    });
    art.json("floquet_report.json", summary.clone())?;
    Ok(Outcome::ok(summary))
}
