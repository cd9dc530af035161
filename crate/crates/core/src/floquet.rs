//! Truncated Floquet operator `K = −iω·∂_θ + T + εV` in the basis `e^{ik·θ}h_j`, and direct time evolution.
//!
//! This path is an independent check on the reduction and runs in `f64` only.

use crate::error::{KamError, Result};
use crate::fourier::{modes, Mode};
use crate::kam::ReducedNormalForm;
use crate::quadratic::FourierBlockMatrix;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use std::io::Write;

/// Largest dense dimension assembled.
pub const DENSE_BUDGET: usize = 4000;

pub struct FloquetMatrix {
    pub n: usize,
    pub j_max: usize,
    pub k_max: u32,
    pub omega: Vec<f64>,
    pub epsilon: f64,
    /// Basis order: index `k_idx·J + (j − 1)` with `k_idx` into `modes(n, k_max)`.
    pub basis_k: Vec<Mode>,
    pub matrix: DMatrix<Complex64>,
}

impl FloquetMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `(j, k)` for basis index `i`, `j` 1-based.
    pub fn label(&self, i: usize) -> (usize, &Mode) {
        (i % self.j_max + 1, &self.basis_k[i / self.j_max])
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let m = &self.matrix;
        let mut r: f64 = 0.0;
        for a in 0..m.nrows() {
            for b in a..m.ncols() {
                r = r.max((m[(a, b)] - m[(b, a)].conj()).norm());
            }
        }
        r
    }
}

/// Assembles `(k·ω + 2j − 1)δ + ε V̂_{jl}(k − k')`; `elements` must carry Fourier width `2K`.
pub fn assemble_floquet(
    elements: &FourierBlockMatrix<f64>,
    omega: &[f64],
    epsilon: f64,
    j_max: usize,
    k_max: u32,
) -> Result<FloquetMatrix> {
    let n = omega.len();
    if elements.n != n {
        return Err(KamError::Invalid(format!(
            "elements have n = {}, omega has {n}",
            elements.n
        )));
    }
    if elements.j_max < j_max {
        return Err(KamError::Invalid(format!(
            "elements cover J = {}, need {j_max}",
            elements.j_max
        )));
    }
    let basis_k = modes(n, k_max);
    let dim = basis_k.len() * j_max;
    if dim > DENSE_BUDGET {
        return Err(KamError::Budget(format!(
            "Floquet dimension {dim} exceeds dense budget {DENSE_BUDGET}"
        )));
    }
    let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (a, ka) in basis_k.iter().enumerate() {
        let kw = ka.dot(omega);
        for j in 0..j_max {
            m[(a * j_max + j, a * j_max + j)] += Complex64::new(kw + (2 * j + 1) as f64, 0.0);
        }
        if epsilon == 0.0 {
            continue;
        }
        for (b, kb) in basis_k.iter().enumerate() {
            let Some(block) = elements.get(&ka.sub(kb)) else {
                continue;
            };
            for j in 0..j_max {
                for l in 0..j_max {
                    m[(a * j_max + j, b * j_max + l)] += block[(j, l)] * epsilon;
                }
            }
        }
    }
    Ok(FloquetMatrix {
        n,
        j_max,
        k_max,
        omega: omega.to_vec(),
        epsilon,
        basis_k,
        matrix: m,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiEnergy {
    pub value: f64,
    pub j: usize,
    pub k: Vec<i32>,
    /// Squared weight of the dominant basis vector.
    pub dominance: f64,
    pub trusted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiSpectrum {
    pub levels: Vec<QuasiEnergy>,
    pub j_margin: usize,
    pub k_margin: u32,
    /// Adjacent eigenvalue pairs closer than `1e-9`.
    pub clustered_pairs: usize,
}

/// `m_b = max(5, J/8)`.
pub fn j_margin(j_max: usize) -> usize {
    5.max(j_max / 8)
}

/// Full Hermitian eigendecomposition, labeled by eigenvector dominance.
pub fn quasienergies(k: &FloquetMatrix) -> Result<QuasiSpectrum> {
    let eig = SymmetricEigen::try_new(k.matrix.clone(), 1e-14, 0)
        .ok_or_else(|| KamError::Numeric("Hermitian eigensolver did not converge".into()))?;
    let jm = j_margin(k.j_max);
    let km = k.k_max / 4;
    let mut levels = Vec::with_capacity(k.dim());
    for c in 0..k.dim() {
        let v = eig.eigenvectors.column(c);
        let (arg, w) = v
            .iter()
            .enumerate()
            .map(|(i, x)| (i, x.norm_sqr()))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let (j, mode) = k.label(arg);
        let trusted = j + jm <= k.j_max && mode.norm() + km <= k.k_max;
        levels.push(QuasiEnergy {
            value: eig.eigenvalues[c],
            j,
            k: mode.0.clone(),
            dominance: w,
            trusted,
        });
    }
    levels.sort_by(|a, b| a.value.total_cmp(&b.value));
    let clustered_pairs = levels
        .windows(2)
        .filter(|w| w[1].value - w[0].value < 1e-9)
        .count();
    Ok(QuasiSpectrum {
        levels,
        j_margin: jm,
        k_margin: km,
        clustered_pairs,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionComparison {
    pub trusted: usize,
    pub max_deviation: f64,
    /// Fraction of trusted levels whose nearest prediction carries their own label.
    pub label_match_rate: f64,
    pub inconclusive: bool,
    /// Label with the largest deviation.
    pub worst: Option<(usize, Vec<i32>)>,
}

/// Compares trusted levels with `k·ω + Ω*_j`.
pub fn compare_reduction(
    omega: &[f64],
    big_omega: &[f64],
    spectrum: &QuasiSpectrum,
    k_max: u32,
) -> Result<ReductionComparison> {
    if omega.is_empty() {
        return Err(KamError::Invalid("empty frequency vector".into()));
    }
    let kset = modes(omega.len(), k_max);
    let mut predicted: Vec<f64> = Vec::with_capacity(kset.len() * big_omega.len());
    for k in &kset {
        let kw = k.dot(omega);
        predicted.extend(big_omega.iter().map(|o| kw + o));
    }
    predicted.sort_by(f64::total_cmp);
    let mut trusted = 0usize;
    let mut matched = 0usize;
    let mut max_dev = 0.0f64;
    let mut worst = None;
    for lv in spectrum.levels.iter().filter(|l| l.trusted) {
        if lv.j > big_omega.len() {
            continue;
        }
        trusted += 1;
        let own = Mode(lv.k.clone()).dot(omega) + big_omega[lv.j - 1];
        let dev = (lv.value - own).abs();
        let pos = predicted.partition_point(|p| *p < lv.value);
        let nearest = [pos.checked_sub(1), Some(pos)]
            .into_iter()
            .flatten()
            .filter_map(|i| predicted.get(i))
            .map(|p| (lv.value - p).abs())
            .fold(f64::INFINITY, f64::min);
        if dev <= nearest {
            matched += 1;
        }
        if dev > max_dev || worst.is_none() {
            max_dev = max_dev.max(dev);
            worst = Some((lv.j, lv.k.clone()));
        }
    }
    let rate = if trusted == 0 {
        0.0
    } else {
        matched as f64 / trusted as f64
    };
    Ok(ReductionComparison {
        trusted,
        max_deviation: max_dev,
        label_match_rate: rate,
        inconclusive: rate < 0.8,
        worst,
    })
}

/// Largest `|λ(j, k + e_m) − λ(j, k) − ω_m|` over pairs of trusted levels.
pub fn shift_symmetry_defect(spectrum: &QuasiSpectrum, omega: &[f64]) -> f64 {
    use std::collections::HashMap;
    let mut by_label: HashMap<(usize, Vec<i32>), f64> = HashMap::new();
    for lv in spectrum.levels.iter().filter(|l| l.trusted) {
        by_label.insert((lv.j, lv.k.clone()), lv.value);
    }
    let mut worst: f64 = 0.0;
    for ((j, k), v) in &by_label {
        for (m, w) in omega.iter().enumerate() {
            let mut k2 = k.clone();
            k2[m] += 1;
            if let Some(v2) = by_label.get(&(*j, k2)) {
                worst = worst.max((v2 - v - w).abs());
            }
        }
    }
    worst
}

/// Eigenvalue error of a level `d` couplings away from the `k`-truncation edge: `(εv)^{2(d+1)} / g^{2d+1}`.
pub fn boundary_estimate(epsilon: f64, coupling: f64, gap: f64, depth: u32) -> f64 {
    let d = depth as i32;
    (epsilon * coupling).powi(2 * (d + 1)) / gap.powi(2 * d + 1)
}

/// Smallest `|k·ω + Ω_j − Ω_l|` with `0 < |k| ≤ k_max` under unperturbed `Ω`.
pub fn unperturbed_gap(omega: &[f64], j_max: usize, k_max: u32) -> f64 {
    let mut g = f64::INFINITY;
    for k in modes(omega.len(), k_max) {
        if k.is_zero() {
            continue;
        }
        let kw = k.dot(omega);
        for d in -(j_max as i64 - 1)..(j_max as i64) {
            g = g.min((kw + 2.0 * d as f64).abs());
        }
    }
    g
}

#[derive(Clone, Debug, Serialize)]
pub struct SobolevTrace {
    pub p: f64,
    pub times: Vec<f64>,
    /// `(Σ j^p |u_j|²)^{1/2}`
    pub norms: Vec<f64>,
    /// Largest `|‖u(t)‖ − ‖u₀‖|` seen.
    pub l2_drift: f64,
}

impl SobolevTrace {
    /// `max_t |‖u(t)‖_{H^p} / ‖u₀‖_{H^p} − 1|`.
    pub fn max_relative_deviation(&self) -> f64 {
        let n0 = self.norms[0];
        self.norms
            .iter()
            .map(|x| (x / n0 - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn sobolev_norm(u: &[Complex64], p: f64) -> f64 {
    u.iter()
        .enumerate()
        .map(|(i, x)| ((i + 1) as f64).powf(p) * x.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn l2(u: &DVector<Complex64>) -> f64 {
    u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `εV(ωt)` in the Hermite basis.
fn potential_at(
    elements: &FourierBlockMatrix<f64>,
    omega: &[f64],
    epsilon: f64,
    t: f64,
    j_max: usize,
) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(j_max, j_max, Complex64::new(0.0, 0.0));
    for (k, b) in &elements.blocks {
        let ph = Complex64::from_polar(epsilon, k.dot(omega) * t);
        for j in 0..j_max {
            for l in 0..j_max {
                m[(j, l)] += b[(j, l)] * ph;
            }
        }
    }
    m
}

/// Strang splitting of `i∂_t u = (T + εV(·, ωt))u`: exact harmonic phases around a Cayley potential step.
///
/// Returns the trace sampled every `record_every` steps and the final state.
pub fn evolve(
    elements: &FourierBlockMatrix<f64>,
    omega: &[f64],
    epsilon: f64,
    u0: &[Complex64],
    t_end: f64,
    dt: f64,
    p: f64,
    record_every: usize,
) -> Result<(SobolevTrace, Vec<Complex64>)> {
    let j_max = u0.len();
    if j_max == 0 || elements.j_max < j_max {
        return Err(KamError::Invalid(format!(
            "state length {j_max} not covered by elements (J = {})",
            elements.j_max
        )));
    }
    if !(dt > 0.0) || dt * (2 * j_max - 1) as f64 > 0.1 {
        return Err(KamError::Invalid(format!(
            "dt = {dt} violates dt·(2J − 1) ≤ 0.1 at J = {j_max}"
        )));
    }
    if !(t_end >= 0.0) || record_every == 0 {
        return Err(KamError::Invalid(
            "t_end must be non-negative and record_every positive".into(),
        ));
    }
    let steps = (t_end / dt).round() as usize;
    let half: Vec<Complex64> = (0..j_max)
        .map(|j| Complex64::from_polar(1.0, -0.5 * dt * (2 * j + 1) as f64))
        .collect();
    let mut u = DVector::from_column_slice(u0);
    let n0 = l2(&u);
    let mut trace = SobolevTrace {
        p,
        times: vec![0.0],
        norms: vec![sobolev_norm(u0, p)],
        l2_drift: 0.0,
    };
    let id = DMatrix::<Complex64>::identity(j_max, j_max);
    let ihalf = Complex64::new(0.0, 0.5 * dt);
    for s in 0..steps {
        let t = s as f64 * dt;
        u.iter_mut().zip(&half).for_each(|(x, h)| *x *= h);
        if epsilon != 0.0 {
            let v = potential_at(elements, omega, epsilon, t + 0.5 * dt, j_max);
            let rhs = (&id - &v * ihalf) * &u;
            let lhs = &id + &v * ihalf;
            u = lhs
                .lu()
                .solve(&rhs)
                .ok_or_else(|| KamError::Numeric("singular Cayley factor".into()))?;
        }
        u.iter_mut().zip(&half).for_each(|(x, h)| *x *= h);
        trace.l2_drift = trace.l2_drift.max((l2(&u) - n0).abs());
        if (s + 1) % record_every == 0 || s + 1 == steps {
            trace.times.push((s + 1) as f64 * dt);
            trace.norms.push(sobolev_norm(u.as_slice(), p));
        }
    }
    Ok((trace, u.as_slice().to_vec()))
}

/// `z(t) = L¹¹(ωt) e^{−iΩ*t} L¹¹(0)^{−1} z₀` from the exported conjugator.
pub fn reconstruct(
    rnf: &ReducedNormalForm<f64>,
    z0: &[Complex64],
    t: f64,
) -> Result<Vec<Complex64>> {
    let j_max = rnf.big_omega.len();
    if z0.len() != j_max {
        return Err(KamError::Invalid(format!(
            "state length {} differs from J = {j_max}",
            z0.len()
        )));
    }
    let l11 = |theta: &[f64]| {
        let mut m = DMatrix::<Complex64>::identity(j_max, j_max);
        for (k, w) in &rnf.phi.w {
            if let Some(b) = w.block(0, 0) {
                m += b * Complex64::from_polar(1.0, k.dot(theta));
            }
        }
        m
    };
    let theta_t: Vec<f64> = rnf.omega.iter().map(|w| w * t).collect();
    let zero = vec![0.0; rnf.omega.len()];
    let y0 = l11(&zero)
        .lu()
        .solve(&DVector::from_column_slice(z0))
        .ok_or_else(|| KamError::Numeric("singular conjugator at θ = 0".into()))?;
    let yt = DVector::from_iterator(
        j_max,
        y0.iter()
            .zip(&rnf.big_omega)
            .map(|(y, o)| y * Complex64::from_polar(1.0, -o * t)),
    );
    Ok((l11(&theta_t) * yt).as_slice().to_vec())
}

/// Largest entry of the off-diagonal `L¹²`, `L²¹` blocks.
pub fn conjugator_offdiagonal(rnf: &ReducedNormalForm<f64>) -> f64 {
    let mut r: f64 = 0.0;
    for w in rnf.phi.w.values() {
        for (a, b) in [(0, 1), (1, 0)] {
            if let Some(m) = w.block(a, b) {
                r = r.max(m.iter().map(|x| x.norm()).fold(0.0, f64::max));
            }
        }
    }
    r
}

pub fn write_spectrum_csv<W: Write>(s: &QuasiSpectrum, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["lambda", "j", "k", "trusted"])?;
    for l in &s.levels {
        wr.write_record([
            format!("{:.17e}", l.value),
            l.j.to_string(),
            l.k.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            l.trusted.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(t: &SobolevTrace, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "hp_norm"])?;
    for (a, b) in t.times.iter().zip(&t.norms) {
        wr.write_record([format!("{a:.6}"), format!("{b:.17e}")])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::default_rule;
    use crate::potential::{matrix_elements, Potential};

    #[test]
    fn unperturbed_spectrum_is_lattice() {
        let v = Potential::<f64>::log_decay(1, 6.0);
        let omega = [5f64.sqrt() - 1.0];
        let el = matrix_elements(&v, 6, 4, &omega, &default_rule(6)).unwrap();
        let k = assemble_floquet(&el, &omega, 0.0, 6, 2).unwrap();
        let s = quasienergies(&k).unwrap();
        for l in &s.levels {
            let want = l.k[0] as f64 * omega[0] + (2 * l.j - 1) as f64;
            assert!((l.value - want).abs() < 1e-12);
        }
    }

    #[test]
    fn free_evolution_is_phase_only() {
        let v = Potential::<f64>::log_decay(1, 6.0);
        let omega = [1.3];
        let el = matrix_elements(&v, 4, 1, &omega, &default_rule(4)).unwrap();
        let u0 = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let (tr, u) = evolve(&el, &omega, 0.0, &u0, 1.0, 0.01, 2.0, 10).unwrap();
        assert!((u[0] - Complex64::from_polar(1.0, -1.0)).norm() < 1e-12);
        assert!(tr.max_relative_deviation() < 1e-13);
        assert!(evolve(&el, &omega, 0.0, &u0, 1.0, 0.1, 2.0, 10).is_err());
    }
}
