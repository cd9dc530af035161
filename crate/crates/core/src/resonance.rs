//! Resonance zones `𝓡_{kl}(α) = {ξ : |k·ω(ξ) + l·Ω(ξ)| < ⟨l⟩α/A_k}` and their measure.

use crate::error::{KamError, Result};
use crate::fourier::Mode;
use crate::homological::SmallDivisorPolicy;
use crate::scalar::{log_weight, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;

/// Sparse normal multi-index `l` with `|l| = Σ|l_j| ≤ 2`; entries are `(j, l_j)`, `j ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NormalIndex(Vec<(usize, i32)>);

impl NormalIndex {
    pub fn new(mut entries: Vec<(usize, i32)>) -> Result<Self> {
        entries.retain(|e| e.1 != 0);
        entries.sort();
        let mut merged: Vec<(usize, i32)> = Vec::new();
        for (j, c) in entries {
            if j == 0 {
                return Err(KamError::Invalid("normal indices are 1-based".into()));
            }
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += c,
                _ => merged.push((j, c)),
            }
        }
        merged.retain(|e| e.1 != 0);
        let size: i32 = merged.iter().map(|e| e.1.abs()).sum();
        if size > 2 {
            return Err(KamError::Invalid(format!("|l| = {size} exceeds 2")));
        }
        Ok(Self(merged))
    }

    pub fn zero() -> Self {
        Self(Vec::new())
    }

    pub fn unit(j: usize, sign: i32) -> Result<Self> {
        Self::new(vec![(j, sign)])
    }

    /// `e_i − e_j`.
    pub fn difference(i: usize, j: usize) -> Result<Self> {
        Self::new(vec![(i, 1), (j, -1)])
    }

    pub fn entries(&self) -> &[(usize, i32)] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// `⟨l⟩ = max(1, |Σ j l_j|)`.
    pub fn momentum(&self) -> usize {
        let s: i64 = self.0.iter().map(|&(j, c)| j as i64 * c as i64).sum();
        s.unsigned_abs().max(1) as usize
    }

    /// Compact label such as `+e3-e7`.
    pub fn label(&self) -> String {
        if self.0.is_empty() {
            return "0".into();
        }
        self.0
            .iter()
            .map(|&(j, c)| match c {
                1 => format!("+e{j}"),
                -1 => format!("-e{j}"),
                c => format!("{c:+}e{j}"),
            })
            .collect()
    }
}

/// `(⟨l⟩, ‖l‖_{2β}, ‖l‖_{−2β})` with `‖l‖_{±2β} = sup_j |l_j| (1 + ln j)^{±2β}`.
pub fn weighted_l_norms<T: Real>(l: &NormalIndex, beta: T) -> (usize, T, T) {
    let two_beta = T::lit(2.0) * beta;
    let mut plus = T::zero();
    let mut minus = T::zero();
    for &(j, c) in l.entries() {
        let a = T::from_int(c.abs() as i64);
        plus = plus.max(a * log_weight(j, two_beta));
        minus = minus.max(a * log_weight(j, -two_beta));
    }
    (l.momentum(), plus, minus)
}

/// `ω(ξ) = offset + scale ⊙ ξ` and `Ω_j(ξ) = 2j − 1 + amplitude·(1 + ln j)^{−2β_Ω}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyModel<T> {
    pub omega_offset: Vec<T>,
    pub omega_scale: Vec<T>,
    pub shift_amplitude: T,
    pub shift_beta: T,
}

impl<T: Real> FrequencyModel<T> {
    /// `ω(ξ) = ξ`, unperturbed `Ω_j = 2j − 1`.
    pub fn identity(n: usize) -> Self {
        Self {
            omega_offset: vec![T::zero(); n],
            omega_scale: vec![T::one(); n],
            shift_amplitude: T::zero(),
            shift_beta: T::one(),
        }
    }

    pub fn n(&self) -> usize {
        self.omega_offset.len()
    }

    pub fn omega(&self, xi: &[T]) -> Vec<T> {
        xi.iter()
            .zip(&self.omega_offset)
            .zip(&self.omega_scale)
            .map(|((x, o), s)| *o + *s * *x)
            .collect()
    }

    pub fn big_omega(&self, j: usize) -> T {
        T::from_int(2 * j as i64 - 1)
            + self.shift_amplitude * log_weight(j, -T::lit(2.0) * self.shift_beta)
    }

    /// `k·ω(ξ) + l·Ω`.
    pub fn divisor(&self, xi: &[T], k: &Mode, l: &NormalIndex) -> T {
        let mut d = k.dot(&self.omega(xi));
        for &(j, c) in l.entries() {
            d = d + T::from_int(c as i64) * self.big_omega(j);
        }
        d
    }
}

/// One resonance zone.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZoneSpec<T> {
    pub k: Mode,
    pub l: NormalIndex,
    pub alpha: T,
    pub tau: T,
    pub beta: T,
}

impl<T: Real> ZoneSpec<T> {
    pub fn new(k: Mode, l: NormalIndex, alpha: T, tau: T, beta: T) -> Result<Self> {
        if k.is_zero() && l.is_zero() {
            return Err(KamError::Invalid("(k, l) = (0, 0) is not a zone".into()));
        }
        if !(alpha > T::zero()) {
            return Err(KamError::Domain("alpha must be positive".into()));
        }
        Ok(Self {
            k,
            l,
            alpha,
            tau,
            beta,
        })
    }

    fn policy(&self) -> SmallDivisorPolicy<T> {
        SmallDivisorPolicy {
            alpha: self.alpha,
            tau: self.tau,
            beta: self.beta,
        }
    }

    /// `⟨l⟩α / A_k`.
    pub fn bound(&self) -> T {
        self.policy().bound(&self.k, self.l.momentum())
    }

    pub fn a_k(&self) -> T {
        self.policy().a_k(&self.k)
    }
}

/// True iff `|k·ω(ξ) + l·Ω(ξ)| < ⟨l⟩α / A_k`.
pub fn zone_indicator<T: Real>(xi: &[T], spec: &ZoneSpec<T>, model: &FrequencyModel<T>) -> bool {
    model.divisor(xi, &spec.k, &spec.l).abs() < spec.bound()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub value: f64,
    /// 95% binomial half-width.
    pub ci_halfwidth: f64,
    pub sample_count: usize,
    pub hits: usize,
}

impl MeasureEstimate {
    /// Whether `x` lies within the interval, widened by `slack`.
    pub fn agrees_with(&self, x: f64, slack: f64) -> bool {
        (self.value - x).abs() <= self.ci_halfwidth + slack
    }
}

/// Monte-Carlo measure of the union of zones over `Π = [0, 2π]ⁿ`.
pub fn estimate_measure<T: Real>(
    zones: &[ZoneSpec<T>],
    model: &FrequencyModel<T>,
    samples: usize,
    seed: u64,
) -> Result<MeasureEstimate> {
    if samples < 1000 {
        return Err(KamError::Invalid(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    let n = model.n();
    // Ω does not depend on ξ, so only k·ω(ξ) changes between samples
    let packed: Vec<(Vec<T>, T, T)> = zones
        .iter()
        .map(|z| {
            let k: Vec<T> = z.k.0.iter().map(|&c| T::from_int(c as i64)).collect();
            let lo = model.divisor(&vec![T::zero(); n], &Mode::zero(n), &z.l);
            (k, lo, z.bound())
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut xi = vec![T::zero(); n];
    for _ in 0..samples {
        for x in xi.iter_mut() {
            *x = T::lit(rng.gen_range(0.0..std::f64::consts::TAU));
        }
        let omega = model.omega(&xi);
        let inside = packed.iter().any(|(k, lo, b)| {
            let kw = k
                .iter()
                .zip(&omega)
                .fold(T::zero(), |a, (c, w)| a + *c * *w);
            (kw + *lo).abs() < *b
        });
        if inside {
            hits += 1;
        }
    }
    let vol = std::f64::consts::TAU.powi(n as i32);
    let p = hits as f64 / samples as f64;
    let half = 1.96 * (p * (1.0 - p) / samples as f64).sqrt() * vol;
    // with no hits the normal approximation degenerates; use the rule of three
    let half = if hits == 0 || hits == samples {
        half.max(3.0 / samples as f64 * vol)
    } else {
        half
    };
    Ok(MeasureEstimate {
        value: p * vol,
        ci_halfwidth: half,
        sample_count: samples,
        hits,
    })
}

/// Open interval of `ξ ∈ ℝ` for one zone when `n = 1`; `None` if empty, the whole line if `k = 0` and it holds.
pub fn zone_interval<T: Real>(
    spec: &ZoneSpec<T>,
    model: &FrequencyModel<T>,
) -> Result<Option<(f64, f64)>> {
    if model.n() != 1 {
        return Err(KamError::Invalid("exact interval path needs n = 1".into()));
    }
    let slope = T::from_int(spec.k.0[0] as i64) * model.omega_scale[0];
    let at0 = model.divisor(&[T::zero()], &spec.k, &spec.l);
    let b = spec.bound();
    if slope == T::zero() {
        return Ok(if at0.abs() < b {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        });
    }
    let c = (-at0 / slope).as_f64();
    let h = (b / slope.abs()).as_f64();
    Ok(Some((c - h, c + h)))
}

/// Exact measure of the union of zones within `[0, 2π]` for `n = 1` and affine `ω`.
pub fn exact_measure_1d<T: Real>(zones: &[ZoneSpec<T>], model: &FrequencyModel<T>) -> Result<f64> {
    let tau = std::f64::consts::TAU;
    let mut iv: Vec<(f64, f64)> = Vec::new();
    for z in zones {
        if let Some((a, b)) = zone_interval(z, model)? {
            let (a, b) = (a.max(0.0), b.min(tau));
            if b > a {
                iv.push((a, b));
            }
        }
    }
    iv.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in iv {
        match cur {
            Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((a, b)) = cur {
        total += b - a;
    }
    Ok(total)
}

/// Every `l` with `|l| ≤ 2` supported in `{1..=jmax}`, one per `±` pair, excluding `0`.
pub fn enumerate_normal_indices(jmax: usize) -> Vec<NormalIndex> {
    let mut out = Vec::with_capacity(jmax * jmax + 2 * jmax);
    for i in 1..=jmax {
        out.push(NormalIndex(vec![(i, 1)]));
        out.push(NormalIndex(vec![(i, 2)]));
        for j in i + 1..=jmax {
            out.push(NormalIndex(vec![(i, 1), (j, 1)]));
            out.push(NormalIndex(vec![(i, 1), (j, -1)]));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentumBoundReport {
    pub checked: usize,
    pub violations: usize,
    /// Smallest `ln(1 + ⟨l⟩) / ((1/8)‖l‖_{2β}^{1/2β}‖l‖_{−2β}^{1/2β})`.
    pub min_ratio: f64,
    pub argmin: String,
}

/// Checks `ln(1 + ⟨l⟩) ≥ (1/8)‖l‖_{2β}^{1/(2β)} ‖l‖_{−2β}^{1/(2β)}` for all `|l| ≤ 2` in `{1..=jmax}`.
pub fn check_momentum_bound(jmax: usize, beta: f64) -> MomentumBoundReport {
    let inv = 1.0 / (2.0 * beta);
    let mut rep = MomentumBoundReport {
        checked: 0,
        violations: 0,
        min_ratio: f64::INFINITY,
        argmin: String::new(),
    };
    for l in enumerate_normal_indices(jmax) {
        let (m, p, q) = weighted_l_norms(&l, beta);
        let rhs = 0.125 * p.powf(inv) * q.powf(inv);
        let lhs = (1.0 + m as f64).ln();
        let ratio = lhs / rhs;
        rep.checked += 1;
        if lhs < rhs {
            rep.violations += 1;
        }
        if ratio < rep.min_ratio {
            rep.min_ratio = ratio;
            rep.argmin = l.label();
        }
    }
    rep
}

/// `j₀ = max(exp(|k|^{(τ−1)/(2β)}), α^{γ/δ}|k|^{(1−τ)/δ})` with `γ = δ/(δ − 1)`.
pub fn union_cutoff(k_norm: u32, alpha: f64, tau: f64, beta: f64, delta: f64) -> Result<f64> {
    if delta >= 0.0 {
        return Err(KamError::Domain(format!(
            "tail exponent delta must be negative, got {delta}"
        )));
    }
    let k = k_norm as f64;
    let gamma = delta / (delta - 1.0);
    Ok((k.powf((tau - 1.0) / (2.0 * beta)))
        .exp()
        .max(alpha.powf(gamma / delta) * k.powf((1.0 - tau) / delta)))
}

/// `μ = δ/(δ − 1)`.
pub fn measure_exponent(delta: f64) -> f64 {
    delta / (delta - 1.0)
}

/// `c₃ = |a₁| / (2(2M₁ + M + 3))`.
pub fn zone_width_constant(a1: f64, m1: f64, m: f64) -> f64 {
    a1.abs() / (2.0 * (2.0 * m1 + m + 3.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct ZoneRow {
    pub k: Vec<i32>,
    pub l: String,
    pub alpha: f64,
    pub measure: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Single-zone measures against `c₄α/A_k`.
pub fn zone_table<T: Real>(
    zones: &[ZoneSpec<T>],
    model: &FrequencyModel<T>,
    c4: f64,
) -> Result<Vec<ZoneRow>> {
    zones
        .iter()
        .map(|z| {
            let m = exact_measure_1d(std::slice::from_ref(z), model)?;
            let bound = c4 * z.alpha.as_f64() / z.a_k().as_f64();
            Ok(ZoneRow {
                k: z.k.0.clone(),
                l: z.l.label(),
                alpha: z.alpha.as_f64(),
                measure: m,
                bound,
                ratio: m / bound,
            })
        })
        .collect()
}

/// Smallest `c₄` with `measure ≤ c₄α/A_k` on every zone.
pub fn fit_c4<T: Real>(zones: &[ZoneSpec<T>], model: &FrequencyModel<T>) -> Result<f64> {
    let mut c: f64 = 0.0;
    for z in zones {
        let m = exact_measure_1d(std::slice::from_ref(z), model)?;
        c = c.max(m * z.a_k().as_f64() / z.alpha.as_f64());
    }
    Ok(c)
}

pub fn write_zone_csv<W: Write>(
    rows: &[ZoneRow],
    seed: Option<u64>,
    samples: Option<usize>,
    w: W,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "k", "l", "alpha", "measure", "bound", "ratio", "seed", "samples",
    ])?;
    for r in rows {
        wr.write_record([
            r.k.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            r.l.clone(),
            format!("{:e}", r.alpha),
            format!("{:e}", r.measure),
            format!("{:e}", r.bound),
            format!("{:e}", r.ratio),
            seed.map(|s| s.to_string()).unwrap_or_default(),
            samples.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ExcisionCurve {
    pub rows: Vec<(f64, f64)>,
    pub strictly_decreasing: bool,
    /// Least-squares slope of `ln(fraction)` against `ln α` over rows with positive fraction.
    pub exponent: Option<f64>,
}

/// Orders `(α, excised fraction)` rows by decreasing `α` and fits the power law.
pub fn excised_fraction_curve(mut rows: Vec<(f64, f64)>) -> ExcisionCurve {
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    let strictly_decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.1 > 0.0)
        .map(|r| (r.0.ln(), r.1.ln()))
        .collect();
    let exponent = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    ExcisionCurve {
        rows,
        strictly_decreasing,
        exponent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l_norm_examples() {
        let beta = 1.5;
        let l = NormalIndex::difference(2, 5).unwrap();
        let (m, p, q) = weighted_l_norms(&l, beta);
        assert_eq!(m, 3);
        assert!((p - (1.0 + 5f64.ln()).powf(3.0)).abs() < 1e-12);
        assert!((q - (1.0 + 2f64.ln()).powf(-3.0)).abs() < 1e-12);
        let (m, p, q) = weighted_l_norms(&NormalIndex::unit(1, 1).unwrap(), beta);
        assert_eq!((m, p, q), (1, 1.0, 1.0));
        let l = NormalIndex::new(vec![(5, 2)]).unwrap();
        let (m, p, _) = weighted_l_norms(&l, beta);
        assert_eq!(m, 10);
        assert!((p - 2.0 * (1.0 + 5f64.ln()).powf(3.0)).abs() < 1e-12);
        assert!(NormalIndex::new(vec![(1, 2), (3, 1)]).is_err());
    }

    #[test]
    fn single_zone_interval_length() {
        let model = FrequencyModel::<f64>::identity(1);
        let z = ZoneSpec::new(Mode(vec![1]), NormalIndex::zero(), 0.1, 3.0, 6.0).unwrap();
        let m = exact_measure_1d(&[z.clone()], &model).unwrap();
        // |ξ| < α/A₁ clipped to [0, 2π] keeps one half
        assert!((m - 0.1 / z.a_k()).abs() < 1e-15);
        assert!(zone_indicator(&[0.01], &z, &model));
        assert!(!zone_indicator(&[0.5], &z, &model));
    }
}
