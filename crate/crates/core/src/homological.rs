//! Closed-form solution of `{F, N} + N̂ = R` for quadratic `R`.
//!
//! With the bracket convention `Ḟ = {F, H}`, a monomial `e^{ik·θ} z̄_j z_l` satisfies
//! `{·, N} = i(k·ω + Ω_j − Ω_l)·`, `z_j z_l` picks up `i(k·ω − Ω_j − Ω_l)` and
//! `z̄_j z̄_l` picks up `i(k·ω + Ω_j + Ω_l)`, so `F = R / (i·divisor)` channel by channel.

use crate::error::{DivisorWitness, KamError, Result};
use crate::flow::poisson_bracket;
use crate::fourier::{modes, Mode};
use crate::norms::{gamma_norm, gamma_plus_norm, DecayProfile};
use crate::quadratic::{Channel, NormalForm, QuadraticHamiltonian, QuadraticPart};
use crate::scalar::{cplx, czero, Real};
use crate::zeta::CMat;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Exponential small-divisor condition `|k·ω + l·Ω| ≥ ⟨l⟩α / A_k`, `A_k = e^{|k|^{τ/β}}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallDivisorPolicy<T> {
    pub alpha: T,
    pub tau: T,
    pub beta: T,
}

impl<T: Real> SmallDivisorPolicy<T> {
    /// Requires `α > 0`, `τ ≥ n + 2` and `β/τ ≥ 2`.
    pub fn new(alpha: T, tau: T, beta: T, n: usize) -> Result<Self> {
        if !(alpha > T::zero()) {
            return Err(KamError::Domain(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if tau < T::from_int(n as i64 + 2) {
            return Err(KamError::Domain(format!(
                "tau = {tau} below n + 2 = {}",
                n + 2
            )));
        }
        if beta < T::lit(2.0) * tau {
            return Err(KamError::Domain(format!(
                "beta = {beta} below 2·tau = {}",
                T::lit(2.0) * tau
            )));
        }
        Ok(Self { alpha, tau, beta })
    }

    pub fn with_alpha(&self, alpha: T) -> Self {
        Self { alpha, ..*self }
    }

    pub fn iota(&self) -> T {
        self.beta / self.tau
    }

    /// `A_k = exp(|k|^{τ/β})`, with `A_0 = 1`.
    pub fn a_k(&self, k: &Mode) -> T {
        let kn = k.norm();
        if kn == 0 {
            T::one()
        } else {
            T::from_int(kn as i64).powf(self.tau / self.beta).exp()
        }
    }

    /// `⟨l⟩α / A_k`.
    pub fn bound(&self, k: &Mode, momentum: usize) -> T {
        T::from_int(momentum.max(1) as i64) * self.alpha / self.a_k(k)
    }

    /// `t₁ = τ / (β − τ)`.
    pub fn t1(&self) -> T {
        self.tau / (self.beta - self.tau)
    }
}

/// `k·ω + Ω_j − Ω_l`, `k·ω − Ω_j − Ω_l` or `k·ω + Ω_j + Ω_l` by channel; `j, l` are 0-based.
pub fn small_divisor<T: Real>(
    k: &Mode,
    j: usize,
    l: usize,
    channel: Channel,
    normal: &NormalForm<T>,
) -> T {
    let kw = k.dot(&normal.omega);
    let (a, b) = (normal.big_omega[j], normal.big_omega[l]);
    match channel {
        Channel::ZbarZ => kw + a - b,
        Channel::ZZ => kw - a - b,
        Channel::ZbarZbar => kw + a + b,
    }
}

/// Divisor of a θ-only term.
pub fn theta_divisor<T: Real>(k: &Mode, omega: &[T]) -> T {
    k.dot(omega)
}

/// `⟨l⟩` of the multi-index attached to `(j, l, channel)`; `j, l` are 0-based.
pub fn momentum(j: usize, l: usize, channel: Channel) -> usize {
    match channel {
        Channel::ZbarZ => j.abs_diff(l).max(1),
        Channel::ZZ | Channel::ZbarZbar => j + l + 2,
    }
}

/// The `k = 0`, `j = l`, `zz̄` terms belong to the normal form and are never divided.
pub fn is_normal_term(k: &Mode, j: usize, l: usize, channel: Channel) -> bool {
    channel == Channel::ZbarZ && j == l && k.is_zero()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivisorRecord {
    pub k: Vec<i32>,
    /// 1-based.
    pub j: usize,
    /// 1-based.
    pub l: usize,
    pub channel: Channel,
    pub divisor: f64,
    pub bound: f64,
}

impl DivisorRecord {
    fn witness(&self) -> DivisorWitness {
        DivisorWitness {
            k: self.k.clone(),
            j: self.j,
            l: self.l,
            channel: self.channel.label().to_string(),
            divisor: self.divisor,
            bound: self.bound,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HomologicalSolution<T: Real> {
    pub f: QuadraticPart<T>,
    /// `Ω̂_j`, the real `k = 0` diagonal of `R`.
    pub n_hat: Vec<T>,
    /// Tangential shift; identically zero for y-independent `R`.
    pub omega_hat: Vec<T>,
    pub divisor_log: Vec<DivisorRecord>,
}

/// Solves the homological equation, checking every divided coefficient against `policy`.
pub fn solve<T: Real>(
    r: &QuadraticPart<T>,
    normal: &NormalForm<T>,
    policy: &SmallDivisorPolicy<T>,
) -> Result<HomologicalSolution<T>> {
    solve_impl(r, normal, policy, true)
}

/// As [`solve`] without recording the divisor log.
pub fn solve_quiet<T: Real>(
    r: &QuadraticPart<T>,
    normal: &NormalForm<T>,
    policy: &SmallDivisorPolicy<T>,
) -> Result<HomologicalSolution<T>> {
    solve_impl(r, normal, policy, false)
}

fn solve_impl<T: Real>(
    r: &QuadraticPart<T>,
    normal: &NormalForm<T>,
    policy: &SmallDivisorPolicy<T>,
    record: bool,
) -> Result<HomologicalSolution<T>> {
    let dim = r.j_max();
    if normal.big_omega.len() != dim || normal.omega.len() != r.n() {
        return Err(KamError::Invalid(
            "normal form and perturbation truncations differ".into(),
        ));
    }
    let mut f = QuadraticPart::zero(r.n(), r.k_max(), dim);
    let mut log = Vec::new();
    let mut worst: Option<(T, DivisorRecord)> = None;
    let mut n_hat = vec![T::zero(); dim];
    for channel in [Channel::ZbarZ, Channel::ZZ, Channel::ZbarZbar] {
        for (k, block) in &r.channel(channel).blocks {
            let mut out = CMat::from_element(dim, dim, czero());
            for j in 0..dim {
                for l in 0..dim {
                    if is_normal_term(k, j, l, channel) {
                        n_hat[j] = block[(j, j)].re;
                        continue;
                    }
                    let d = small_divisor(k, j, l, channel, normal);
                    let b = policy.bound(k, momentum(j, l, channel));
                    let rec = || DivisorRecord {
                        k: k.0.clone(),
                        j: j + 1,
                        l: l + 1,
                        channel,
                        divisor: d.as_f64(),
                        bound: b.as_f64(),
                    };
                    if d.abs() < b {
                        let ratio = d.abs() / b;
                        if worst.as_ref().map_or(true, |(w, _)| ratio < *w) {
                            worst = Some((ratio, rec()));
                        }
                        continue;
                    }
                    if record {
                        log.push(rec());
                    }
                    // R / (i d) = −i R / d
                    out[(j, l)] = block[(j, l)] * cplx(T::zero(), -T::one() / d);
                }
            }
            f.channel_mut(channel).insert(k.clone(), out);
        }
    }
    if let Some((_, rec)) = worst {
        return Err(KamError::Resonance(rec.witness()));
    }
    Ok(HomologicalSolution {
        f,
        n_hat,
        omega_hat: vec![T::zero(); r.n()],
        divisor_log: log,
    })
}

/// `N̂` as a quadratic part: `Σ_j Ω̂_j z̄_j z_j` at `k = 0`.
pub fn normal_correction<T: Real>(n_hat: &[T], n: usize, k_max: u32) -> QuadraticPart<T> {
    let dim = n_hat.len();
    let mut q = QuadraticPart::zero(n, k_max, dim);
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        n_hat.iter().map(|&x| cplx(x, T::zero())),
    ));
    q.zbar_z.insert(Mode::zero(n), d);
    q
}

/// Coefficient-wise `max |{F, N} + N̂ − R|`.
pub fn residual<T: Real>(
    r: &QuadraticPart<T>,
    sol: &HomologicalSolution<T>,
    normal: &NormalForm<T>,
) -> T {
    let f = QuadraticHamiltonian::from_part(sol.f.clone());
    let nh = QuadraticHamiltonian::normal_only(normal.clone(), r.k_max());
    let lhs = poisson_bracket(&f, &nh).add(&normal_correction(&sol.n_hat, r.n(), r.k_max()));
    lhs.sub(r).max_abs()
}

/// Writes `k, j, l, channel, divisor, bound` rows.
pub fn write_divisor_log<W: Write>(log: &[DivisorRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["k", "j", "l", "channel", "divisor", "bound"])?;
    for r in log {
        let k =
            r.k.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(";");
        wr.write_record([
            k,
            r.j.to_string(),
            r.l.to_string(),
            r.channel.label().to_string(),
            format!("{:e}", r.divisor),
            format!("{:e}", r.bound),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct GeneratorBoundReport {
    pub f_plus: f64,
    pub r_gamma: f64,
    pub exp_factor: f64,
    /// `⟨F⟩⁺_{s−σ} α / (⟨R⟩_s e^{2(2/σ)^{t₁}})`
    pub ratio: f64,
}

/// Measures the constant in the bound on `⟨F⟩⁺` from `⟨R⟩`.
pub fn generator_bound_check<T: Real>(
    r: &QuadraticPart<T>,
    f: &QuadraticPart<T>,
    sigma: T,
    s: T,
    radius: T,
    policy: &SmallDivisorPolicy<T>,
) -> Result<GeneratorBoundReport> {
    if !(sigma > T::zero()) || sigma > s {
        return Err(KamError::Domain(format!(
            "need 0 < sigma <= s, got sigma = {sigma}, s = {s}"
        )));
    }
    let profile = DecayProfile::new(policy.beta)?;
    let fp = gamma_plus_norm(f, &profile, radius, s - sigma);
    let rg = gamma_norm(r, &profile, radius, s);
    let e = (T::lit(2.0) * (T::lit(2.0) / sigma).powf(policy.t1())).exp();
    let ratio = if rg == T::zero() {
        T::zero()
    } else {
        fp * policy.alpha / (rg * e)
    };
    Ok(GeneratorBoundReport {
        f_plus: fp.as_f64(),
        r_gamma: rg.as_f64(),
        exp_factor: e.as_f64(),
        ratio: ratio.as_f64(),
    })
}

/// Smallest `|divisor| / bound` over `|k| ≤ k_max` and every `|l| ≤ 2`, with its location.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonResonanceMargin {
    pub ratio: f64,
    pub witness: Option<DivisorWitness>,
}

/// Checks `|k·ω + l·Ω| ≥ ⟨l⟩α/A_k` on the full truncated index set, including
/// `l = 0` (`k ≠ 0`) and `l = ±e_j`.
pub fn nonresonance_margin<T: Real>(
    normal: &NormalForm<T>,
    policy: &SmallDivisorPolicy<T>,
    k_max: u32,
) -> NonResonanceMargin {
    let dim = normal.big_omega.len();
    let n = normal.omega.len();
    let mut best = T::infinity();
    let mut wit: Option<DivisorWitness> = None;
    let mut consider = |ratio: T, make: &dyn Fn() -> DivisorWitness| {
        if ratio < best {
            best = ratio;
            wit = Some(make());
        }
    };
    for k in modes(n, k_max) {
        let kw = k.dot(&normal.omega);
        let ak = policy.a_k(&k);
        let unit = policy.alpha / ak;
        if !k.is_zero() {
            consider(kw.abs() / unit, &|| DivisorWitness {
                k: k.0.clone(),
                j: 0,
                l: 0,
                channel: "theta".into(),
                divisor: kw.as_f64(),
                bound: unit.as_f64(),
            });
        }
        for j in 0..dim {
            let w = normal.big_omega[j];
            for (sgn, label) in [(T::one(), "z"), (-T::one(), "zbar")] {
                let d = kw + sgn * w;
                let b = T::from_int(j as i64 + 1) * unit;
                consider(d.abs() / b, &|| DivisorWitness {
                    k: k.0.clone(),
                    j: j + 1,
                    l: 0,
                    channel: label.into(),
                    divisor: d.as_f64(),
                    bound: b.as_f64(),
                });
            }
            for l in 0..dim {
                for ch in [Channel::ZbarZ, Channel::ZZ, Channel::ZbarZbar] {
                    if is_normal_term(&k, j, l, ch) {
                        continue;
                    }
                    if ch != Channel::ZbarZ && l < j {
                        continue;
                    }
                    let d = small_divisor(&k, j, l, ch, normal);
                    let b = T::from_int(momentum(j, l, ch) as i64) * unit;
                    consider(d.abs() / b, &|| DivisorWitness {
                        k: k.0.clone(),
                        j: j + 1,
                        l: l + 1,
                        channel: ch.label().into(),
                        divisor: d.as_f64(),
                        bound: b.as_f64(),
                    });
                }
            }
        }
    }
    NonResonanceMargin {
        ratio: best.as_f64(),
        witness: wit,
    }
}

/// [`nonresonance_margin`] as a pass/fail check.
pub fn check_nonresonance<T: Real>(
    normal: &NormalForm<T>,
    policy: &SmallDivisorPolicy<T>,
    k_max: u32,
) -> Result<NonResonanceMargin> {
    let m = nonresonance_margin(normal, policy, k_max);
    if m.ratio < 1.0 {
        return Err(KamError::Resonance(
            m.witness.expect("violation has a witness"),
        ));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::FourierBlockMatrix;

    #[test]
    fn single_mode_division() {
        let normal = NormalForm::harmonic(vec![1.0], 2);
        let policy = SmallDivisorPolicy::new(0.01, 3.0, 6.0, 1).unwrap();
        let mut a = FourierBlockMatrix::new(1, 2, 2, Channel::ZbarZ);
        let mut m = CMat::from_element(2, 2, cplx(0.0, 0.0));
        m[(0, 0)] = cplx(0.3, 0.2);
        a.insert(Mode(vec![1]), m);
        let r = QuadraticPart::from_zbar_z(a);
        let sol = solve(&r, &normal, &policy).unwrap();
        let got = sol.f.zbar_z.entry(&Mode(vec![1]), 0, 0);
        assert!((got - cplx(0.3, 0.2) * cplx(0.0, -1.0)).norm() < 1e-15);
        assert!(residual(&r, &sol, &normal) < 1e-15);
    }

    #[test]
    fn divisor_examples() {
        let normal = NormalForm {
            omega: vec![1.0],
            big_omega: vec![3.0, 1.0],
        };
        assert_eq!(
            small_divisor(&Mode(vec![1]), 0, 1, Channel::ZbarZ, &normal),
            3.0
        );
        assert_eq!(
            small_divisor(&Mode(vec![0]), 0, 0, Channel::ZbarZ, &normal),
            0.0
        );
        assert!(is_normal_term(&Mode(vec![0]), 0, 0, Channel::ZbarZ));
    }

    #[test]
    fn resonance_reports_witness() {
        let normal = NormalForm {
            omega: vec![2.0],
            big_omega: vec![1.0, 3.0],
        };
        let policy = SmallDivisorPolicy::new(0.1, 3.0, 6.0, 1).unwrap();
        let mut a = FourierBlockMatrix::new(1, 2, 2, Channel::ZbarZ);
        let mut m = CMat::from_element(2, 2, cplx(0.0, 0.0));
        m[(0, 1)] = cplx(1.0, 0.0);
        a.insert(Mode(vec![1]), m);
        match solve(&QuadraticPart::from_zbar_z(a), &normal, &policy) {
            Err(KamError::Resonance(w)) => {
                assert_eq!((w.j, w.l, w.k.clone()), (1, 2, vec![1]));
                assert_eq!(w.divisor, 0.0);
            }
            other => panic!("expected resonance, got {other:?}"),
        }
    }
}
