//! Newton iteration reducing `H = N + P` to a θ-independent normal form.
//!
//! Each step solves the homological equation for the truncated perturbation,
//! then transforms the linear vector field `𝒜 = −iJ₀S` by the time-one map
//! `L = e^X`, `X = 𝒜_F`:
//!
//! `𝒜' = e^{−ad_X}𝒜 − Σ_{m≥0} (−1)^m/(m+1)! ad_X^m(ω·∂_θX)`.
//!
//! Writing `G = −ω·∂_θX − [X, 𝒜_N]` (which equals `−(𝒜_R − 𝒜_N̂)` on solved
//! coefficients) the new field is assembled from small quantities only,
//!
//! `𝒜' − 𝒜_N = (𝒜_P + G) − [X, 𝒜_P] + Σ_{m≥2} (−1)^{m+1}/m! ad_X^{m−1}(G − [X, 𝒜_P])`,
//!
//! so the remainder keeps relative accuracy far below unit roundoff of `N`.

use crate::error::{DivisorWitness, KamError, Result};
use crate::flow::{compose, conjugate, time_one_map, SymplecticMap};
use crate::hermite::default_rule;
use crate::homological::{
    check_nonresonance, nonresonance_margin, solve_quiet, NonResonanceMargin, SmallDivisorPolicy,
};
use crate::norms::{gamma_norm, DecayProfile};
use crate::potential::{matrix_elements, Potential};
use crate::quadratic::{NormalForm, QuadraticHamiltonian, QuadraticPart, Spectrum};
use crate::scalar::{cplx, log_weight, Real, C};
use crate::series::{self, ProductLattice};
use crate::zeta::ZMat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// How the analyticity loss `σ_ν` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// `σ_ν = (s₀/48)·2^{−ν}`
    #[default]
    Geometric,
    /// `σ_ν = 8·700^{ν−1} / |ln ε_ν|^{ν−1}`
    Tempered,
}

/// Behaviour when `ε₀ > γ₀α₀⁵`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    #[default]
    Warn,
    Enforce,
    Off,
}

/// Numerical parameters of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KamConfig {
    pub j_max: usize,
    pub k_max: u32,
    pub epsilon: f64,
    pub beta: f64,
    pub tau: f64,
    /// Initial analyticity width `s₀`.
    pub s0: f64,
    #[serde(default = "one")]
    pub r0: f64,
    pub alpha0: f64,
    #[serde(default = "one")]
    pub m0: f64,
    #[serde(default = "ten")]
    pub c1: f64,
    #[serde(default = "one")]
    pub gamma0: f64,
    #[serde(default)]
    pub gate: GateMode,
    #[serde(default)]
    pub sigma_mode: SigmaMode,
    /// Initial Fourier cutoff `K₀`; defaults to `k_max`.
    #[serde(default)]
    pub k0: Option<u32>,
    #[serde(default = "five")]
    pub nu_max: usize,
    #[serde(default = "tiny_target")]
    pub target: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn one() -> f64 {
    1.0
}
fn ten() -> f64 {
    10.0
}
fn five() -> usize {
    5
}
fn tiny_target() -> f64 {
    1e-50
}
fn default_samples() -> usize {
    256
}

impl KamConfig {
    /// Checks ranges; desk-scale limits are `J ≤ 400`, `K ≤ 16`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(KamError::Invalid(m));
        if n == 0 || n > 2 {
            return bad(format!("n = {n} outside 1..=2"));
        }
        if self.j_max == 0 || self.j_max > 400 {
            return bad(format!("j_max = {} outside 1..=400", self.j_max));
        }
        if self.k_max > 16 {
            return bad(format!("k_max = {} above 16", self.k_max));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be finite and nonnegative".into());
        }
        for (name, v) in [
            ("alpha0", self.alpha0),
            ("s0", self.s0),
            ("r0", self.r0),
            ("m0", self.m0),
            ("c1", self.c1),
            ("gamma0", self.gamma0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.samples == 0 {
            return bad("need at least one parameter sample".into());
        }
        if self.k0.is_some_and(|k| k == 0 || k > self.k_max) {
            return bad("k0 must lie in 1..=k_max".into());
        }
        SmallDivisorPolicy::new(self.alpha0, self.tau, self.beta, n)?;
        Ok(())
    }
}

/// Per-iteration parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepParams {
    pub nu: usize,
    pub alpha: f64,
    pub m: f64,
    pub lambda: f64,
    pub eps: f64,
    pub sigma: f64,
    pub eta: f64,
    pub s: f64,
    pub r: f64,
    pub k: u32,
}

/// Deterministic schedule up to and including step `nu`.
pub fn schedule(nu: usize, cfg: &KamConfig) -> Result<Vec<StepParams>> {
    let gate = cfg.gamma0 * cfg.alpha0.powi(5);
    if cfg.epsilon > gate {
        match cfg.gate {
            GateMode::Enforce => {
                return Err(KamError::SmallnessGate {
                    eps0: cfg.epsilon,
                    bound: gate,
                })
            }
            GateMode::Warn => log::warn!(
                "eps0 = {:e} exceeds gamma0*alpha0^5 = {gate:e}",
                cfg.epsilon
            ),
            GateMode::Off => {}
        }
    }
    let k0 = cfg.k0.unwrap_or(cfg.k_max) as f64;
    let mut out = Vec::with_capacity(nu + 1);
    let (mut eps, mut s, mut r) = (cfg.epsilon, cfg.s0, cfg.r0);
    for v in 0..=nu {
        let half = 0.5f64.powi(v as i32);
        let alpha = cfg.alpha0 / 2.0 * (1.0 + half);
        let m = cfg.m0 * (2.0 - half);
        let sigma = match cfg.sigma_mode {
            SigmaMode::Geometric => cfg.s0 / 48.0 * half,
            SigmaMode::Tempered => {
                let p = v as f64 - 1.0;
                8.0 * 700f64.powf(p) / eps.ln().abs().powf(p)
            }
        };
        let eta = if eps > 0.0 {
            (eps.powf(0.99) / alpha).cbrt()
        } else {
            0.0
        };
        let k = ((k0 * (36.0f64 / 25.0).powi(v as i32)).floor() as u32).min(cfg.k_max);
        out.push(StepParams {
            nu: v,
            alpha,
            m,
            lambda: alpha / m,
            eps,
            sigma,
            eta,
            s,
            r,
            k,
        });
        s -= 5.0 * sigma;
        if s <= cfg.s0 / 2.0 && v < nu {
            return Err(KamError::Budget(format!(
                "analyticity width s = {s:.4} fell to s0/2 after step {v} in {:?} sigma mode",
                cfg.sigma_mode
            )));
        }
        r *= eta;
        eps = if eps > 0.0 {
            cfg.c1 * eps.powf(1.33) / alpha.cbrt()
        } else {
            0.0
        };
    }
    Ok(out)
}

/// Weyl sequence `frac(½ + i·g)·2π` with the generalized golden ratio for `n` dimensions.
pub fn kronecker_samples(n: usize, count: usize) -> Vec<Vec<f64>> {
    // φ_n is the positive root of x^{n+1} = x + 1
    let mut phi = 2.0f64;
    for _ in 0..200 {
        phi = (1.0 + phi).powf(1.0 / (n as f64 + 1.0));
    }
    let g: Vec<f64> = (1..=n).map(|m| phi.powi(-(m as i32)).fract()).collect();
    (0..count)
        .map(|i| {
            g.iter()
                .map(|gm| (0.5 + i as f64 * gm).fract() * std::f64::consts::TAU)
                .collect()
        })
        .collect()
}

/// Diagnostics of one completed step.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub nu: usize,
    pub k_nu: u32,
    pub alpha: f64,
    /// `⟨P_ν⟩` at `s_ν`.
    pub gamma_before: f64,
    /// `⟨P_{ν+1}⟩` at `s_{ν+1}`.
    pub gamma_after: f64,
    /// Largest remaining coefficient after the step.
    pub max_coefficient: f64,
    /// Majorant of Fourier content dropped above `K_max`.
    pub tail: f64,
    /// `ε`-budget `c₁⟨P_ν⟩^{1.33}/α_ν^{1/3}`.
    pub budget: f64,
    pub diverged: bool,
    /// `Ω̂_j` applied in this step.
    pub omega_hat: Vec<f64>,
    /// `max_j |Ω̂_j| (1 + ln j)^{2β} / α`
    pub shift_profile: f64,
    /// `ln` of the measured constant in the quadratic error recursion.
    pub log_recursion_constant: f64,
    pub lie_terms: usize,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SampleStatus {
    Active,
    Converged,
    Excised {
        step: usize,
        witness: DivisorWitness,
    },
    Diverged {
        step: usize,
    },
    Failed {
        step: usize,
        message: String,
    },
}

/// State of one parameter sample.
#[derive(Clone, Debug)]
pub struct KamState<T: Real> {
    pub xi: Vec<f64>,
    pub normal: NormalForm<T>,
    pub pert: QuadraticPart<T>,
    pub phi: SymplecticMap<T>,
    pub steps: Vec<StepRecord>,
    pub status: SampleStatus,
    /// `⟨P_ν⟩` of the current perturbation.
    pub gamma: T,
}

/// Final certificate of a converged sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub final_gamma: f64,
    pub final_max_coefficient: f64,
    /// Off-normal part of `H₀ ∘ Φ` recomputed from the original Hamiltonian.
    pub residual_from_scratch: f64,
    /// Largest mismatch between `Ω*` and the diagonal of `H₀ ∘ Φ`.
    pub frequency_mismatch: f64,
    pub symplectic_defect: f64,
    pub coupling_norm: f64,
    /// Ratio against `(α₀/2)⟨l⟩/A_k` over every retained `(k, l)`; at least 1 when it holds.
    pub margin: NonResonanceMargin,
    pub truncation_tail: f64,
}

#[derive(Clone, Debug)]
pub struct ReducedNormalForm<T: Real> {
    pub omega: Vec<T>,
    pub big_omega: Vec<T>,
    pub phi: SymplecticMap<T>,
    pub certificate: Certificate,
}

impl<T: Real> ReducedNormalForm<T> {
    /// Frequencies, certificate and the serialized conjugator in one document.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "format": "reduced_normal_form",
            "omega": self.omega.iter().map(|x| x.as_f64()).collect::<Vec<_>>(),
            "big_omega": self.big_omega.iter().map(|x| x.as_f64()).collect::<Vec<_>>(),
            "certificate": self.certificate,
            "phi": self.phi.to_json(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let field = |name: &str| {
            v.get(name)
                .ok_or_else(|| KamError::Invalid(format!("reduced normal form lacks {name:?}")))
        };
        let omega: Vec<f64> = serde_json::from_value(field("omega")?.clone())?;
        let big_omega: Vec<f64> = serde_json::from_value(field("big_omega")?.clone())?;
        let certificate: Certificate = serde_json::from_value(field("certificate")?.clone())?;
        let phi = SymplecticMap::from_json(field("phi")?)?;
        if phi.n != omega.len() || phi.dim != big_omega.len() {
            return Err(KamError::Invalid(
                "conjugator shape does not match the frequencies".into(),
            ));
        }
        Ok(Self {
            omega: omega.into_iter().map(T::lit).collect(),
            big_omega: big_omega.into_iter().map(T::lit).collect(),
            phi,
            certificate,
        })
    }

    /// `max_j |Ω*_j − (2j − 1)| (1 + ln j)^{2β}`.
    pub fn shift_norm(&self, beta: T) -> T {
        self.big_omega
            .iter()
            .enumerate()
            .map(|(j, w)| {
                (*w - NormalForm::<T>::reference(j + 1)).abs()
                    * log_weight(j + 1, T::lit(2.0) * beta)
            })
            .fold(T::zero(), |a, b| a.max(b))
    }
}

#[derive(Clone, Debug)]
pub struct SampleResult<T: Real> {
    pub xi: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub status: SampleStatus,
    pub reduced: Option<ReducedNormalForm<T>>,
}

impl<T: Real> SampleResult<T> {
    pub fn survived(&self) -> bool {
        matches!(self.status, SampleStatus::Converged | SampleStatus::Active)
    }
}

#[derive(Clone, Debug)]
pub struct RunReport<T: Real> {
    pub config: KamConfig,
    pub schedule: Vec<StepParams>,
    pub samples: Vec<SampleResult<T>>,
}

impl<T: Real> RunReport<T> {
    pub fn survivors(&self) -> usize {
        self.samples.iter().filter(|s| s.survived()).count()
    }

    pub fn excised_fraction(&self) -> f64 {
        1.0 - self.survivors() as f64 / self.samples.len() as f64
    }

    /// `(ν, max ⟨P_ν⟩, excised count, max shift profile)` rows.
    pub fn write_step_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["nu", "gamma", "excised", "max_shift_profile"])?;
        let nmax = self
            .samples
            .iter()
            .map(|s| s.steps.len())
            .max()
            .unwrap_or(0);
        for nu in 0..=nmax {
            let mut g: f64 = 0.0;
            let mut shift: f64 = 0.0;
            for s in &self.samples {
                if !s.survived() {
                    continue;
                }
                if let Some(r) = s.steps.get(nu) {
                    g = g.max(r.gamma_before);
                    shift = shift.max(r.shift_profile);
                } else if let Some(r) = s.steps.last().filter(|r| r.nu + 1 == nu) {
                    g = g.max(r.gamma_after);
                }
            }
            let excised = self
                .samples
                .iter()
                .filter(|s| matches!(&s.status, SampleStatus::Excised { step, .. } if *step <= nu))
                .count();
            wr.write_record([
                nu.to_string(),
                format!("{g:e}"),
                excised.to_string(),
                format!("{shift:e}"),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn certificate_json(&self) -> serde_json::Value {
        let samples: Vec<_> = self
            .samples
            .iter()
            .map(|s| {
                serde_json::json!({
                    "xi": s.xi,
                    "status": s.status,
                    "steps": s.steps,
                    "omega_star": s.reduced.as_ref().map(|r| r.omega.iter().map(|x| x.as_f64()).collect::<Vec<_>>()),
                    "big_omega_star": s.reduced.as_ref().map(|r| r.big_omega.iter().map(|x| x.as_f64()).collect::<Vec<_>>()),
                    "certificate": s.reduced.as_ref().map(|r| &r.certificate),
                })
            })
            .collect();
        serde_json::json!({
            "format": "kam_certificate",
            "config": self.config,
            "schedule": self.schedule,
            "survivors": self.survivors(),
            "excised_fraction": self.excised_fraction(),
            "samples": samples,
        })
    }
}

struct Context<T: Real> {
    profile: DecayProfile<T>,
    policy: SmallDivisorPolicy<T>,
    lattice: ProductLattice<T>,
    k_max: u32,
}

fn field_divisor<T: Real>(kw: T, big_omega: &[T], r: usize, i: usize, c: usize, j: usize) -> C<T> {
    // i k·ω + δ_q − δ_p with δ = (−iΩ, iΩ)
    let dp = if r == 0 { -big_omega[i] } else { big_omega[i] };
    let dq = if c == 0 { -big_omega[j] } else { big_omega[j] };
    cplx(T::zero(), kw + dq - dp)
}

/// `G = −X ∘ (i k·ω + δ_q − δ_p)` coefficientwise.
fn transport_part<T: Real>(x: &Spectrum<T>, normal: &NormalForm<T>) -> Spectrum<T> {
    x.iter()
        .map(|(k, z)| {
            let kw = k.dot(&normal.omega);
            let mut g = z.clone();
            for r in 0..2 {
                for c in 0..2 {
                    if let Some(b) = g.blocks[2 * r + c].as_mut() {
                        for i in 0..b.nrows() {
                            for j in 0..b.ncols() {
                                b[(i, j)] =
                                    -b[(i, j)] * field_divisor(kw, &normal.big_omega, r, i, c, j);
                            }
                        }
                    }
                }
            }
            (k.clone(), g)
        })
        .collect()
}

/// Applies one Lie-series step; returns `𝒜' − 𝒜_N`, the dropped tail and the term count.
fn lie_transform<T: Real>(
    ctx: &Context<T>,
    x: &Spectrum<T>,
    a_p: &Spectrum<T>,
    normal: &NormalForm<T>,
) -> (Spectrum<T>, T, usize) {
    let lat = &ctx.lattice;
    let xv = lat.values(x);
    let g = transport_part(x, normal);
    let (c1, mut tail) = lat.commutator_with(&xv, a_p);
    let mut acc = series::add(a_p, &g);
    series::axpy(&mut acc, cplx(-T::one(), T::zero()), &c1);
    let mut term = series::sub(&g, &c1);
    let mut coef = T::one();
    let mut used = 1;
    for m in 2..60 {
        let (next, t) = lat.commutator_with(&xv, &term);
        tail = tail + t;
        term = next;
        coef = -coef / T::from_int(m as i64);
        used = m;
        if term.is_empty() {
            break;
        }
        series::axpy(&mut acc, cplx(coef, T::zero()), &term);
        let size = coef.abs() * series::majorant(&term);
        if size <= T::epsilon() * T::lit(1e-3) * series::majorant(&acc) {
            break;
        }
    }
    acc.retain(|_, z| {
        *z = std::mem::replace(z, ZMat::zeros(0)).pruned();
        !z.is_zero()
    });
    (acc, tail, used)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// One Newton step for a single sample. Resonances excise the sample rather than failing.
pub fn kam_step<T: Real>(
    state: &mut KamState<T>,
    params: &StepParams,
    next: &StepParams,
    cfg: &KamConfig,
) -> Result<()> {
    let ctx = context(state.pert.n(), cfg)?;
    step_with(&ctx, state, params, next, cfg)
}

fn context<T: Real>(n: usize, cfg: &KamConfig) -> Result<Context<T>> {
    Ok(Context {
        profile: DecayProfile::new(T::lit(cfg.beta))?,
        policy: SmallDivisorPolicy::new(T::lit(cfg.alpha0), T::lit(cfg.tau), T::lit(cfg.beta), n)?,
        lattice: ProductLattice::new(n, cfg.k_max, cfg.j_max),
        k_max: cfg.k_max,
    })
}

fn step_with<T: Real>(
    ctx: &Context<T>,
    state: &mut KamState<T>,
    params: &StepParams,
    next: &StepParams,
    cfg: &KamConfig,
) -> Result<()> {
    if !matches!(state.status, SampleStatus::Active) {
        return Ok(());
    }
    let nu = params.nu;
    let alpha = T::lit(params.alpha);
    let policy = ctx.policy.with_alpha(alpha);
    let gamma_before = state.gamma;
    let dim = state.pert.j_max();
    let (r, _) = state.pert.split(params.k);
    let sol = match solve_quiet(&r, &state.normal, &policy) {
        Ok(s) => s,
        Err(KamError::Resonance(w)) => {
            state.status = SampleStatus::Excised {
                step: nu,
                witness: w,
            };
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let phi_new = match time_one_map(&sol.f, ctx.k_max) {
        Ok(p) => p,
        Err(KamError::StepTooLarge { norm }) => {
            state.status = SampleStatus::Failed {
                step: nu,
                message: format!("generator norm {norm:e} > 1"),
            };
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let x = sol.f.field_spectrum();
    let a_p = state.pert.field_spectrum();
    let (delta, tail, terms) = lie_transform(ctx, &x, &a_p, &state.normal);
    let mut pert = QuadraticPart::from_field_spectrum(&delta, state.pert.n(), ctx.k_max, dim);
    let shift = pert.take_mean_diagonal();
    let omega_hat: Vec<T> = shift.iter().map(|c| c.re).collect();
    for (w, d) in state.normal.big_omega.iter_mut().zip(&omega_hat) {
        *w = *w + *d;
    }
    state.pert = pert;
    state.phi = compose(&state.phi, &phi_new);
    let gamma_after = gamma_norm(
        &state.pert,
        &ctx.profile,
        T::lit(next.r.max(f64::MIN_POSITIVE)),
        T::lit(next.s),
    );
    state.gamma = gamma_after;
    let two_beta = T::lit(2.0 * cfg.beta);
    let shift_profile = omega_hat
        .iter()
        .enumerate()
        .map(|(j, d)| d.abs() * log_weight(j + 1, two_beta) / alpha)
        .fold(T::zero(), |a, b| a.max(b));
    let gb = gamma_before.as_f64();
    let ga = gamma_after.as_f64();
    let budget = cfg.c1 * gb.powf(1.33) / params.alpha.cbrt();
    let diverged = ga > budget;
    let t1 = cfg.tau / (cfg.beta - cfg.tau);
    let log_quad = 7.0 * (8.0 / params.sigma).powf(t1) + 2.0 * gb.ln()
        - params.alpha.ln()
        - 2.0 * params.eta.ln();
    let log_lin = params.eta.ln() + gb.ln();
    let log_const = ga.ln() - log_sum_exp(log_quad, log_lin);
    state.steps.push(StepRecord {
        nu,
        k_nu: params.k,
        alpha: params.alpha,
        gamma_before: gb,
        gamma_after: ga,
        max_coefficient: state.pert.max_abs().as_f64(),
        tail: tail.as_f64(),
        budget,
        diverged,
        omega_hat: omega_hat.iter().map(|x| x.as_f64()).collect(),
        shift_profile: shift_profile.as_f64(),
        log_recursion_constant: log_const,
        lie_terms: terms,
    });
    if diverged {
        state.status = SampleStatus::Diverged { step: nu };
        return Ok(());
    }
    if let Err(KamError::Resonance(w)) = check_nonresonance(
        &state.normal,
        &policy.with_alpha(T::lit(next.alpha)),
        ctx.k_max,
    ) {
        state.status = SampleStatus::Excised {
            step: nu + 1,
            witness: w,
        };
    }
    Ok(())
}

/// Unperturbed harmonic Hamiltonian plus `ε·P̂(ω)`.
pub fn initial_hamiltonian<T: Real>(
    potential: &Potential<T>,
    omega: &[T],
    cfg: &KamConfig,
) -> Result<QuadraticHamiltonian<T>> {
    let normal = NormalForm::harmonic(omega.to_vec(), cfg.j_max);
    if cfg.epsilon == 0.0 {
        return Ok(QuadraticHamiltonian::normal_only(normal, cfg.k_max));
    }
    let rule = default_rule::<T>(cfg.j_max);
    let me = matrix_elements(potential, cfg.j_max, cfg.k_max, omega, &rule)?;
    let pert = QuadraticPart::from_zbar_z(me.scaled(cplx(T::lit(cfg.epsilon), T::zero())));
    Ok(QuadraticHamiltonian::new(normal, pert))
}

/// Runs every step for one sample starting from `h0`.
pub fn run_sample<T: Real>(
    h0: &QuadraticHamiltonian<T>,
    xi: Vec<f64>,
    cfg: &KamConfig,
    sched: &[StepParams],
) -> Result<SampleResult<T>> {
    let n = h0.pert.n();
    let ctx = context::<T>(n, cfg)?;
    let h = h0.clone();
    let gamma = gamma_norm(&h.pert, &ctx.profile, T::lit(cfg.r0), T::lit(cfg.s0));
    let mut state = KamState {
        xi,
        normal: h.normal.clone(),
        pert: h.pert.clone(),
        phi: SymplecticMap::identity(n, cfg.k_max, cfg.j_max),
        steps: Vec::new(),
        status: SampleStatus::Active,
        gamma,
    };
    if let Err(KamError::Resonance(w)) = check_nonresonance(
        &state.normal,
        &ctx.policy.with_alpha(T::lit(sched[0].alpha)),
        cfg.k_max,
    ) {
        state.status = SampleStatus::Excised {
            step: 0,
            witness: w,
        };
    }
    for nu in 0..cfg.nu_max {
        if !matches!(state.status, SampleStatus::Active) {
            break;
        }
        if state.gamma.as_f64() <= cfg.target || state.pert.is_zero() {
            state.status = SampleStatus::Converged;
            break;
        }
        step_with(&ctx, &mut state, &sched[nu], &sched[nu + 1], cfg)?;
    }
    if matches!(state.status, SampleStatus::Active) {
        state.status = SampleStatus::Converged;
    }
    let reduced = if matches!(state.status, SampleStatus::Converged) {
        Some(certify(&ctx, h0, &state, cfg)?)
    } else {
        None
    };
    Ok(SampleResult {
        xi: state.xi,
        steps: state.steps,
        status: state.status,
        reduced,
    })
}

fn certify<T: Real>(
    ctx: &Context<T>,
    h0: &QuadraticHamiltonian<T>,
    state: &KamState<T>,
    cfg: &KamConfig,
) -> Result<ReducedNormalForm<T>> {
    let conj = conjugate(h0, &state.phi)?;
    let mut recomputed = conj.hamiltonian;
    let residual = recomputed.off_normal().max_abs();
    recomputed.normalize();
    let mismatch = recomputed
        .normal
        .big_omega
        .iter()
        .zip(&state.normal.big_omega)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), |a, b| a.max(b));
    let margin = nonresonance_margin(
        &state.normal,
        &ctx.policy.with_alpha(T::lit(cfg.alpha0 / 2.0)),
        cfg.k_max,
    );
    let certificate = Certificate {
        final_gamma: state.gamma.as_f64(),
        final_max_coefficient: state.pert.max_abs().as_f64(),
        residual_from_scratch: residual.as_f64(),
        frequency_mismatch: mismatch.as_f64(),
        symplectic_defect: state.phi.symplectic_defect().as_f64(),
        coupling_norm: state.phi.coupling_norm().as_f64(),
        margin,
        truncation_tail: (state.phi.tail + conj.tail).as_f64(),
    };
    Ok(ReducedNormalForm {
        omega: state.normal.omega.clone(),
        big_omega: state.normal.big_omega.clone(),
        phi: state.phi.clone(),
        certificate,
    })
}

/// Runs the iteration for every sample `ξ` with `ω(ξ) = ξ`.
pub fn run<T: Real>(
    potential: &Potential<T>,
    cfg: &KamConfig,
    xis: &[Vec<f64>],
) -> Result<RunReport<T>> {
    let n = potential.n;
    cfg.validate(n)?;
    let sched = schedule(cfg.nu_max, cfg)?;
    let shared = if potential.omega_independent() {
        let omega = vec![T::one(); n];
        Some(initial_hamiltonian(potential, &omega, cfg)?.pert)
    } else {
        None
    };
    let samples: Vec<SampleResult<T>> = xis
        .par_iter()
        .map(|xi| {
            if xi.len() != n {
                return Err(KamError::Invalid(format!(
                    "sample {xi:?} does not have {n} components"
                )));
            }
            let omega: Vec<T> = xi.iter().map(|&x| T::lit(x)).collect();
            let h0 = match &shared {
                Some(p) => {
                    QuadraticHamiltonian::new(NormalForm::harmonic(omega, cfg.j_max), p.clone())
                }
                None => initial_hamiltonian(potential, &omega, cfg)?,
            };
            run_sample(&h0, xi.clone(), cfg, &sched)
        })
        .collect::<Result<Vec<_>>>()?;
    if samples
        .iter()
        .all(|s| matches!(s.status, SampleStatus::Excised { .. }))
    {
        return Err(KamError::EmptyParameterSet);
    }
    Ok(RunReport {
        config: cfg.clone(),
        schedule: sched,
        samples,
    })
}

/// Per-step `max_j |Ω̂_j| (1 + ln j)^{2β} / α` of one sample.
#[derive(Clone, Debug, Serialize)]
pub struct FrequencyShiftReport {
    pub per_step: Vec<f64>,
    pub max: f64,
}

pub fn frequency_shift_check(steps: &[StepRecord]) -> FrequencyShiftReport {
    let per_step: Vec<f64> = steps.iter().map(|s| s.shift_profile).collect();
    let max = per_step.iter().cloned().fold(0.0, f64::max);
    FrequencyShiftReport { per_step, max }
}
