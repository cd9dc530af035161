//! Quasi-periodic potentials `V(x, θ; ω)`, their decay conditions, and Hermite matrix elements.

use crate::error::{KamError, Result};
use crate::fourier::{Mode, ThetaLattice};
use crate::hermite::{hermite_table, QuadratureRule};
use crate::quadratic::{Channel, FourierBlockMatrix};
use crate::scalar::{cplx, Real, C};
use crate::zeta::CMat;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// x-profile multiplying a trigonometric factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `(1 + ln(1 + x²))^{−2β}`
    LogDecay { beta: f64 },
    /// `e^{−x²/w²}`
    Gaussian { width: f64 },
    /// `1`
    Constant,
    /// `x`
    Linear,
}

impl Profile {
    pub fn eval<T: Real>(&self, x: T) -> T {
        match *self {
            Profile::LogDecay { beta } => {
                (T::one() + (T::one() + x * x).ln()).powf(-T::lit(2.0 * beta))
            }
            Profile::Gaussian { width } => {
                let w = T::lit(width);
                (-(x * x) / (w * w)).exp()
            }
            Profile::Constant => T::one(),
            Profile::Linear => x,
        }
    }
}

/// One term `profile(x)·(a cos(k·θ) + b sin(k·θ))`, optionally times `ω_m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub profile: Profile,
    pub k: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
    /// 0-based index `m` of a factor `ω_m`.
    #[serde(default)]
    pub omega_factor: Option<usize>,
}

pub type Evaluator<T> = Arc<dyn Fn(T, &[T], &[T]) -> T + Send + Sync>;

/// Real potential `V(x, θ; ω)`, 2π-periodic in each `θ_m`.
#[derive(Clone)]
pub struct Potential<T: Real> {
    pub n: usize,
    pub beta: T,
    pub rho: T,
    /// Finite Fourier representation, when available.
    pub terms: Option<Vec<PotentialTerm>>,
    evaluator: Option<Evaluator<T>>,
}

impl<T: Real> std::fmt::Debug for Potential<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential")
            .field("n", &self.n)
            .field("beta", &self.beta)
            .field("rho", &self.rho)
            .field("terms", &self.terms)
            .field("custom", &self.evaluator.is_some())
            .finish()
    }
}

/// Declarative potential description, as read from a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PotentialConfig {
    Builtin {
        name: String,
        n: usize,
        beta: f64,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default)]
        harmonics: Option<u32>,
    },
    FourierSum {
        n: usize,
        beta: f64,
        #[serde(default = "default_rho")]
        rho: f64,
        terms: Vec<PotentialTerm>,
    },
}

fn default_rho() -> f64 {
    1.0
}

pub const BUILTIN_NAMES: &[&str] = &[
    "log_decay",
    "gaussian",
    "x_independent",
    "linear",
    "analytic_log_decay",
    "omega_linear",
];

impl<T: Real> Potential<T> {
    pub fn from_terms(n: usize, beta: T, rho: T, terms: Vec<PotentialTerm>) -> Result<Self> {
        for t in &terms {
            if t.k.len() != n {
                return Err(KamError::Invalid(format!(
                    "term mode {:?} does not have {n} components",
                    t.k
                )));
            }
            if t.omega_factor.is_some_and(|m| m >= n) {
                return Err(KamError::Invalid("omega factor index out of range".into()));
            }
        }
        Ok(Self {
            n,
            beta,
            rho,
            terms: Some(terms),
            evaluator: None,
        })
    }

    /// Arbitrary evaluator; θ-Fourier content is then obtained on a lattice.
    pub fn custom(n: usize, beta: T, rho: T, f: Evaluator<T>) -> Self {
        Self {
            n,
            beta,
            rho,
            terms: None,
            evaluator: Some(f),
        }
    }

    fn cos_sum(n: usize, profile: Profile) -> Vec<PotentialTerm> {
        (0..n)
            .map(|m| PotentialTerm {
                profile: profile.clone(),
                k: Mode::unit(n, m, 1).0,
                cos: 1.0,
                sin: 0.0,
                omega_factor: None,
            })
            .collect()
    }

    /// `(1 + ln(1 + x²))^{−2β} Σ_m cos θ_m`.
    pub fn log_decay(n: usize, beta: f64) -> Self {
        Self::from_terms(
            n,
            T::lit(beta),
            T::lit(1.0),
            Self::cos_sum(n, Profile::LogDecay { beta }),
        )
        .expect("valid builtin")
    }

    /// `e^{−x²} Σ_m cos θ_m`.
    pub fn gaussian(n: usize, beta: f64) -> Self {
        Self::from_terms(
            n,
            T::lit(beta),
            T::lit(1.0),
            Self::cos_sum(n, Profile::Gaussian { width: 1.0 }),
        )
        .expect("valid builtin")
    }

    /// `Σ_m cos θ_m`, independent of `x`.
    pub fn x_independent(n: usize, beta: f64) -> Self {
        Self::from_terms(
            n,
            T::lit(beta),
            T::lit(1.0),
            Self::cos_sum(n, Profile::Constant),
        )
        .expect("valid builtin")
    }

    /// `x cos θ₁`, which violates the decay condition.
    pub fn linear(n: usize, beta: f64) -> Self {
        let mut t = Self::cos_sum(n, Profile::Linear);
        t.truncate(1);
        Self::from_terms(n, T::lit(beta), T::lit(1.0), t).expect("valid builtin")
    }

    /// `(1 + ln(1 + x²))^{−2β} Σ_{k=1}^{K} e^{−ρk} cos(k θ₁)`.
    pub fn analytic_log_decay(n: usize, beta: f64, rho: f64, harmonics: u32) -> Self {
        let terms = (1..=harmonics as i32)
            .map(|k| {
                let mut kv = vec![0; n];
                kv[0] = k;
                PotentialTerm {
                    profile: Profile::LogDecay { beta },
                    k: kv,
                    cos: (-rho * k as f64).exp(),
                    sin: 0.0,
                    omega_factor: None,
                }
            })
            .collect();
        Self::from_terms(n, T::lit(beta), T::lit(rho), terms).expect("valid builtin")
    }

    /// `ω₁ e^{−x²} cos θ₁`.
    pub fn omega_linear(n: usize, beta: f64) -> Self {
        let mut t = Self::cos_sum(n, Profile::Gaussian { width: 1.0 });
        t.truncate(1);
        t[0].omega_factor = Some(0);
        Self::from_terms(n, T::lit(beta), T::lit(1.0), t).expect("valid builtin")
    }

    pub fn from_config(cfg: &PotentialConfig) -> Result<Self> {
        match cfg {
            PotentialConfig::Builtin {
                name,
                n,
                beta,
                rho,
                harmonics,
            } => {
                if *n == 0 {
                    return Err(KamError::Invalid("potential needs n >= 1".into()));
                }
                Ok(match name.as_str() {
                    "log_decay" => Self::log_decay(*n, *beta),
                    "gaussian" => Self::gaussian(*n, *beta),
                    "x_independent" => Self::x_independent(*n, *beta),
                    "linear" => Self::linear(*n, *beta),
                    "analytic_log_decay" => {
                        Self::analytic_log_decay(*n, *beta, *rho, harmonics.unwrap_or(8))
                    }
                    "omega_linear" => Self::omega_linear(*n, *beta),
                    other => {
                        return Err(KamError::Invalid(format!(
                            "unknown builtin potential {other:?}; expected one of {BUILTIN_NAMES:?}"
                        )))
                    }
                })
            }
            PotentialConfig::FourierSum {
                n,
                beta,
                rho,
                terms,
            } => Self::from_terms(*n, T::lit(*beta), T::lit(*rho), terms.clone()),
        }
    }

    pub fn eval(&self, x: T, theta: &[T], omega: &[T]) -> T {
        if let Some(f) = &self.evaluator {
            return f(x, theta, omega);
        }
        let mut v = T::zero();
        for t in self.terms.as_deref().unwrap_or_default() {
            let ph = Mode(t.k.clone()).dot(theta);
            let mut c = T::lit(t.cos) * ph.cos() + T::lit(t.sin) * ph.sin();
            if let Some(m) = t.omega_factor {
                c = c * omega[m];
            }
            v = v + t.profile.eval(x) * c;
        }
        v
    }

    /// True when `V` does not depend on `ω`.
    pub fn omega_independent(&self) -> bool {
        self.terms
            .as_ref()
            .is_some_and(|ts| ts.iter().all(|t| t.omega_factor.is_none()))
    }
}

/// Sampling grid for [`verify_conditions`].
#[derive(Clone, Debug)]
pub struct ConditionGrid<T> {
    pub x_max: T,
    pub nx: usize,
    pub theta_points: usize,
    pub omega_samples: Vec<Vec<T>>,
    pub bound: Option<T>,
}

/// Measured constants of the decay and regularity conditions on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    /// `max |V|·(1 + ln(1 + x²))^{2β}`
    pub c0: f64,
    /// `max |∂_x V|`
    pub c1: f64,
    /// `max |∂²_x V|`
    pub c2: f64,
    /// Same three constants for `∂_{ω_m} V`.
    pub c0_omega: f64,
    pub c1_omega: f64,
    pub c2_omega: f64,
    pub bound: Option<f64>,
    pub pass: Option<bool>,
}

pub fn verify_conditions<T: Real>(
    v: &Potential<T>,
    grid: &ConditionGrid<T>,
) -> Result<ConditionReport> {
    if grid.nx < 5 {
        return Err(KamError::Invalid(format!(
            "x grid needs at least 5 points, got {}",
            grid.nx
        )));
    }
    let hx = T::lit(2.0) * grid.x_max / T::from_int(grid.nx as i64 - 1);
    if hx > T::lit(0.25) {
        return Err(KamError::Invalid(format!(
            "x spacing {hx} too coarse for the difference stencil"
        )));
    }
    if grid.omega_samples.is_empty() || grid.theta_points == 0 {
        return Err(KamError::Invalid(
            "need at least one omega sample and one theta point".into(),
        ));
    }
    let lat = ThetaLattice::<T>::new(v.n, grid.theta_points);
    let hw = T::lit(1e-5) * T::TAU();
    let two = T::lit(2.0);
    let mut c = [T::zero(); 6];
    for omega in &grid.omega_samples {
        for p in 0..lat.num_points() {
            let th = lat.point(p);
            for i in 1..grid.nx - 1 {
                let x = -grid.x_max + hx * T::from_int(i as i64);
                let w = (T::one() + (T::one() + x * x).ln()).powf(two * v.beta);
                let f = |x: T, om: &[T]| v.eval(x, &th, om);
                let (vm, v0, vp) = (f(x - hx, omega), f(x, omega), f(x + hx, omega));
                c[0] = c[0].max(v0.abs() * w);
                c[1] = c[1].max(((vp - vm) / (two * hx)).abs());
                c[2] = c[2].max(((vp - two * v0 + vm) / (hx * hx)).abs());
                for m in 0..v.n {
                    let mut op = omega.clone();
                    let mut om = omega.clone();
                    op[m] = op[m] + hw;
                    om[m] = om[m] - hw;
                    let d = |x: T| (f(x, &op) - f(x, &om)) / (two * hw);
                    let (dm, d0, dp) = (d(x - hx), d(x), d(x + hx));
                    c[3] = c[3].max(d0.abs() * w);
                    c[4] = c[4].max(((dp - dm) / (two * hx)).abs());
                    c[5] = c[5].max(((dp - two * d0 + dm) / (hx * hx)).abs());
                }
            }
        }
    }
    let c: Vec<f64> = c.iter().map(|x| x.as_f64()).collect();
    let bound = grid.bound.map(|b| b.as_f64());
    Ok(ConditionReport {
        c0: c[0],
        c1: c[1],
        c2: c[2],
        c0_omega: c[3],
        c1_omega: c[4],
        c2_omega: c[5],
        bound,
        pass: bound.map(|b| c.iter().all(|&x| x <= b)),
    })
}

/// `G_{jl} = ∫ f(x) h_j(x) h_l(x) dx` for `j, l <= jmax`.
fn profile_matrix<T: Real>(
    table: &[T],
    wdx: &[T],
    jmax: usize,
    f: impl Fn(usize) -> T,
) -> DMatrix<T> {
    let m = wdx.len();
    let h = DMatrix::from_row_slice(jmax, m, table);
    let fw: Vec<T> = (0..m).map(|i| wdx[i] * f(i)).collect();
    let hw = DMatrix::from_fn(jmax, m, |j, i| h[(j, i)] * fw[i]);
    let g = &h * hw.transpose();
    DMatrix::from_fn(jmax, jmax, |j, l| (g[(j, l)] + g[(l, j)]) / T::lit(2.0))
}

fn to_complex<T: Real>(g: &DMatrix<T>) -> CMat<T> {
    g.map(|x| cplx(x, T::zero()))
}

/// Hermite matrix elements of `V` as a θ-Fourier series:
/// `block(k)[j,l] = (2π)^{−n} ∫ e^{−ik·θ} ∫ V h_j h_l dx dθ`.
pub fn matrix_elements<T: Real>(
    v: &Potential<T>,
    j_max: usize,
    k_max: u32,
    omega: &[T],
    rule: &QuadratureRule<T>,
) -> Result<FourierBlockMatrix<T>> {
    if omega.len() != v.n {
        return Err(KamError::Invalid(format!(
            "omega has {} components, potential has n = {}",
            omega.len(),
            v.n
        )));
    }
    rule.require_hermite(j_max)
        .map_err(|_| KamError::Accuracy {
            what: format!(
                "rule capacity {} below J_max {j_max}",
                rule.hermite_capacity()
            ),
            residual: f64::INFINITY,
        })?;
    let table = hermite_table(j_max, &rule.nodes);
    let wdx = rule.dx_weights();
    let gram = profile_matrix(&table, &wdx, j_max, |_| T::one());
    let mut residual = T::zero();
    for j in 0..j_max {
        for l in 0..j_max {
            let want = if j == l { T::one() } else { T::zero() };
            residual = residual.max((gram[(j, l)] - want).abs());
        }
    }
    let tol = T::epsilon().sqrt() * T::lit(1e-1);
    if residual > tol {
        return Err(KamError::Accuracy {
            what: "Hermite orthonormality under the rule".into(),
            residual: residual.as_f64(),
        });
    }
    let mut out = FourierBlockMatrix::new(v.n, k_max, j_max, Channel::ZbarZ);
    if let Some(terms) = &v.terms {
        let mut cache: Vec<(Profile, CMat<T>)> = Vec::new();
        for t in terms {
            let k = Mode(t.k.clone());
            if k.norm() > k_max {
                continue;
            }
            let g = match cache.iter().find(|(p, _)| *p == t.profile) {
                Some((_, g)) => g.clone(),
                None => {
                    let g = to_complex(&profile_matrix(&table, &wdx, j_max, |i| {
                        t.profile.eval(rule.nodes[i])
                    }));
                    cache.push((t.profile.clone(), g.clone()));
                    g
                }
            };
            let scale = t.omega_factor.map(|m| omega[m]).unwrap_or_else(T::one);
            let a = T::lit(t.cos) * scale;
            let b = T::lit(t.sin) * scale;
            if k.is_zero() {
                out.accumulate(k, cplx(a, T::zero()), &g);
            } else {
                let half = T::lit(0.5);
                // a cos + b sin = (a − ib)/2 e^{ikθ} + (a + ib)/2 e^{−ikθ}
                out.accumulate(k.clone(), cplx(a * half, -b * half), &g);
                out.accumulate(k.neg(), cplx(a * half, b * half), &g);
            }
        }
    } else {
        let lat = ThetaLattice::<T>::new(v.n, 4 * k_max as usize + 1);
        let mut values: Vec<CMat<T>> = Vec::with_capacity(lat.num_points());
        for p in 0..lat.num_points() {
            let th = lat.point(p);
            let g = profile_matrix(&table, &wdx, j_max, |i| v.eval(rule.nodes[i], &th, omega));
            values.push(to_complex(&g));
        }
        for (k, m) in lat.analyze(&values, k_max) {
            out.insert(k, m);
        }
    }
    Ok(out)
}

/// Central-difference `∂_{ω_m}` of the matrix elements, one series per `m`.
pub fn omega_gradient_elements<T: Real>(
    v: &Potential<T>,
    j_max: usize,
    k_max: u32,
    omega: &[T],
    h: T,
    rule: &QuadratureRule<T>,
) -> Result<Vec<FourierBlockMatrix<T>>> {
    if !(h > T::zero()) {
        return Err(KamError::Domain("difference step must be positive".into()));
    }
    let mut out = Vec::with_capacity(v.n);
    for m in 0..v.n {
        if omega[m] - h < T::zero() || omega[m] + h > T::TAU() {
            return Err(KamError::Domain(format!(
                "omega[{m}] = {} too close to the parameter boundary",
                omega[m]
            )));
        }
        let mut op = omega.to_vec();
        let mut om = omega.to_vec();
        op[m] = op[m] + h;
        om[m] = om[m] - h;
        let plus = matrix_elements(v, j_max, k_max, &op, rule)?;
        let minus = matrix_elements(v, j_max, k_max, &om, rule)?;
        let inv = cplx(T::one() / (T::lit(2.0) * h), T::zero());
        let mut g = FourierBlockMatrix::new(v.n, k_max, j_max, Channel::ZbarZ);
        for (k, a) in &plus.blocks {
            g.accumulate(k.clone(), inv, a);
        }
        for (k, b) in &minus.blocks {
            g.accumulate(k.clone(), -inv, b);
        }
        out.push(g);
    }
    Ok(out)
}

/// `max_{j,l} |block(k)[j,l]|·(1+ln j)^β(1+ln l)^β` over the given modes.
pub fn weighted_block_max<T: Real>(m: &FourierBlockMatrix<T>, modes: &[Mode], beta: T) -> T {
    let w: Vec<T> = (1..=m.j_max)
        .map(|j| crate::scalar::log_weight(j, beta))
        .collect();
    let mut best = T::zero();
    for k in modes {
        if let Some(b) = m.get(k) {
            for j in 0..m.j_max {
                for l in 0..m.j_max {
                    best = best.max(b[(j, l)].norm() * w[j] * w[l]);
                }
            }
        }
    }
    best
}

/// Evaluates `P(θ, z, z̄) = Σ_k e^{ik·θ} Σ_{jl} block(k)[j,l] z̄_j z_l`.
pub fn evaluate_form<T: Real>(m: &FourierBlockMatrix<T>, theta: &[T], z: &[C<T>]) -> C<T> {
    let mut acc = cplx(T::zero(), T::zero());
    for (k, b) in &m.blocks {
        let ph = k.dot(theta);
        let e = cplx(ph.cos(), ph.sin());
        for j in 0..m.j_max {
            for l in 0..m.j_max {
                acc = acc + e * b[(j, l)] * z[j].conj() * z[l];
            }
        }
    }
    acc
}
