//! Time-`t` flows of y-independent quadratic generators and exact conjugation.
//!
//! Along the flow of `F(θ, ζ)` the angle is frozen, `ζ(t) = L(t)ζ₀` with
//! `L(t) = e^{t𝒜_F}`, `𝒜_F = −iJ₀S_F`, and the action picks up
//! `y(1) = y₀ + ½ ζ₀ᵀ M ζ₀` with `M_m = −∫₀¹ L(t)ᵀ ∂_{θ_m}S_F L(t) dt`.
//! Maps store `W = L − I` rather than `L` so that compositions and
//! conjugations of nearly-identity maps keep relative accuracy.

use crate::error::{KamError, Result};
use crate::fourier::{LatticeValue, Mode};
use crate::norms::{matrix_beta_norm, DecayProfile};
use crate::quadratic::{QuadraticHamiltonian, QuadraticPart, Spectrum};
use crate::scalar::{cone, cplx, Real};
use crate::series::{self, ProductLattice};
use crate::zeta::{expm1, CMat, ZMat};

/// `Φ(y, θ, ζ) = (y + ½ζᵀM(θ)ζ, θ, L(θ)ζ)` as θ-Fourier series.
#[derive(Clone, Debug)]
pub struct SymplecticMap<T: Real> {
    pub n: usize,
    pub k_max: u32,
    pub dim: usize,
    /// `L − I`
    pub w: Spectrum<T>,
    /// One quadratic-form correction per angle.
    pub m: Vec<Spectrum<T>>,
    /// Majorant of Fourier content discarded above `k_max`.
    pub tail: T,
    /// `max_θ ‖LᵀJ₀L − J₀‖_F` over the construction lattice.
    pub lattice_defect: T,
}

impl<T: Real> SymplecticMap<T> {
    pub fn identity(n: usize, k_max: u32, dim: usize) -> Self {
        Self {
            n,
            k_max,
            dim,
            w: Spectrum::new(),
            m: vec![Spectrum::new(); n],
            tail: T::zero(),
            lattice_defect: T::zero(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.w.is_empty() && self.m.iter().all(|m| m.is_empty())
    }

    fn lattice(&self) -> ProductLattice<T> {
        ProductLattice::new(self.n, self.k_max, self.dim)
    }

    /// `max_θ ‖LᵀJ₀L − J₀‖_F` on the product lattice, evaluated from the stored series.
    pub fn symplectic_defect(&self) -> T {
        let lat = self.lattice();
        lat.values(&self.w)
            .iter()
            .map(|w| symplectic_defect_of(w))
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// `max_θ [L(θ) − I]_β` on the product lattice.
    pub fn beta_norm(&self, profile: &DecayProfile<T>) -> T {
        let lat = self.lattice();
        lat.values(&self.w)
            .iter()
            .map(|w| matrix_beta_norm(w, profile))
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Largest entry of the `z ↔ z̄` coupling blocks of `L`.
    pub fn coupling_norm(&self) -> T {
        let mut worst = T::zero();
        for z in self.w.values() {
            for b in [z.block(0, 1), z.block(1, 0)].into_iter().flatten() {
                worst = worst.max(b.max_abs());
            }
        }
        worst
    }

    pub fn to_json(&self) -> serde_json::Value {
        let enc = |s: &Spectrum<T>| -> Vec<serde_json::Value> {
            s.iter()
                .map(|(k, z)| {
                    let d = z.to_dense();
                    let re: Vec<Vec<f64>> = (0..2 * self.dim)
                        .map(|a| (0..2 * self.dim).map(|b| d[(a, b)].re.as_f64()).collect())
                        .collect();
                    let im: Vec<Vec<f64>> = (0..2 * self.dim)
                        .map(|a| (0..2 * self.dim).map(|b| d[(a, b)].im.as_f64()).collect())
                        .collect();
                    serde_json::json!({ "k": k.0, "re": re, "im": im })
                })
                .collect()
        };
        serde_json::json!({
            "format": "symplectic_map",
            "n": self.n,
            "k_max": self.k_max,
            "j_max": self.dim,
            "index_base": 1,
            "zeta_order": "z_1..z_J, zbar_1..zbar_J",
            "mode_order": "lexicographic",
            "l_minus_identity": enc(&self.w),
            "m": self.m.iter().map(|s| enc(s)).collect::<Vec<_>>(),
            "tail": self.tail.as_f64(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Block {
            k: Vec<i32>,
            re: Vec<Vec<f64>>,
            im: Vec<Vec<f64>>,
        }
        #[derive(serde::Deserialize)]
        struct Raw {
            n: usize,
            k_max: u32,
            j_max: usize,
            l_minus_identity: Vec<Block>,
            m: Vec<Vec<Block>>,
            tail: f64,
        }
        let raw: Raw = serde_json::from_value(v.clone())?;
        let d2 = 2 * raw.j_max;
        let dec = |bs: Vec<Block>| -> Result<Spectrum<T>> {
            let mut s = Spectrum::new();
            for b in bs {
                if b.k.len() != raw.n || b.re.len() != d2 || b.im.len() != d2 {
                    return Err(KamError::Invalid(
                        "map block shape does not match header".into(),
                    ));
                }
                let m = CMat::from_fn(d2, d2, |a, c| cplx(T::lit(b.re[a][c]), T::lit(b.im[a][c])));
                s.insert(Mode(b.k), ZMat::from_dense(&m));
            }
            Ok(s)
        };
        if raw.m.len() != raw.n {
            return Err(KamError::Invalid("one M series per angle expected".into()));
        }
        let w = dec(raw.l_minus_identity)?;
        let m = raw.m.into_iter().map(dec).collect::<Result<Vec<_>>>()?;
        let mut out = Self {
            n: raw.n,
            k_max: raw.k_max,
            dim: raw.j_max,
            w,
            m,
            tail: T::lit(raw.tail),
            lattice_defect: T::zero(),
        };
        out.lattice_defect = out.symplectic_defect();
        Ok(out)
    }
}

/// `‖(I + W)ᵀ J₀ (I + W) − J₀‖_F = ‖WᵀJ₀ + J₀W + WᵀJ₀W‖_F`.
pub fn symplectic_defect_of<T: Real>(w: &ZMat<T>) -> T {
    let jw = w.j0_left();
    let mut d = w.transpose().j0_right();
    d.axpy(cone(), &jw);
    d.axpy(cone(), &w.transpose().mul(&jw));
    d.frobenius()
}

/// Pointwise `−∫₀¹ e^{t𝒜ᵀ} Y e^{t𝒜} dt = −Σ_{m≥0} 𝓛^m(Y)/(m+1)!`, `𝓛(Y) = 𝒜ᵀY + Y𝒜`.
fn action_correction<T: Real>(a: &ZMat<T>, y: &ZMat<T>) -> ZMat<T> {
    let at = a.transpose();
    let mut term = y.clone();
    let mut sum = y.clone();
    let tol = T::epsilon() * T::lit(0.5);
    for m in 1..80 {
        let mut next = at.mul(&term);
        next.axpy(cone(), &term.mul(a));
        term = next.scaled_real(T::one() / T::from_int(m as i64 + 1));
        sum.axpy(cone(), &term);
        if term.frobenius() <= tol * sum.frobenius().max(T::min_positive_value()) {
            break;
        }
    }
    sum.scaled_real(-T::one())
}

/// Time-`t` map of a y-independent quadratic generator, truncated to `k_max`.
pub fn time_t_map<T: Real>(f: &QuadraticPart<T>, t: T, k_max: u32) -> Result<SymplecticMap<T>> {
    let n = f.n();
    let dim = f.j_max();
    if f.support_degree() > k_max {
        return Err(KamError::Budget(format!(
            "generator degree {} exceeds map truncation {k_max}",
            f.support_degree()
        )));
    }
    if f.is_zero() {
        return Ok(SymplecticMap::identity(n, k_max, dim));
    }
    let lat = ProductLattice::new(n, k_max, dim);
    let x = series::scaled(&f.field_spectrum(), cplx(t, T::zero()));
    let xv = lat.values(&x);
    let guard = xv
        .iter()
        .map(|z| z.frobenius())
        .fold(T::zero(), |a, b| a.max(b));
    if guard > T::one() {
        return Err(KamError::StepTooLarge {
            norm: guard.as_f64(),
        });
    }
    log::debug!("flow guard margin {}", (T::one() - guard).as_f64());
    let wv: Vec<ZMat<T>> = xv.iter().map(expm1).collect();
    let defect = wv
        .iter()
        .map(symplectic_defect_of)
        .fold(T::zero(), |a, b| a.max(b));
    let (w, mut tail) = lat.spectrum(&wv);
    let s = series::scaled(&f.s_spectrum(), cplx(t, T::zero()));
    let mut m = Vec::with_capacity(n);
    for a in 0..n {
        let ds = series::theta_derivative(&s, a);
        if ds.is_empty() {
            m.push(Spectrum::new());
            continue;
        }
        let dv = lat.values(&ds);
        let mv: Vec<ZMat<T>> = xv
            .iter()
            .zip(&dv)
            .map(|(x, y)| action_correction(x, y))
            .collect();
        let (ms, mt) = lat.spectrum(&mv);
        tail = tail + mt;
        m.push(ms);
    }
    Ok(SymplecticMap {
        n,
        k_max,
        dim,
        w,
        m,
        tail,
        lattice_defect: defect,
    })
}

/// Time-one map of `F`.
pub fn time_one_map<T: Real>(f: &QuadraticPart<T>, k_max: u32) -> Result<SymplecticMap<T>> {
    time_t_map(f, T::one(), k_max)
}

/// `Φ_outer ∘ Φ_inner`: `L = L_outer L_inner`, `M = M_inner + L_innerᵀ M_outer L_inner`.
pub fn compose<T: Real>(outer: &SymplecticMap<T>, inner: &SymplecticMap<T>) -> SymplecticMap<T> {
    if inner.is_identity() {
        return outer.clone();
    }
    if outer.is_identity() {
        return inner.clone();
    }
    let lat = outer.lattice();
    let (ww, t0) = lat.product(&outer.w, &inner.w);
    let mut w = series::add(&outer.w, &inner.w);
    series::axpy(&mut w, cone(), &ww);
    let mut tail = outer.tail + inner.tail + t0;
    let mut m = Vec::with_capacity(outer.n);
    for a in 0..outer.n {
        let (cong, t1) = congruence_increment(&lat, &outer.m[a], &inner.w);
        tail = tail + t1;
        let mut ma = series::add(&inner.m[a], &outer.m[a]);
        series::axpy(&mut ma, cone(), &cong);
        m.push(ma);
    }
    let mut out = SymplecticMap {
        n: outer.n,
        k_max: outer.k_max,
        dim: outer.dim,
        w,
        m,
        tail,
        lattice_defect: T::zero(),
    };
    out.lattice_defect = out.symplectic_defect();
    out
}

/// `WᵀS + SW + WᵀSW`, so that `(I + W)ᵀS(I + W) = S + increment`.
fn congruence_increment<T: Real>(
    lat: &ProductLattice<T>,
    s: &Spectrum<T>,
    w: &Spectrum<T>,
) -> (Spectrum<T>, T) {
    if s.is_empty() || w.is_empty() {
        return (Spectrum::new(), T::zero());
    }
    let sv = lat.values(s);
    let wv = lat.values(w);
    let v: Vec<ZMat<T>> = sv
        .iter()
        .zip(&wv)
        .map(|(s, w)| {
            let sw = s.mul(w);
            let wt = w.transpose();
            let mut r = wt.mul(s);
            r.axpy(cone(), &sw);
            r.axpy(cone(), &wt.mul(&sw));
            r
        })
        .collect();
    lat.spectrum(&v)
}

/// Result of [`conjugate`]: `H ∘ Φ` with its normal form unchanged and the
/// new perturbation, plus the discarded truncation tail.
#[derive(Clone, Debug)]
pub struct Conjugated<T: Real> {
    pub hamiltonian: QuadraticHamiltonian<T>,
    pub tail: T,
}

/// `H ∘ Φ` for `H = ω·y + Σ Ω_j z_j z̄_j + P`:
/// `S' − S_N = WᵀS_N + S_NW + WᵀS_NW + LᵀS_PL + Σ_m ω_m M_m`.
pub fn conjugate<T: Real>(
    h: &QuadraticHamiltonian<T>,
    phi: &SymplecticMap<T>,
) -> Result<Conjugated<T>> {
    let n = h.pert.n();
    let dim = h.pert.j_max();
    if phi.n != n || phi.dim != dim {
        return Err(KamError::Invalid(
            "map and Hamiltonian truncations differ".into(),
        ));
    }
    if h.pert.support_degree() > phi.k_max {
        return Err(KamError::Budget(format!(
            "perturbation degree {} exceeds map truncation {}",
            h.pert.support_degree(),
            phi.k_max
        )));
    }
    let lat = phi.lattice();
    let k0 = Mode::zero(n);
    let mut sn = Spectrum::new();
    sn.insert(k0, h.normal.s_matrix());
    let sp = h.pert.s_spectrum();
    let (a, t1) = congruence_increment(&lat, &sn, &phi.w);
    let (b, t2) = congruence_increment(&lat, &sp, &phi.w);
    let mut out = series::add(&a, &sp);
    series::axpy(&mut out, cone(), &b);
    for (m, om) in phi.m.iter().zip(&h.normal.omega) {
        series::axpy(&mut out, cplx(*om, T::zero()), m);
    }
    let tail = t1 + t2 + phi.tail;
    let pert = QuadraticPart::from_s_spectrum(&out, n, phi.k_max.max(h.pert.k_max()), dim);
    Ok(Conjugated {
        hamiltonian: QuadraticHamiltonian::new(h.normal.clone(), pert),
        tail,
    })
}

/// Exact bracket `{A, B}` of quadratic Hamiltonians under the convention `Ḟ = {F, H}`:
/// `(ω_B·∂_θ)Q_A − (ω_A·∂_θ)Q_B` plus the `ζ`-part `−i(S_A J₀ S_B − S_B J₀ S_A)`.
pub fn poisson_bracket<T: Real>(
    a: &QuadraticHamiltonian<T>,
    b: &QuadraticHamiltonian<T>,
) -> QuadraticPart<T> {
    let n = a.pert.n();
    let dim = a.pert.j_max();
    let mut out = series::transport(&a.pert.s_spectrum(), &b.normal.omega);
    series::axpy(
        &mut out,
        cplx(-T::one(), T::zero()),
        &series::transport(&b.pert.s_spectrum(), &a.normal.omega),
    );
    let sa = a.s_spectrum();
    let sb = b.s_spectrum();
    let mi = cplx(T::zero(), -T::one());
    for (ka, za) in &sa {
        for (kb, zb) in &sb {
            let mut p = za.mul(&zb.j0_left());
            p.axpy(cplx(-T::one(), T::zero()), &zb.mul(&za.j0_left()));
            let k = ka.add(kb);
            let p = p.scaled(mi);
            match out.get_mut(&k) {
                Some(d) => d.axpy(cone(), &p),
                None => {
                    out.insert(k, p);
                }
            }
        }
    }
    let k_max = a
        .pert
        .k_max()
        .max(b.pert.k_max())
        .max(out.keys().map(|k| k.norm()).max().unwrap_or(0));
    QuadraticPart::from_s_spectrum(&out, n, k_max, dim)
}

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre_unit<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    let mut xs = vec![T::zero(); m];
    let mut ws = vec![T::zero(); m];
    let mf = T::from_int(m as i64);
    for i in 0..m.div_ceil(2) {
        let mut x = (T::PI() * (T::from_int(i as i64) + T::lit(0.75)) / (mf + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (mut p0, mut p1) = (T::one(), x);
            for k in 2..=m {
                let kf = T::from_int(k as i64);
                let p2 = ((T::lit(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = mf * (x * p1 - p0) / (x * x - T::one());
            let dx = p1 / dp;
            x = x - dx;
            if dx.abs() <= T::epsilon() {
                break;
            }
        }
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        let half = T::lit(0.5);
        xs[i] = half * (T::one() - x);
        xs[m - 1 - i] = half * (T::one() + x);
        ws[i] = half * w;
        ws[m - 1 - i] = half * w;
    }
    (xs, ws)
}

/// Independent path for `H ∘ X_F^1 = H + ∫₀¹ {H, F} ∘ X_F^t dt` with a
/// `nodes`-point Gauss–Legendre rule in `t`; returns the new perturbation.
pub fn conjugate_by_quadrature<T: Real>(
    h: &QuadraticHamiltonian<T>,
    f: &QuadraticPart<T>,
    k_max: u32,
    nodes: usize,
) -> Result<QuadraticPart<T>> {
    let fh = QuadraticHamiltonian::from_part(f.clone());
    let g = poisson_bracket(h, &fh);
    let lat = ProductLattice::new(h.pert.n(), k_max, h.pert.j_max());
    let mut gs = g.s_spectrum();
    series::truncate(&mut gs, k_max);
    let (ts, ws) = gauss_legendre_unit::<T>(nodes);
    let mut acc = h.pert.s_spectrum();
    for (t, w) in ts.into_iter().zip(ws) {
        let phi = time_t_map(f, t, k_max)?;
        let (inc, _) = congruence_increment(&lat, &gs, &phi.w);
        series::axpy(&mut acc, cplx(w, T::zero()), &gs);
        series::axpy(&mut acc, cplx(w, T::zero()), &inc);
    }
    Ok(QuadraticPart::from_s_spectrum(
        &acc,
        h.pert.n(),
        k_max,
        h.pert.j_max(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::{Channel, FourierBlockMatrix, NormalForm};
    use crate::scalar::czero;

    fn mono(dim: usize, j: usize, l: usize, c: f64) -> QuadraticPart<f64> {
        let mut a = FourierBlockMatrix::new(1, 1, dim, Channel::ZbarZ);
        let mut m = CMat::from_element(dim, dim, czero());
        m[(j, l)] = cplx(c, 0.0);
        a.insert(Mode::zero(1), m);
        QuadraticPart::from_zbar_z(a)
    }

    #[test]
    fn hand_bracket_of_two_mode_exchange() {
        // {z₁z̄₂, z₂z̄₁} = i(z₁z̄₁ − z₂z̄₂)
        let a = QuadraticHamiltonian::from_part(mono(2, 1, 0, 1.0));
        let b = QuadraticHamiltonian::from_part(mono(2, 0, 1, 1.0));
        let p = poisson_bracket(&a, &b);
        let m = p.zbar_z.get(&Mode::zero(1)).unwrap();
        assert!((m[(0, 0)] - cplx(0.0, 1.0)).norm() < 1e-15);
        assert!((m[(1, 1)] - cplx(0.0, -1.0)).norm() < 1e-15);
        assert!(m[(0, 1)].norm() < 1e-15 && m[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_unit::<f64>(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(31)).sum();
        assert!((s - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_of_a_single_mode() {
        let f = mono(1, 0, 0, 0.4);
        let phi = time_one_map(&f, 1).unwrap();
        let w = &phi.w[&Mode::zero(1)];
        let l11 = w.block(0, 0).unwrap()[(0, 0)] + 1.0;
        assert!((l11.norm() - 1.0).abs() < 1e-15);
        assert!((l11 - cplx(0.0, -0.4).exp()).norm() < 1e-15);
        assert!(phi.lattice_defect < 1e-15);
    }

    #[test]
    fn identity_conjugation_is_trivial() {
        let normal = NormalForm::harmonic(vec![0.7], 2);
        let h = QuadraticHamiltonian::new(normal, mono(2, 0, 1, 0.1));
        let c = conjugate(&h, &SymplecticMap::identity(1, 1, 2)).unwrap();
        assert!(c.hamiltonian.pert.sub(&h.pert).max_abs() < 1e-16);
    }
}
