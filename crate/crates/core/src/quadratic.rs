//! Quadratic Hamiltonians in `(z, z̄)` with θ-Fourier coefficients.
//!
//! Index convention: `block(k)[j,l]` of channel `zz̄` is the coefficient of
//! `e^{ik·θ} z̄_j z_l`; channel `zz` multiplies `z_j z_l` and `z̄z̄` multiplies
//! `z̄_j z̄_l`. Indices `j, l` are 1-based in documentation and 0-based in storage.
//!
//! The symmetric form `S` with `Q = ½ ζᵀ S ζ`, `ζ = (z, z̄)`, is
//! `S = [[2B, Aᵀ], [A, 2C]]`, and the linear vector field of `Q` is
//! `ζ̇ = −i J₀ S ζ`, matching `i ż = ∂Q/∂z̄`.

use crate::error::{KamError, Result};
use crate::fourier::{LatticeValue, Mode, ThetaLattice};
use crate::scalar::{ci, cplx, czero, Real, C};
use crate::zeta::{CMat, ZMat};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// `z̄_j z_l`
    ZbarZ,
    /// `z_j z_l`
    ZZ,
    /// `z̄_j z̄_l`
    ZbarZbar,
}

impl Channel {
    pub fn label(self) -> &'static str {
        match self {
            Channel::ZbarZ => "zbar_z",
            Channel::ZZ => "z_z",
            Channel::ZbarZbar => "zbar_zbar",
        }
    }
}

pub type Spectrum<T> = BTreeMap<Mode, ZMat<T>>;

/// θ-Fourier series of `J×J` complex matrices for one quadratic channel.
#[derive(Clone, Debug)]
pub struct FourierBlockMatrix<T: Real> {
    pub n: usize,
    pub k_max: u32,
    pub j_max: usize,
    pub channel: Channel,
    pub blocks: BTreeMap<Mode, CMat<T>>,
}

impl<T: Real> FourierBlockMatrix<T> {
    pub fn new(n: usize, k_max: u32, j_max: usize, channel: Channel) -> Self {
        Self {
            n,
            k_max,
            j_max,
            channel,
            blocks: BTreeMap::new(),
        }
    }

    pub fn zero_block(&self) -> CMat<T> {
        CMat::from_element(self.j_max, self.j_max, czero())
    }

    /// Stores a block unless it is identically zero.
    pub fn insert(&mut self, k: Mode, m: CMat<T>) {
        assert_eq!(k.dim(), self.n);
        if m.iter().all(|c| *c == czero()) {
            self.blocks.remove(&k);
        } else {
            self.blocks.insert(k, m);
        }
    }

    /// Adds `a·m` into block `k`.
    pub fn accumulate(&mut self, k: Mode, a: C<T>, m: &CMat<T>) {
        let mut cur = self.blocks.remove(&k).unwrap_or_else(|| self.zero_block());
        cur.axpy(a, m);
        self.insert(k, cur);
    }

    pub fn get(&self, k: &Mode) -> Option<&CMat<T>> {
        self.blocks.get(k)
    }

    pub fn entry(&self, k: &Mode, j: usize, l: usize) -> C<T> {
        self.get(k).map(|m| m[(j, l)]).unwrap_or_else(czero)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn scaled(&self, a: C<T>) -> Self {
        let mut out = Self::new(self.n, self.k_max, self.j_max, self.channel);
        for (k, m) in &self.blocks {
            out.insert(k.clone(), m.map(|c| c * a));
        }
        out
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> T {
        self.blocks
            .values()
            .fold(T::zero(), |s, m| s.max(m.max_abs()))
    }

    /// Splits into modes `|k| <= kcut` and the rest.
    pub fn split(&self, kcut: u32) -> (Self, Self) {
        let mut lo = Self::new(self.n, self.k_max, self.j_max, self.channel);
        let mut hi = lo.clone();
        for (k, m) in &self.blocks {
            if k.norm() <= kcut {
                lo.insert(k.clone(), m.clone());
            } else {
                hi.insert(k.clone(), m.clone());
            }
        }
        (lo, hi)
    }

    /// Largest violation of `block(−k)[j,l] = conj(block(k)[l,j])`.
    pub fn reality_defect(&self) -> T {
        let mut worst = T::zero();
        let zero = self.zero_block();
        for (k, m) in &self.blocks {
            let mk = self.blocks.get(&k.neg()).unwrap_or(&zero);
            for j in 0..self.j_max {
                for l in 0..self.j_max {
                    worst = worst.max((mk[(j, l)] - m[(l, j)].conj()).norm());
                }
            }
        }
        worst
    }

    pub fn to_json(&self) -> serde_json::Value {
        let blocks: Vec<_> = self
            .blocks
            .iter()
            .map(|(k, m)| {
                let re: Vec<Vec<f64>> = (0..self.j_max)
                    .map(|j| (0..self.j_max).map(|l| m[(j, l)].re.as_f64()).collect())
                    .collect();
                let im: Vec<Vec<f64>> = (0..self.j_max)
                    .map(|j| (0..self.j_max).map(|l| m[(j, l)].im.as_f64()).collect())
                    .collect();
                serde_json::json!({ "k": k.0, "re": re, "im": im })
            })
            .collect();
        serde_json::json!({
            "format": "fourier_block_matrix",
            "n": self.n,
            "k_max": self.k_max,
            "j_max": self.j_max,
            "channel": self.channel,
            "index_base": 1,
            "row_index": "j (coefficient of zbar_j for zbar_z)",
            "mode_order": "lexicographic",
            "blocks": blocks,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Block {
            k: Vec<i32>,
            re: Vec<Vec<f64>>,
            im: Vec<Vec<f64>>,
        }
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            k_max: u32,
            j_max: usize,
            channel: Channel,
            blocks: Vec<Block>,
        }
        let raw: Raw = serde_json::from_value(v.clone())?;
        let mut out = Self::new(raw.n, raw.k_max, raw.j_max, raw.channel);
        for b in raw.blocks {
            if b.k.len() != raw.n || b.re.len() != raw.j_max || b.im.len() != raw.j_max {
                return Err(KamError::Invalid(
                    "block shape does not match header".into(),
                ));
            }
            let m = CMat::from_fn(raw.j_max, raw.j_max, |j, l| {
                cplx(T::lit(b.re[j][l]), T::lit(b.im[j][l]))
            });
            out.insert(Mode(b.k), m);
        }
        Ok(out)
    }
}

/// Tangential frequencies `ω` and normal frequencies `Ω_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalForm<T> {
    pub omega: Vec<T>,
    pub big_omega: Vec<T>,
}

impl<T: Real> NormalForm<T> {
    /// Harmonic-oscillator normal form `Ω_j = 2j − 1`.
    pub fn harmonic(omega: Vec<T>, j_max: usize) -> Self {
        let big_omega = (1..=j_max).map(|j| T::from_int(2 * j as i64 - 1)).collect();
        Self { omega, big_omega }
    }

    pub fn reference(j: usize) -> T {
        T::from_int(2 * j as i64 - 1)
    }

    /// `S` of `Σ Ω_j z_j z̄_j` (the `ω·y` part carries no `ζ` dependence).
    pub fn s_matrix(&self) -> ZMat<T> {
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.big_omega.len(),
            self.big_omega.iter().map(|&w| cplx(w, T::zero())),
        ));
        ZMat::from_blocks(self.big_omega.len(), None, Some(d.clone()), Some(d), None)
    }

    /// Vector field `−iJ₀S` of the normal part: `diag(−iΩ, iΩ)`.
    pub fn field_matrix(&self) -> ZMat<T> {
        let mk = |s: T| {
            CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                self.big_omega.len(),
                self.big_omega.iter().map(|&w| cplx(T::zero(), s * w)),
            ))
        };
        ZMat::from_blocks(
            self.big_omega.len(),
            Some(mk(-T::one())),
            None,
            None,
            Some(mk(T::one())),
        )
    }
}

/// A y-independent quadratic form split into its three channels.
#[derive(Clone, Debug)]
pub struct QuadraticPart<T: Real> {
    pub zbar_z: FourierBlockMatrix<T>,
    pub zz: FourierBlockMatrix<T>,
    pub zbar_zbar: FourierBlockMatrix<T>,
}

impl<T: Real> QuadraticPart<T> {
    pub fn zero(n: usize, k_max: u32, j_max: usize) -> Self {
        Self {
            zbar_z: FourierBlockMatrix::new(n, k_max, j_max, Channel::ZbarZ),
            zz: FourierBlockMatrix::new(n, k_max, j_max, Channel::ZZ),
            zbar_zbar: FourierBlockMatrix::new(n, k_max, j_max, Channel::ZbarZbar),
        }
    }

    pub fn from_zbar_z(a: FourierBlockMatrix<T>) -> Self {
        let mut out = Self::zero(a.n, a.k_max, a.j_max);
        out.zbar_z = a;
        out
    }

    pub fn n(&self) -> usize {
        self.zbar_z.n
    }

    pub fn j_max(&self) -> usize {
        self.zbar_z.j_max
    }

    pub fn k_max(&self) -> u32 {
        self.zbar_z.k_max
    }

    pub fn channel(&self, c: Channel) -> &FourierBlockMatrix<T> {
        match c {
            Channel::ZbarZ => &self.zbar_z,
            Channel::ZZ => &self.zz,
            Channel::ZbarZbar => &self.zbar_zbar,
        }
    }

    pub fn channel_mut(&mut self, c: Channel) -> &mut FourierBlockMatrix<T> {
        match c {
            Channel::ZbarZ => &mut self.zbar_z,
            Channel::ZZ => &mut self.zz,
            Channel::ZbarZbar => &mut self.zbar_zbar,
        }
    }

    pub fn channels(&self) -> [&FourierBlockMatrix<T>; 3] {
        [&self.zbar_z, &self.zz, &self.zbar_zbar]
    }

    pub fn is_zero(&self) -> bool {
        self.channels().iter().all(|c| c.is_zero())
    }

    pub fn has_pair_channels(&self) -> bool {
        !(self.zz.is_zero() && self.zbar_zbar.is_zero())
    }

    pub fn max_abs(&self) -> T {
        self.channels()
            .iter()
            .fold(T::zero(), |s, c| s.max(c.max_abs()))
    }

    pub fn scaled(&self, a: C<T>) -> Self {
        Self {
            zbar_z: self.zbar_z.scaled(a),
            zz: self.zz.scaled(a),
            zbar_zbar: self.zbar_zbar.scaled(a),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for c in [Channel::ZbarZ, Channel::ZZ, Channel::ZbarZbar] {
            for (k, m) in &o.channel(c).blocks {
                out.channel_mut(c)
                    .accumulate(k.clone(), cplx(T::one(), T::zero()), m);
            }
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scaled(cplx(-T::one(), T::zero())))
    }

    pub fn split(&self, kcut: u32) -> (Self, Self) {
        let (a_lo, a_hi) = self.zbar_z.split(kcut);
        let (b_lo, b_hi) = self.zz.split(kcut);
        let (c_lo, c_hi) = self.zbar_zbar.split(kcut);
        (
            Self {
                zbar_z: a_lo,
                zz: b_lo,
                zbar_zbar: c_lo,
            },
            Self {
                zbar_z: a_hi,
                zz: b_hi,
                zbar_zbar: c_hi,
            },
        )
    }

    /// Highest mode present.
    pub fn support_degree(&self) -> u32 {
        self.channels()
            .iter()
            .flat_map(|c| c.blocks.keys())
            .map(|k| k.norm())
            .max()
            .unwrap_or(0)
    }

    /// Every mode present in any channel.
    pub fn support(&self) -> Vec<Mode> {
        let mut ks: Vec<Mode> = self
            .channels()
            .iter()
            .flat_map(|c| c.blocks.keys().cloned())
            .collect();
        ks.sort();
        ks.dedup();
        ks
    }

    /// Real part of the `k = 0` diagonal of the `zz̄` channel.
    pub fn mean_diagonal(&self) -> Vec<T> {
        let k0 = Mode::zero(self.n());
        match self.zbar_z.get(&k0) {
            Some(m) => (0..self.j_max()).map(|j| m[(j, j)].re).collect(),
            None => vec![T::zero(); self.j_max()],
        }
    }

    /// Removes the `k = 0` diagonal of the `zz̄` channel and returns it.
    pub fn take_mean_diagonal(&mut self) -> Vec<C<T>> {
        let k0 = Mode::zero(self.n());
        let j = self.j_max();
        match self.zbar_z.blocks.remove(&k0) {
            Some(mut m) => {
                let d: Vec<C<T>> = (0..j).map(|i| m[(i, i)]).collect();
                for i in 0..j {
                    m[(i, i)] = czero();
                }
                self.zbar_z.insert(k0, m);
                d
            }
            None => vec![czero(); j],
        }
    }

    /// Symmetric form `S_k = [[2B_k, A_kᵀ], [A_k, 2C_k]]` per mode.
    pub fn s_spectrum(&self) -> Spectrum<T> {
        let mut out = Spectrum::new();
        let two = cplx(T::lit(2.0), T::zero());
        for k in self.support() {
            let a = self.zbar_z.get(&k);
            let b = self.zz.get(&k).map(|m| m.map(|c| c * two));
            let c = self.zbar_zbar.get(&k).map(|m| m.map(|c| c * two));
            let z = ZMat::from_blocks(self.j_max(), b, a.map(|m| m.transpose()), a.cloned(), c);
            out.insert(k, z);
        }
        out
    }

    /// Reads channels back from a (possibly slightly asymmetric) form, symmetrizing.
    pub fn from_s_spectrum(spec: &Spectrum<T>, n: usize, k_max: u32, j_max: usize) -> Self {
        let mut out = Self::zero(n, k_max, j_max);
        let half = cplx(T::lit(0.5), T::zero());
        let quarter = cplx(T::lit(0.25), T::zero());
        for (k, s) in spec {
            let a = match (s.block(1, 0), s.block(0, 1)) {
                (Some(x), Some(y)) => Some((x + y.transpose()).map(|c| c * half)),
                (Some(x), None) => Some(x.map(|c| c * half)),
                (None, Some(y)) => Some(y.transpose().map(|c| c * half)),
                (None, None) => None,
            };
            if let Some(a) = a {
                out.zbar_z.insert(k.clone(), a);
            }
            if let Some(b) = s.block(0, 0) {
                out.zz
                    .insert(k.clone(), (b + b.transpose()).map(|c| c * quarter));
            }
            if let Some(c) = s.block(1, 1) {
                out.zbar_zbar
                    .insert(k.clone(), (c + c.transpose()).map(|c| c * quarter));
            }
        }
        out
    }

    /// Vector-field spectrum `−iJ₀S_k = [[−iA, −2iC], [2iB, iAᵀ]]`.
    pub fn field_spectrum(&self) -> Spectrum<T> {
        self.s_spectrum()
            .into_iter()
            .map(|(k, s)| (k, s.j0_left().scaled(-ci::<T>())))
            .collect()
    }

    /// Inverse of [`Self::field_spectrum`]: `S = −iJ₀𝒜`.
    pub fn from_field_spectrum(spec: &Spectrum<T>, n: usize, k_max: u32, j_max: usize) -> Self {
        let s: Spectrum<T> = spec
            .iter()
            .map(|(k, a)| (k.clone(), a.j0_left().scaled(-ci::<T>())))
            .collect();
        Self::from_s_spectrum(&s, n, k_max, j_max)
    }

    /// Evaluates `Q(θ, z, z̄)` with independent `z` and `zb`.
    pub fn evaluate(&self, theta: &[T], z: &[C<T>], zb: &[C<T>]) -> C<T> {
        let mut acc = czero();
        for (c, x, y) in [
            (&self.zbar_z, zb, z),
            (&self.zz, z, z),
            (&self.zbar_zbar, zb, zb),
        ] {
            for (k, m) in &c.blocks {
                let ph = k.dot(theta);
                let e = cplx(ph.cos(), ph.sin());
                let mut s = czero();
                for j in 0..c.j_max {
                    for l in 0..c.j_max {
                        s = s + m[(j, l)] * x[j] * y[l];
                    }
                }
                acc = acc + e * s;
            }
        }
        acc
    }

    /// Synthesizes a spectrum on the lattice.
    pub fn lattice_values(
        spec: &Spectrum<T>,
        lattice: &ThetaLattice<T>,
        dim: usize,
    ) -> Vec<ZMat<T>> {
        lattice.synthesize(spec, &ZMat::zeros(dim))
    }
}

/// `N + P`: normal form plus a y-independent quadratic perturbation.
#[derive(Clone, Debug)]
pub struct QuadraticHamiltonian<T: Real> {
    pub normal: NormalForm<T>,
    pub pert: QuadraticPart<T>,
}

impl<T: Real> QuadraticHamiltonian<T> {
    pub fn new(normal: NormalForm<T>, pert: QuadraticPart<T>) -> Self {
        assert_eq!(normal.big_omega.len(), pert.j_max());
        assert_eq!(normal.omega.len(), pert.n());
        Self { normal, pert }
    }

    /// Pure normal form without perturbation.
    pub fn normal_only(normal: NormalForm<T>, k_max: u32) -> Self {
        let pert = QuadraticPart::zero(normal.omega.len(), k_max, normal.big_omega.len());
        Self { normal, pert }
    }

    /// Perturbation with zero y-coefficient (no `ω·y`, no `Ω`).
    pub fn from_part(pert: QuadraticPart<T>) -> Self {
        let normal = NormalForm {
            omega: vec![T::zero(); pert.n()],
            big_omega: vec![T::zero(); pert.j_max()],
        };
        Self { normal, pert }
    }

    /// Full symmetric form including `Σ Ω_j z_j z̄_j` at `k = 0`.
    pub fn s_spectrum(&self) -> Spectrum<T> {
        let mut s = self.pert.s_spectrum();
        let k0 = Mode::zero(self.pert.n());
        let entry = s
            .entry(k0)
            .or_insert_with(|| ZMat::zeros(self.pert.j_max()));
        entry.axpy(cplx(T::one(), T::zero()), &self.normal.s_matrix());
        s
    }

    /// Moves the `k = 0` diagonal of the perturbation into the normal form.
    pub fn normalize(&mut self) {
        let d = self.pert.take_mean_diagonal();
        for (w, c) in self.normal.big_omega.iter_mut().zip(d) {
            *w = *w + c.re;
        }
    }

    /// Off-normal part: the perturbation without its `k = 0` `zz̄` diagonal.
    pub fn off_normal(&self) -> QuadraticPart<T> {
        let mut p = self.pert.clone();
        p.take_mean_diagonal();
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_and_field_conversions_roundtrip() {
        let mut p = QuadraticPart::<f64>::zero(1, 2, 2);
        let mut a = CMat::from_element(2, 2, czero());
        a[(0, 1)] = cplx(0.3, 0.1);
        a[(1, 0)] = cplx(-0.2, 0.4);
        p.zbar_z.insert(Mode(vec![1]), a);
        let mut b = CMat::from_element(2, 2, czero());
        b[(0, 1)] = cplx(0.5, 0.0);
        b[(1, 0)] = cplx(0.5, 0.0);
        p.zz.insert(Mode(vec![0]), b);
        let back = QuadraticPart::from_field_spectrum(&p.field_spectrum(), 1, 2, 2);
        let diff = back.sub(&p);
        assert!(diff.max_abs() < 1e-15);
        let back2 = QuadraticPart::from_s_spectrum(&p.s_spectrum(), 1, 2, 2);
        assert!(back2.sub(&p).max_abs() < 1e-15);
    }

    #[test]
    fn quadratic_form_matches_s_matrix() {
        let mut p = QuadraticPart::<f64>::zero(1, 1, 2);
        let mut a = CMat::from_element(2, 2, czero());
        a[(1, 0)] = cplx(1.0, 0.5);
        p.zbar_z.insert(Mode(vec![0]), a);
        let mut c = CMat::from_element(2, 2, czero());
        c[(0, 0)] = cplx(0.25, 0.0);
        p.zbar_zbar.insert(Mode(vec![0]), c);
        let z = [cplx(0.3, -0.1), cplx(0.7, 0.2)];
        let zb = [cplx(-0.4, 0.3), cplx(0.1, 0.9)];
        let direct = p.evaluate(&[0.0], &z, &zb);
        let s = p.s_spectrum()[&Mode(vec![0])].to_dense();
        let zeta = nalgebra::DVector::from_vec(vec![z[0], z[1], zb[0], zb[1]]);
        let via_s = (zeta.transpose() * s * &zeta)[(0, 0)] * 0.5;
        assert!((direct - via_s).norm() < 1e-14);
    }
}
