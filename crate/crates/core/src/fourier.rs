//! Fourier modes on `𝕋ⁿ` and the equispaced θ-lattice used for pointwise products.

use crate::scalar::{cplx, Real, C};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Integer frequency vector `k ∈ ℤⁿ`, ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mode(pub Vec<i32>);

impl Mode {
    pub fn zero(n: usize) -> Self {
        Mode(vec![0; n])
    }

    pub fn unit(n: usize, m: usize, sign: i32) -> Self {
        let mut k = vec![0; n];
        k[m] = sign;
        Mode(k)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// `|k|`, the sup norm.
    pub fn norm(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn neg(&self) -> Self {
        Mode(self.0.iter().map(|c| -c).collect())
    }

    pub fn add(&self, other: &Mode) -> Self {
        Mode(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Mode) -> Self {
        Mode(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn dot<T: Real>(&self, omega: &[T]) -> T {
        self.0
            .iter()
            .zip(omega)
            .fold(T::zero(), |acc, (&k, &w)| acc + T::from_int(k as i64) * w)
    }
}

/// All modes with `|k|∞ <= kmax`, in lexicographic order.
pub fn modes(n: usize, kmax: u32) -> Vec<Mode> {
    let k = kmax as i32;
    let mut out = vec![Mode(Vec::with_capacity(n))];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|m| {
                (-k..=k).map(move |c| {
                    let mut v = m.0.clone();
                    v.push(c);
                    Mode(v)
                })
            })
            .collect();
    }
    out
}

/// Values that can be combined linearly on the lattice.
pub trait LatticeValue<T: Real>: Clone {
    fn zeroed(&self) -> Self;
    fn axpy(&mut self, a: C<T>, x: &Self);
    fn max_abs(&self) -> T;
}

impl<T: Real> LatticeValue<T> for C<T> {
    fn zeroed(&self) -> Self {
        cplx(T::zero(), T::zero())
    }
    fn axpy(&mut self, a: C<T>, x: &Self) {
        *self = *self + a * *x;
    }
    fn max_abs(&self) -> T {
        self.norm()
    }
}

impl<T: Real> LatticeValue<T> for DMatrix<C<T>> {
    fn zeroed(&self) -> Self {
        DMatrix::from_element(self.nrows(), self.ncols(), cplx(T::zero(), T::zero()))
    }
    fn axpy(&mut self, a: C<T>, x: &Self) {
        for (d, s) in self.as_mut_slice().iter_mut().zip(x.as_slice()) {
            *d = *d + a * *s;
        }
    }
    fn max_abs(&self) -> T {
        self.iter().fold(T::zero(), |m, c| m.max(c.norm()))
    }
}

/// Equispaced lattice with `size` points per dimension on `[0, 2π)ⁿ`.
///
/// With an odd `size = 2K + 1` every trigonometric polynomial of degree `K`
/// is represented exactly.
#[derive(Clone, Debug)]
pub struct ThetaLattice<T> {
    pub n: usize,
    pub size: usize,
    /// `phase[(k + K) * size + p] = e^{i k θ_p}` in one dimension.
    phase: Vec<C<T>>,
}

impl<T: Real> ThetaLattice<T> {
    pub fn new(n: usize, size: usize) -> Self {
        assert!(n >= 1 && size >= 1);
        let kl = (size - 1) / 2;
        let mut phase = Vec::with_capacity((2 * kl + 1) * size);
        for k in -(kl as i64)..=(kl as i64) {
            for p in 0..size {
                let ang =
                    T::TAU() * T::from_int(k * p as i64 % size as i64) / T::from_int(size as i64);
                phase.push(cplx(ang.cos(), ang.sin()));
            }
        }
        Self { n, size, phase }
    }

    /// Lattice that resolves products of two degree-`kmax` polynomials.
    pub fn for_products(n: usize, kmax: u32) -> Self {
        Self::new(n, 4 * kmax as usize + 1)
    }

    /// Highest exactly representable degree.
    pub fn k_limit(&self) -> u32 {
        ((self.size - 1) / 2) as u32
    }

    pub fn num_points(&self) -> usize {
        self.size.pow(self.n as u32)
    }

    fn coords(&self, p: usize) -> Vec<usize> {
        let mut c = vec![0; self.n];
        let mut r = p;
        for m in (0..self.n).rev() {
            c[m] = r % self.size;
            r /= self.size;
        }
        c
    }

    pub fn point(&self, p: usize) -> Vec<T> {
        self.coords(p)
            .into_iter()
            .map(|c| T::TAU() * T::from_int(c as i64) / T::from_int(self.size as i64))
            .collect()
    }

    /// `e^{i k·θ_p}`.
    pub fn phase(&self, k: &Mode, p: usize) -> C<T> {
        let kl = self.k_limit() as i32;
        let c = self.coords(p);
        let mut z = cplx(T::one(), T::zero());
        for (m, &km) in k.0.iter().enumerate() {
            debug_assert!(km.abs() <= kl);
            z = z * self.phase[(km + kl) as usize * self.size + c[m]];
        }
        z
    }

    /// Pointwise values of `Σ_k v_k e^{ik·θ}`.
    pub fn synthesize<V: LatticeValue<T>>(&self, spec: &BTreeMap<Mode, V>, template: &V) -> Vec<V> {
        let np = self.num_points();
        let mut out = vec![template.zeroed(); np];
        for (k, v) in spec {
            assert!(
                k.norm() <= self.k_limit(),
                "mode {k:?} exceeds lattice resolution"
            );
            for (p, o) in out.iter_mut().enumerate() {
                o.axpy(self.phase(k, p), v);
            }
        }
        out
    }

    /// Discrete Fourier coefficients for `|k|∞ <= kcut`.
    pub fn analyze<V: LatticeValue<T>>(&self, values: &[V], kcut: u32) -> BTreeMap<Mode, V> {
        let kcut = kcut.min(self.k_limit());
        let inv = T::one() / T::from_int(self.num_points() as i64);
        let mut out = BTreeMap::new();
        for k in modes(self.n, kcut) {
            let mut acc = values[0].zeroed();
            for (p, v) in values.iter().enumerate() {
                acc.axpy(self.phase(&k, p).conj() * inv, v);
            }
            out.insert(k, acc);
        }
        out
    }

    /// Truncates lattice data to `|k| <= kcut`; returns the kept spectrum and the
    /// Fourier majorant `Σ max|v_k|` of the discarded resolvable modes.
    pub fn project<V: LatticeValue<T>>(&self, values: &[V], kcut: u32) -> (BTreeMap<Mode, V>, T) {
        let full = self.analyze(values, self.k_limit());
        let mut kept = BTreeMap::new();
        let mut tail = T::zero();
        for (k, v) in full {
            if k.norm() <= kcut {
                kept.insert(k, v);
            } else {
                tail = tail + v.max_abs();
            }
        }
        (kept, tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_are_lexicographic() {
        let m = modes(2, 1);
        assert_eq!(m.len(), 9);
        assert_eq!(m[0], Mode(vec![-1, -1]));
        assert_eq!(m[4], Mode(vec![0, 0]));
        let mut s = m.clone();
        s.sort();
        assert_eq!(s, m);
    }

    #[test]
    fn roundtrip_is_exact_for_band_limited_data() {
        let lat = ThetaLattice::<f64>::new(1, 9);
        let mut spec = BTreeMap::new();
        spec.insert(Mode(vec![-2]), cplx(0.5, -0.25));
        spec.insert(Mode(vec![3]), cplx(1.0, 2.0));
        let vals = lat.synthesize(&spec, &cplx(0.0, 0.0));
        let back = lat.analyze(&vals, 4);
        for (k, v) in back {
            let want = spec.get(&k).copied().unwrap_or(cplx(0.0, 0.0));
            assert!((v - want).norm() < 1e-14, "{k:?}");
        }
    }
}
