//! Arithmetic on θ-Fourier series of `ζ`-operators.

use crate::fourier::{LatticeValue, Mode, ThetaLattice};
use crate::quadratic::Spectrum;
use crate::scalar::{cone, cplx, Real, C};
use crate::zeta::ZMat;

pub fn axpy<T: Real>(dst: &mut Spectrum<T>, a: C<T>, src: &Spectrum<T>) {
    for (k, v) in src {
        match dst.get_mut(k) {
            Some(d) => d.axpy(a, v),
            None => {
                dst.insert(k.clone(), v.scaled(a));
            }
        }
    }
}

pub fn add<T: Real>(a: &Spectrum<T>, b: &Spectrum<T>) -> Spectrum<T> {
    let mut out = a.clone();
    axpy(&mut out, cone(), b);
    out
}

pub fn sub<T: Real>(a: &Spectrum<T>, b: &Spectrum<T>) -> Spectrum<T> {
    let mut out = a.clone();
    axpy(&mut out, cplx(-T::one(), T::zero()), b);
    out
}

pub fn scaled<T: Real>(a: &Spectrum<T>, c: C<T>) -> Spectrum<T> {
    a.iter().map(|(k, v)| (k.clone(), v.scaled(c))).collect()
}

pub fn transpose<T: Real>(a: &Spectrum<T>) -> Spectrum<T> {
    a.iter().map(|(k, v)| (k.clone(), v.transpose())).collect()
}

/// `∂_{θ_m}` of the series.
pub fn theta_derivative<T: Real>(a: &Spectrum<T>, m: usize) -> Spectrum<T> {
    a.iter()
        .filter(|(k, _)| k.0[m] != 0)
        .map(|(k, v)| {
            (
                k.clone(),
                v.scaled(cplx(T::zero(), T::from_int(k.0[m] as i64))),
            )
        })
        .collect()
}

/// `ω·∂_θ` of the series.
pub fn transport<T: Real>(a: &Spectrum<T>, omega: &[T]) -> Spectrum<T> {
    a.iter()
        .filter(|(k, _)| !k.is_zero())
        .map(|(k, v)| (k.clone(), v.scaled(cplx(T::zero(), k.dot(omega)))))
        .collect()
}

/// Fourier majorant `Σ_k max|v_k|`.
pub fn majorant<T: Real>(a: &Spectrum<T>) -> T {
    a.values().fold(T::zero(), |s, v| s + v.max_abs())
}

pub fn max_abs<T: Real>(a: &Spectrum<T>) -> T {
    a.values().fold(T::zero(), |s, v| s.max(v.max_abs()))
}

/// Removes modes above `kcut`; returns the majorant of what was removed.
pub fn truncate<T: Real>(a: &mut Spectrum<T>, kcut: u32) -> T {
    let drop: Vec<Mode> = a.keys().filter(|k| k.norm() > kcut).cloned().collect();
    let mut tail = T::zero();
    for k in drop {
        if let Some(v) = a.remove(&k) {
            tail = tail + v.max_abs();
        }
    }
    tail
}

/// Lattice on which two series of degree `kcut` multiply without aliasing.
#[derive(Clone, Debug)]
pub struct ProductLattice<T: Real> {
    pub lattice: ThetaLattice<T>,
    pub kcut: u32,
    pub dim: usize,
}

impl<T: Real> ProductLattice<T> {
    pub fn new(n: usize, kcut: u32, dim: usize) -> Self {
        Self {
            lattice: ThetaLattice::for_products(n, kcut),
            kcut,
            dim,
        }
    }

    pub fn values(&self, a: &Spectrum<T>) -> Vec<ZMat<T>> {
        self.lattice.synthesize(a, &ZMat::zeros(self.dim))
    }

    /// Spectrum of pointwise values, truncated to `kcut`, with the dropped majorant.
    pub fn spectrum(&self, v: &[ZMat<T>]) -> (Spectrum<T>, T) {
        let (mut s, tail) = self.lattice.project(v, self.kcut);
        s.retain(|_, z| {
            *z = std::mem::replace(z, ZMat::zeros(0)).pruned();
            !z.is_zero()
        });
        (s, tail)
    }

    pub fn mul_values(a: &[ZMat<T>], b: &[ZMat<T>]) -> Vec<ZMat<T>> {
        a.iter().zip(b).map(|(x, y)| x.mul(y)).collect()
    }

    /// `a·b` truncated to `kcut`.
    pub fn product(&self, a: &Spectrum<T>, b: &Spectrum<T>) -> (Spectrum<T>, T) {
        if a.is_empty() || b.is_empty() {
            return (Spectrum::new(), T::zero());
        }
        self.spectrum(&Self::mul_values(&self.values(a), &self.values(b)))
    }

    /// `[x, y]` with `x` given by lattice values, truncated to `kcut`.
    pub fn commutator_with(&self, xv: &[ZMat<T>], y: &Spectrum<T>) -> (Spectrum<T>, T) {
        if y.is_empty() {
            return (Spectrum::new(), T::zero());
        }
        let yv = self.values(y);
        let v: Vec<ZMat<T>> = xv.iter().zip(&yv).map(|(x, y)| x.commutator(y)).collect();
        self.spectrum(&v)
    }
}
