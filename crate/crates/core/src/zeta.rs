//! Linear operators on `ζ = (z, z̄)` stored as 2×2 blocks of `J×J` complex matrices.
//!
//! Absent blocks are exact zeros, so operators that never mix `z` with `z̄`
//! cost two `J×J` products instead of one dense `2J×2J` product.

use crate::fourier::LatticeValue;
use crate::scalar::{cone, cplx, czero, Real, C};
use nalgebra::DMatrix;

pub type CMat<T> = DMatrix<C<T>>;

#[derive(Clone, Debug)]
pub struct ZMat<T: Real> {
    pub dim: usize,
    /// Blocks in the order `(1,1), (1,2), (2,1), (2,2)`; row block 1 is `z`, row block 2 is `z̄`.
    pub blocks: [Option<CMat<T>>; 4],
}

fn mat_axpy<T: Real>(dst: &mut CMat<T>, a: C<T>, src: &CMat<T>) {
    for (d, s) in dst.as_mut_slice().iter_mut().zip(src.as_slice()) {
        *d = *d + a * *s;
    }
}

fn add_into<T: Real>(slot: &mut Option<CMat<T>>, a: C<T>, src: &CMat<T>) {
    match slot {
        Some(d) => mat_axpy(d, a, src),
        None => {
            let mut m = src.clone();
            if a != cone() {
                m.iter_mut().for_each(|c| *c = *c * a);
            }
            *slot = Some(m);
        }
    }
}

impl<T: Real> ZMat<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            blocks: [None, None, None, None],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let i = CMat::<T>::identity(dim, dim);
        Self {
            dim,
            blocks: [Some(i.clone()), None, None, Some(i)],
        }
    }

    pub fn from_blocks(
        dim: usize,
        b11: Option<CMat<T>>,
        b12: Option<CMat<T>>,
        b21: Option<CMat<T>>,
        b22: Option<CMat<T>>,
    ) -> Self {
        Self {
            dim,
            blocks: [b11, b12, b21, b22],
        }
    }

    pub fn block(&self, r: usize, c: usize) -> Option<&CMat<T>> {
        self.blocks[2 * r + c].as_ref()
    }

    /// Block `(r, c)` as an owned matrix, zero when absent.
    pub fn block_or_zero(&self, r: usize, c: usize) -> CMat<T> {
        self.block(r, c)
            .cloned()
            .unwrap_or_else(|| CMat::from_element(self.dim, self.dim, czero()))
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.is_none())
    }

    /// True when the `z ↔ z̄` coupling blocks are absent.
    pub fn is_block_diagonal(&self) -> bool {
        self.blocks[1].is_none() && self.blocks[2].is_none()
    }

    pub fn entry(&self, a: usize, b: usize) -> C<T> {
        let (r, i) = (a / self.dim, a % self.dim);
        let (c, j) = (b / self.dim, b % self.dim);
        self.block(r, c).map(|m| m[(i, j)]).unwrap_or_else(czero)
    }

    pub fn to_dense(&self) -> CMat<T> {
        let d = self.dim;
        let mut out = CMat::from_element(2 * d, 2 * d, czero());
        for r in 0..2 {
            for c in 0..2 {
                if let Some(m) = self.block(r, c) {
                    out.view_mut((r * d, c * d), (d, d)).copy_from(m);
                }
            }
        }
        out
    }

    pub fn from_dense(m: &CMat<T>) -> Self {
        let d = m.nrows() / 2;
        let mut out = Self::zeros(d);
        for r in 0..2 {
            for c in 0..2 {
                let b = m.view((r * d, c * d), (d, d)).into_owned();
                if b.iter().any(|v| *v != czero()) {
                    out.blocks[2 * r + c] = Some(b);
                }
            }
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        for r in 0..2 {
            for c in 0..2 {
                let mut acc: Option<CMat<T>> = None;
                for m in 0..2 {
                    if let (Some(a), Some(b)) = (self.block(r, m), o.block(m, c)) {
                        let p = a * b;
                        match &mut acc {
                            Some(s) => *s += p,
                            None => acc = Some(p),
                        }
                    }
                }
                out.blocks[2 * r + c] = acc;
            }
        }
        out
    }

    /// `[self, o] = self·o − o·self`.
    pub fn commutator(&self, o: &Self) -> Self {
        let mut a = self.mul(o);
        a.axpy(cplx(-T::one(), T::zero()), &o.mul(self));
        a
    }

    pub fn scaled(&self, a: C<T>) -> Self {
        let mut out = self.clone();
        out.blocks
            .iter_mut()
            .flatten()
            .for_each(|m| m.iter_mut().for_each(|c| *c = *c * a));
        out
    }

    pub fn scaled_real(&self, a: T) -> Self {
        self.scaled(cplx(a, T::zero()))
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(cone(), o);
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(cplx(-T::one(), T::zero()), o);
        out
    }

    pub fn transpose(&self) -> Self {
        let t = |b: &Option<CMat<T>>| b.as_ref().map(|m| m.transpose());
        Self {
            dim: self.dim,
            blocks: [
                t(&self.blocks[0]),
                t(&self.blocks[2]),
                t(&self.blocks[1]),
                t(&self.blocks[3]),
            ],
        }
    }

    /// `J₀·Z` with `J₀ = [[0, I], [−I, 0]]`.
    pub fn j0_left(&self) -> Self {
        let neg = |b: &Option<CMat<T>>| b.as_ref().map(|m| -m);
        Self {
            dim: self.dim,
            blocks: [
                self.blocks[2].clone(),
                self.blocks[3].clone(),
                neg(&self.blocks[0]),
                neg(&self.blocks[1]),
            ],
        }
    }

    /// `Z·J₀`.
    pub fn j0_right(&self) -> Self {
        let neg = |b: &Option<CMat<T>>| b.as_ref().map(|m| -m);
        Self {
            dim: self.dim,
            blocks: [
                neg(&self.blocks[1]),
                self.blocks[0].clone(),
                neg(&self.blocks[3]),
                self.blocks[2].clone(),
            ],
        }
    }

    pub fn j0(dim: usize) -> Self {
        let i = CMat::<T>::identity(dim, dim);
        Self {
            dim,
            blocks: [None, Some(i.clone()), Some(-i), None],
        }
    }

    pub fn map(&self, f: impl Fn(C<T>) -> C<T>) -> Self {
        let mut out = self.clone();
        out.blocks
            .iter_mut()
            .flatten()
            .for_each(|m| m.iter_mut().for_each(|c| *c = f(*c)));
        out
    }

    pub fn frobenius(&self) -> T {
        self.blocks
            .iter()
            .flatten()
            .flat_map(|m| m.iter())
            .fold(T::zero(), |s, c| s + c.norm_sqr())
            .sqrt()
    }

    /// Drops blocks whose entries are all exactly zero.
    pub fn pruned(mut self) -> Self {
        for b in self.blocks.iter_mut() {
            if b.as_ref().is_some_and(|m| m.iter().all(|c| *c == czero())) {
                *b = None;
            }
        }
        self
    }
}

impl<T: Real> LatticeValue<T> for ZMat<T> {
    fn zeroed(&self) -> Self {
        Self::zeros(self.dim)
    }

    fn axpy(&mut self, a: C<T>, x: &Self) {
        for (slot, src) in self.blocks.iter_mut().zip(&x.blocks) {
            if let Some(s) = src {
                add_into(slot, a, s);
            }
        }
    }

    fn max_abs(&self) -> T {
        self.blocks
            .iter()
            .flatten()
            .flat_map(|m| m.iter())
            .fold(T::zero(), |s, c| s.max(c.norm()))
    }
}

/// `e^X − I` by scaling and squaring of a Taylor series, accurate for small `X`.
pub fn expm1<T: Real>(x: &ZMat<T>) -> ZMat<T> {
    expm1_with_terms(x).0
}

fn expm1_with_terms<T: Real>(x: &ZMat<T>) -> (ZMat<T>, usize) {
    let norm = x.frobenius();
    let half = T::lit(0.5);
    let mut squarings = 0usize;
    let mut scale = T::one();
    while norm * scale > half {
        scale = scale * half;
        squarings += 1;
    }
    let xs = x.scaled_real(scale);
    // Σ_{m≥1} xs^m / m!, stopped once terms drop below unit roundoff of the sum.
    let mut term = xs.clone();
    let mut sum = xs.clone();
    let tol = T::epsilon() * T::lit(0.5);
    let mut m = 1usize;
    loop {
        m += 1;
        term = term.mul(&xs).scaled_real(T::one() / T::from_int(m as i64));
        let tn = term.frobenius();
        sum.axpy(cone(), &term);
        if tn <= tol * sum.frobenius().max(T::min_positive_value()) || m > 60 {
            break;
        }
    }
    for _ in 0..squarings {
        // e^{2Y} − I = 2W + W², W = e^Y − I
        let sq = sum.mul(&sum);
        sum = sum.scaled_real(T::lit(2.0));
        sum.axpy(cone(), &sq);
    }
    (sum, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_block(d: usize, seed: u64, scale: f64) -> CMat<f64> {
        let mut s = seed;
        CMat::from_fn(d, d, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let a = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let b = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            cplx(a * scale, b * scale)
        })
    }

    #[test]
    fn block_product_matches_dense() {
        let d = 3;
        let a = ZMat::from_blocks(
            d,
            Some(rand_block(d, 1, 1.0)),
            None,
            Some(rand_block(d, 2, 1.0)),
            Some(rand_block(d, 3, 1.0)),
        );
        let b = ZMat::from_blocks(
            d,
            Some(rand_block(d, 4, 1.0)),
            Some(rand_block(d, 5, 1.0)),
            None,
            Some(rand_block(d, 6, 1.0)),
        );
        let p = a.mul(&b).to_dense();
        let q = a.to_dense() * b.to_dense();
        assert!((p - q).iter().all(|c| c.norm() < 1e-14));
        let jz = a.j0_left().to_dense();
        let jz2 = ZMat::<f64>::j0(d).to_dense() * a.to_dense();
        assert!((jz - jz2).iter().all(|c| c.norm() < 1e-15));
        let zj = a.j0_right().to_dense();
        let zj2 = a.to_dense() * ZMat::<f64>::j0(d).to_dense();
        assert!((zj - zj2).iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn expm1_matches_series_of_diagonal() {
        let d = 2;
        let mut m = CMat::from_element(d, d, czero());
        m[(0, 0)] = cplx(0.0, 0.7);
        m[(1, 1)] = cplx(-0.2, 0.1);
        let x = ZMat::from_blocks(d, Some(m.clone()), None, None, Some(m));
        let w = expm1(&x);
        let b = w.block(0, 0).unwrap();
        assert!((b[(0, 0)] - (cplx(0.0, 0.7).exp() - 1.0)).norm() < 1e-15);
        assert!((b[(1, 1)] - (cplx(-0.2, 0.1).exp() - 1.0)).norm() < 1e-15);
        assert!(b[(0, 1)].norm() == 0.0);
    }
}
