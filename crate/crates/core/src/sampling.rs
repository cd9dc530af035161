//! Random test instances.

use crate::fourier::{modes, Mode};
use crate::quadratic::{Channel, QuadraticPart};
use crate::scalar::{cplx, Real};
use crate::zeta::CMat;
use rand::Rng;

fn first_nonzero_positive(k: &Mode) -> bool {
    k.0.iter().find(|&&c| c != 0).map_or(false, |&c| c > 0)
}

/// Random real quadratic form with entries decaying like `e^{−|k|}(1 + |j − l|)^{−2}(1 + ln j)^{−β}(1 + ln l)^{−β}`.
pub fn random_real_part<T: Real, R: Rng>(
    rng: &mut R,
    n: usize,
    k_max: u32,
    dim: usize,
    beta: f64,
    pair_channels: bool,
) -> QuadraticPart<T> {
    let mut p = QuadraticPart::zero(n, k_max, dim);
    let env = |k: &Mode, j: usize, l: usize| {
        let w = |i: usize| (1.0 + ((i + 1) as f64).ln()).powf(-beta);
        (-(k.norm() as f64)).exp() * w(j) * w(l) / (1.0 + (j as f64 - l as f64).abs()).powi(2)
    };
    let draw = |rng: &mut R, k: &Mode, j: usize, l: usize| {
        let e = env(k, j, l);
        cplx(
            T::lit(rng.gen_range(-1.0..1.0) * e),
            T::lit(rng.gen_range(-1.0..1.0) * e),
        )
    };
    for k in modes(n, k_max) {
        if !(k.is_zero() || first_nonzero_positive(&k)) {
            continue;
        }
        let mut a = CMat::<T>::from_element(dim, dim, cplx(T::zero(), T::zero()));
        for j in 0..dim {
            for l in 0..dim {
                a[(j, l)] = draw(rng, &k, j, l);
            }
        }
        if k.is_zero() {
            let h = (&a + a.transpose().map(|x| x.conj())).map(|x| x * T::lit(0.5));
            p.channel_mut(Channel::ZbarZ).insert(k.clone(), h);
        } else {
            p.channel_mut(Channel::ZbarZ)
                .insert(k.neg(), a.transpose().map(|x| x.conj()));
            p.channel_mut(Channel::ZbarZ).insert(k.clone(), a);
        }
        if pair_channels {
            let mut b = CMat::<T>::from_element(dim, dim, cplx(T::zero(), T::zero()));
            for j in 0..dim {
                for l in j..dim {
                    let v = draw(rng, &k, j, l);
                    b[(j, l)] = v;
                    b[(l, j)] = v;
                }
            }
            if k.is_zero() {
                p.channel_mut(Channel::ZbarZbar)
                    .insert(k.clone(), b.map(|x| x.conj()));
                p.channel_mut(Channel::ZZ).insert(k.clone(), b);
            } else {
                let mut c2 = CMat::<T>::from_element(dim, dim, cplx(T::zero(), T::zero()));
                for j in 0..dim {
                    for l in j..dim {
                        let v = draw(rng, &k, j, l);
                        c2[(j, l)] = v;
                        c2[(l, j)] = v;
                    }
                }
                p.channel_mut(Channel::ZbarZbar)
                    .insert(k.neg(), b.map(|x| x.conj()));
                p.channel_mut(Channel::ZZ).insert(k.clone(), b);
                p.channel_mut(Channel::ZZ)
                    .insert(k.neg(), c2.map(|x| x.conj()));
                p.channel_mut(Channel::ZbarZbar).insert(k.clone(), c2);
            }
        }
    }
    p
}
