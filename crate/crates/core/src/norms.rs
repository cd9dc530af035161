//! Weighted decay norms of quadratic forms and mode-pair operators.
//!
//! Every supremum over the complex strip is replaced by the Fourier majorant
//! `Σ_k |·| e^{|k|s}`, which bounds it from above and is exact for a single mode.

use crate::error::{KamError, Result};
use crate::quadratic::{QuadraticPart, Spectrum};
use crate::scalar::{log_weight, Real};
use crate::zeta::ZMat;
use serde::Serialize;

/// Logarithmic weight profile `(1 + ln j)^β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayProfile<T> {
    pub beta: T,
}

impl<T: Real> DecayProfile<T> {
    pub fn new(beta: T) -> Result<Self> {
        if !(beta > T::zero()) {
            return Err(KamError::Domain(format!(
                "decay exponent must be positive, got {beta}"
            )));
        }
        Ok(Self { beta })
    }

    pub fn weight(&self, j: usize) -> T {
        log_weight(j, self.beta)
    }

    pub fn weights(&self, jmax: usize) -> Vec<T> {
        (1..=jmax).map(|j| self.weight(j)).collect()
    }
}

/// Which defining condition attained the maximum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `‖P‖/r²`
    Value,
    /// `(1 + ln j)^β ‖∂P/∂w_j‖ / r`
    FirstDerivative,
    /// `(1 + ln j)^β (1 + ln l)^β ‖∂²P/∂w_j∂w_l‖`
    SecondDerivative,
}

/// Location of the dominating term. `row`/`col` index `ζ = (z, z̄)` from 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormWitness {
    pub condition: Condition,
    pub row: usize,
    pub col: usize,
    /// 1-based mode indices of `row` and `col`.
    pub j: usize,
    pub l: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub gamma: f64,
    pub gamma_plus: Option<f64>,
    pub lipschitz: Option<f64>,
    /// Values of the value, first-derivative and second-derivative conditions.
    pub conditions: [f64; 3],
    pub active: Vec<Condition>,
    pub witness: Option<NormWitness>,
}

impl NormReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

struct Majorants<T> {
    dim: usize,
    /// `Σ_k e^{|k|s} |S_k[a,b]|`, row-major over `2J × 2J`.
    entries: Vec<T>,
    /// `Σ_k e^{|k|s} ‖row_a(S_k) Λ⁻¹‖₂`
    rows: Vec<T>,
    /// `Σ_k e^{|k|s} ‖Λ⁻¹ S_k Λ⁻¹‖_F`
    frob: T,
}

/// Sobolev weight `j^{p/2}` on `ℓ^{2,p}` with `p = 2`.
fn lambda<T: Real>(j: usize) -> T {
    T::from_int(j as i64)
}

fn majorants<T: Real>(spec: &Spectrum<T>, dim: usize, s: T) -> Majorants<T> {
    let n2 = 2 * dim;
    let mut entries = vec![T::zero(); n2 * n2];
    let mut rows = vec![T::zero(); n2];
    let mut frob = T::zero();
    let inv: Vec<T> = (0..n2)
        .map(|a| T::one() / lambda::<T>(a % dim + 1))
        .collect();
    for (k, z) in spec {
        let e = (T::from_int(k.norm() as i64) * s).exp();
        let mut row_sq = vec![T::zero(); n2];
        let mut f = T::zero();
        for br in 0..2 {
            for bc in 0..2 {
                let Some(m) = z.block(br, bc) else { continue };
                for i in 0..dim {
                    let a = br * dim + i;
                    for j in 0..dim {
                        let b = bc * dim + j;
                        let v = m[(i, j)].norm();
                        entries[a * n2 + b] = entries[a * n2 + b] + e * v;
                        let w = v * inv[b];
                        row_sq[a] = row_sq[a] + w * w;
                        let ww = w * inv[a];
                        f = f + ww * ww;
                    }
                }
            }
        }
        for a in 0..n2 {
            rows[a] = rows[a] + e * row_sq[a].sqrt();
        }
        frob = frob + e * f.sqrt();
    }
    Majorants {
        dim,
        entries,
        rows,
        frob,
    }
}

fn report_from<T: Real>(
    m: &Majorants<T>,
    profile: &DecayProfile<T>,
    r: T,
    plus: bool,
) -> (T, [T; 3], Option<NormWitness>) {
    // every condition is homogeneous of degree 0 in r for y-independent quadratic forms
    debug_assert!(r > T::zero());
    let dim = m.dim;
    let n2 = 2 * dim;
    let w = profile.weights(dim);
    // |Q(ζ)| ≤ ½ ‖Λ⁻¹SΛ⁻¹‖ ‖ζ‖²_p on the ball ‖ζ‖_p ≤ r
    let c_value = T::lit(0.5) * m.frob;
    let mut c_first = T::zero();
    let mut first_at = 0;
    for a in 0..n2 {
        let j = a % dim + 1;
        let mut v = w[j - 1] * m.rows[a];
        if plus {
            v = v * T::from_int(j as i64);
        }
        if v > c_first {
            c_first = v;
            first_at = a;
        }
    }
    let mut c_second = T::zero();
    let mut second_at = (0, 0);
    for a in 0..n2 {
        for b in 0..n2 {
            let (j, l) = (a % dim + 1, b % dim + 1);
            let mut v = w[j - 1] * w[l - 1] * m.entries[a * n2 + b];
            if plus {
                v = v * T::from_int(1 + (j as i64 - l as i64).abs());
            }
            if v > c_second {
                c_second = v;
                second_at = (a, b);
            }
        }
    }
    let conds = [c_value, c_first, c_second];
    let gamma = conds.iter().fold(T::zero(), |s, &c| s.max(c));
    let witness = if gamma == T::zero() {
        None
    } else if gamma == c_second {
        Some(NormWitness {
            condition: Condition::SecondDerivative,
            row: second_at.0,
            col: second_at.1,
            j: second_at.0 % dim + 1,
            l: second_at.1 % dim + 1,
        })
    } else if gamma == c_first {
        Some(NormWitness {
            condition: Condition::FirstDerivative,
            row: first_at,
            col: first_at,
            j: first_at % dim + 1,
            l: first_at % dim + 1,
        })
    } else {
        Some(NormWitness {
            condition: Condition::Value,
            row: 0,
            col: 0,
            j: 1,
            l: 1,
        })
    };
    (gamma, conds, witness)
}

fn build_report<T: Real>(
    p: &QuadraticPart<T>,
    profile: &DecayProfile<T>,
    r: T,
    s: T,
) -> NormReport {
    let m = majorants(&p.s_spectrum(), p.j_max(), s);
    let (g, conds, witness) = report_from(&m, profile, r, false);
    let (gp, _, _) = report_from(&m, profile, r, true);
    NormReport {
        gamma: g.as_f64(),
        gamma_plus: Some(gp.as_f64()),
        lipschitz: None,
        conditions: conds.map(|c| c.as_f64()),
        // the θ-, x- and y-component conditions vanish for y-independent quadratic forms
        active: vec![
            Condition::Value,
            Condition::FirstDerivative,
            Condition::SecondDerivative,
        ],
        witness,
    }
}

/// `⟨P⟩` majorant of a quadratic form on `D(s, r)`.
pub fn gamma_norm<T: Real>(p: &QuadraticPart<T>, profile: &DecayProfile<T>, r: T, s: T) -> T {
    let m = majorants(&p.s_spectrum(), p.j_max(), s);
    report_from(&m, profile, r, false).0
}

/// `⟨F⟩⁺`: as [`gamma_norm`] with the extra factors `j` and `1 + |j − l|`.
pub fn gamma_plus_norm<T: Real>(p: &QuadraticPart<T>, profile: &DecayProfile<T>, r: T, s: T) -> T {
    let m = majorants(&p.s_spectrum(), p.j_max(), s);
    report_from(&m, profile, r, true).0
}

/// Both norms with the per-condition values and the dominating entry.
pub fn norm_report<T: Real>(
    p: &QuadraticPart<T>,
    profile: &DecayProfile<T>,
    r: T,
    s: T,
) -> NormReport {
    build_report(p, profile, r, s)
}

/// `[A]_β = max_{i,j} ‖A_{ij}‖_HS (1 + ln i)^β (1 + ln j)^β (1 + |i − j|)` where
/// `A_{ij}` is the 2×2 block coupling `(z_i, z̄_i)` with `(z_j, z̄_j)`.
pub fn matrix_beta_norm<T: Real>(a: &ZMat<T>, profile: &DecayProfile<T>) -> T {
    let d = a.dim;
    let w = profile.weights(d);
    let mut hs = vec![T::zero(); d * d];
    for br in 0..2 {
        for bc in 0..2 {
            if let Some(m) = a.block(br, bc) {
                for i in 0..d {
                    for j in 0..d {
                        hs[i * d + j] = hs[i * d + j] + m[(i, j)].norm_sqr();
                    }
                }
            }
        }
    }
    let mut best = T::zero();
    for i in 0..d {
        for j in 0..d {
            let v =
                hs[i * d + j].sqrt() * w[i] * w[j] * T::from_int(1 + (i as i64 - j as i64).abs());
            best = best.max(v);
        }
    }
    best
}

/// `max_{ξ≠η} dist(v(ξ), v(η)) / |ξ − η|` over a finite sample family.
pub fn lipschitz_seminorm<T: Real, V>(
    values: &[(Vec<T>, V)],
    dist: impl Fn(&V, &V) -> T,
) -> Result<T> {
    if values.len() < 2 {
        return Err(KamError::Invalid(
            "Lipschitz seminorm needs at least two samples".into(),
        ));
    }
    let mut best = T::zero();
    for (i, (xi, vi)) in values.iter().enumerate() {
        for (xj, vj) in &values[i + 1..] {
            let gap = xi
                .iter()
                .zip(xj)
                .fold(T::zero(), |s, (a, b)| s + (*a - *b) * (*a - *b))
                .sqrt();
            if gap == T::zero() {
                return Err(KamError::Invalid(format!(
                    "duplicate parameter sample {xi:?}"
                )));
            }
            best = best.max(dist(vi, vj) / gap);
        }
    }
    Ok(best)
}

/// `Σ_{l=1}^{L} 1 / ((1 + |j − l|)(1 + ln l)^β)`.
pub fn off_diagonal_log_sum(j: usize, upto: usize, beta: f64) -> f64 {
    (1..=upto)
        .map(|l| 1.0 / ((1.0 + (j as f64 - l as f64).abs()) * (1.0 + (l as f64).ln()).powf(beta)))
        .sum()
}

/// `Σ_{l=1}^{L} (1 + j)² / (l^p (1 + |j − l|)² (1 + ln l)^{2β})`.
pub fn sobolev_log_sum(j: usize, upto: usize, p: f64, beta: f64) -> f64 {
    let jj = (1.0 + j as f64).powi(2);
    (1..=upto)
        .map(|l| {
            let lf = l as f64;
            let gap = 1.0 + (j as f64 - lf).abs();
            jj / (lf.powf(p) * gap * gap * (1.0 + lf.ln()).powf(2.0 * beta))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::Mode;
    use crate::quadratic::{Channel, FourierBlockMatrix};
    use crate::scalar::cplx;
    use crate::zeta::CMat;

    fn single(j: usize, l: usize, c: f64, dim: usize) -> QuadraticPart<f64> {
        let mut a = FourierBlockMatrix::new(1, 2, dim, Channel::ZbarZ);
        let mut m = CMat::from_element(dim, dim, cplx(0.0, 0.0));
        m[(j, l)] = cplx(c, 0.0);
        a.insert(Mode::zero(1), m);
        QuadraticPart::from_zbar_z(a)
    }

    #[test]
    fn single_entry_norms() {
        let p = DecayProfile::new(2.0).unwrap();
        let q = single(0, 0, 0.3, 4);
        assert!((gamma_norm(&q, &p, 1.0, 0.5) - 0.3).abs() < 1e-15);
        let q = single(0, 2, 0.3, 4);
        let want = 0.3 * 3.0 * p.weight(3);
        assert!((gamma_plus_norm(&q, &p, 1.0, 0.0) - want).abs() < 1e-12);
        assert_eq!(
            gamma_norm(&QuadraticPart::<f64>::zero(1, 2, 4), &p, 1.0, 1.0),
            0.0
        );
    }

    #[test]
    fn beta_norm_of_identity_and_single_block() {
        let p = DecayProfile::<f64>::new(1.5).unwrap();
        let id = ZMat::<f64>::identity(5);
        let want = 2f64.sqrt() * p.weight(5).powi(2);
        assert!((matrix_beta_norm(&id, &p) - want).abs() < 1e-12);
        let mut m = CMat::from_element(3, 3, cplx(0.0, 0.0));
        m[(0, 1)] = cplx(1.0, 0.0);
        let z = ZMat::from_blocks(3, Some(m), None, None, None);
        assert!((matrix_beta_norm(&z, &p) - 2.0 * p.weight(2)).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_rejects_duplicates() {
        let v = vec![(vec![0.1], 1.0), (vec![0.1], 2.0)];
        assert!(lipschitz_seminorm(&v, |a: &f64, b: &f64| (a - b).abs()).is_err());
        let v = vec![(vec![0.0], 0.0), (vec![0.5], 1.5), (vec![1.0], 3.0)];
        assert!(
            (lipschitz_seminorm(&v, |a: &f64, b: &f64| (a - b).abs()).unwrap() - 3.0).abs() < 1e-12
        );
    }
}
