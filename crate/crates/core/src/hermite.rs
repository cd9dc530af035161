//! Normalized Hermite functions `h_j` (1-based, `T h_j = (2j-1) h_j`) and quadrature.

use crate::error::{KamError, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// 1-based index of a harmonic-oscillator eigenfunction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HermiteIndex(usize);

impl HermiteIndex {
    pub fn new(j: usize) -> Result<Self> {
        if j == 0 {
            return Err(KamError::Domain("Hermite index is 1-based; got 0".into()));
        }
        Ok(Self(j))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Eigenvalue `2j - 1` of `-d²/dx² + x²`.
    pub fn eigenvalue(self) -> usize {
        2 * self.0 - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Gauss–Hermite nodes and weights against `e^{-x²}`.
    GaussHermite,
    /// Equispaced nodes on `[-span, span]` with trapezoid weights against `dx`.
    TruncatedTrapezoid,
}

#[derive(Clone, Debug)]
pub struct QuadratureRule<T> {
    pub kind: RuleKind,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub span: T,
}

/// Precomputed coefficients of the normalized three-term recurrence.
struct Recurrence<T> {
    a: Vec<T>,
    b: Vec<T>,
}

impl<T: Real> Recurrence<T> {
    fn new(jmax: usize) -> Self {
        let mut a = vec![T::zero(); jmax + 1];
        let mut b = vec![T::zero(); jmax + 1];
        for j in 3..=jmax {
            let jm1 = T::from_int(j as i64 - 1);
            a[j] = (T::lit(2.0) / jm1).sqrt();
            b[j] = (T::from_int(j as i64 - 2) / jm1).sqrt();
        }
        Self { a, b }
    }

    /// Runs the recurrence up to `jmax` at `x`, calling `emit(j, h_j(x))` for every `j`.
    fn run(&self, jmax: usize, x: T, mut emit: impl FnMut(usize, T)) {
        let big = T::max_value().sqrt().sqrt();
        let ln_big = big.ln();
        let ln_tiny = tiny::<T>().ln();
        let mut log_scale = -x * x / T::lit(2.0);
        let mut cur = T::FRAC_1_PI().sqrt().sqrt();
        let value = |m: T, s: T| -> T {
            if m == T::zero() {
                return T::zero();
            }
            let lv = m.abs().ln() + s;
            if lv < ln_tiny {
                T::zero()
            } else {
                m.signum() * lv.exp()
            }
        };
        emit(1, value(cur, log_scale));
        if jmax < 2 {
            return;
        }
        let next = T::lit(2.0).sqrt() * x * cur;
        let mut prev = std::mem::replace(&mut cur, next);
        emit(2, value(cur, log_scale));
        for j in 3..=jmax {
            let next = x * self.a[j] * cur - self.b[j] * prev;
            prev = cur;
            cur = next;
            if cur.abs() > big {
                cur = cur / big;
                prev = prev / big;
                log_scale = log_scale + ln_big;
            }
            emit(j, value(cur, log_scale));
        }
    }
}

/// Values below this magnitude are flushed to zero.
fn tiny<T: Real>() -> T {
    T::min_positive_value().max(T::lit(1e-300))
}

/// Evaluates `h_j(x)`, stable for `j` up to at least `10^4`.
pub fn eval_hermite<T: Real>(j: HermiteIndex, x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(KamError::Domain(format!("non-finite abscissa {x}")));
    }
    let rec = Recurrence::new(j.get());
    let mut out = T::zero();
    rec.run(j.get(), x, |jj, v| {
        if jj == j.get() {
            out = v;
        }
    });
    Ok(out)
}

/// Table `h_j(x_i)` for `j = 1..=jmax`, row-major by `j` (`table[(j-1)*xs.len() + i]`).
pub fn hermite_table<T: Real>(jmax: usize, xs: &[T]) -> Vec<T> {
    let rec = Recurrence::new(jmax);
    let m = xs.len();
    let mut table = vec![T::zero(); jmax * m];
    for (i, &x) in xs.iter().enumerate() {
        rec.run(jmax, x, |j, v| table[(j - 1) * m + i] = v);
    }
    table
}

/// Values `h_j(x_i)` for a sorted list of indices, one row per requested index.
pub fn hermite_rows<T: Real>(js: &[usize], xs: &[T]) -> Vec<Vec<T>> {
    let jmax = js.iter().copied().max().unwrap_or(1);
    let rec = Recurrence::new(jmax);
    let mut rows = vec![vec![T::zero(); xs.len()]; js.len()];
    let mut slot = vec![usize::MAX; jmax + 1];
    for (r, &j) in js.iter().enumerate() {
        slot[j] = r;
    }
    for (i, &x) in xs.iter().enumerate() {
        rec.run(jmax, x, |j, v| {
            if slot[j] != usize::MAX {
                rows[slot[j]][i] = v;
            }
        });
    }
    rows
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly against `e^{-x²}`.
    pub fn degree_capacity(&self) -> Option<usize> {
        match self.kind {
            RuleKind::GaussHermite => Some(2 * self.len() - 1),
            RuleKind::TruncatedTrapezoid => None,
        }
    }

    /// Largest `j` for which products `h_j h_l` (`l <= j`) are integrated to ~1e-10.
    pub fn hermite_capacity(&self) -> usize {
        match self.kind {
            RuleKind::GaussHermite => self.len(),
            RuleKind::TruncatedTrapezoid => {
                let h = (self.nodes[1] - self.nodes[0]).as_f64();
                let span = self.span.as_f64();
                let by_step = {
                    let s = ((std::f64::consts::PI / h - 8.0) / 2.0).max(0.0);
                    (s * s + 1.0) / 2.0
                };
                let by_span = {
                    let s = (span - 5.0).max(0.0);
                    (s * s / 2.0 + 1.0) / 2.0
                };
                by_step.min(by_span).floor() as usize
            }
        }
    }

    pub fn require_hermite(&self, j: usize) -> Result<()> {
        let cap = self.hermite_capacity();
        if j > cap {
            return Err(KamError::Capacity {
                requested: j,
                capacity: cap,
            });
        }
        Ok(())
    }

    /// Fails when a polynomial of degree `d` times `e^{-x²}` is not integrated exactly.
    pub fn require_degree(&self, d: usize) -> Result<()> {
        match self.degree_capacity() {
            Some(cap) if d <= cap => Ok(()),
            Some(cap) => Err(KamError::Capacity {
                requested: d,
                capacity: cap,
            }),
            None => Err(KamError::Capacity {
                requested: d,
                capacity: 0,
            }),
        }
    }

    /// `∫ f(x) e^{-x²} dx`.
    pub fn integrate_gaussian<F: Fn(T) -> T>(&self, f: F) -> T {
        match self.kind {
            RuleKind::GaussHermite => self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| w * f(x))
                .sum(),
            RuleKind::TruncatedTrapezoid => self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| w * (-x * x).exp() * f(x))
                .sum(),
        }
    }

    /// Weights for plain `∫ f(x) dx`.
    pub fn dx_weights(&self) -> Vec<T> {
        match self.kind {
            RuleKind::GaussHermite => self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| (w.ln() + x * x).exp())
                .collect(),
            RuleKind::TruncatedTrapezoid => self.weights.clone(),
        }
    }

    /// `∫ f(x) dx`.
    pub fn integrate<F: Fn(T) -> T>(&self, f: F) -> T {
        self.nodes
            .iter()
            .zip(self.dx_weights())
            .map(|(&x, w)| w * f(x))
            .sum()
    }
}

pub fn build_rule<T: Real>(kind: RuleKind, m: usize, span: T) -> Result<QuadratureRule<T>> {
    if m < 2 {
        return Err(KamError::Invalid(format!(
            "quadrature needs at least 2 nodes, got {m}"
        )));
    }
    match kind {
        RuleKind::GaussHermite => gauss_hermite(m),
        RuleKind::TruncatedTrapezoid => {
            if !(span > T::zero()) {
                return Err(KamError::Invalid("trapezoid span must be positive".into()));
            }
            let h = T::lit(2.0) * span / T::from_int(m as i64 - 1);
            let nodes: Vec<T> = (0..m).map(|i| -span + h * T::from_int(i as i64)).collect();
            let mut weights = vec![h; m];
            weights[0] = h / T::lit(2.0);
            weights[m - 1] = h / T::lit(2.0);
            Ok(QuadratureRule {
                kind,
                nodes,
                weights,
                span,
            })
        }
    }
}

/// Trapezoid rule sized for integrals of `h_j h_l` up to `jmax`.
pub fn default_rule<T: Real>(jmax: usize) -> QuadratureRule<T> {
    let lam = (2 * jmax - 1) as f64;
    let span = (2.0 * lam).sqrt() + 10.0;
    let step = 0.02f64.min(std::f64::consts::PI / (4.0 * lam.sqrt() + 16.0));
    let half = (span / step).ceil() as usize;
    build_rule(RuleKind::TruncatedTrapezoid, 2 * half + 1, T::lit(span))
        .expect("valid trapezoid parameters")
}

fn gauss_hermite<T: Real>(m: usize) -> Result<QuadratureRule<T>> {
    let two = T::lit(2.0);
    let pim4 = T::FRAC_1_PI().sqrt().sqrt();
    let mf = T::from_int(m as i64);
    let mut x = vec![T::zero(); m];
    let mut w = vec![T::zero(); m];
    let tol = T::epsilon() * T::lit(16.0);
    let mut z = T::zero();
    for i in 0..m.div_ceil(2) {
        z = match i {
            0 => {
                let s = two * mf + T::one();
                s.sqrt() - T::lit(1.85575) * s.powf(T::lit(-1.0 / 6.0))
            }
            1 => z - T::lit(1.14) * mf.powf(T::lit(0.426)) / z,
            2 => T::lit(1.86) * z - T::lit(0.86) * x[0],
            3 => T::lit(1.91) * z - T::lit(0.91) * x[1],
            _ => two * z - x[i - 2],
        };
        let mut pp = T::one();
        let mut converged = false;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = T::zero();
            for j in 1..=m {
                let p3 = p2;
                p2 = p1;
                let jf = T::from_int(j as i64);
                p1 = z * (two / jf).sqrt() * p2 - ((jf - T::one()) / jf).sqrt() * p3;
            }
            pp = (two * mf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= tol * z.abs().max(T::one()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(KamError::Numeric(format!(
                "Gauss-Hermite node {i} of {m} did not converge"
            )));
        }
        x[i] = z;
        x[m - 1 - i] = -z;
        w[i] = two / (pp * pp);
        w[m - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    Ok(QuadratureRule {
        kind: RuleKind::GaussHermite,
        span: x[m - 1],
        nodes: x,
        weights: w,
    })
}

/// `|||h_j||| = (∫ h_j² / (1 + ln(1+x²))^{2δ₁} dx)^{1/2}`.
pub fn weighted_log_norm<T: Real>(
    j: HermiteIndex,
    delta1: T,
    rule: &QuadratureRule<T>,
) -> Result<T> {
    Ok(weighted_log_norms(&[j.get()], &[delta1], rule)?[0][0])
}

/// Weighted norms for several indices and exponents sharing one pass of the recurrence.
/// Result is indexed `[index][exponent]`.
pub fn weighted_log_norms<T: Real>(
    js: &[usize],
    deltas: &[T],
    rule: &QuadratureRule<T>,
) -> Result<Vec<Vec<T>>> {
    if let Some(d) = deltas.iter().find(|d| !(**d > T::zero())) {
        return Err(KamError::Domain(format!(
            "weight exponent must be positive, got {d}"
        )));
    }
    let mut sorted: Vec<usize> = js.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.first() == Some(&0) {
        return Err(KamError::Domain("Hermite index is 1-based; got 0".into()));
    }
    let jmax = *sorted.last().unwrap_or(&1);
    let wdx = rule.dx_weights();
    let logw: Vec<T> = rule
        .nodes
        .iter()
        .map(|&x| (T::one() + (T::one() + x * x).ln()).ln())
        .collect();
    let rows = hermite_rows(&sorted, &rule.nodes);
    let tol = T::epsilon().sqrt() * T::lit(1e-1);
    let mut by_j = std::collections::HashMap::new();
    for (r, &j) in sorted.iter().enumerate() {
        let h = &rows[r];
        let norm: T = h.iter().zip(&wdx).map(|(&v, &w)| w * v * v).sum();
        let residual = (norm - T::one()).abs();
        if j > rule.hermite_capacity().max(1) || residual > tol {
            return Err(KamError::Accuracy {
                what: format!(
                    "weighted norm of h_{j} (rule capacity {}, jmax {jmax})",
                    rule.hermite_capacity()
                ),
                residual: residual.as_f64(),
            });
        }
        let vals: Vec<T> = deltas
            .iter()
            .map(|&d| {
                let two_d = T::lit(2.0) * d;
                h.iter()
                    .zip(&wdx)
                    .zip(&logw)
                    .map(|((&v, &w), &lw)| w * v * v * (-two_d * lw).exp())
                    .sum::<T>()
                    .sqrt()
            })
            .collect();
        by_j.insert(j, vals);
    }
    Ok(js.iter().map(|j| by_j[j].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_state_value() {
        let v = eval_hermite(HermiteIndex::new(1).unwrap(), 0.0f64).unwrap();
        assert!((v - std::f64::consts::PI.powf(-0.25)).abs() < 1e-15);
    }

    #[test]
    fn zero_index_rejected() {
        assert!(HermiteIndex::new(0).is_err());
        assert!(eval_hermite(HermiteIndex::new(3).unwrap(), f64::NAN).is_err());
    }

    #[test]
    fn far_tail_flushes_to_zero() {
        let v = eval_hermite(HermiteIndex::new(4).unwrap(), 60.0f64).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn large_index_is_finite_and_bounded() {
        let j = HermiteIndex::new(10_000).unwrap();
        for x in [0.0f64, 0.3, 50.0, 140.0, 141.5, 150.0] {
            let v = eval_hermite(j, x).unwrap();
            assert!(v.is_finite() && v.abs() < 1.0, "x={x} v={v}");
        }
    }
}
