//! Partial-fraction coefficients of a sum of independent gamma variables.
//!
//! For scales `η_q` (pairwise distinct) and integer shapes `r_q`, the
//! Laplace transform of the sum factors as `∏_q (1 + η_q s)^(-r_q)` and
//! expands as
//!
//! ```text
//! ∏_q (1 + η_q s)^(-r_q) = Σ_k Σ_{n=1..r_k} Ξ(k, n) · (1 + η_k s)^(-n)
//! ```
//!
//! so the cdf of the sum is a Ξ-weighted mixture of Erlang cdfs. Setting
//! `s = 0` shows that the coefficients always sum to one.

use super::compositions::{binomial, composition_count, COMPOSITION_LIMIT};
use super::real::{DoubleDouble, Real};
use crate::error::{Error, Result};

/// Arguments of one Ξ coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct XiInput {
    /// Pole index (0-based).
    pub k: usize,
    /// Pole order, `1 ≤ n ≤ r_k`.
    pub n: u32,
    pub shapes: Vec<u32>,
    pub scales: Vec<f64>,
}

impl XiInput {
    fn validate(&self) -> Result<()> {
        let l = self.shapes.len();
        if l == 0 || l != self.scales.len() {
            return Err(Error::invalid(
                "shapes and scales must be nonempty and of equal length",
            ));
        }
        if self.k >= l {
            return Err(Error::invalid(format!(
                "pole index {} out of range",
                self.k
            )));
        }
        if self.shapes.contains(&0) {
            return Err(Error::invalid("shapes must be positive"));
        }
        if self.n == 0 || self.n > self.shapes[self.k] {
            return Err(Error::invalid(format!(
                "order {} outside 1..={}",
                self.n, self.shapes[self.k]
            )));
        }
        if self.scales.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::invalid("scales must be positive and finite"));
        }
        check_distinct(&self.scales)
    }
}

pub(crate) fn check_distinct(scales: &[f64]) -> Result<()> {
    for (a, &ea) in scales.iter().enumerate() {
        for (b, &eb) in scales.iter().enumerate().skip(a + 1) {
            if ea == eb {
                return Err(Error::DegenerateScales {
                    first: a,
                    second: b,
                });
            }
        }
    }
    Ok(())
}

/// Evaluates Ξ(k, n) as the nested sum over the chain
/// `r_k = l_0 ≥ l_1 ≥ … ≥ l_{L-2} ≥ l_{L-1} = n`.
///
/// Step `s` of the chain pairs the pole with the `s`-th other index
/// (skipping `k`) and contributes
/// `C(l_{s-1} - l_s + r_q - 1, r_q - 1) · (1/η_k - 1/η_q)^(l_s - l_{s-1} - r_q)`.
/// The whole sum is scaled by `(-1)^(R - r_k) · η_k^n / ∏_h η_h^r_h`.
/// The terms alternate in sign, so the sum is carried in double-double.
pub fn xi(input: &XiInput) -> Result<f64> {
    input.validate()?;
    let (k, n) = (input.k, input.n);
    let shapes = &input.shapes;
    let l = shapes.len();
    let r_k = shapes[k];
    if l == 1 {
        return Ok(if n == r_k { 1.0 } else { 0.0 });
    }
    let chains = composition_count(r_k - n, l - 1);
    if chains > COMPOSITION_LIMIT {
        return Err(Error::ComplexityGuard {
            count: chains,
            limit: COMPOSITION_LIMIT,
        });
    }
    let scales: Vec<DoubleDouble> = input
        .scales
        .iter()
        .map(|&e| DoubleDouble::from_f64(e))
        .collect();
    let others: Vec<usize> = (0..l).filter(|&q| q != k).collect();
    let total: u32 = shapes.iter().sum();

    let mut prefactor = scales[k].powi(n as i32);
    for (h, &r) in shapes.iter().enumerate() {
        prefactor = prefactor / scales[h].powi(r as i32);
    }
    if (total - r_k) % 2 == 1 {
        prefactor = -prefactor;
    }

    let inv_k = DoubleDouble::one() / scales[k];
    let diffs: Vec<DoubleDouble> = (0..l)
        .map(|q| inv_k - DoubleDouble::one() / scales[q])
        .collect();
    let step = |q: usize, upper: u32, lower: u32| -> DoubleDouble {
        let r_q = shapes[q];
        let count = binomial((upper - lower) as u64 + r_q as u64 - 1, r_q as u64 - 1) as f64;
        DoubleDouble::from_f64(count) * diffs[q].powi(lower as i32 - upper as i32 - r_q as i32)
    };

    // Recursive walk over l_1..l_{L-2}; the last step closes the chain at n.
    fn walk<F: Fn(usize, u32, u32) -> DoubleDouble>(
        s: usize,
        upper: u32,
        n: u32,
        others: &[usize],
        step: &F,
    ) -> DoubleDouble {
        let q = others[s - 1];
        if s == others.len() {
            return step(q, upper, n);
        }
        let mut acc = DoubleDouble::zero();
        for lower in n..=upper {
            acc = acc + step(q, upper, lower) * walk(s + 1, lower, n, others, step);
        }
        acc
    }

    Ok((prefactor * walk(1, r_k, n, &others, &step)).to_f64())
}

/// Ξ coefficients for every pole and order, plus their magnitudes.
#[derive(Debug, Clone)]
pub(crate) struct XiTable<T> {
    /// `coeffs[k][n-1]` is Ξ(k, n).
    pub coeffs: Vec<Vec<T>>,
    /// Upper bound on the magnitude of each coefficient's summands, used for
    /// rounding-error estimates.
    pub magnitudes: Vec<Vec<f64>>,
}

/// Computes all coefficients at once from the dimensionless form
///
/// ```text
/// Ξ(k, n) = ∏_{q≠k} (1 - η_q/η_k)^(-r_q)
///           · [x^(r_k - n)] ∏_{q≠k} Σ_j C(r_q + j - 1, j) (1 - η_k/η_q)^(-j) x^j
/// ```
///
/// which is the same chain sum as [`xi`] with the powers of `η_k` folded
/// into each factor.
pub(crate) fn xi_table<T: Real>(scales: &[f64], shapes: &[u32]) -> XiTable<T> {
    let l = scales.len();
    let mut coeffs = Vec::with_capacity(l);
    let mut magnitudes = Vec::with_capacity(l);
    let eta: Vec<T> = scales.iter().map(|&e| T::from_f64(e)).collect();
    for k in 0..l {
        let r_k = shapes[k] as usize;
        let mut base = T::one();
        for q in (0..l).filter(|&q| q != k) {
            let f = T::one() - eta[q] / eta[k];
            base = base * f.powi(shapes[q] as i32);
        }
        let base = T::one() / base;
        let base_abs = base.abs().to_f64();

        let mut poly = vec![T::zero(); r_k];
        let mut poly_abs = vec![0.0f64; r_k];
        poly[0] = T::one();
        poly_abs[0] = 1.0;
        if r_k > 1 {
            let mut series = vec![T::zero(); r_k];
            let mut series_abs = vec![0.0f64; r_k];
            for q in (0..l).filter(|&q| q != k) {
                let w = T::one() / (T::one() - eta[k] / eta[q]);
                let w_abs = w.abs().to_f64();
                let r_q = shapes[q] as u64;
                let (mut pw, mut pw_abs) = (T::one(), 1.0f64);
                for j in 0..r_k {
                    let c = binomial(r_q + j as u64 - 1, j as u64) as f64;
                    series[j] = T::from_f64(c) * pw;
                    series_abs[j] = c * pw_abs;
                    pw = pw * w;
                    pw_abs *= w_abs;
                }
                for deg in (0..r_k).rev() {
                    let mut acc = T::zero();
                    let mut acc_abs = 0.0;
                    for j in 0..=deg {
                        acc = acc + poly[deg - j] * series[j];
                        acc_abs += poly_abs[deg - j] * series_abs[j];
                    }
                    poly[deg] = acc;
                    poly_abs[deg] = acc_abs;
                }
            }
        }
        coeffs.push((1..=r_k).map(|n| base * poly[r_k - n]).collect());
        magnitudes.push((1..=r_k).map(|n| base_abs * poly_abs[r_k - n]).collect());
    }
    XiTable { coeffs, magnitudes }
}
