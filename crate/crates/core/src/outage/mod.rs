//! Closed-form conditional outage probability.
//!
//! With unit-mean gamma power gains `g` of integer shape `m`, the decision
//! statistic at a location is
//!
//! ```text
//! Z = Σ_{k∈G} g_k Ω_k / β  -  Σ_{i∉G} g_i Ω_i
//! ```
//!
//! and the outage probability is `ε = P[Z ≤ 1/Γ]`. The combined signal is a
//! sum of gamma variables with scales `η_k = Ω_k / (β m_k)`; expanding its
//! transform in partial fractions (see [`xi`]) turns the cdf into
//!
//! ```text
//! ε = Σ_k Σ_{n≤r_k} Ξ(k,n) · [1 - e^{-c_k z} Σ_{μ<n} Σ_{t≤μ} c_k^μ z^{μ-t}/(μ-t)! · E_t(c_k)]
//! ```
//!
//! with `c_k = 1/η_k`, `z = 1/Γ` and `E_t` the sum over weak compositions
//! `ℓ` of `t` of `∏_i C(ℓ_i+m_i-1, ℓ_i) θ_i^ℓ_i (c θ_i + 1)^-(m_i+ℓ_i)`,
//! `θ_i = Ω_i/m_i`. Because `Σ Ξ = 1` the bracket's constant part is folded
//! out and the kernel evaluates `1 - Σ Ξ·T`, so poles whose tail term `T` has
//! underflowed drop out instead of cancelling against each other.
//!
//! The coefficients alternate in sign and grow without bound as scales
//! cluster. Every evaluation carries a rounding-error bound; when the double
//! precision bound exceeds [`KernelOptions::tolerance`] the evaluation is
//! repeated in double-double arithmetic. If that bound is still too large the
//! probability comes from characteristic-function inversion instead (see
//! [`outage_by_inversion`]).

mod compositions;
mod inversion;
mod real;
mod xi;

pub use compositions::{
    binomial, composition_count, weak_compositions, WeakCompositions, COMPOSITION_LIMIT,
};
pub use inversion::outage_by_inversion;
pub use real::{CompensatedSum, DoubleDouble, Real};
pub use xi::{xi, XiInput};

use crate::error::{Error, Result};
use xi::xi_table;

/// Scales closer than this (relative) are treated as numerically coincident.
pub const NEAR_EQUAL_SCALES: f64 = 1e-12;
/// Relative separation applied to numerically coincident scales.
pub const SCALE_PERTURBATION: f64 = 1e-9;
/// Pre-clamp slack outside [0, 1] tolerated before reporting instability.
pub const RANGE_SLACK: f64 = 1e-6;

/// One faded link: normalized power and integer Nakagami shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub omega: f64,
    pub shape: u32,
}

impl Branch {
    pub const fn new(omega: f64, shape: u32) -> Self {
        Self { omega, shape }
    }
}

/// Outage query at one location.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageProblem {
    pub combining: Vec<Branch>,
    pub interfering: Vec<Branch>,
    /// SINR threshold (linear).
    pub beta: f64,
    /// Unit-distance SNR (linear); `f64::INFINITY` is the noise-free limit.
    pub gamma: f64,
}

impl OutageProblem {
    pub fn validate(&self) -> Result<()> {
        if self.combining.is_empty() {
            return Err(Error::invalid("combining set is empty"));
        }
        for b in self.combining.iter().chain(&self.interfering) {
            if !(b.omega > 0.0) || !b.omega.is_finite() {
                return Err(Error::invalid(format!(
                    "normalized power must be positive, got {}",
                    b.omega
                )));
            }
            if b.shape == 0 {
                return Err(Error::invalid("Nakagami shape must be a positive integer"));
            }
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invalid(format!(
                "Gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Noise term `1/Γ`.
    pub fn noise(&self) -> f64 {
        1.0 / self.gamma
    }
}

/// A gamma pole of the combined signal: scale η and total shape r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub scale: f64,
    pub order: u32,
}

/// Groups combining branches by scale `η = Ω/(βm)`.
///
/// Exactly equal scales merge by adding shapes (gamma variables with a
/// common scale add in shape). Scales that differ by less than
/// [`NEAR_EQUAL_SCALES`] relative are pushed apart by
/// [`SCALE_PERTURBATION`]. Otherwise the input order is preserved.
pub fn merge_equal_scales(combining: &[Branch], beta: f64) -> Vec<Pole> {
    let mut poles: Vec<Pole> = Vec::with_capacity(combining.len());
    for b in combining {
        let scale = b.omega / (beta * b.shape as f64);
        match poles.iter_mut().find(|p| p.scale == scale) {
            Some(p) => p.order += b.shape,
            None => poles.push(Pole {
                scale,
                order: b.shape,
            }),
        }
    }
    let mut order: Vec<usize> = (0..poles.len()).collect();
    order.sort_by(|&a, &b| poles[a].scale.total_cmp(&poles[b].scale));
    for w in 1..order.len() {
        let prev = poles[order[w - 1]].scale;
        let cur = &mut poles[order[w]].scale;
        if (*cur - prev) / prev < NEAR_EQUAL_SCALES {
            *cur = prev * (1.0 + SCALE_PERTURBATION);
        }
    }
    poles
}

/// Arithmetic used for an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Precision {
    Double,
    DoubleDouble,
    /// Numerical inversion of the characteristic function.
    Inversion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    /// Absolute error target; exceeded bounds trigger the double-double path.
    pub tolerance: f64,
    /// Allow the double-double fallback.
    pub extended_precision: bool,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            extended_precision: true,
        }
    }
}

/// Result of one kernel evaluation with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEvaluation {
    /// Outage probability, clamped to [0, 1].
    pub probability: f64,
    /// Value before clamping.
    pub raw: f64,
    /// Estimated absolute rounding error of `raw`.
    pub error_bound: f64,
    pub precision: Precision,
}

impl OutageEvaluation {
    /// The bound still exceeds the tolerance after every available fallback.
    pub fn is_imprecise(&self, tolerance: f64) -> bool {
        self.error_bound > tolerance
    }

    pub fn was_clamped(&self) -> bool {
        self.raw < 0.0 || self.raw > 1.0
    }
}

/// Conditional outage probability `P[SINR ≤ β | Ω]`.
pub fn conditional_outage(problem: &OutageProblem) -> Result<f64> {
    conditional_outage_with(problem, &KernelOptions::default()).map(|e| e.probability)
}

pub fn conditional_outage_with(
    problem: &OutageProblem,
    options: &KernelOptions,
) -> Result<OutageEvaluation> {
    problem.validate()?;
    let poles = merge_equal_scales(&problem.combining, problem.beta);
    let z = problem.noise();

    let mut eval = evaluate::<f64>(&poles, &problem.interfering, z);
    if options.extended_precision && !(eval.error_bound <= options.tolerance) {
        eval = evaluate::<DoubleDouble>(&poles, &problem.interfering, z);
    }
    if options.extended_precision && !(eval.error_bound <= options.tolerance) {
        if let Ok(p) = outage_by_inversion(problem, options.tolerance) {
            return Ok(OutageEvaluation {
                probability: p,
                raw: p,
                error_bound: options.tolerance,
                precision: Precision::Inversion,
            });
        }
    }
    if !eval.raw.is_finite() || eval.raw < -RANGE_SLACK || eval.raw > 1.0 + RANGE_SLACK {
        return Err(Error::NumericalInstability { value: eval.raw });
    }
    eval.probability = eval.raw.clamp(0.0, 1.0);
    Ok(eval)
}

fn inverse_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut f = 1.0f64;
    out.push(1.0);
    for i in 1..=n {
        f *= i as f64;
        out.push(1.0 / f);
    }
    out
}

/// Evaluates `1 - Σ Ξ·T` in arithmetic `T`.
fn evaluate<T: Real>(poles: &[Pole], interfering: &[Branch], z: f64) -> OutageEvaluation {
    let table = xi_table::<T>(
        &poles.iter().map(|p| p.scale).collect::<Vec<_>>(),
        &poles.iter().map(|p| p.order).collect::<Vec<_>>(),
    );
    let max_order = poles.iter().map(|p| p.order as usize).max().unwrap_or(1);
    let inv_fact = inverse_factorials(max_order);
    let z_t = T::from_f64(z);
    let theta: Vec<T> = interfering
        .iter()
        .map(|b| T::from_f64(b.omega / b.shape as f64))
        .collect();

    // Interference factor (c θ + 1)^-m for every pole at once.
    let rates: Vec<T> = poles
        .iter()
        .map(|p| T::one() / T::from_f64(p.scale))
        .collect();
    let mut denom = vec![T::one(); poles.len()];
    for (b, &th) in interfering.iter().zip(&theta) {
        if b.shape == 1 {
            for (d, &c) in denom.iter_mut().zip(&rates) {
                *d = *d * (c * th + T::one());
            }
        } else {
            for (d, &c) in denom.iter_mut().zip(&rates) {
                *d = *d * (c * th + T::one()).powi(b.shape as i32);
            }
        }
    }

    let mut total = CompensatedSum::<T>::default();
    let mut magnitude = 0.0f64;
    for (k, pole) in poles.iter().enumerate() {
        let r = pole.order as usize;
        let c = rates[k];
        let base = (-(c * z_t)).exp() / denom[k];
        if base.to_f64() == 0.0 {
            continue;
        }
        // E_t / P0 for t < r: coefficients of ∏_i Σ_ℓ C(ℓ+m_i-1, ℓ) q_i^ℓ x^ℓ.
        let mut moments = vec![T::zero(); r];
        moments[0] = T::one();
        if r > 1 {
            for (b, &th) in interfering.iter().zip(&theta) {
                let q = th / (c * th + T::one());
                let mut series = vec![T::zero(); r];
                let mut pw = T::one();
                for (l, s) in series.iter_mut().enumerate() {
                    *s = T::from_f64(binomial(b.shape as u64 + l as u64 - 1, l as u64) as f64) * pw;
                    pw = pw * q;
                }
                for deg in (1..r).rev() {
                    let mut acc = moments[deg];
                    for l in 1..=deg {
                        acc = acc + moments[deg - l] * series[l];
                    }
                    moments[deg] = acc;
                }
            }
        }
        // inner[μ] = Σ_{t≤μ} c^μ z^{μ-t}/(μ-t)! E_t ; T(k,n) = base · Σ_{μ<n} inner[μ]
        let mut tail = T::zero();
        let mut c_pow = T::one();
        for n in 1..=r {
            let mu = n - 1;
            let mut inner = T::zero();
            let mut z_pow = T::one();
            for gap in 0..=mu {
                inner = inner + z_pow * T::from_f64(inv_fact[gap]) * moments[mu - gap];
                z_pow = z_pow * z_t;
            }
            tail = tail + c_pow * inner;
            c_pow = c_pow * c;
            let t_kn = base * tail;
            let xi = table.coeffs[k][n - 1];
            let term = xi * t_kn;
            if term.is_finite() {
                total.add(term);
            } else {
                total.add(T::from_f64(f64::NAN));
            }
            magnitude += table.magnitudes[k][n - 1] * t_kn.to_f64().abs();
        }
    }
    let raw = (T::one() - total.value()).to_f64();
    let ops = (poles.len() + interfering.len() + 8) as f64;
    let error_bound = 4.0 * ops * T::UNIT_ROUNDOFF * (magnitude + 1.0);
    OutageEvaluation {
        probability: raw.clamp(0.0, 1.0),
        raw,
        error_bound: if raw.is_finite() {
            error_bound
        } else {
            f64::INFINITY
        },
        precision: if T::UNIT_ROUNDOFF < f64::EPSILON / 4.0 {
            Precision::DoubleDouble
        } else {
            Precision::Double
        },
    }
}

/// Literal term-by-term evaluation of the closed form: Ξ from the nested
/// chain sum and the interference sum enumerated over weak compositions.
/// Exponentially slower than [`conditional_outage`]; intended for checking
/// the fast path on small instances.
pub fn conditional_outage_by_enumeration(problem: &OutageProblem) -> Result<f64> {
    problem.validate()?;
    let poles = merge_equal_scales(&problem.combining, problem.beta);
    let scales: Vec<f64> = poles.iter().map(|p| p.scale).collect();
    let shapes: Vec<u32> = poles.iter().map(|p| p.order).collect();
    let z = problem.noise();
    let theta: Vec<f64> = problem
        .interfering
        .iter()
        .map(|b| b.omega / b.shape as f64)
        .collect();
    let inv_fact = inverse_factorials(shapes.iter().copied().max().unwrap_or(1) as usize);

    let mut total = CompensatedSum::<f64>::default();
    for (k, pole) in poles.iter().enumerate() {
        let c = 1.0 / pole.scale;
        for n in 1..=pole.order {
            let coeff = xi(&XiInput {
                k,
                n,
                shapes: shapes.clone(),
                scales: scales.clone(),
            })?;
            let mut bracket = 0.0;
            for mu in 0..n as usize {
                for t in 0..=mu {
                    let mut moment = 0.0;
                    for ell in weak_compositions(t as u32, theta.len())? {
                        let mut prod = 1.0;
                        for ((b, &th), &l) in problem.interfering.iter().zip(&theta).zip(&ell) {
                            let m = b.shape as u64;
                            prod *= binomial(l as u64 + m - 1, l as u64) as f64
                                * th.powi(l as i32)
                                * (c * th + 1.0).powi(-((m + l as u64) as i32));
                        }
                        moment += prod;
                    }
                    bracket +=
                        c.powi(mu as i32) * z.powi((mu - t) as i32) * inv_fact[mu - t] * moment;
                }
            }
            total.add(coeff * (1.0 - (-c * z).exp() * bracket));
        }
    }
    Ok(total.value().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(
        combining: &[(f64, u32)],
        interfering: &[(f64, u32)],
        beta: f64,
        gamma: f64,
    ) -> OutageProblem {
        OutageProblem {
            combining: combining.iter().map(|&(o, m)| Branch::new(o, m)).collect(),
            interfering: interfering
                .iter()
                .map(|&(o, m)| Branch::new(o, m))
                .collect(),
            beta,
            gamma,
        }
    }

    #[test]
    fn rayleigh_single_source() {
        let eps = conditional_outage(&problem(&[(1.0, 1)], &[], 1.0, 10.0)).unwrap();
        assert!((eps - 0.095_162_581_964_040_43).abs() < 1e-12);
    }

    #[test]
    fn noise_free_without_interference_never_fails() {
        let eps =
            conditional_outage(&problem(&[(1.0, 2), (0.3, 1)], &[], 2.0, f64::INFINITY)).unwrap();
        assert_eq!(eps, 0.0);
    }

    #[test]
    fn rayleigh_source_plus_interferer() {
        let eps = conditional_outage(&problem(&[(1.0, 1)], &[(1.0, 1)], 1.0, 10.0)).unwrap();
        assert!((eps - 0.547_581_290_982_020_2).abs() < 1e-12);
    }

    #[test]
    fn merge_examples() {
        let merged = merge_equal_scales(&[Branch::new(1.0, 1), Branch::new(2.0, 2)], 1.0);
        assert_eq!(
            merged,
            vec![Pole {
                scale: 1.0,
                order: 3
            }]
        );
        let distinct = merge_equal_scales(
            &[
                Branch::new(3.0, 1),
                Branch::new(1.0, 1),
                Branch::new(2.0, 3),
            ],
            2.0,
        );
        assert_eq!(
            distinct,
            vec![
                Pole {
                    scale: 1.5,
                    order: 1
                },
                Pole {
                    scale: 0.5,
                    order: 1
                },
                Pole {
                    scale: 1.0 / 3.0,
                    order: 3
                },
            ]
        );
        let near = merge_equal_scales(&[Branch::new(1.0, 1), Branch::new(1.0 + 1e-14, 1)], 1.0);
        assert_eq!(near.len(), 2);
        assert!(((near[1].scale - near[0].scale) / near[0].scale - 1e-9).abs() < 1e-12);
    }

    #[test]
    fn fast_path_matches_enumeration() {
        let p = problem(
            &[(1.3, 3), (0.2, 1), (0.7, 2)],
            &[(0.4, 2), (0.05, 1), (0.9, 3)],
            0.8,
            5.0,
        );
        let fast = conditional_outage(&p).unwrap();
        let slow = conditional_outage_by_enumeration(&p).unwrap();
        assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn clustered_scales_fall_back_to_double_double() {
        let combining: Vec<(f64, u32)> = (0..12).map(|i| (1.0 + 0.01 * i as f64, 1)).collect();
        let p = problem(&combining, &[(0.5, 1)], 1.0, 10.0);
        let eval = conditional_outage_with(&p, &KernelOptions::default()).unwrap();
        assert_eq!(eval.precision, Precision::DoubleDouble);
        assert!(eval.error_bound < 1e-9);
        let double_only = conditional_outage_with(
            &p,
            &KernelOptions {
                extended_precision: false,
                ..Default::default()
            },
        );
        if let Ok(d) = double_only {
            assert!(d.error_bound > 1e-9);
        }
    }

    #[test]
    fn invalid_problems_are_rejected() {
        assert!(conditional_outage(&problem(&[], &[], 1.0, 1.0)).is_err());
        assert!(conditional_outage(&problem(&[(0.0, 1)], &[], 1.0, 1.0)).is_err());
        assert!(conditional_outage(&problem(&[(1.0, 0)], &[], 1.0, 1.0)).is_err());
        assert!(conditional_outage(&problem(&[(1.0, 1)], &[], 0.0, 1.0)).is_err());
        assert!(conditional_outage(&problem(&[(1.0, 1)], &[], 1.0, 0.0)).is_err());
    }
}
