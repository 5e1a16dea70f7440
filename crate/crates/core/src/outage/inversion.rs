//! Outage probability by characteristic-function inversion.
//!
//! With `D = S - β·I`, an outage is the event `D ≤ β/Γ`, and the
//! Gil-Pelaez formula gives
//!
//! ```text
//! P[D ≤ x] = 1/2 - (1/π) ∫_0^∞ Im[φ_D(t) e^{-itx}] / t dt
//! ```
//!
//! with `φ_D(t) = ∏_combining (1 - iθt)^(-m) · ∏_interfering (1 + iβθt)^(-m)`
//! and `θ = Ω/m`. In polar form the integrand is `e^{A(t)} sin B(t) / t`,
//! which involves no cancellation between large terms, so this path stays
//! accurate when the partial-fraction coefficients do not.

use super::OutageProblem;
use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Branches with `θ·t` below this are summed through their Taylor series.
const SERIES_LIMIT: f64 = 1e-2;
const MAX_SEGMENTS: usize = 80;

struct Spectrum {
    /// `(θ, m, sign)` with sign +1 for combining and -1 for interfering
    /// branches, split into branches evaluated exactly and small ones.
    exact: Vec<(f64, f64, f64)>,
    small: Vec<(f64, f64, f64)>,
    small_max: f64,
    /// `Σ sign·m·θ^p` for p = 1, 3, 5 and `Σ m·θ^p` for p = 2, 4, 6 over the
    /// small branches.
    odd: [f64; 3],
    even: [f64; 3],
    shift: f64,
    top: f64,
}

impl Spectrum {
    fn new(problem: &OutageProblem) -> Self {
        let beta = problem.beta;
        let all = problem
            .combining
            .iter()
            .map(|b| (b.omega / b.shape as f64, b.shape as f64, 1.0))
            .chain(
                problem
                    .interfering
                    .iter()
                    .map(|b| (beta * b.omega / b.shape as f64, b.shape as f64, -1.0)),
            );
        let top = problem
            .combining
            .iter()
            .chain(&problem.interfering)
            .fold(0.0f64, |acc, b| acc.max(b.omega / b.shape as f64))
            * beta.max(1.0);
        let split = top * 1e-4;
        let (exact, small): (Vec<_>, Vec<_>) = all.partition(|b| b.0 > split);
        let mut odd = [0.0; 3];
        let mut even = [0.0; 3];
        let mut small_max = 0.0f64;
        for &(th, m, sign) in &small {
            small_max = small_max.max(th);
            let th2 = th * th;
            odd[0] += sign * m * th;
            odd[1] += sign * m * th * th2;
            odd[2] += sign * m * th * th2 * th2;
            even[0] += m * th2;
            even[1] += m * th2 * th2;
            even[2] += m * th2 * th2 * th2;
        }
        Self {
            exact,
            small,
            small_max,
            odd,
            even,
            shift: beta * problem.noise(),
            top,
        }
    }

    /// `(A(t), B(t))` with `φ_D(t) e^{-itx} = e^{A + iB}`.
    fn polar(&self, t: f64) -> (f64, f64) {
        let mut a = 0.0;
        let mut b = -t * self.shift;
        let mut add = |th: f64, m: f64, sign: f64| {
            let y = th * t;
            a -= 0.5 * m * (y * y).ln_1p();
            b += sign * m * y.atan();
        };
        for &(th, m, sign) in &self.exact {
            add(th, m, sign);
        }
        if self.small_max * t <= SERIES_LIMIT {
            let t2 = t * t;
            // ln(1+y²) = y² - y⁴/2 + y⁶/3 ; atan y = y - y³/3 + y⁵/5
            a -= 0.5 * t2 * (self.even[0] - t2 * (self.even[1] / 2.0 - t2 * self.even[2] / 3.0));
            b += t * (self.odd[0] - t2 * (self.odd[1] / 3.0 - t2 * self.odd[2] / 5.0));
        } else {
            for &(th, m, sign) in &self.small {
                add(th, m, sign);
            }
        }
        (a, b)
    }
}

/// `P[SINR ≤ β]` by numerical inversion, to roughly `tolerance` absolute
/// accuracy.
pub fn outage_by_inversion(problem: &OutageProblem, tolerance: f64) -> Result<f64> {
    problem.validate()?;
    let spectrum = Spectrum::new(problem);
    let integrand = |t: f64| {
        let (a, b) = spectrum.polar(t);
        a.exp() * b.sin() / t
    };

    // Geometric segments [0, h], [h, 2h], [2h, 4h], ... until the envelope
    // e^{A(T)} bounds the remaining tail below the tolerance.
    let per_segment = tolerance * std::f64::consts::PI / (2.0 * MAX_SEGMENTS as f64);
    let mut lo = 0.0;
    let mut hi = 0.5 / spectrum.top;
    let mut total = 0.0;
    for _ in 0..MAX_SEGMENTS {
        total += integrate(integrand, lo, hi, per_segment)?;
        let (a, _) = spectrum.polar(hi);
        if spectrum.top * hi >= 1.0 && a.exp() < per_segment {
            let eps = 0.5 - total / std::f64::consts::PI;
            return Ok(eps.clamp(0.0, 1.0));
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Error::GridResolutionFailure {
        target: tolerance,
        subdivisions: MAX_SEGMENTS,
    })
}
