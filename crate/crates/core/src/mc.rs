//! Independent oracles for the outage kernel.
//!
//! [`mc_outage`] simulates the fading directly and counts SINR outages.
//! [`convolution_cdf`] integrates the gamma densities of the combined signal
//! numerically (no interference), which needs neither Monte Carlo nor the
//! partial-fraction expansion.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::outage::{conditional_outage, Branch, OutageProblem};
use crate::quadrature::integrate;
use crate::rng::{derive_seed, derived_rng, Stream};

/// Trials per independently seeded chunk.
pub const TRIALS_PER_CHUNK: u64 = 1 << 14;

/// Monte Carlo outage estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    /// Binomial standard error `√(p(1-p)/trials)`.
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
    pub outages: u64,
}

impl McEstimate {
    fn from_counts(outages: u64, trials: u64, seed: u64) -> Self {
        let p = outages as f64 / trials as f64;
        Self {
            estimate: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
            seed,
            outages,
        }
    }

    /// Whether `value` lies within `k` standard errors (or `floor`) of the estimate.
    pub fn agrees_with(&self, value: f64, k: f64, floor: f64) -> bool {
        (value - self.estimate).abs() <= floor.max(k * self.stderr)
    }
}

pub fn mc_outage(problem: &OutageProblem, trials: u64, seed: u64) -> Result<McEstimate> {
    mc_outage_with(problem, trials, seed, Execution::default())
}

/// Simulates `trials` fading draws. Trials are split into fixed-size chunks
/// seeded from `(seed, chunk)`, so the estimate does not depend on `exec`.
pub fn mc_outage_with(
    problem: &OutageProblem,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    problem.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trial count must be at least 1"));
    }
    let links: Vec<(Gamma<f64>, f64)> = problem
        .combining
        .iter()
        .chain(&problem.interfering)
        .map(|b| unit_mean_gamma(b).map(|g| (g, b.omega)))
        .collect::<Result<_>>()?;
    let (signal, interference) = links.split_at(problem.combining.len());
    let noise = problem.noise();
    let beta = problem.beta;

    let chunks = trials.div_ceil(TRIALS_PER_CHUNK) as usize;
    let counts = exec.map_range(chunks, |chunk| {
        let mut rng = derived_rng(seed, Stream::Fading, chunk as u64);
        let start = chunk as u64 * TRIALS_PER_CHUNK;
        let n = TRIALS_PER_CHUNK.min(trials - start);
        let mut outages = 0u64;
        for _ in 0..n {
            let s: f64 = signal.iter().map(|(g, o)| g.sample(&mut rng) * o).sum();
            let i: f64 = interference
                .iter()
                .map(|(g, o)| g.sample(&mut rng) * o)
                .sum();
            if s / (noise + i) <= beta {
                outages += 1;
            }
        }
        outages
    });
    Ok(McEstimate::from_counts(counts.iter().sum(), trials, seed))
}

/// Gamma(shape m, scale 1/m): the unit-mean power gain of Nakagami-m fading.
pub fn unit_mean_gamma(branch: &Branch) -> Result<Gamma<f64>> {
    let m = branch.shape as f64;
    Gamma::new(m, 1.0 / m).map_err(|e| Error::invalid(format!("gamma law for shape {m}: {e}")))
}

/// Draws one unit-mean gain of shape `m`.
pub fn sample_gain<R: Rng + ?Sized>(shape: u32, rng: &mut R) -> f64 {
    let m = shape as f64;
    Gamma::new(m, 1.0 / m).expect("positive shape").sample(rng)
}

/// Absolute disagreement always tolerated between kernel and simulation.
pub const VALIDATION_FLOOR: f64 = 0.01;
/// Standard errors tolerated between kernel and simulation.
pub const VALIDATION_SIGMAS: f64 = 3.0;

/// Randomized instance `index` of the validation suite: 1 to 8 links of
/// which 1 to 3 combine, shapes in {1, 2, 3}, Ω log-uniform over three
/// decades, β log-uniform in [0.1, 10] and Γ log-uniform in [1, 100].
pub fn random_instance(seed: u64, index: u64) -> OutageProblem {
    let mut rng = derived_rng(seed, Stream::Instances, index);
    let links = rng.random_range(1..=8usize);
    let combining = rng.random_range(1..=links.min(3));
    let draw = |rng: &mut crate::rng::SimRng| {
        Branch::new(
            10f64.powf(rng.random_range(-1.5..1.5)),
            rng.random_range(1..=3u32),
        )
    };
    let combining: Vec<Branch> = (0..combining).map(|_| draw(&mut rng)).collect();
    let interfering: Vec<Branch> = (combining.len()..links).map(|_| draw(&mut rng)).collect();
    let beta = 10f64.powf(rng.random_range(-1.0..1.0));
    let gamma = 10f64.powf(rng.random_range(0.0..2.0));
    OutageProblem {
        combining,
        interfering,
        beta,
        gamma,
    }
}

/// Outcome of one kernel-versus-simulation comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRecord {
    pub index: u64,
    pub problem: OutageProblem,
    pub kernel: f64,
    pub mc: McEstimate,
    pub passed: bool,
}

/// Compares the closed form with `trials` simulated draws on instance
/// `index`; the simulation seed is derived from `(seed, index)`.
pub fn validate_instance(
    seed: u64,
    index: u64,
    trials: u64,
    exec: Execution,
) -> Result<ValidationRecord> {
    let problem = random_instance(seed, index);
    let kernel = conditional_outage(&problem)?;
    let mc = mc_outage_with(
        &problem,
        trials,
        derive_seed(seed, Stream::Fading, index),
        exec,
    )?;
    let passed = mc.agrees_with(kernel, VALIDATION_SIGMAS, VALIDATION_FLOOR);
    Ok(ValidationRecord {
        index,
        problem,
        kernel,
        mc,
        passed,
    })
}

/// Runs instances `0..instances` of the validation suite.
pub fn validation_suite(
    seed: u64,
    instances: u64,
    trials: u64,
    exec: Execution,
) -> Result<Vec<ValidationRecord>> {
    if trials == 0 {
        return Err(Error::invalid("trial count must be at least 1"));
    }
    (0..instances)
        .map(|i| validate_instance(seed, i, trials, exec))
        .collect()
}

/// Target absolute accuracy of [`convolution_cdf`].
pub const CONVOLUTION_TOLERANCE: f64 = 1e-7;

/// cdf of `Σ g_k Ω_k / β` at `z` by nested adaptive quadrature:
/// `F_L(z) = ∫_0^z f_L(x) F_{L-1}(z - x) dx` with `F_0 ≡ 1`.
pub fn convolution_cdf(combining: &[Branch], beta: f64, z: f64) -> Result<f64> {
    if combining.is_empty() {
        return Err(Error::invalid("combining set is empty"));
    }
    if !(beta > 0.0) {
        return Err(Error::invalid("beta must be positive"));
    }
    if z <= 0.0 {
        return Ok(0.0);
    }
    let terms: Vec<(u32, f64)> = combining
        .iter()
        .map(|b| (b.shape, b.omega / (beta * b.shape as f64)))
        .collect();
    // Per-level tolerance shrinks so the nested errors stay below the target.
    let tol = CONVOLUTION_TOLERANCE / (4.0 * terms.len() as f64);
    nested_cdf(&terms, z, tol)
}

fn gamma_density(shape: u32, scale: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let m = shape as i32;
    let mut log_norm = (m as f64) * scale.ln();
    for i in 2..m {
        log_norm += (i as f64).ln();
    }
    let u = x / scale;
    if m == 1 {
        (-u - log_norm).exp()
    } else {
        ((m - 1) as f64 * x.ln() - x / scale - log_norm).exp()
    }
}

fn nested_cdf(terms: &[(u32, f64)], z: f64, tol: f64) -> Result<f64> {
    if z <= 0.0 {
        return Ok(0.0);
    }
    let (&(shape, scale), rest) = terms.split_last().expect("nonempty");
    if rest.is_empty() {
        return integrate(|x| gamma_density(shape, scale, x), 0.0, z, tol);
    }
    let mut failure = None;
    let value = integrate(
        |x| {
            let f = gamma_density(shape, scale, x);
            if f == 0.0 {
                return 0.0;
            }
            match nested_cdf(rest, z - x, tol) {
                Ok(v) => f * v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        z,
        tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(omega: f64, m: u32) -> OutageProblem {
        OutageProblem {
            combining: vec![Branch::new(omega, m)],
            interfering: vec![],
            beta: 1.0,
            gamma: 10.0,
        }
    }

    #[test]
    fn rayleigh_estimate_brackets_analytic_value() {
        let est = mc_outage(&single(1.0, 1), 1_000_000, 17).unwrap();
        let exact = 1.0 - (-0.1f64).exp();
        assert!(est.agrees_with(exact, 3.0, 0.0), "{est:?}");
    }

    #[test]
    fn tiny_threshold_means_no_outage() {
        let p = OutageProblem {
            beta: 1e-12,
            ..single(1.0, 2)
        };
        assert_eq!(mc_outage(&p, 10_000, 1).unwrap().estimate, 0.0);
    }

    #[test]
    fn replay_and_thread_independence() {
        let p = OutageProblem {
            combining: vec![Branch::new(0.5, 2), Branch::new(0.2, 1)],
            interfering: vec![Branch::new(0.1, 1)],
            beta: 1.0,
            gamma: 5.0,
        };
        let a = mc_outage_with(&p, 50_000, 9, Execution::Sequential).unwrap();
        let b = mc_outage_with(&p, 50_000, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(mc_outage(&p, 0, 9).is_err());
    }

    #[test]
    fn unit_mean_gains() {
        let mut rng = crate::rng::rng_from_seed(4);
        for m in 1..=3 {
            let n = 100_000;
            let draws: Vec<f64> = (0..n).map(|_| sample_gain(m, &mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - 1.0).abs() <= 3.0 * se, "m={m}: mean {mean}");
        }
    }

    #[test]
    fn convolution_examples() {
        let one = [Branch::new(2.0, 1)];
        let v = convolution_cdf(&one, 0.5, 1.3).unwrap();
        assert!((v - (1.0 - (-0.5f64 * 1.3 / 2.0).exp())).abs() < 1e-8);
        assert_eq!(convolution_cdf(&one, 1.0, 0.0).unwrap(), 0.0);

        // Two unit exponentials sum to Gamma(2, 1).
        let two = [Branch::new(1.0, 1), Branch::new(1.0, 1)];
        let z = 1.7f64;
        let gamma2 = 1.0 - (-z).exp() * (1.0 + z);
        assert!((convolution_cdf(&two, 1.0, z).unwrap() - gamma2).abs() < 1e-7);
    }

    #[test]
    fn random_instances_respect_the_suite_ranges() {
        for i in 0..200 {
            let p = random_instance(5, i);
            let links = p.combining.len() + p.interfering.len();
            assert!((1..=8).contains(&links) && (1..=3).contains(&p.combining.len()));
            assert!(p.combining.iter().chain(&p.interfering).all(|b| {
                (1..=3).contains(&b.shape)
                    && b.omega >= 10f64.powf(-1.5)
                    && b.omega <= 10f64.powf(1.5)
            }));
            assert!((0.1..=10.0).contains(&p.beta) && (1.0..=100.0).contains(&p.gamma));
        }
        assert_eq!(random_instance(5, 3), random_instance(5, 3));
        assert_ne!(random_instance(5, 3), random_instance(6, 3));
    }

    #[test]
    fn validation_replays_exactly() {
        let a = validate_instance(11, 4, 2_000, Execution::Sequential).unwrap();
        let b = validate_instance(11, 4, 2_000, Execution::default()).unwrap();
        assert_eq!(a, b);
        assert!(validation_suite(11, 2, 0, Execution::Sequential).is_err());
    }
}
