use mbsfn_core::mc::{convolution_cdf, mc_outage, random_instance, validation_suite};
use mbsfn_core::outage::{
    conditional_outage, conditional_outage_by_enumeration, conditional_outage_with,
    outage_by_inversion, xi, Branch, KernelOptions, OutageProblem, Precision, XiInput,
};
use mbsfn_core::rng::rng_from_seed;
use mbsfn_core::Execution;
use rand::Rng;

fn log_uniform<R: Rng>(rng: &mut R, lo_exp: f64, hi_exp: f64) -> f64 {
    10f64.powf(rng.random_range(lo_exp..hi_exp))
}

#[test]
fn kernel_agrees_with_simulation_on_fifty_instances() {
    let records = validation_suite(2024, 50, 100_000, Execution::default()).unwrap();
    assert_eq!(records.len(), 50);
    for r in &records {
        assert!(
            r.passed,
            "instance {}: kernel {} vs mc {:?} for {:?}",
            r.index, r.kernel, r.mc, r.problem
        );
    }
}

#[test]
fn mixed_shapes_match_a_million_trials() {
    let p = OutageProblem {
        combining: vec![
            Branch::new(0.6, 1),
            Branch::new(0.25, 2),
            Branch::new(0.9, 3),
        ],
        interfering: vec![Branch::new(0.3, 2), Branch::new(0.12, 1)],
        beta: 1.5,
        gamma: 8.0,
    };
    let exact = conditional_outage(&p).unwrap();
    let est = mc_outage(&p, 1_000_000, 99).unwrap();
    assert!(est.agrees_with(exact, 3.0, 0.0), "{exact} vs {est:?}");
}

#[test]
fn standard_error_shrinks_as_inverse_root_of_trials() {
    let p = OutageProblem {
        combining: vec![Branch::new(1.0, 2)],
        interfering: vec![Branch::new(0.4, 1)],
        beta: 1.0,
        gamma: 10.0,
    };
    let exact = conditional_outage(&p).unwrap();
    assert!(exact > 0.1 && exact < 0.9);
    let mut prev = None;
    for trials in [1_000u64, 10_000, 100_000] {
        let est = mc_outage(&p, trials, 3).unwrap();
        let expected = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!(
            (est.stderr - expected).abs() <= 0.25 * expected + 1e-4,
            "{trials}: {est:?}"
        );
        if let Some(s) = prev {
            let ratio: f64 = s / est.stderr;
            assert!((ratio - 10f64.sqrt()).abs() < 0.6, "ratio {ratio}");
        }
        prev = Some(est.stderr);
    }
}

/// Instances with at most four combining links; every fifth one repeats a
/// scale so that the kernel has to merge poles.
fn convolution_instance(seed: u64) -> (Vec<Branch>, f64, f64) {
    let mut rng = rng_from_seed(seed);
    let l = rng.random_range(1..=4usize);
    let beta = log_uniform(&mut rng, -1.0, 1.0);
    let mut combining: Vec<Branch> = (0..l)
        .map(|_| Branch::new(log_uniform(&mut rng, -1.0, 1.0), rng.random_range(1..=3u32)))
        .collect();
    if seed.is_multiple_of(5) || l == 1 {
        let base = combining[0];
        let shape = rng.random_range(1..=3u32);
        // Same Ω/m as the first branch: identical scale, different shape.
        combining.push(Branch::new(
            base.omega * shape as f64 / base.shape as f64,
            shape,
        ));
        combining.truncate(4);
    }
    let gamma = log_uniform(&mut rng, 0.0, 2.0);
    (combining, beta, gamma)
}

#[test]
fn no_interference_kernel_matches_convolution() {
    let mut merged = 0;
    for seed in 0..20 {
        let (combining, beta, gamma) = convolution_instance(seed);
        let scales: Vec<f64> = combining
            .iter()
            .map(|b| b.omega / (beta * b.shape as f64))
            .collect();
        if scales
            .iter()
            .enumerate()
            .any(|(i, a)| scales[..i].contains(a))
        {
            merged += 1;
        }
        let p = OutageProblem {
            combining: combining.clone(),
            interfering: vec![],
            beta,
            gamma,
        };
        let kernel = conditional_outage(&p).unwrap();
        let oracle = convolution_cdf(&combining, beta, 1.0 / gamma).unwrap();
        assert!(
            (kernel - oracle).abs() <= 1e-6,
            "seed {seed}: {kernel} vs {oracle}"
        );
    }
    assert!(merged >= 3, "only {merged} merged instances");
}

#[test]
fn merged_scales_match_perturbed_scales() {
    for seed in 0..10u64 {
        let mut rng = rng_from_seed(100 + seed);
        let omega = log_uniform(&mut rng, -1.0, 1.0);
        let p = OutageProblem {
            combining: vec![
                Branch::new(omega, 1),
                Branch::new(omega, 1),
                Branch::new(omega * 0.3, 2),
            ],
            interfering: vec![Branch::new(log_uniform(&mut rng, -2.0, 0.0), 1)],
            beta: 1.0,
            gamma: 10.0,
        };
        let mut perturbed = p.clone();
        perturbed.combining[1].omega *= 1.0 + 1e-9;
        let a = conditional_outage(&p).unwrap();
        let b = conditional_outage(&perturbed).unwrap();
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

#[test]
fn coefficients_sum_to_one_on_random_inputs() {
    let mut rng = rng_from_seed(77);
    for case in 0..100 {
        let l = rng.random_range(1..=5usize);
        let shapes: Vec<u32> = (0..l).map(|_| rng.random_range(1..=3)).collect();
        let mut scales: Vec<f64> = Vec::new();
        while scales.len() < l {
            let s = log_uniform(&mut rng, -1.0, 1.0);
            if scales.iter().all(|&x| (x / s - 1.0).abs() > 0.05) {
                scales.push(s);
            }
        }
        let mut sum = 0.0;
        for k in 0..l {
            for n in 1..=shapes[k] {
                sum += xi(&XiInput {
                    k,
                    n,
                    shapes: shapes.clone(),
                    scales: scales.clone(),
                })
                .unwrap();
            }
        }
        assert!(
            (sum - 1.0).abs() <= 1e-9,
            "case {case}: {sum} for {shapes:?} {scales:?}"
        );
    }
}

#[test]
fn fast_kernel_matches_term_by_term_evaluation() {
    for index in 0..40 {
        let p = random_instance(31, index);
        let fast = conditional_outage(&p).unwrap();
        let slow = conditional_outage_by_enumeration(&p).unwrap();
        assert!(
            (fast - slow).abs() <= 1e-9,
            "instance {index}: {fast} vs {slow}"
        );
    }
}

#[test]
fn inversion_matches_closed_form_on_random_instances() {
    // Slowly decaying characteristic functions (a single low-shape link with
    // a large noise offset) are reported as unresolved rather than guessed.
    let mut resolved = 0;
    for index in 0..30 {
        let p = random_instance(13, index);
        let closed = conditional_outage(&p).unwrap();
        match outage_by_inversion(&p, 1e-9) {
            Ok(inverted) => {
                assert!(
                    (closed - inverted).abs() <= 1e-8,
                    "instance {index}: {closed} vs {inverted}"
                );
                resolved += 1;
            }
            Err(e) => assert!(
                matches!(e, mbsfn_core::Error::GridResolutionFailure { .. }),
                "{e:?}"
            ),
        }
    }
    assert!(resolved >= 25, "only {resolved} of 30 resolved");
}

#[test]
fn large_clustered_combining_sets_stay_in_range() {
    // Forty combining links with scales spread over a single decade are far
    // beyond what the double-precision expansion can resolve.
    let mut rng = rng_from_seed(5);
    let combining: Vec<Branch> = (0..40)
        .map(|_| Branch::new(log_uniform(&mut rng, -1.0, 0.0), rng.random_range(1..=3)))
        .collect();
    let interfering: Vec<Branch> = (0..200)
        .map(|_| Branch::new(log_uniform(&mut rng, -5.0, -2.0), 1))
        .collect();
    let p = OutageProblem {
        combining,
        interfering,
        beta: 20.0,
        gamma: 10.0,
    };
    let eval = conditional_outage_with(&p, &KernelOptions::default()).unwrap();
    assert_ne!(eval.precision, Precision::Double);
    let est = mc_outage(&p, 200_000, 1).unwrap();
    assert!(
        est.agrees_with(eval.probability, 4.0, 1e-3),
        "{eval:?} vs {est:?}"
    );
}
