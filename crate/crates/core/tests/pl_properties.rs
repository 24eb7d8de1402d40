//! Structural properties of the pseudo-likelihood machinery: row-sum
//! conservation, EM monotonicity, agreement between the fit loop and the
//! one-step estimator, and the balanced one-step characterization.

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wsbm_core::model::{sample_wsbm, BlockParams, LabelAssignment};
use wsbm_core::pl::{
    block_sums, e_step, estimate_block_params, label_update, m_step, mixture_params, pl_fit,
    pseudo_log_likelihood, variance_floor, ConfusionMatrix, FitOptions,
};
use wsbm_core::{homogeneous_params, oracle_init, Labeling, OracleSpec, WeightedNetwork};

fn random_network(n: usize, rng: &mut ChaCha8Rng) -> WeightedNetwork {
    WeightedNetwork::from_upper(n, |_, _| rng.gen::<f64>() * 4.0 - 2.0).unwrap()
}

fn random_labeling(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Labeling {
    loop {
        let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=k as u32)).collect();
        let l = Labeling::new(labels, k).unwrap();
        if l.counts().iter().all(|&c| c > 0) {
            return l;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn block_sum_rows_conserve_node_strength(seed in 0u64..1000, n in 5usize..40, k in 1usize..5) {
        let k = k.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_network(n, &mut rng);
        let e = random_labeling(n, k, &mut rng);
        let s = block_sums(&w, &e).unwrap();
        for i in 0..n {
            let total: f64 = w.row(i).iter().sum();
            let by_block: f64 = s.row(i).iter().sum();
            let scale = total.abs().max(1.0);
            prop_assert!((total - by_block).abs() / scale < 1e-9);
        }
    }
}

#[test]
fn em_inner_loop_is_monotone() {
    for seed in 0..10u64 {
        let params = BlockParams::homogeneous(2, 0.6, 0.0, 1.0).unwrap();
        let (w, c) = sample_wsbm(60, &params, LabelAssignment::FixedCounts, 100 + seed).unwrap();
        let (e0, _) = oracle_init(&c, &OracleSpec::balanced(0.7, 2), seed).unwrap();
        let floor = variance_floor(&w);
        let (bp, _) = estimate_block_params(&w, &e0).unwrap();
        let r = ConfusionMatrix::diagonal(&bp.pi);
        let mut m = mixture_params(&r, &bp, w.n(), floor).unwrap();
        let s = block_sums(&w, &e0).unwrap();
        let mut prev = pseudo_log_likelihood(&s, &m);
        for _ in 0..50 {
            let tau = e_step(&s, &m);
            m = m_step(&s, &tau, &m, floor);
            let cur = pseudo_log_likelihood(&s, &m);
            assert!(
                cur >= prev - 1e-8,
                "pseudo log-likelihood decreased: {prev} -> {cur} (seed {seed})"
            );
            prev = cur;
        }
    }
}

/// The one-step label update of the fit loop (inner loop disabled) equals
/// the direct argmax criterion with pi entering as log pi.
#[test]
fn one_step_fit_matches_direct_estimator() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(777 + seed);
        let k = 2 + (seed % 2) as usize;
        let params = BlockParams::homogeneous(k, 1.0, 0.0, 1.0).unwrap();
        let n = 50 + (seed as usize % 3) * 10;
        let (w, c) = sample_wsbm(n, &params, LabelAssignment::Multinomial, 900 + seed).unwrap();
        let gamma = 0.55 + 0.4 * rng.gen::<f64>();
        let (e0, _) = oracle_init(&c, &OracleSpec::balanced(gamma, k), seed).unwrap();

        let opts = FitOptions {
            outer_iters: 1,
            inner_max: 0,
            ..FitOptions::default()
        };
        let fit = pl_fit(&w, &e0, k, &opts).unwrap();

        let (bp, _) = estimate_block_params(&w, &e0).unwrap();
        let r = ConfusionMatrix::diagonal(&bp.pi);
        let m = mixture_params(&r, &bp, n, variance_floor(&w)).unwrap();
        let s = block_sums(&w, &e0).unwrap();
        for i in 0..n {
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for l in 0..k {
                let mut v = if m.pi[l] > 0.0 {
                    m.pi[l].ln()
                } else {
                    f64::NEG_INFINITY
                };
                for kk in 0..k {
                    let lam = m.lambda_var[(l, kk)];
                    let d = s.row(i)[kk] - m.p_mean[(l, kk)];
                    v -= d * d / (2.0 * lam) + 0.5 * lam.ln();
                }
                if v > best_v {
                    best_v = v;
                    best = l;
                }
            }
            assert_eq!(
                fit.labels.index(i),
                best,
                "node {i} differs from direct estimator (seed {seed})"
            );
        }
    }
}

/// At essentially noiseless signal the fit recovers the truth exactly from
/// a 70%-correct start.
#[test]
fn strong_signal_exact_recovery() {
    let params = BlockParams::homogeneous(2, 5.0, 0.0, 0.01).unwrap();
    let (w, c) = sample_wsbm(300, &params, LabelAssignment::FixedCounts, 42).unwrap();
    let (e0, _) = oracle_init(&c, &OracleSpec::balanced(0.7, 2), 1).unwrap();
    let fit = pl_fit(&w, &e0, 2, &FitOptions::default()).unwrap();
    assert_eq!(
        wsbm_core::misclassification_loss(&fit.labels, &c).unwrap(),
        0.0
    );
}

/// Balanced one-step characterization: with an exact balanced-gamma
/// confusion matrix, uniform pi, homogeneous Sigma and sign-correct
/// estimates, the one-step update is the block-sum argmax (gamma > 1/K) or
/// argmin (gamma < 1/K).
#[test]
fn balanced_one_step_follows_block_sums() {
    let cases = [
        (2usize, 10usize, 0.8, true),
        (2, 10, 0.2, false),
        (3, 10, 0.8, true),
        (3, 10, 0.2, false),
    ];
    for (case, &(k, m, gamma, expect_argmax)) in cases.iter().enumerate() {
        for rep in 0..10u64 {
            let seed = 3000 + case as u64 * 100 + rep;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = k * m;
            let a = 1.0 + rng.gen::<f64>();
            let b = a - (0.5 + rng.gen::<f64>()); // a > b
            let params = BlockParams::homogeneous(k, a, b, 0.8).unwrap();
            let (w, c) = sample_wsbm(n, &params, LabelAssignment::FixedCounts, seed).unwrap();
            let (e, realized) =
                oracle_init(&c, &OracleSpec::balanced(gamma, k), seed + 1).unwrap();
            // exact membership in the balanced initialization set
            let target = ConfusionMatrix::balanced_gamma(k, gamma).unwrap();
            for i in 0..k {
                for j in 0..k {
                    assert!(
                        (realized.mat()[(i, j)] - target.mat()[(i, j)]).abs() < 1e-12,
                        "realized confusion matrix is off at ({i},{j})"
                    );
                }
            }
            let ahat = a + 0.1 * rng.gen::<f64>();
            let bhat = b - 0.1 * rng.gen::<f64>(); // ahat > bhat
            let (bh, sh) = homogeneous_params(k, ahat, bhat, 1.3).unwrap();
            let bp = BlockParams::new(vec![1.0 / k as f64; k], bh, sh).unwrap();
            let mix = mixture_params(&target, &bp, n, 1e-20).unwrap();
            let s = block_sums(&w, &e).unwrap();
            let tau = e_step(&s, &mix);
            let updated = label_update(&tau);
            for i in 0..n {
                let row = s.row(i);
                let mut arg = 0usize;
                for l in 1..k {
                    let better = if expect_argmax {
                        row[l] > row[arg]
                    } else {
                        row[l] < row[arg]
                    };
                    if better {
                        arg = l;
                    }
                }
                assert_eq!(
                    updated.index(i),
                    arg,
                    "node {i}: one-step update disagrees with block-sum rule (seed {seed})"
                );
            }
        }
    }
}
