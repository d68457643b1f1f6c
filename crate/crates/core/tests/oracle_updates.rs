mod support;

use std::time::Instant;

use crowdfuse::aggregators::{ds_em_fit, vbem_fit, FitOptions};
use crowdfuse::model::PriorConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ITERS: usize = 6;

fn options(iters: usize) -> FitOptions<f64> {
    FitOptions {
        max_iters: iters,
        tol: 0.0,
        ..Default::default()
    }
}

fn max_gap(a: &crowdfuse::Posterior, b: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (n, row) in b.iter().enumerate() {
        for (x, y) in a.row(n).iter().zip(row) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

#[test]
fn ds_em_matches_reference_every_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for inst in 0..50 {
        let (rm, dense, k) = support::random_instance(&mut rng, 8, 3, 3, 0.7);
        let reference = support::ds_trajectory(&dense, rm.n_annotators(), k, ITERS);
        for t in 1..=ITERS {
            let fit = ds_em_fit(&rm, &options(t)).unwrap();
            assert_eq!(fit.iterations, t);
            let gap = max_gap(&fit.posterior, &reference[t - 1]);
            assert!(gap <= 1e-8, "instance {inst}, iteration {t}: gap {gap:e}");
        }
    }
}

#[test]
fn vbem_matches_reference_every_iteration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for inst in 0..50 {
        let (rm, dense, k) = support::random_instance(&mut rng, 8, 3, 3, 0.7);
        let alpha0: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..3.0)).collect();
        let beta0: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..k).map(|_| rng.gen_range(0.2..4.0)).collect())
            .collect();
        let priors = PriorConfig::shared(alpha0.clone(), beta0.concat()).unwrap();
        let reference = support::vb_trajectory(&dense, rm.n_annotators(), k, &alpha0, &beta0, ITERS);
        for t in 1..=ITERS {
            let fit = vbem_fit(&rm, &priors, &options(t)).unwrap();
            let gap = max_gap(&fit.posterior, &reference[t - 1]);
            assert!(gap <= 1e-8, "instance {inst}, iteration {t}: gap {gap:e}");
        }
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn diag_weighted_priors_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let (rm, dense, k) = support::random_instance(&mut rng, 8, 3, 3, 0.9);
        let priors = PriorConfig::diag_weighted(k).unwrap();
        let beta0: Vec<Vec<f64>> = (0..k)
            .map(|r| (0..k).map(|c| if r == c { k as f64 } else { 1.0 }).collect())
            .collect();
        let reference = support::vb_trajectory(&dense, rm.n_annotators(), k, &vec![1.0; k], &beta0, 3);
        let fit = vbem_fit(&rm, &priors, &options(3)).unwrap();
        assert!(max_gap(&fit.posterior, &reference[2]) <= 1e-8);
    }
}
