use rand::Rng;
use rand_distr::StandardNormal;

use wavescream::rng::stream;
use wavescream::screening::{
    lambda_of_pi, log_lambda_scale, maximize_lambda, maximize_scale, BayesFactors, PiVector,
};

/// Best value of `log Λ_s(π)` on a uniform grid of step `h`.
fn grid_best(log_bf: &[f64], h: f64) -> (f64, f64) {
    let steps = (1.0 / h).round() as usize;
    (0..=steps)
        .map(|i| {
            let p = i as f64 / steps as f64;
            (p, log_lambda_scale(log_bf, p))
        })
        .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
}

fn random_scales(rng: &mut impl Rng, depth: u32) -> Vec<Vec<f64>> {
    let l1: f64 = rng.random_range(0.6..0.99);
    (0..=depth)
        .map(|s| {
            (0..1usize << s)
                .map(|_| {
                    let z: f64 = rng.sample::<f64, _>(StandardNormal) + if rng.random::<f64>() < 0.2 { 2.5 } else { 0.0 };
                    0.5 * (l1 * z * z + (1.0 - l1).ln())
                })
                .collect()
        })
        .collect()
}

#[test]
fn em_never_loses_to_a_fine_grid() {
    let mut rng = stream(11, 0);
    for _ in 0..300 {
        let depth = rng.random_range(0..=4);
        let scales = random_scales(&mut rng, depth);
        let em = maximize_lambda(&BayesFactors::from_log(scales.clone()));
        let mut grid_total = 0.0;
        for (s, b) in scales.iter().enumerate() {
            let (p, v) = grid_best(b, 1e-4);
            grid_total += v;
            assert!((em.pi.values()[s] - p).abs() < 5e-3 || v - log_lambda_scale(b, em.pi.values()[s]) < 1e-8);
        }
        assert!(em.log_lambda_hat >= grid_total - 1e-10);
        assert!(em.log_lambda_hat - grid_total < 1e-5);
        assert!(em.lambda_hat >= 1.0);
    }
}

#[test]
fn em_iterates_are_monotone() {
    let mut rng = stream(12, 0);
    for _ in 0..100 {
        let b = &random_scales(&mut rng, 5)[5];
        let mut values = Vec::new();
        let fit = maximize_scale(b, |p| values.push(log_lambda_scale(b, p)));
        for w in values.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
        }
        assert!((0.0..=1.0).contains(&fit.pi));
    }
}

#[test]
fn boundary_certificates() {
    let weak = vec![-0.3, -1.0, 0.1, -0.5];
    assert_eq!(maximize_scale(&weak, |_| {}).pi, 0.0);
    let strong = vec![5.0, 4.0, 6.0, 3.0];
    assert_eq!(maximize_scale(&strong, |_| {}).pi, 1.0);
}

#[test]
fn lambda_of_pi_is_product_over_scales() {
    let bf = BayesFactors::from_values(vec![vec![2.0], vec![0.5, 3.0]]).unwrap();
    let pi = PiVector::new(vec![0.5, 0.25]).unwrap();
    let want = (0.5 + 0.5 * 2.0) * (0.75 + 0.25 * 0.5) * (0.75 + 0.25 * 3.0);
    assert!((lambda_of_pi(&bf, &pi).unwrap() - want).abs() < 1e-12);
    assert!(PiVector::new(vec![1.5]).is_err());
}
