use std::io::BufReader;

use approx::assert_relative_eq;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use wavescream::nullsim::{
    fit_gpd, gpd_log_likelihood, gpd_quantile_survival, load_or_simulate, round_lambda1, simulate_null,
    CacheKey, CachedSample, NullModel, ThresholdRule,
};
use wavescream::rng::stream;

const L1: f64 = 0.9876543;

#[test]
fn simulation_is_deterministic_and_thread_invariant() {
    let a = simulate_null(L1, 5, 3000, 42).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| simulate_null(L1, 5, 3000, 42).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, simulate_null(L1, 5, 3000, 43).unwrap());
    assert!(a.windows(2).all(|w| w[0] <= w[1]));
    assert!(a[0] >= 1.0);
}

#[test]
fn too_few_simulations_are_rejected() {
    assert!(simulate_null(L1, 3, 999, 1).is_err());
}

#[test]
fn cache_round_trips_and_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let key = CacheKey::new(0.98765432, 4, 1500, 5);
    assert_eq!(key.lambda1, 0.9876543);
    let (first, hit) = load_or_simulate(dir.path(), key).unwrap();
    assert!(!hit);
    let (second, hit) = load_or_simulate(dir.path(), key).unwrap();
    assert!(hit);
    assert_eq!(first, second);
    assert_eq!(first, simulate_null(key.lambda1, 4, 1500, 5).unwrap());

    let text = std::fs::read(dir.path().join(key.file_name())).unwrap();
    let parsed = CachedSample::read(BufReader::new(&text[..])).unwrap();
    assert_eq!(parsed.key, key);
    let mut out = Vec::new();
    parsed.write(&mut out).unwrap();
    assert_eq!(out, text);
}

#[test]
fn corrupt_cache_is_rejected() {
    let bad = "# lambda1=0.5\n# depth=2\n# simulations=3\n# seed=1\nlambda_hat\n1\n3\n2\n";
    assert!(CachedSample::read(BufReader::new(bad.as_bytes())).is_err());
    let short = "# lambda1=0.5\n# depth=2\n# simulations=3\n# seed=1\nlambda_hat\n1\n";
    assert!(CachedSample::read(BufReader::new(short.as_bytes())).is_err());
}

#[test]
fn lambda1_rounding_modes() {
    assert_eq!(round_lambda1(0.12345678, false), 0.1234568);
    assert_eq!(round_lambda1(0.12345678, true), 0.1234567);
}

#[test]
fn exponential_exceedances_give_zero_shape() {
    let mut rng = stream(3, 0);
    let e = Exp::new(1.0 / 3.0).unwrap();
    let y: Vec<f64> = (0..20_000).map(|_| e.sample(&mut rng)).collect();
    let fit = fit_gpd(&y).unwrap();
    assert!(fit.xi.abs() < 0.03, "xi {}", fit.xi);
    assert_relative_eq!(fit.beta, 3.0, max_relative = 0.05);
    assert!(fit.xi_se.unwrap() > 0.0);
}

#[test]
fn gpd_fit_is_a_likelihood_maximum() {
    let mut rng = stream(4, 0);
    let y: Vec<f64> = (0..5000)
        .map(|_| gpd_quantile_survival(1.0 - rng.random::<f64>(), 0.25, 2.0))
        .collect();
    let fit = fit_gpd(&y).unwrap();
    let best = gpd_log_likelihood(&y, fit.xi, fit.beta);
    for (dx, db) in [(0.01, 0.0), (-0.01, 0.0), (0.0, 0.02), (0.0, -0.02)] {
        assert!(gpd_log_likelihood(&y, fit.xi + dx, fit.beta + db) <= best + 1e-9);
    }
    assert!((fit.xi - 0.25).abs() < 0.06);
}

#[test]
fn constant_exceedances_fail() {
    assert!(fit_gpd(&[1.0; 100]).is_err());
}

#[test]
fn p_values_are_monotone_and_continuous_at_threshold() {
    let model = NullModel::simulate(L1, 6, 20_000, 9, ThresholdRule::default()).unwrap();
    let tail = model.tail.expect("tail fit");
    let below = model.p_value(tail.threshold).unwrap();
    let above = model.p_value(tail.threshold * (1.0 + 1e-12)).unwrap();
    assert_relative_eq!(below, above, max_relative = 0.01);
    let mut last = 1.0;
    for k in 0..200 {
        let lam = 1.0 + k as f64 * 0.5;
        let p = model.p_value(lam).unwrap();
        assert!(p <= last + 1e-15 && p > 0.0);
        last = p;
    }
    assert_eq!(model.p_value(1.0).unwrap(), 1.0);
    assert!(model.p_value(0.5).is_err());
    assert!(model.p_value_log(1e4).unwrap() < 1e-12);
    assert_relative_eq!(model.p_value_log(5f64.ln()).unwrap(), model.p_value(5.0).unwrap(), max_relative = 1e-9);
}

#[test]
fn van_kerm_rule_parses_and_fits() {
    let rule: ThresholdRule = "van-kerm".parse().unwrap();
    let model = NullModel::simulate(L1, 6, 20_000, 9, rule).unwrap();
    assert!(model.tail.is_some() || model.tail_error.is_some());
    assert_eq!(rule.to_string(), "van-kerm");
    assert!("quantile:1.5".parse::<ThresholdRule>().is_err());
}
