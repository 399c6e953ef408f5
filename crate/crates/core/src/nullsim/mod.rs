//! Null distribution of `Λ̂` and p-values.
//!
//! Under no association `2 log BF = λ₁ Q + log(1 - λ₁)` with `Q ~ χ²₁`
//! independently per coefficient. Each replicate draws one `Q` per
//! coefficient of a depth-`D` pyramid and maximises `Λ`; the sorted
//! replicates form the null sample. Beyond a high threshold `u` the sample is
//! replaced by a Generalized Pareto fit so that p-values far below `1/M` can
//! be reported.

mod cache;
mod gpd;

pub use cache::{cache_dir, load_or_simulate, CacheKey, CachedSample, CACHE_DIR_ENV};
pub use gpd::{fit_gpd, gpd_log_likelihood, gpd_log_survival, gpd_quantile_survival, GpdFit};

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::rng;
use crate::screening::maximize_scale;
use crate::stats::quantile_sorted;
use crate::{Error, Result};

pub const DEFAULT_SIMULATIONS: usize = 100_000;
pub const MIN_SIMULATIONS: usize = 1_000;
pub const MIN_EXCEEDANCES: usize = 30;
pub const LAMBDA1_RESOLUTION: f64 = 1e-7;

/// Round `λ₁` to the cache resolution, keeping it inside `(0, 1)`.
/// `down` truncates instead of rounding to nearest.
pub fn round_lambda1(lambda1: f64, down: bool) -> f64 {
    let scaled = lambda1 / LAMBDA1_RESOLUTION;
    let r = if down { (scaled + 1e-6).floor() } else { scaled.round() };
    let steps = 1.0 / LAMBDA1_RESOLUTION;
    (r.clamp(1.0, steps - 1.0) / steps).clamp(LAMBDA1_RESOLUTION, 1.0 - LAMBDA1_RESOLUTION)
}

/// `log BF` of a coefficient whose null statistic is `q`.
#[inline]
pub fn null_log_bf(lambda1: f64, q: f64) -> f64 {
    0.5 * (lambda1 * q + (-lambda1).ln_1p())
}

/// One null replicate of `log Λ̂`.
pub fn simulate_replicate(lambda1: f64, depth: u32, seed: u64, index: u64, buf: &mut Vec<f64>) -> f64 {
    let mut rng = rng::stream(seed, index);
    let mut total = 0.0;
    for s in 0..=depth {
        buf.clear();
        for _ in 0..(1usize << s) {
            let z: f64 = StandardNormal.sample(&mut rng);
            buf.push(null_log_bf(lambda1, z * z));
        }
        total += maximize_scale(buf, |_| {}).log_lambda;
    }
    total.max(0.0)
}

/// `M` null draws of `Λ̂`, sorted ascending. Replicate `r` uses stream
/// `(seed, r)`, so the result does not depend on the thread count.
pub fn simulate_null(lambda1: f64, depth: u32, simulations: usize, seed: u64) -> Result<Vec<f64>> {
    if !(lambda1 > 0.0 && lambda1 < 1.0) {
        return Err(Error::InvalidArgument(format!("λ₁ must lie in (0, 1), got {lambda1}")));
    }
    if simulations < MIN_SIMULATIONS {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_SIMULATIONS} simulations required, got {simulations}"
        )));
    }
    let mut sample: Vec<f64> = (0..simulations as u64)
        .into_par_iter()
        .map_init(Vec::new, |buf, r| simulate_replicate(lambda1, depth, seed, r, buf).exp())
        .collect();
    sample.sort_by(f64::total_cmp);
    Ok(sample)
}

/// Smallest simulation count that can resolve a p-value of `p`: `⌈1/(4p²)⌉`.
pub fn required_permutations(p: f64) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("target p-value must lie in (0, 1), got {p}")));
    }
    let x = 1.0 / (4.0 * p * p);
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x {
        Ok(r as u64)
    } else {
        Ok(x.ceil() as u64)
    }
}

/// How the tail threshold `u` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// Empirical quantile of the null sample.
    Quantile(f64),
    /// `min(10 · median, 97.5th percentile)`.
    VanKerm,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Quantile(0.99)
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdRule::Quantile(q) => write!(f, "quantile:{q}"),
            ThresholdRule::VanKerm => f.write_str("van-kerm"),
        }
    }
}

impl FromStr for ThresholdRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown threshold rule {s:?}"));
        match s {
            "van-kerm" => Ok(ThresholdRule::VanKerm),
            "quantile" => Ok(ThresholdRule::default()),
            _ => {
                let q: f64 = s.strip_prefix("quantile:").unwrap_or(s).parse().map_err(|_| bad())?;
                if q > 0.0 && q < 1.0 {
                    Ok(ThresholdRule::Quantile(q))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl ThresholdRule {
    pub fn threshold(&self, sorted: &[f64]) -> f64 {
        match *self {
            ThresholdRule::Quantile(q) => quantile_sorted(sorted, q),
            ThresholdRule::VanKerm => {
                (10.0 * quantile_sorted(sorted, 0.5)).min(quantile_sorted(sorted, 0.975))
            }
        }
    }
}

/// GPD fitted to `Λ̂ - u` over the sample points strictly above `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub threshold: f64,
    pub n_exceedances: usize,
    pub gpd: GpdFit,
}

/// Fit the upper tail of an ascending sample.
pub fn fit_gpd_tail(sorted: &[f64], rule: ThresholdRule) -> Result<TailFit> {
    if sorted.is_empty() {
        return Err(Error::TooFewExceedances { found: 0, required: MIN_EXCEEDANCES });
    }
    let u = rule.threshold(sorted);
    let first = sorted.partition_point(|&x| x <= u);
    let exceedances: Vec<f64> = sorted[first..].iter().map(|&x| x - u).collect();
    if exceedances.len() < MIN_EXCEEDANCES {
        return Err(Error::TooFewExceedances {
            found: exceedances.len(),
            required: MIN_EXCEEDANCES,
        });
    }
    let gpd = fit_gpd(&exceedances)?;
    Ok(TailFit {
        threshold: u,
        n_exceedances: exceedances.len(),
        gpd,
    })
}

/// Simulated null sample with an optional GPD tail.
#[derive(Debug, Clone, PartialEq)]
pub struct NullModel {
    pub lambda1: f64,
    pub depth: u32,
    pub n_coefficients_per_scale: Vec<usize>,
    pub seed: u64,
    /// Ascending.
    pub sample: Vec<f64>,
    pub threshold_rule: ThresholdRule,
    pub tail: Option<TailFit>,
    /// Why the tail fit was abandoned, if it was.
    pub tail_error: Option<String>,
}

impl NullModel {
    /// Build from an ascending sample; a failed tail fit leaves empirical
    /// p-values only.
    pub fn from_sample(
        lambda1: f64,
        depth: u32,
        seed: u64,
        sample: Vec<f64>,
        rule: ThresholdRule,
    ) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InvalidArgument("empty null sample".into()));
        }
        if sample.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("null sample must be sorted".into()));
        }
        let (tail, tail_error) = match fit_gpd_tail(&sample, rule) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(Self {
            lambda1,
            depth,
            n_coefficients_per_scale: (0..=depth).map(|s| 1usize << s).collect(),
            seed,
            sample,
            threshold_rule: rule,
            tail,
            tail_error,
        })
    }

    /// Simulate and fit.
    pub fn simulate(lambda1: f64, depth: u32, simulations: usize, seed: u64, rule: ThresholdRule) -> Result<Self> {
        let sample = simulate_null(lambda1, depth, simulations, seed)?;
        Self::from_sample(lambda1, depth, seed, sample, rule)
    }

    pub fn simulations(&self) -> usize {
        self.sample.len()
    }

    fn count_at_least(&self, x: f64) -> usize {
        self.sample.len() - self.sample.partition_point(|&v| v < x)
    }

    fn count_greater(&self, x: f64) -> usize {
        self.sample.len() - self.sample.partition_point(|&v| v <= x)
    }

    fn check(lambda_obs: f64) -> Result<()> {
        if lambda_obs.is_nan() || lambda_obs < 1.0 - 1e-12 {
            return Err(Error::InvalidArgument(format!("Λ̂ must be ≥ 1, got {lambda_obs}")));
        }
        Ok(())
    }

    fn tail_p(&self, tail: &TailFit, lambda_obs: f64) -> f64 {
        let frac = tail.n_exceedances as f64 / self.simulations() as f64;
        frac * tail.gpd.survival(lambda_obs - tail.threshold)
    }

    /// Empirical `(#{Λ ≥ λ} + 1)/(M + 1)` up to `u`, GPD tail beyond.
    pub fn p_value(&self, lambda_obs: f64) -> Result<f64> {
        Self::check(lambda_obs)?;
        if let Some(tail) = &self.tail {
            if lambda_obs > tail.threshold {
                return Ok(self.tail_p(tail, lambda_obs));
            }
        }
        let m = self.simulations() as f64;
        Ok((self.count_at_least(lambda_obs) as f64 + 1.0) / (m + 1.0))
    }

    /// As [`Self::p_value`] but from `log Λ̂`, for statistics too large for `f64`.
    pub fn p_value_log(&self, log_lambda_obs: f64) -> Result<f64> {
        if log_lambda_obs.is_nan() {
            return Err(Error::InvalidArgument("log Λ̂ is NaN".into()));
        }
        if log_lambda_obs < 700.0 {
            return self.p_value(log_lambda_obs.exp());
        }
        let m = self.simulations() as f64;
        match &self.tail {
            None => Ok(1.0 / (m + 1.0)),
            Some(t) if t.gpd.xi > 1e-12 => {
                let frac = t.n_exceedances as f64 / m;
                let xi = t.gpd.xi;
                let log_s = -((xi / t.gpd.beta).ln() + log_lambda_obs) / xi;
                Ok(frac * log_s.exp())
            }
            Some(_) => Ok(0.0),
        }
    }

    /// Randomised variant `(#{Λ > λ} + U(#{Λ = λ} + 1))/(M + 1)` below `u`,
    /// exactly uniform for draws exchangeable with the sample.
    pub fn p_value_randomized(&self, lambda_obs: f64, uniform: f64) -> Result<f64> {
        Self::check(lambda_obs)?;
        if let Some(tail) = &self.tail {
            if lambda_obs > tail.threshold {
                return Ok(self.tail_p(tail, lambda_obs));
            }
        }
        let gt = self.count_greater(lambda_obs) as f64;
        let eq = (self.count_at_least(lambda_obs) - self.count_greater(lambda_obs)) as f64;
        Ok((gt + uniform * (eq + 1.0)) / (self.simulations() as f64 + 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_bf_at_zero_statistic() {
        let bf = null_log_bf(0.5, 0.0).exp();
        assert!((bf - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn required_permutations_examples() {
        assert_eq!(required_permutations(0.5).unwrap(), 1);
        assert_eq!(required_permutations(0.01).unwrap(), 2500);
        let n = required_permutations(8e-6).unwrap();
        assert_eq!(n, 3_906_250_000);
        assert!(required_permutations(0.0).is_err());
    }

    #[test]
    fn lambda1_rounding() {
        assert_eq!(round_lambda1(0.99974, false), 0.99974);
        assert_eq!(round_lambda1(0.123456789, false), 0.1234568);
        assert_eq!(round_lambda1(0.123456789, true), 0.1234567);
        assert!(round_lambda1(0.999_999_99, false) < 1.0);
        assert!(round_lambda1(1e-12, false) > 0.0);
    }

    #[test]
    fn tiny_lambda1_gives_unit_statistics() {
        let s = simulate_null(1e-9, 4, 1000, 3).unwrap();
        assert!(s.iter().all(|&v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn threshold_rule_parsing() {
        assert_eq!("van-kerm".parse::<ThresholdRule>().unwrap(), ThresholdRule::VanKerm);
        assert_eq!("quantile:0.95".parse::<ThresholdRule>().unwrap(), ThresholdRule::Quantile(0.95));
        assert_eq!("quantile".parse::<ThresholdRule>().unwrap(), ThresholdRule::Quantile(0.99));
        assert!("1.5".parse::<ThresholdRule>().is_err());
    }

    #[test]
    fn p_value_basics() {
        let sample = simulate_null(0.9, 5, 5000, 11).unwrap();
        let model = NullModel::from_sample(0.9, 5, 11, sample, ThresholdRule::default()).unwrap();
        assert_eq!(model.p_value(1.0).unwrap(), 1.0);
        assert!(model.p_value(0.5).is_err());
        let grid: Vec<f64> = (0..400).map(|i| 1.0 + i as f64 * 0.05).collect();
        let ps: Vec<f64> = grid.iter().map(|&l| model.p_value(l).unwrap()).collect();
        for w in ps.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert!(model.p_value_log(5000.0).unwrap() < 1e-100);
    }
}
