//! Generalized Pareto maximum-likelihood fit of threshold exceedances.

use crate::{Error, Result};

/// Fitted GPD with standard errors from the observed information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpdFit {
    pub xi: f64,
    pub beta: f64,
    pub xi_se: Option<f64>,
    pub beta_se: Option<f64>,
    pub n: usize,
    pub log_likelihood: f64,
}

impl GpdFit {
    pub fn survival(&self, y: f64) -> f64 {
        self.log_survival(y).exp()
    }

    /// `log P(Y > y) = -(1/ξ) log(1 + ξ y / β)`.
    pub fn log_survival(&self, y: f64) -> f64 {
        gpd_log_survival(y, self.xi, self.beta)
    }
}

pub fn gpd_log_survival(y: f64, xi: f64, beta: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if xi.abs() < 1e-12 {
        return -y / beta;
    }
    let z = xi * y / beta;
    if z <= -1.0 {
        return f64::NEG_INFINITY;
    }
    -z.ln_1p() / xi
}

/// Inverse survival: the `y` with `P(Y > y) = p`.
pub fn gpd_quantile_survival(p: f64, xi: f64, beta: f64) -> f64 {
    if xi.abs() < 1e-12 {
        -beta * p.ln()
    } else {
        beta * (p.powf(-xi) - 1.0) / xi
    }
}

pub fn gpd_log_likelihood(y: &[f64], xi: f64, beta: f64) -> f64 {
    if !(beta > 0.0) {
        return f64::NEG_INFINITY;
    }
    let n = y.len() as f64;
    if xi.abs() < 1e-12 {
        return -n * beta.ln() - y.iter().sum::<f64>() / beta;
    }
    let mut s = 0.0;
    for &v in y {
        let z = xi * v / beta;
        if z <= -1.0 {
            return f64::NEG_INFINITY;
        }
        s += z.ln_1p();
    }
    -n * beta.ln() - (1.0 + 1.0 / xi) * s
}

/// Profile over `θ = ξ/β`: `ξ(θ) = mean log(1 + θy)`, `β = ξ/θ`.
fn profile(y: &[f64], mean: f64, theta: f64) -> (f64, f64, f64) {
    let n = y.len() as f64;
    if theta == 0.0 {
        return (-n * mean.ln() - n, 0.0, mean);
    }
    let xi = y.iter().map(|&v| (theta * v).ln_1p()).sum::<f64>() / n;
    let beta = xi / theta;
    (-n * beta.ln() - n * (1.0 + xi), xi, beta)
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximum-likelihood GPD fit of positive exceedances, restricted to `ξ ≥ -1`.
pub fn fit_gpd(exceedances: &[f64]) -> Result<GpdFit> {
    let n = exceedances.len();
    if n < 2 {
        return Err(Error::TooFewExceedances { found: n, required: 2 });
    }
    if exceedances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("exceedances must be finite and non-negative".into()));
    }
    let ymax = exceedances.iter().cloned().fold(f64::MIN, f64::max);
    let ymin = exceedances.iter().cloned().fold(f64::MAX, f64::min);
    if ymax - ymin <= 1e-12 * ymax.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical("GPD fit failed: constant exceedances".into()));
    }
    let mean = exceedances.iter().sum::<f64>() / n as f64;

    let mut grid: Vec<f64> = Vec::new();
    for i in 1..200 {
        grid.push(-(i as f64 / 200.0) / ymax);
    }
    for k in 3..=8 {
        grid.push(-(1.0 - 10f64.powi(-k)) / ymax);
    }
    grid.push(0.0);
    for i in 0..=240 {
        grid.push(10f64.powf(-6.0 + 12.0 * i as f64 / 240.0) / mean);
    }
    grid.sort_by(f64::total_cmp);

    let eval = |t: f64| -> f64 {
        let (ll, xi, _) = profile(exceedances, mean, t);
        if xi < -1.0 || !ll.is_finite() {
            f64::NEG_INFINITY
        } else {
            ll
        }
    };
    let values: Vec<f64> = grid.iter().map(|&t| eval(t)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v > values[b] { i } else { b });
    if !values[best].is_finite() {
        return Err(Error::Numerical("GPD fit failed: no finite likelihood".into()));
    }
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let mut a = hi - GOLDEN * (hi - lo);
    let mut b = lo + GOLDEN * (hi - lo);
    let (mut fa, mut fb) = (eval(a), eval(b));
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-14 * (lo.abs().max(hi.abs())).max(1e-300) {
            break;
        }
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + GOLDEN * (hi - lo);
            fb = eval(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - GOLDEN * (hi - lo);
            fa = eval(a);
        }
    }
    let mut theta = 0.5 * (lo + hi);
    if eval(theta) < values[best] {
        theta = grid[best];
    }
    let (ll, xi, beta) = profile(exceedances, mean, theta);
    if !(beta > 0.0 && beta.is_finite() && xi.is_finite()) {
        return Err(Error::Numerical("GPD fit did not converge".into()));
    }
    let (xi_se, beta_se) = standard_errors(exceedances, xi, beta);
    Ok(GpdFit {
        xi,
        beta,
        xi_se,
        beta_se,
        n,
        log_likelihood: ll,
    })
}

/// Inverse of the central-difference Hessian of the negative log-likelihood.
fn standard_errors(y: &[f64], xi: f64, beta: f64) -> (Option<f64>, Option<f64>) {
    let hx = 1e-4 * xi.abs().max(0.01);
    let hb = 1e-4 * beta;
    let f = |x: f64, b: f64| -gpd_log_likelihood(y, x, b);
    let f0 = f(xi, beta);
    let fxx = (f(xi + hx, beta) - 2.0 * f0 + f(xi - hx, beta)) / (hx * hx);
    let fbb = (f(xi, beta + hb) - 2.0 * f0 + f(xi, beta - hb)) / (hb * hb);
    let fxb = (f(xi + hx, beta + hb) - f(xi + hx, beta - hb) - f(xi - hx, beta + hb)
        + f(xi - hx, beta - hb))
        / (4.0 * hx * hb);
    let det = fxx * fbb - fxb * fxb;
    if !(det > 0.0 && fxx > 0.0 && det.is_finite()) {
        return (None, None);
    }
    ((fbb / det).sqrt().into(), (fxx / det).sqrt().into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_exceedances_fail() {
        assert!(matches!(fit_gpd(&[0.3; 50]), Err(Error::Numerical(_))));
        assert!(fit_gpd(&[1.0]).is_err());
    }

    #[test]
    fn exponential_profile_limit_matches() {
        let y = [0.5, 1.0, 1.5, 2.0];
        let (ll, xi, beta) = profile(&y, 1.25, 0.0);
        assert_eq!(xi, 0.0);
        assert_eq!(beta, 1.25);
        assert!((ll - gpd_log_likelihood(&y, 0.0, 1.25)).abs() < 1e-12);
        let (ll, xi, beta) = profile(&y, 1.25, 0.3);
        assert!((ll - gpd_log_likelihood(&y, xi, beta)).abs() < 1e-10);
    }

    #[test]
    fn quantile_inverts_survival() {
        for &(xi, beta) in &[(0.17, 0.01), (0.0, 2.0), (-0.3, 1.0)] {
            let y = gpd_quantile_survival(1e-3, xi, beta);
            assert!((gpd_log_survival(y, xi, beta) - 1e-3f64.ln()).abs() < 1e-9);
        }
    }
}
