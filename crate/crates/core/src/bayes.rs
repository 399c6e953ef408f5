//! Bayes factors for reverse regression of a coefficient on the phenotype.
//!
//! For a response `y` (one rank-normalised wavelet coefficient across the
//! cohort) the null model regresses `y` on the intercept and covariates, the
//! alternative adds the phenotype. With flat priors on the nuisance effects,
//! `β₁ ~ N(0, σ_b² σ²)` and `p(σ²) ∝ 1/σ²`, the Bayes factor is
//!
//! ```text
//! BF = (1 + σ_b² x̃ᵀx̃)^(-1/2) · (RSS₀ / RSS₁)^((n - q) / 2)
//! RSS₀ = ỹᵀỹ,  RSS₁ = RSS₀ - (x̃ᵀỹ)² / (x̃ᵀx̃ + σ_b⁻²)
//! ```
//!
//! where tildes denote residuals after projecting out `[1, C]` (rank `q`).
//! Under the null, `2 log BF ≈ λ₁ χ²₁ + log(1 - λ₁)` with
//! `λ₁ = σ_b² x̃ᵀx̃ / (1 + σ_b² x̃ᵀx̃)`.

use crate::{Error, Result};

pub const DEFAULT_SIGMA_B: f64 = 0.2;

/// Orthonormal basis of the span of `[1, C]`, used to residualise vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    n: usize,
    basis: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Projector {
    /// Basis of the intercept plus the given covariate columns, by modified
    /// Gram–Schmidt with one reorthogonalisation pass.
    pub fn new(n: usize, covariates: &[Vec<f64>]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("empty design".into()));
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(covariates.len() + 1);
        let ones = vec![1.0; n];
        for (j, col) in std::iter::once(&ones).chain(covariates).enumerate() {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "covariate column {j} has {} rows, expected {n}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite value in covariate {j}")));
            }
            let norm0 = dot(col, col).sqrt();
            let mut v = col.clone();
            for _ in 0..2 {
                for q in &basis {
                    let a = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(x, qi)| *x -= a * qi);
                }
            }
            let norm = dot(&v, &v).sqrt();
            if norm0 == 0.0 || norm <= 1e-10 * norm0 {
                return Err(Error::DegenerateDesign(format!(
                    "covariate matrix is rank deficient (column {j})"
                )));
            }
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
        Ok(Self { n, basis })
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `v` minus its projection on the span, in place.
    pub fn residualize(&self, v: &mut [f64]) {
        for q in &self.basis {
            let a = dot(q, v);
            v.iter_mut().zip(q).for_each(|(x, qi)| *x -= a * qi);
        }
    }
}

/// Everything about the regression that does not depend on the response.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignContext {
    pub n: usize,
    pub projector: Projector,
    /// Phenotype with `[1, C]` projected out.
    pub residualized_phenotype: Vec<f64>,
    pub xtx: f64,
    pub sigma_b: f64,
    /// Rank of `[1, C]`.
    pub q: usize,
}

/// Residualise the phenotype against the intercept and covariates.
pub fn build_design(phenotype: &[f64], covariates: &[Vec<f64>], sigma_b: f64) -> Result<DesignContext> {
    let n = phenotype.len();
    if !(sigma_b > 0.0 && sigma_b.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma_b must be positive, got {sigma_b}")));
    }
    if phenotype.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite phenotype value".into()));
    }
    if n < 2 || phenotype.iter().all(|&v| v == phenotype[0]) {
        return Err(Error::Degenerate("phenotype has zero variance".into()));
    }
    let projector = Projector::new(n, covariates)?;
    let q = projector.rank();
    if n <= q + 1 {
        return Err(Error::DegenerateDesign(format!(
            "{n} individuals cannot support {q} nuisance terms plus the phenotype"
        )));
    }
    let mean = phenotype.iter().sum::<f64>() / n as f64;
    let centered_ss: f64 = phenotype.iter().map(|v| (v - mean) * (v - mean)).sum();
    let mut x = phenotype.to_vec();
    projector.residualize(&mut x);
    projector.residualize(&mut x);
    let xtx = dot(&x, &x);
    if !(xtx > 1e-12 * centered_ss) {
        return Err(Error::DegenerateDesign(
            "phenotype is collinear with the covariates".into(),
        ));
    }
    Ok(DesignContext {
        n,
        projector,
        residualized_phenotype: x,
        xtx,
        sigma_b,
        q,
    })
}

/// `λ₁ = σ_b² x̃ᵀx̃ / (1 + σ_b² x̃ᵀx̃)`.
pub fn lambda1(ctx: &DesignContext) -> f64 {
    lambda1_from(ctx.sigma_b, ctx.xtx)
}

pub fn lambda1_from(sigma_b: f64, xtx: f64) -> f64 {
    let a = sigma_b * sigma_b * xtx;
    a / (1.0 + a)
}

/// Sufficient statistics of one response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseStats {
    /// `ỹᵀỹ`
    pub rss0: f64,
    /// `x̃ᵀỹ`
    pub xty: f64,
}

impl DesignContext {
    pub fn response_stats(&self, y: &[f64]) -> Result<ResponseStats> {
        let mut buf = Vec::new();
        self.response_stats_with(y, &mut buf)
    }

    /// As [`Self::response_stats`], reusing `buf` for the residualised response.
    pub fn response_stats_with(&self, y: &[f64], buf: &mut Vec<f64>) -> Result<ResponseStats> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "response has {} entries, design has {}",
                y.len(),
                self.n
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite response".into()));
        }
        buf.clear();
        buf.extend_from_slice(y);
        let raw = dot(buf, buf);
        self.projector.residualize(buf);
        let mut rss0 = dot(buf, buf);
        // rounding residue of a response inside the nuisance span
        if rss0 <= 1e-24 * raw {
            rss0 = 0.0;
        }
        Ok(ResponseStats {
            rss0,
            xty: dot(&self.residualized_phenotype, buf),
        })
    }

    /// `log BF` from precomputed statistics.
    pub fn log_bayes_factor_from(&self, stats: ResponseStats) -> Result<f64> {
        let ResponseStats { rss0, xty } = stats;
        if !(rss0 > 0.0) {
            return Err(Error::Degenerate(
                "response has no variation outside the nuisance span".into(),
            ));
        }
        let s2 = self.sigma_b * self.sigma_b;
        let ratio = xty * xty / ((self.xtx + 1.0 / s2) * rss0);
        if !(ratio < 1.0) {
            return Err(Error::Numerical(format!(
                "non-positive alternative residual sum of squares (ratio {ratio})"
            )));
        }
        let dof = (self.n - self.q) as f64;
        Ok(-0.5 * (s2 * self.xtx).ln_1p() - 0.5 * dof * (-ratio).ln_1p())
    }

    pub fn log_bayes_factor(&self, y: &[f64]) -> Result<f64> {
        self.log_bayes_factor_from(self.response_stats(y)?)
    }
}

/// Bayes factor of association between `y` and the phenotype.
pub fn bayes_factor(ctx: &DesignContext, y: &[f64]) -> Result<f64> {
    Ok(ctx.log_bayes_factor(y)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn intercept_only_centering() {
        let ctx = build_design(&[1.0, 2.0, 3.0, 4.0], &[], DEFAULT_SIGMA_B).unwrap();
        for (a, b) in ctx.residualized_phenotype.iter().zip([-1.5, -0.5, 0.5, 1.5]) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
        assert_relative_eq!(ctx.xtx, 5.0, epsilon = 1e-14);
        assert_eq!(ctx.q, 1);
    }

    #[test]
    fn centered_phenotype_keeps_sum_of_squares() {
        // Σφ² = 25, already centred
        let phi = [3.0, -3.0, 4.0, -4.0];
        let ctx = build_design(&phi, &[], 0.2).unwrap();
        assert_relative_eq!(ctx.xtx, 50.0, epsilon = 1e-12);
        let phi = [2.5, -2.5, 2.5, -2.5];
        let ctx = build_design(&phi, &[], 0.2).unwrap();
        assert_relative_eq!(ctx.xtx, 25.0, epsilon = 1e-12);
        assert_relative_eq!(lambda1(&ctx), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn phenotype_equal_to_covariate_is_rejected() {
        let phi = vec![1.0, 3.0, 2.0, 5.0];
        let err = build_design(&phi, std::slice::from_ref(&phi), 0.2).unwrap_err();
        assert!(matches!(err, Error::DegenerateDesign(_)), "{err}");
    }

    #[test]
    fn rank_deficient_covariates() {
        let c = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let c2: Vec<f64> = c.iter().map(|v| 2.0 * v + 1.0).collect();
        let err = build_design(&[0.0, 1.0, 0.0, 2.0, 1.0], &[c, c2], 0.2).unwrap_err();
        assert!(matches!(err, Error::DegenerateDesign(_)));
    }

    #[test]
    fn zero_variance_phenotype() {
        assert!(matches!(
            build_design(&[2.0; 5], &[], 0.2).unwrap_err(),
            Error::Degenerate(_)
        ));
    }

    #[test]
    fn orthogonal_response_gives_prior_penalty_only() {
        let phi = [2.5, -2.5, 2.5, -2.5];
        let ctx = build_design(&phi, &[], 0.2).unwrap();
        let y = [1.0, 1.0, -1.0, -1.0];
        assert_relative_eq!(bayes_factor(&ctx, &y).unwrap(), 0.5f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(
            2.0 * ctx.log_bayes_factor(&y).unwrap(),
            (1.0 - lambda1(&ctx)).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn constant_response_is_degenerate() {
        let ctx = build_design(&[1.0, 2.0, 3.0, 4.0], &[], 0.2).unwrap();
        assert!(matches!(
            bayes_factor(&ctx, &[3.0; 4]).unwrap_err(),
            Error::Degenerate(_)
        ));
    }

    #[test]
    fn lambda1_limits() {
        assert_relative_eq!(lambda1_from(0.2, 3845.15 / 0.04), 0.99974, epsilon = 1e-5);
        assert!(lambda1_from(0.2, 1e-12) < 1e-13);
    }

    #[test]
    fn sign_flip_and_projection_invariance() {
        let phi: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let cov: Vec<f64> = (0..50).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let ctx = build_design(&phi, std::slice::from_ref(&cov), 0.2).unwrap();
        let y: Vec<f64> = (0..50).map(|i| ((i * 29) % 17) as f64 * 0.1 + (i % 5) as f64).collect();
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let shifted: Vec<f64> = y.iter().zip(&cov).map(|(v, c)| v + 3.0 - 0.7 * c).collect();
        let b = ctx.log_bayes_factor(&y).unwrap();
        assert_eq!(b, ctx.log_bayes_factor(&neg).unwrap());
        assert_relative_eq!(b, ctx.log_bayes_factor(&shifted).unwrap(), max_relative = 1e-8);
    }
}
