//! Regional association screening on dense SNP dosage data.
//!
//! A window of SNPs is mapped onto a dyadic grid per individual, decomposed
//! with an orthonormal Haar transform, shrunk and rank-normalised across the
//! cohort. Each scaling (`c`) or detail (`d`) coefficient is tested against
//! the phenotype with a closed-form Bayes factor under reverse regression,
//! and the per-window evidence is summarised by the likelihood ratio
//!
//! ```text
//! Λ(π) = ∏_{s,l} [π_s · BF_{sl} + (1 − π_s)]
//! ```
//!
//! maximised over the per-scale association proportions `π` by EM. The null
//! distribution of `Λ̂` is simulated from the asymptotic Bayes-factor law
//! `2 log BF = λ₁ Q + log(1 − λ₁)`, `Q ~ χ²₁`, and its upper tail is fitted
//! with a Generalized Pareto distribution to reach small p-values.
//!
//! Module map:
//! - [`data`]: genotype/phenotype/covariate ingestion and window definition
//! - [`wavelet`]: grid interpolation, Haar transform, shrinkage, rank-normal transform
//! - [`bayes`]: design residualisation, Bayes factors and `λ₁`
//! - [`screening`]: `Λ` evaluation, EM, window screens, Fisher combination
//! - [`nullsim`]: null simulation, GPD tail fit, p-values, cache files
//! - [`simharness`]: synthetic cohorts, GWAS baseline and power experiments

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod data;
mod error;
pub mod nullsim;
pub mod rng;
pub mod screening;
pub mod simharness;
pub mod stats;
pub mod wavelet;

pub use error::{Error, Result};
