//! Cohort ingestion, validation and window definition.

mod io;
mod windows;

pub use io::{
    load_cohort, read_covariates, read_genotypes, read_phenotype, write_genotypes, GenotypeTable,
    LoadOptions,
    DEFAULT_MIN_IMPUTATION_QUALITY,
};
pub use windows::{define_windows, grid_exponent, Window, WindowConfig};

use crate::{Error, Result};

/// One SNP row after quality control.
#[derive(Debug, Clone, PartialEq)]
pub struct SnpRecord {
    pub chromosome: String,
    pub position: u64,
    pub id: String,
    pub imputation_quality: f64,
    /// One dosage in `[0, 2]` per individual.
    pub dosages: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chromosome {
    pub name: String,
    /// Strictly increasing positions.
    pub snps: Vec<SnpRecord>,
}

impl Chromosome {
    pub fn positions(&self) -> impl Iterator<Item = u64> + '_ {
        self.snps.iter().map(|s| s.position)
    }
}

/// Validated, immutable cohort: genotypes grouped by chromosome, one phenotype
/// value and one covariate row per individual.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortData {
    pub sample_ids: Vec<String>,
    pub chromosomes: Vec<Chromosome>,
    pub phenotype: Vec<f64>,
    /// Covariates stored by column; each column has length `n`.
    pub covariates: Vec<Vec<f64>>,
}

impl CohortData {
    /// Validate and assemble a cohort. Records must already be grouped by
    /// chromosome (contiguous) with strictly increasing positions.
    pub fn new(
        sample_ids: Vec<String>,
        records: Vec<SnpRecord>,
        phenotype: Vec<f64>,
        covariate_rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = phenotype.len();
        if sample_ids.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} phenotype values for {} genotype columns",
                n,
                sample_ids.len()
            )));
        }
        if !covariate_rows.is_empty() && covariate_rows.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate rows for {} individuals",
                covariate_rows.len(),
                n
            )));
        }
        let n_cov = covariate_rows.first().map_or(0, Vec::len);
        let mut covariates = vec![Vec::with_capacity(n); n_cov];
        for (i, row) in covariate_rows.iter().enumerate() {
            if row.len() != n_cov {
                return Err(Error::DimensionMismatch(format!(
                    "covariate row {} has {} columns, expected {}",
                    i + 1,
                    row.len(),
                    n_cov
                )));
            }
            for (col, &v) in covariates.iter_mut().zip(row) {
                col.push(v);
            }
        }
        if phenotype.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite phenotype value".into()));
        }
        if n < 2 || phenotype.iter().all(|&v| v == phenotype[0]) {
            return Err(Error::Degenerate("phenotype has zero variance".into()));
        }

        let mut chromosomes: Vec<Chromosome> = Vec::new();
        for rec in records {
            if rec.dosages.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "SNP {} has {} dosages for {} individuals",
                    rec.id,
                    rec.dosages.len(),
                    n
                )));
            }
            if let Some(&bad) = rec.dosages.iter().find(|d| !(0.0..=2.0).contains(*d)) {
                return Err(Error::DosageOutOfRange {
                    snp: rec.id,
                    value: bad,
                });
            }
            match chromosomes.last_mut() {
                Some(c) if c.name == rec.chromosome => {
                    let prev = c.snps.last().map(|s| s.position).unwrap_or(0);
                    if rec.position == prev {
                        return Err(Error::DuplicatePosition {
                            chrom: rec.chromosome,
                            pos: rec.position,
                        });
                    }
                    if rec.position < prev {
                        return Err(Error::NonMonotonePositions {
                            chrom: rec.chromosome,
                            pos: rec.position,
                        });
                    }
                    c.snps.push(rec);
                }
                _ => {
                    if chromosomes.iter().any(|c| c.name == rec.chromosome) {
                        return Err(Error::NonMonotonePositions {
                            chrom: rec.chromosome,
                            pos: rec.position,
                        });
                    }
                    chromosomes.push(Chromosome {
                        name: rec.chromosome.clone(),
                        snps: vec![rec],
                    });
                }
            }
        }
        Ok(Self {
            sample_ids,
            chromosomes,
            phenotype,
            covariates,
        })
    }

    pub fn n_individuals(&self) -> usize {
        self.phenotype.len()
    }

    pub fn n_snps(&self) -> usize {
        self.chromosomes.iter().map(|c| c.snps.len()).sum()
    }

    pub fn chromosome(&self, name: &str) -> Option<&Chromosome> {
        self.chromosomes.iter().find(|c| c.name == name)
    }

    /// Same genotypes with `g -> 2 - g` applied to every dosage.
    pub fn flipped_coding(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.chromosomes {
            for s in &mut c.snps {
                for d in &mut s.dosages {
                    *d = 2.0 - *d;
                }
            }
        }
        out
    }
}

/// Sort key placing numbered chromosomes first in numeric order.
pub(crate) fn chromosome_sort_key(name: &str) -> (u8, u64, String) {
    let bare = name
        .strip_prefix("chr")
        .or_else(|| name.strip_prefix("CHR"))
        .unwrap_or(name);
    match bare.parse::<u64>() {
        Ok(v) => (0, v, String::new()),
        Err(_) => (1, 0, bare.to_string()),
    }
}
