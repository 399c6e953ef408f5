//! TSV readers for genotype, phenotype and covariate files.
//!
//! Genotype file: header `chrom pos id iq s1 .. sn`, then one SNP per row.
//! Phenotype file: one value per row, optional header line.
//! Covariate file: `n` rows by `c` tab-separated columns, optional header line.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{chromosome_sort_key, CohortData, SnpRecord};
use crate::{Error, Result};

/// SNPs imputed below this quality are dropped at ingestion.
pub const DEFAULT_MIN_IMPUTATION_QUALITY: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub min_imputation_quality: f64,
    /// Sort SNP rows by (chromosome, position) instead of rejecting
    /// out-of-order input.
    pub sort_by_position: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            min_imputation_quality: DEFAULT_MIN_IMPUTATION_QUALITY,
            sort_by_position: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeTable {
    pub sample_ids: Vec<String>,
    pub records: Vec<SnpRecord>,
    /// Rows removed by the imputation-quality filter.
    pub dropped_low_quality: usize,
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("{what}: not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{what}: non-finite value {field:?}")));
    }
    Ok(v)
}

fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    reader.lines().enumerate().map(|(i, l)| (i + 1, l))
}

fn io_err(e: std::io::Error, line: usize) -> Error {
    Error::parse(line, format!("read failed: {e}"))
}

/// Parse a genotype TSV. Rows below `min_iq` are counted and dropped after
/// their fields have been validated.
pub fn read_genotypes<R: BufRead>(reader: R, min_iq: f64) -> Result<GenotypeTable> {
    let mut sample_ids: Option<Vec<String>> = None;
    let mut records = Vec::new();
    let mut dropped = 0;
    for (lineno, line) in lines(reader) {
        let line = line.map_err(|e| io_err(e, lineno))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let Some(ids) = &sample_ids else {
            let head: Vec<String> = fields
                .iter()
                .take(4)
                .map(|f| f.trim().trim_start_matches('#').to_ascii_lowercase())
                .collect();
            if head != ["chrom", "pos", "id", "iq"] {
                return Err(Error::parse(
                    lineno,
                    "genotype header must start with chrom, pos, id, iq",
                ));
            }
            if fields.len() < 5 {
                return Err(Error::parse(lineno, "genotype header lists no samples"));
            }
            sample_ids = Some(fields[4..].iter().map(|s| s.trim().to_string()).collect());
            continue;
        };
        if fields.len() != ids.len() + 4 {
            return Err(Error::parse(
                lineno,
                format!("expected {} columns, found {}", ids.len() + 4, fields.len()),
            ));
        }
        let chromosome = fields[0].trim();
        if chromosome.is_empty() {
            return Err(Error::parse(lineno, "empty chromosome"));
        }
        let position: u64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad position {:?}", fields[1])))?;
        let imputation_quality = parse_f64(fields[3], lineno, "iq")?;
        if !(0.0..=1.0).contains(&imputation_quality) {
            return Err(Error::parse(lineno, format!("iq {imputation_quality} outside [0, 1]")));
        }
        let mut dosages = Vec::with_capacity(ids.len());
        for f in &fields[4..] {
            let d = parse_f64(f, lineno, "dosage")?;
            if !(0.0..=2.0).contains(&d) {
                return Err(Error::DosageOutOfRange {
                    snp: fields[2].trim().to_string(),
                    value: d,
                });
            }
            dosages.push(d);
        }
        if imputation_quality < min_iq {
            dropped += 1;
            continue;
        }
        records.push(SnpRecord {
            chromosome: chromosome.to_string(),
            position,
            id: fields[2].trim().to_string(),
            imputation_quality,
            dosages,
        });
    }
    let sample_ids = sample_ids.ok_or_else(|| Error::parse(1, "empty genotype file"))?;
    Ok(GenotypeTable {
        sample_ids,
        records,
        dropped_low_quality: dropped,
    })
}

/// Numeric rows of a TSV; a first line that does not parse is taken as a header.
fn read_numeric_rows<R: BufRead>(reader: R, what: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut first = true;
    for (lineno, line) in lines(reader) {
        let line = line.map_err(|e| io_err(e, lineno))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>> = line
            .split('\t')
            .map(|f| parse_f64(f, lineno, what))
            .collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if first => {}
            Err(e) => return Err(e),
        }
        first = false;
    }
    Ok(rows)
}

/// Phenotype file: exactly one value per row.
pub fn read_phenotype<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let rows = read_numeric_rows(reader, "phenotype")?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| match r.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::parse(
                i + 1,
                format!("phenotype row has {} columns, expected 1", r.len()),
            )),
        })
        .collect()
}

/// Covariate file: rows of equal width.
pub fn read_covariates<R: BufRead>(reader: R) -> Result<Vec<Vec<f64>>> {
    let rows = read_numeric_rows(reader, "covariate")?;
    if let Some(first) = rows.first() {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != first.len()) {
            return Err(Error::DimensionMismatch(format!(
                "covariate row {} has {} columns, expected {}",
                i + 1,
                r.len(),
                first.len()
            )));
        }
    }
    Ok(rows)
}

/// Write records in the genotype TSV layout read by [`read_genotypes`].
pub fn write_genotypes<W: Write>(sample_ids: &[String], records: &[SnpRecord], mut out: W) -> std::io::Result<()> {
    write!(out, "chrom\tpos\tid\tiq")?;
    for s in sample_ids {
        write!(out, "\t{s}")?;
    }
    writeln!(out)?;
    for r in records {
        write!(out, "{}\t{}\t{}\t{}", r.chromosome, r.position, r.id, r.imputation_quality)?;
        for d in &r.dosages {
            write!(out, "\t{d}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

/// Read and validate a cohort from its three files.
pub fn load_cohort(
    genotype_path: &Path,
    phenotype_path: &Path,
    covariate_path: Option<&Path>,
    options: LoadOptions,
) -> Result<CohortData> {
    let mut table = with_path(
        genotype_path,
        read_genotypes(open(genotype_path)?, options.min_imputation_quality),
    )?;
    let phenotype = with_path(phenotype_path, read_phenotype(open(phenotype_path)?))?;
    let covariates = match covariate_path {
        Some(p) => with_path(p, read_covariates(open(p)?))?,
        None => Vec::new(),
    };
    if options.sort_by_position {
        table
            .records
            .sort_by(|a, b| {
                chromosome_sort_key(&a.chromosome)
                    .cmp(&chromosome_sort_key(&b.chromosome))
                    .then(a.position.cmp(&b.position))
            });
    }
    CohortData::new(table.sample_ids, table.records, phenotype, covariates)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GENO: &str = "chrom\tpos\tid\tiq\ts1\ts2\ts3\ts4\n\
        1\t100\trs1\t1.0\t0\t1\t2\t0.5\n\
        1\t200\trs2\t1.0\t1\t1\t0\t0\n\
        1\t300\trs3\t1.0\t2\t0\t0\t1.25\n";

    fn cohort(geno: &str, pheno: &str) -> Result<CohortData> {
        let t = read_genotypes(geno.as_bytes(), DEFAULT_MIN_IMPUTATION_QUALITY)?;
        let p = read_phenotype(pheno.as_bytes())?;
        CohortData::new(t.sample_ids, t.records, p, vec![])
    }

    #[test]
    fn writer_round_trips() {
        let t = read_genotypes(GENO.as_bytes(), 0.0).unwrap();
        let mut buf = Vec::new();
        write_genotypes(&t.sample_ids, &t.records, &mut buf).unwrap();
        assert_eq!(read_genotypes(buf.as_slice(), 0.0).unwrap(), t);
    }

    #[test]
    fn identity_ingestion() {
        let c = cohort(GENO, "1.0\n2.0\n0.5\n3.0\n").unwrap();
        assert_eq!(c.n_individuals(), 4);
        assert_eq!(c.n_snps(), 3);
        assert_eq!(c.chromosomes[0].snps[2].dosages, vec![2.0, 0.0, 0.0, 1.25]);
    }

    #[test]
    fn low_quality_snp_is_dropped() {
        let geno = GENO.replace("rs2\t1.0", "rs2\t0.65");
        let t = read_genotypes(geno.as_bytes(), DEFAULT_MIN_IMPUTATION_QUALITY).unwrap();
        assert_eq!(t.dropped_low_quality, 1);
        assert!(t.records.iter().all(|r| r.id != "rs2"));
    }

    #[test]
    fn phenotype_header_is_optional() {
        assert_eq!(read_phenotype("pheno\n1\n0\n".as_bytes()).unwrap(), vec![1.0, 0.0]);
        assert!(read_phenotype("1\nx\n".as_bytes()).is_err());
    }

    #[test]
    fn phenotype_length_mismatch() {
        let err = cohort(GENO, "1\n2\n3\n4\n5\n").unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)), "{err}");
    }

    #[test]
    fn malformed_and_out_of_range_dosages() {
        let bad = GENO.replace("\t0.5\n", "\tabc\n");
        assert!(matches!(
            read_genotypes(bad.as_bytes(), 0.7).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        let bad = GENO.replace("\t0.5\n", "\t2.5\n");
        assert!(matches!(
            read_genotypes(bad.as_bytes(), 0.7).unwrap_err(),
            Error::DosageOutOfRange { .. }
        ));
    }

    #[test]
    fn position_order_is_enforced() {
        let swapped = GENO.replace("1\t300\trs3", "1\t150\trs3");
        assert!(matches!(
            cohort(&swapped, "1\n2\n3\n4\n").unwrap_err(),
            Error::NonMonotonePositions { .. }
        ));
        let dup = GENO.replace("1\t300\trs3", "1\t200\trs3");
        assert!(matches!(
            cohort(&dup, "1\n2\n3\n4\n").unwrap_err(),
            Error::DuplicatePosition { .. }
        ));
    }

    #[test]
    fn zero_variance_phenotype() {
        assert!(matches!(
            cohort(GENO, "1\n1\n1\n1\n").unwrap_err(),
            Error::Degenerate(_)
        ));
    }

    #[test]
    fn covariates_are_stored_by_column() {
        let t = read_genotypes(GENO.as_bytes(), 0.7).unwrap();
        let cov = read_covariates("pc1\tpc2\n1\t5\n2\t6\n3\t7\n4\t8\n".as_bytes()).unwrap();
        let c = CohortData::new(t.sample_ids, t.records, vec![1.0, 2.0, 3.0, 5.0], cov).unwrap();
        assert_eq!(c.covariates, vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]]);
        assert!(read_covariates("1\t2\n3\n".as_bytes()).is_err());
    }
}
