use std::ops::Range;

use super::{Chromosome, CohortData};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub window_bp: u64,
    pub overlap_fraction: f64,
    pub max_gap_bp: u64,
    /// Target average number of SNPs behind each coefficient at the deepest scale.
    pub min_snps_per_coeff: f64,
    /// Multiplier on `min_snps_per_coeff` when choosing the depth. At 0.95 a
    /// window averaging 9.7 SNPs per coefficient still qualifies for the
    /// nominal 10.
    pub depth_slack: f64,
    pub depth_cap: Option<u32>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_bp: 1_000_000,
            overlap_fraction: 0.5,
            max_gap_bp: 10_000,
            min_snps_per_coeff: 10.0,
            depth_slack: 0.95,
            depth_cap: None,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_bp == 0 {
            return Err(Error::InvalidArgument("window_bp must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::InvalidArgument("overlap_fraction must lie in [0, 1)".into()));
        }
        if self.max_gap_bp == 0 {
            return Err(Error::InvalidArgument("max_gap_bp must be positive".into()));
        }
        if !(self.min_snps_per_coeff > 0.0) {
            return Err(Error::InvalidArgument("min_snps_per_coeff must be positive".into()));
        }
        if !(self.depth_slack > 0.0 && self.depth_slack <= 1.0) {
            return Err(Error::InvalidArgument("depth_slack must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn stride_bp(&self) -> u64 {
        ((self.window_bp as f64 * (1.0 - self.overlap_fraction)).round() as u64).max(1)
    }

    /// Deepest analysed scale for a window with `n_snps` SNPs, or `None` when
    /// even scale 0 falls short of the density rule.
    pub fn depth_for(&self, n_snps: usize) -> Option<u32> {
        if n_snps < 2 {
            return None;
        }
        let need = self.min_snps_per_coeff * self.depth_slack;
        if (n_snps as f64) < need {
            return None;
        }
        let mut depth = 0u32;
        while (n_snps as f64) / 2f64.powi(depth as i32 + 1) >= need {
            depth += 1;
        }
        // A detail coefficient needs at least two grid points per block.
        let j = grid_exponent(n_snps);
        depth = depth.min(j.saturating_sub(1));
        if let Some(cap) = self.depth_cap {
            depth = depth.min(cap);
        }
        Some(depth)
    }
}

/// Smallest `J` with `2^J >= n`.
pub fn grid_exponent(n: usize) -> u32 {
    n.max(1).next_power_of_two().trailing_zeros()
}

/// A genomic interval `[start_bp, end_bp]` (both ends inclusive) screened as a unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Window {
    pub chromosome: String,
    pub start_bp: u64,
    pub end_bp: u64,
    /// Indices into the chromosome's SNP list.
    pub snp_range: Range<usize>,
    pub n_snps: usize,
    pub grid_exponent: u32,
    pub depth: u32,
}

impl Window {
    /// Window over an explicit SNP range with a given depth.
    pub fn new(
        chromosome: impl Into<String>,
        start_bp: u64,
        end_bp: u64,
        snp_range: Range<usize>,
        depth: u32,
    ) -> Result<Self> {
        let n_snps = snp_range.len();
        if n_snps < 2 {
            return Err(Error::InvalidArgument(format!(
                "a window needs at least 2 SNPs, got {n_snps}"
            )));
        }
        if end_bp <= start_bp {
            return Err(Error::InvalidArgument("window end must exceed start".into()));
        }
        let j = grid_exponent(n_snps);
        if depth >= j {
            return Err(Error::InvalidArgument(format!(
                "depth {depth} too deep for a grid of 2^{j} points"
            )));
        }
        Ok(Self {
            chromosome: chromosome.into(),
            start_bp,
            end_bp,
            snp_range,
            n_snps,
            grid_exponent: j,
            depth,
        })
    }

    pub fn grid_size(&self) -> usize {
        1 << self.grid_exponent
    }

    pub fn n_coefficients(&self) -> usize {
        (1 << (self.depth + 1)) - 1
    }
}

fn windows_for_chromosome(chrom: &Chromosome, config: &WindowConfig, out: &mut Vec<Window>) {
    let positions: Vec<u64> = chrom.positions().collect();
    let (Some(&first), Some(&last)) = (positions.first(), positions.last()) else {
        return;
    };
    let stride = config.stride_bp();
    let mut start = first;
    loop {
        let end = start + config.window_bp;
        let lo = positions.partition_point(|&p| p < start);
        let hi = positions.partition_point(|&p| p <= end);
        let inside = &positions[lo..hi];
        let gap_ok = inside.windows(2).all(|w| w[1] - w[0] <= config.max_gap_bp);
        if gap_ok {
            if let Some(depth) = config.depth_for(inside.len()) {
                out.push(Window {
                    chromosome: chrom.name.clone(),
                    start_bp: start,
                    end_bp: end,
                    snp_range: lo..hi,
                    n_snps: inside.len(),
                    grid_exponent: grid_exponent(inside.len()),
                    depth,
                });
            }
        }
        if end >= last {
            break;
        }
        start += stride;
    }
}

/// Tile every chromosome with windows of `window_bp` starting at its first
/// SNP and advancing by `window_bp * (1 - overlap_fraction)` until a window
/// reaches the last SNP. Windows with an inter-SNP gap above `max_gap_bp`, or
/// too few SNPs for scale 0, are dropped.
pub fn define_windows(cohort: &CohortData, config: &WindowConfig) -> Result<Vec<Window>> {
    config.validate()?;
    let mut out = Vec::new();
    for chrom in &cohort.chromosomes {
        windows_for_chromosome(chrom, config, &mut out);
    }
    Ok(out)
}
