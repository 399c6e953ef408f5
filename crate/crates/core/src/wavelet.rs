//! Dyadic-grid interpolation, Haar spectra, shrinkage and rank-normal scores.
//!
//! Coefficients are stored flat, scale by scale: index `2^s - 1 + l` holds
//! scale `s`, location `l`. At scale `s` location `l` covers grid indices
//! `[l·N/2^s, (l+1)·N/2^s)`, with
//!
//! ```text
//! c_{s,l} = (sum of block) / sqrt(block size)
//! d_{s,l} = (sum of left half - sum of right half) / sqrt(block size)
//! ```

use std::io::Write;

use rayon::prelude::*;

use crate::data::{Chromosome, Window};
use crate::stats::normal_quantile;
use crate::{Error, Result};

/// Flat index of coefficient `(scale, location)`.
#[inline]
pub fn coeff_index(scale: u32, location: usize) -> usize {
    (1usize << scale) - 1 + location
}

/// Inverse of [`coeff_index`].
#[inline]
pub fn coeff_scale_location(index: usize) -> (u32, usize) {
    let scale = usize::BITS - 1 - (index + 1).leading_zeros();
    (scale, index + 1 - (1usize << scale))
}

pub fn n_coefficients(depth: u32) -> usize {
    (1usize << (depth + 1)) - 1
}

/// Regular grid `t_k = (k + 1/2) 2^-J` on `[0, 1]` plus the normalised
/// positions of the observed SNPs.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicGrid {
    pub exponent: u32,
    pub snp_positions: Vec<f64>,
}

impl DyadicGrid {
    pub fn new(exponent: u32, snp_positions: Vec<f64>) -> Result<Self> {
        if snp_positions.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(
                "grid positions must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            exponent,
            snp_positions,
        })
    }

    /// Grid for a window: positions mapped affinely from `[start_bp, end_bp]`.
    pub fn for_window(window: &Window, chrom: &Chromosome) -> Result<Self> {
        let span = (window.end_bp - window.start_bp) as f64;
        let pos = chrom.snps[window.snp_range.clone()]
            .iter()
            .map(|s| (s.position.saturating_sub(window.start_bp)) as f64 / span)
            .collect();
        Self::new(window.grid_exponent, pos)
    }

    pub fn size(&self) -> usize {
        1 << self.exponent
    }

    pub fn point(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.size() as f64
    }
}

/// Linear interpolation weights: grid value `k` is
/// `(1 - frac[k]) * obs[left[k]] + frac[k] * obs[left[k] + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationWeights {
    pub left: Vec<usize>,
    pub frac: Vec<f64>,
    pub n_observations: usize,
}

impl InterpolationWeights {
    /// Weights for sorted observation positions; constant extrapolation
    /// outside the observed range.
    pub fn new(positions: &[f64], grid: &DyadicGrid) -> Result<Self> {
        let n = positions.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "interpolation needs at least 2 observations, got {n}"
            )));
        }
        if positions.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "observation positions must be strictly increasing".into(),
            ));
        }
        let size = grid.size();
        let mut left = Vec::with_capacity(size);
        let mut frac = Vec::with_capacity(size);
        let mut i = 0;
        for k in 0..size {
            let t = grid.point(k);
            if t <= positions[0] {
                left.push(0);
                frac.push(0.0);
            } else if t >= positions[n - 1] {
                left.push(n - 2);
                frac.push(1.0);
            } else {
                while positions[i + 1] <= t {
                    i += 1;
                }
                left.push(i);
                frac.push((t - positions[i]) / (positions[i + 1] - positions[i]));
            }
        }
        Ok(Self {
            left,
            frac,
            n_observations: n,
        })
    }

    pub fn apply_into(&self, obs: &[f64], out: &mut [f64]) {
        for ((o, &i), &f) in out.iter_mut().zip(&self.left).zip(&self.frac) {
            *o = if f == 0.0 {
                obs[i]
            } else if f == 1.0 {
                obs[i + 1]
            } else {
                (1.0 - f) * obs[i] + f * obs[i + 1]
            };
        }
    }

    pub fn apply(&self, obs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.left.len()];
        self.apply_into(obs, &mut out);
        out
    }

    /// Variance of each grid value under independent observation noise.
    pub fn propagate_variances(&self, obs_var: &[f64]) -> Vec<f64> {
        self.left
            .iter()
            .zip(&self.frac)
            .map(|(&i, &f)| (1.0 - f) * (1.0 - f) * obs_var[i] + f * f * obs_var[i + 1])
            .collect()
    }

    /// Variances of `c` and `d` up to `depth`: each coefficient is a linear
    /// form in the observations, so its variance is `sum_i w_i^2 var_i`.
    pub fn coefficient_variances(&self, obs_var: &[f64], depth: u32) -> CoefficientVariances {
        let n_coef = n_coefficients(depth);
        let size = self.left.len();
        let mut c = vec![0.0; n_coef];
        let mut d = vec![0.0; n_coef];
        let mut wc: Vec<f64> = Vec::new();
        let mut wd: Vec<f64> = Vec::new();
        for s in 0..=depth {
            let block = size >> s;
            let half = block / 2;
            let norm = 1.0 / (block as f64).sqrt();
            for l in 0..(1usize << s) {
                let a = l * block;
                let lo = self.left[a];
                let hi = self.left[a + block - 1] + 2;
                wc.clear();
                wc.resize(hi - lo, 0.0);
                wd.clear();
                wd.resize(hi - lo, 0.0);
                for k in a..a + block {
                    let sign = if k < a + half { 1.0 } else { -1.0 };
                    let (i, f) = (self.left[k] - lo, self.frac[k]);
                    wc[i] += 1.0 - f;
                    wc[i + 1] += f;
                    wd[i] += sign * (1.0 - f);
                    wd[i + 1] += sign * f;
                }
                let idx = coeff_index(s, l);
                let var_of = |w: &[f64]| {
                    w.iter()
                        .zip(&obs_var[lo..hi])
                        .map(|(w, v)| w * w * v)
                        .sum::<f64>()
                        * norm
                        * norm
                };
                c[idx] = var_of(&wc);
                d[idx] = var_of(&wd);
            }
        }
        CoefficientVariances { c, d }
    }
}

/// One observed point of a dosage signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub position: f64,
    pub value: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpolated {
    pub values: Vec<f64>,
    pub variances: Vec<f64>,
    pub weights: InterpolationWeights,
}

/// Interpolate one signal onto the grid, propagating noise variances through
/// the same linear weights.
pub fn interpolate_to_grid(signal: &[Observation], grid: &DyadicGrid) -> Result<Interpolated> {
    let positions: Vec<f64> = signal.iter().map(|o| o.position).collect();
    let weights = InterpolationWeights::new(&positions, grid)?;
    let obs: Vec<f64> = signal.iter().map(|o| o.value).collect();
    let var: Vec<f64> = signal.iter().map(|o| o.variance).collect();
    Ok(Interpolated {
        values: weights.apply(&obs),
        variances: weights.propagate_variances(&var),
        weights,
    })
}

/// Full orthonormal Haar decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarCoefficients {
    /// `J`, the number of detail scales; `c` and `d` hold `2^J - 1` entries.
    pub scales: u32,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl HaarCoefficients {
    pub fn c(&self, scale: u32, location: usize) -> f64 {
        self.c[coeff_index(scale, location)]
    }

    pub fn d(&self, scale: u32, location: usize) -> f64 {
        self.d[coeff_index(scale, location)]
    }

    /// Rebuild the grid values from `c_{0,0}` and every detail coefficient.
    pub fn inverse(&self) -> Vec<f64> {
        let mut level = vec![self.c[0]];
        for s in 0..self.scales {
            let mut next = Vec::with_capacity(level.len() * 2);
            for (l, &cv) in level.iter().enumerate() {
                let dv = self.d[coeff_index(s, l)];
                next.push((cv + dv) * std::f64::consts::FRAC_1_SQRT_2);
                next.push((cv - dv) * std::f64::consts::FRAC_1_SQRT_2);
            }
            level = next;
        }
        level
    }
}

fn check_dyadic(n: usize) -> Result<u32> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "Haar transform needs a power-of-two length >= 2, got {n}"
        )));
    }
    Ok(n.trailing_zeros())
}

/// Haar transform of `values` keeping scales `0..=depth` only. `c` and `d`
/// must hold `2^(depth+1) - 1` entries; `scratch` is reused across calls.
pub fn haar_to_depth(values: &[f64], depth: u32, c: &mut [f64], d: &mut [f64], scratch: &mut Vec<f64>) {
    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;
    let j = values.len().trailing_zeros();
    debug_assert!(depth < j);
    scratch.clear();
    scratch.extend_from_slice(values);
    let mut len = values.len();
    for s in (0..j).rev() {
        let half = len / 2;
        for l in 0..half {
            let (a, b) = (scratch[2 * l], scratch[2 * l + 1]);
            if s <= depth {
                d[coeff_index(s, l)] = (a - b) * H;
            }
            scratch[l] = (a + b) * H;
        }
        len = half;
        if s <= depth {
            c[coeff_index(s, 0)..coeff_index(s, 0) + half].copy_from_slice(&scratch[..half]);
        }
    }
}

/// Full orthonormal Haar transform of a length-`2^J` signal.
pub fn haar_transform(values: &[f64]) -> Result<HaarCoefficients> {
    let j = check_dyadic(values.len())?;
    let n = n_coefficients(j - 1);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    haar_to_depth(values, j - 1, &mut c, &mut d, &mut Vec::new());
    Ok(HaarCoefficients { scales: j, c, d })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVariances {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

/// Shrunken coefficients of one individual up to `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletSpectrum {
    pub individual_index: usize,
    pub depth: u32,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Universal threshold `sigma * sqrt(2 ln N)`.
pub fn universal_threshold(sigma: f64, grid_size: usize) -> f64 {
    sigma * (2.0 * (grid_size as f64).ln()).sqrt()
}

/// Soft-threshold every detail coefficient at its own universal threshold.
/// Scaling coefficients are left untouched.
pub fn visushrink(spectrum: &mut WaveletSpectrum, variances: &CoefficientVariances, grid_size: usize) {
    let factor = (2.0 * (grid_size as f64).ln()).sqrt();
    for (x, v) in spectrum.d.iter_mut().zip(&variances.d) {
        *x = soft_threshold(*x, v.sqrt() * factor);
    }
}

/// Output of the rank-based inverse-normal transform.
#[derive(Debug, Clone, PartialEq)]
pub struct RankNormal {
    pub scores: Vec<f64>,
    /// All inputs tied: scores are zero and the coefficient carries no information.
    pub degenerate: bool,
}

/// Relative gap below which two values are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Blom score for (possibly fractional) rank `r` out of `n`, computed on the
/// lower half and mirrored so that scores of reversed ranks are exact negatives.
fn blom_score(r: f64, n: usize) -> f64 {
    let nf = n as f64;
    let mirror = nf + 1.0 - r;
    if r == mirror {
        0.0
    } else if r < mirror {
        normal_quantile((r - 0.375) / (nf + 0.25))
    } else {
        -normal_quantile((mirror - 0.375) / (nf + 0.25))
    }
}

/// Rank-based inverse normal transform with Blom offsets,
/// `Φ⁻¹((rank - 3/8) / (n + 1/4))`. Values within [`TIE_TOLERANCE`] (relative
/// to the largest magnitude) of their neighbour share an average rank.
pub fn quantile_transform(values: &[f64]) -> Result<RankNormal> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "quantile transform needs at least 2 values, got {n}"
        )));
    }
    let mut scores = vec![0.0; n];
    let degenerate = quantile_transform_into(values, &mut scores, &mut Vec::new());
    Ok(RankNormal { scores, degenerate })
}

/// In-place variant of [`quantile_transform`]; returns the degenerate flag.
pub fn quantile_transform_into(values: &[f64], out: &mut [f64], order: &mut Vec<usize>) -> bool {
    let n = values.len();
    order.clear();
    order.extend(0..n);
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = TIE_TOLERANCE * scale;
    let mut i = 0;
    let mut groups = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] - values[order[j - 1]] <= tol {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        let score = blom_score(rank, n);
        for &k in &order[i..j] {
            out[k] = score;
        }
        groups += 1;
        i = j;
    }
    if groups == 1 {
        out.fill(0.0);
        return true;
    }
    false
}

/// Per-window noise and shrinkage settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletConfig {
    /// `σ₀²` in `σ²_bp = σ₀² (1 - IQ_bp)`.
    pub noise_scale: f64,
    /// Lower bound on per-SNP noise variance.
    pub variance_floor: f64,
    pub shrink: bool,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            noise_scale: 1.0,
            variance_floor: 1e-8,
            shrink: true,
        }
    }
}

impl WaveletConfig {
    pub fn snp_variance(&self, imputation_quality: f64) -> f64 {
        (self.noise_scale * (1.0 - imputation_quality)).max(self.variance_floor)
    }
}

/// Coefficient-major matrix: row `k` holds coefficient `k` for every individual.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub n_coefficients: usize,
    pub n_individuals: usize,
    pub values: Vec<f64>,
}

impl CoefficientMatrix {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_individuals..(k + 1) * self.n_individuals]
    }

    fn from_individual_major(src: &[f64], n_coefficients: usize, n_individuals: usize) -> Self {
        let mut values = vec![0.0; src.len()];
        values
            .par_chunks_mut(n_individuals)
            .enumerate()
            .for_each(|(k, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = src[j * n_coefficients + k];
                }
            });
        Self {
            n_coefficients,
            n_individuals,
            values,
        }
    }
}

/// Shrunken but not yet rank-normalised spectra of every individual in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSpectra {
    pub depth: u32,
    pub grid_size: usize,
    pub c: CoefficientMatrix,
    pub d: CoefficientMatrix,
    pub variances: CoefficientVariances,
}

/// Rank-normalised spectra ready for regression.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpectra {
    pub depth: u32,
    pub c: CoefficientMatrix,
    pub d: CoefficientMatrix,
    pub c_degenerate: Vec<bool>,
    pub d_degenerate: Vec<bool>,
}

impl RawSpectra {
    /// Interpolate, transform and shrink every individual's signal in `window`.
    pub fn compute(window: &Window, chrom: &Chromosome, config: &WaveletConfig) -> Result<Self> {
        let snps = chrom
            .snps
            .get(window.snp_range.clone())
            .ok_or_else(|| Error::InvalidArgument("window SNP range out of bounds".into()))?;
        let grid = DyadicGrid::for_window(window, chrom)?;
        let weights = InterpolationWeights::new(&grid.snp_positions, &grid)?;
        let obs_var: Vec<f64> = snps
            .iter()
            .map(|s| config.snp_variance(s.imputation_quality))
            .collect();
        let depth = window.depth;
        let variances = weights.coefficient_variances(&obs_var, depth);
        let n_coef = n_coefficients(depth);
        let n_ind = snps.first().map_or(0, |s| s.dosages.len());
        let size = grid.size();

        let mut c_rows = vec![0.0; n_ind * n_coef];
        let mut d_rows = vec![0.0; n_ind * n_coef];
        c_rows
            .par_chunks_mut(n_coef)
            .zip(d_rows.par_chunks_mut(n_coef))
            .enumerate()
            .for_each_init(
                || (vec![0.0; snps.len()], vec![0.0; size], Vec::new()),
                |(obs, grid_vals, scratch), (j, (c, d))| {
                    for (o, s) in obs.iter_mut().zip(snps) {
                        *o = s.dosages[j];
                    }
                    weights.apply_into(obs, grid_vals);
                    haar_to_depth(grid_vals, depth, c, d, scratch);
                    if config.shrink {
                        let factor = (2.0 * (size as f64).ln()).sqrt();
                        for (x, v) in d.iter_mut().zip(&variances.d) {
                            *x = soft_threshold(*x, v.sqrt() * factor);
                        }
                    }
                },
            );
        Ok(Self {
            depth,
            grid_size: size,
            c: CoefficientMatrix::from_individual_major(&c_rows, n_coef, n_ind),
            d: CoefficientMatrix::from_individual_major(&d_rows, n_coef, n_ind),
            variances,
        })
    }

    /// Spectrum of one individual.
    pub fn spectrum(&self, individual: usize) -> WaveletSpectrum {
        let take = |m: &CoefficientMatrix| {
            (0..m.n_coefficients)
                .map(|k| m.values[k * m.n_individuals + individual])
                .collect()
        };
        WaveletSpectrum {
            individual_index: individual,
            depth: self.depth,
            c: take(&self.c),
            d: take(&self.d),
        }
    }

    /// Debug dump: `individual scale location c d`, one row per coefficient.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "individual\tscale\tlocation\tc\td")?;
        for j in 0..self.c.n_individuals {
            for k in 0..self.c.n_coefficients {
                let (s, l) = coeff_scale_location(k);
                writeln!(
                    out,
                    "{j}\t{s}\t{l}\t{}\t{}",
                    self.c.values[k * self.c.n_individuals + j],
                    self.d.values[k * self.d.n_individuals + j]
                )?;
            }
        }
        Ok(())
    }

    pub fn rank_normalize(self) -> WindowSpectra {
        fn normalize(m: CoefficientMatrix) -> (CoefficientMatrix, Vec<bool>) {
            let n = m.n_individuals;
            let mut out = vec![0.0; m.values.len()];
            let flags = out
                .par_chunks_mut(n)
                .zip(m.values.par_chunks(n))
                .map_init(Vec::new, |order, (dst, src)| {
                    quantile_transform_into(src, dst, order)
                })
                .collect();
            (
                CoefficientMatrix {
                    values: out,
                    ..m
                },
                flags,
            )
        }
        let (c, c_degenerate) = normalize(self.c);
        let (d, d_degenerate) = normalize(self.d);
        WindowSpectra {
            depth: self.depth,
            c,
            d,
            c_degenerate,
            d_degenerate,
        }
    }
}

impl WindowSpectra {
    pub fn compute(window: &Window, chrom: &Chromosome, config: &WaveletConfig) -> Result<Self> {
        Ok(RawSpectra::compute(window, chrom, config)?.rank_normalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn index_round_trip() {
        for k in 0..127 {
            let (s, l) = coeff_scale_location(k);
            assert_eq!(coeff_index(s, l), k);
            assert!(l < 1 << s);
        }
        assert_eq!(coeff_scale_location(0), (0, 0));
        assert_eq!(coeff_scale_location(6), (2, 3));
    }

    #[test]
    fn on_grid_observations_are_reproduced() {
        let grid = DyadicGrid::new(3, (0..8).map(|k| (k as f64 + 0.5) / 8.0).collect()).unwrap();
        let obs: Vec<Observation> = grid
            .snp_positions
            .iter()
            .enumerate()
            .map(|(i, &p)| Observation {
                position: p,
                value: (i % 3) as f64,
                variance: 1e-8,
            })
            .collect();
        let out = interpolate_to_grid(&obs, &grid).unwrap();
        for (v, o) in out.values.iter().zip(&obs) {
            assert_eq!(*v, o.value);
        }
        assert!(out.variances.iter().all(|&v| v == 1e-8));
    }

    #[test]
    fn midpoint_interpolation_and_variance() {
        // N = 2 grid points at 0.25 and 0.75; add a third observation to probe 0.5
        let grid = DyadicGrid::new(2, vec![]).unwrap();
        let obs = [
            Observation { position: 0.25, value: 0.0, variance: 0.1 },
            Observation { position: 0.75, value: 2.0, variance: 0.3 },
        ];
        let out = interpolate_to_grid(&obs, &grid).unwrap();
        // grid points 0.125, 0.375, 0.625, 0.875
        assert_eq!(out.values[0], 0.0);
        assert_relative_eq!(out.values[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(out.values[2], 1.5, epsilon = 1e-15);
        assert_eq!(out.values[3], 2.0);
        let w = InterpolationWeights::new(&[0.0, 1.0], &DyadicGrid::new(0, vec![]).unwrap()).unwrap();
        assert_eq!(w.apply(&[0.0, 2.0]), vec![1.0]);
        assert_relative_eq!(w.propagate_variances(&[0.1, 0.3])[0], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn too_few_observations() {
        let grid = DyadicGrid::new(2, vec![]).unwrap();
        let one = [Observation { position: 0.5, value: 1.0, variance: 0.0 }];
        assert!(interpolate_to_grid(&one, &grid).is_err());
    }

    #[test]
    fn haar_hand_example() {
        let h = haar_transform(&[0.0, 0.0, 2.0, 2.0]).unwrap();
        assert_relative_eq!(h.c(0, 0), 2.0, epsilon = 1e-15);
        assert_relative_eq!(h.d(0, 0), -2.0, epsilon = 1e-15);
        assert_eq!((h.d(1, 0), h.d(1, 1)), (0.0, 0.0));
    }

    #[test]
    fn haar_constant_and_zero() {
        let h = haar_transform(&[1.0; 16]).unwrap();
        assert!(h.d.iter().all(|&x| x.abs() < 1e-15));
        assert_relative_eq!(h.c(0, 0), 4.0, epsilon = 1e-14);
        let z = haar_transform(&[0.0; 8]).unwrap();
        assert!(z.c.iter().chain(&z.d).all(|&x| x == 0.0));
        assert!(haar_transform(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn soft_threshold_cases() {
        let tau = universal_threshold(0.2, 1024);
        assert_relative_eq!(tau, 0.7447, epsilon = 1e-4);
        assert_relative_eq!(soft_threshold(1.0, tau), 0.2553, epsilon = 1e-4);
        assert_eq!(soft_threshold(-0.5, tau), 0.0);
        assert_eq!(soft_threshold(0.0, tau), 0.0);
    }

    #[test]
    fn visushrink_leaves_scaling_coefficients() {
        let mut sp = WaveletSpectrum {
            individual_index: 0,
            depth: 0,
            c: vec![1.0],
            d: vec![1.0],
        };
        let var = CoefficientVariances { c: vec![0.04], d: vec![0.04] };
        visushrink(&mut sp, &var, 1024);
        assert_eq!(sp.c[0], 1.0);
        assert_relative_eq!(sp.d[0], 0.2553, epsilon = 1e-4);
    }

    #[test]
    fn blom_hand_example() {
        let r = quantile_transform(&[3.2, -1.0, 0.5]).unwrap();
        assert!(!r.degenerate);
        assert_relative_eq!(r.scores[0], 0.8694, epsilon = 1e-4);
        assert_relative_eq!(r.scores[1], -0.8694, epsilon = 1e-4);
        assert_eq!(r.scores[2], 0.0);
        assert_eq!(r.scores[0], -r.scores[1]);
    }

    #[test]
    fn blom_is_idempotent_on_scores() {
        let r = quantile_transform(&[0.3, 5.0, -2.0, 1.0, 9.0]).unwrap();
        let again = quantile_transform(&r.scores).unwrap();
        assert_eq!(r.scores, again.scores);
    }

    #[test]
    fn constant_vector_is_degenerate() {
        let r = quantile_transform(&[1.0; 4]).unwrap();
        assert!(r.degenerate);
        assert!(r.scores.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn near_ties_share_rank() {
        let a = quantile_transform(&[1.0, 1.0 + 1e-15, 2.0]).unwrap();
        assert_eq!(a.scores[0], a.scores[1]);
    }

    #[test]
    fn coefficient_variance_matches_direct_weights() {
        let pos = vec![0.05, 0.2, 0.31, 0.6, 0.62, 0.9];
        let grid = DyadicGrid::new(3, pos.clone()).unwrap();
        let w = InterpolationWeights::new(&pos, &grid).unwrap();
        let var = vec![0.1, 0.2, 0.05, 0.3, 0.01, 0.2];
        let cv = w.coefficient_variances(&var, 2);
        // brute force: coefficient of unit impulse at each observation
        for k in 0..n_coefficients(2) {
            let (s, l) = coeff_scale_location(k);
            let (mut vc, mut vd) = (0.0, 0.0);
            for i in 0..pos.len() {
                let mut e = vec![0.0; pos.len()];
                e[i] = 1.0;
                let h = haar_transform(&w.apply(&e)).unwrap();
                vc += h.c(s, l).powi(2) * var[i];
                vd += h.d(s, l).powi(2) * var[i];
            }
            assert_relative_eq!(cv.c[k], vc, epsilon = 1e-14);
            assert_relative_eq!(cv.d[k], vd, epsilon = 1e-14);
        }
    }
}
