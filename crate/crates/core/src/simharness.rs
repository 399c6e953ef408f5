//! Synthetic cohorts with planted polygenic signals, a per-SNP regression
//! baseline, and power experiments comparing the two.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bayes::{build_design, lambda1, Projector};
use crate::data::{Chromosome, CohortData, SnpRecord, Window, WindowConfig};
use crate::nullsim::{round_lambda1, NullModel, ThresholdRule};
use crate::rng::{derive_seed, stream};
use crate::screening::{screen_spectra, CoefficientKind};
use crate::stats::{logistic_regression, LogisticFit};
use crate::wavelet::{WaveletConfig, WindowSpectra};
use crate::{Error, Result};

const TAG_FREQUENCIES: u64 = 1;
const TAG_POSITIONS: u64 = 2;
const TAG_SIGNAL: u64 = 3;
const TAG_NOISE: u64 = 4;
const TAG_NULL: u64 = 5;

/// Linkage-block layout of a synthetic window.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStructure {
    /// Probability that a SNP allele differs from its block's latent haplotype.
    pub flip_probabilities: Vec<f64>,
    pub region_bp: u64,
    pub allele_frequency_range: (f64, f64),
}

impl BlockStructure {
    pub fn uniform(n_blocks: usize, flip_probability: f64) -> Self {
        Self {
            flip_probabilities: vec![flip_probability; n_blocks],
            region_bp: 1_000_000,
            allele_frequency_range: (0.05, 0.5),
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.flip_probabilities.len()
    }

    fn validate(&self) -> Result<()> {
        if self.flip_probabilities.is_empty() {
            return Err(Error::InvalidArgument("at least one block required".into()));
        }
        if self.flip_probabilities.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidArgument("flip probabilities must lie in [0, 1]".into()));
        }
        let (lo, hi) = self.allele_frequency_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidArgument("invalid allele frequency range".into()));
        }
        Ok(())
    }
}

/// Genotypes of one synthetic window.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWindow {
    pub n_individuals: usize,
    pub positions: Vec<u64>,
    /// Per SNP, per individual, in `{0, 1, 2}`.
    pub dosages: Vec<Vec<f64>>,
    /// Half-open SNP index ranges, one per block.
    pub blocks: Vec<(usize, usize)>,
    pub block_frequencies: Vec<f64>,
}

impl SyntheticWindow {
    pub fn n_snps(&self) -> usize {
        self.positions.len()
    }

    pub fn block_centre(&self, block: usize) -> usize {
        let (a, b) = self.blocks[block];
        a + (b - a) / 2
    }

    pub fn records(&self, chromosome: &str) -> Vec<SnpRecord> {
        self.positions
            .iter()
            .zip(&self.dosages)
            .enumerate()
            .map(|(i, (&pos, d))| SnpRecord {
                chromosome: chromosome.to_string(),
                position: pos,
                id: format!("snp{i}"),
                imputation_quality: 1.0,
                dosages: d.clone(),
            })
            .collect()
    }

    pub fn chromosome(&self, name: &str) -> Chromosome {
        Chromosome {
            name: name.to_string(),
            snps: self.records(name),
        }
    }

    pub fn cohort(&self, chromosome: &str, phenotype: Vec<f64>) -> Result<CohortData> {
        let ids = (0..self.n_individuals).map(|j| format!("ind{j}")).collect();
        CohortData::new(ids, self.records(chromosome), phenotype, Vec::new())
    }

    /// The whole region as one window, with depth from `config`.
    pub fn window(&self, chromosome: &str, config: &WindowConfig) -> Result<Window> {
        let depth = config
            .depth_for(self.n_snps())
            .ok_or_else(|| Error::InvalidArgument("too few SNPs for a single scale".into()))?;
        Window::new(
            chromosome,
            self.positions[0],
            *self.positions.last().unwrap(),
            0..self.n_snps(),
            depth,
        )
    }
}

/// Blocks of contiguous SNPs; within block `b` every haplotype carries a
/// latent allele `H ~ Bernoulli(af_b)` with `af_b` uniform on the configured
/// range, and each SNP allele is `H` flipped with the block's flip
/// probability. Positions are evenly spaced over the region with jitter.
pub fn generate_genotypes(
    n: usize,
    n_snps: usize,
    blocks: &BlockStructure,
    seed: u64,
) -> Result<SyntheticWindow> {
    if n == 0 || n_snps == 0 {
        return Err(Error::InvalidArgument("need at least one individual and one SNP".into()));
    }
    blocks.validate()?;
    let n_blocks = blocks.n_blocks().min(n_snps);
    let ranges: Vec<(usize, usize)> = (0..n_blocks)
        .map(|b| (b * n_snps / n_blocks, (b + 1) * n_snps / n_blocks))
        .collect();

    let mut rng = stream(derive_seed(seed, TAG_FREQUENCIES), 0);
    let (lo, hi) = blocks.allele_frequency_range;
    let freqs: Vec<f64> = (0..n_blocks).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();

    let mut rng = stream(derive_seed(seed, TAG_POSITIONS), 0);
    let spacing = blocks.region_bp as f64 / n_snps as f64;
    let mut positions = Vec::with_capacity(n_snps);
    let mut last = 0u64;
    for i in 0..n_snps {
        let jitter = if spacing >= 4.0 { (rng.random::<f64>() - 0.5) * 0.5 * spacing } else { 0.0 };
        let p = ((i as f64 + 0.5) * spacing + jitter).round().max(1.0) as u64;
        let p = p.max(last + 1);
        positions.push(p);
        last = p;
    }

    let rows: Vec<Vec<u8>> = (0..n as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, j);
            let mut row = vec![0u8; n_snps];
            for (b, &(a, e)) in ranges.iter().enumerate() {
                let flip = blocks.flip_probabilities[b];
                for _ in 0..2 {
                    let h = rng.random::<f64>() < freqs[b];
                    for slot in &mut row[a..e] {
                        let f = rng.random::<f64>() < flip;
                        *slot += (h ^ f) as u8;
                    }
                }
            }
            row
        })
        .collect();
    let dosages = (0..n_snps)
        .map(|i| rows.iter().map(|r| r[i] as f64).collect())
        .collect();
    Ok(SyntheticWindow {
        n_individuals: n,
        positions,
        dosages,
        blocks: ranges,
        block_frequencies: freqs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// Every effect positive.
    Mono,
    /// Each effect sign drawn at random.
    Random,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Mono => "mono",
            Direction::Random => "random",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mono" => Ok(Direction::Mono),
            "random" => Ok(Direction::Random),
            other => Err(Error::InvalidArgument(format!("unknown direction mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSignal {
    pub causal_snp_indices: Vec<usize>,
    pub signs: Vec<f64>,
    pub heritability: f64,
    pub direction: Direction,
}

impl PlantedSignal {
    pub fn new(causal_snp_indices: Vec<usize>, signs: Vec<f64>, heritability: f64, direction: Direction) -> Result<Self> {
        if causal_snp_indices.is_empty() || causal_snp_indices.len() != signs.len() {
            return Err(Error::InvalidArgument("one sign per causal SNP required".into()));
        }
        if !(heritability > 0.0 && heritability < 1.0) {
            return Err(Error::InvalidArgument(format!("heritability must lie in (0, 1), got {heritability}")));
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidArgument("signs must be ±1".into()));
        }
        if direction == Direction::Mono && signs.iter().any(|&s| s != 1.0) {
            return Err(Error::InvalidArgument("mono-directional signals have positive signs".into()));
        }
        let mut sorted = causal_snp_indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("causal SNP indices must be distinct".into()));
        }
        Ok(Self {
            causal_snp_indices,
            signs,
            heritability,
            direction,
        })
    }

    /// `k` causal SNPs at the centres of `k` distinct random blocks.
    pub fn at_block_centres<R: Rng>(
        window: &SyntheticWindow,
        k: usize,
        heritability: f64,
        direction: Direction,
        rng: &mut R,
    ) -> Result<Self> {
        if k == 0 || k > window.blocks.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot plant {k} components in {} blocks",
                window.blocks.len()
            )));
        }
        let mut chosen = sample_indices(rng, window.blocks.len(), k).into_vec();
        chosen.sort_unstable();
        let indices = chosen.iter().map(|&b| window.block_centre(b)).collect();
        let signs = (0..k)
            .map(|_| match direction {
                Direction::Mono => 1.0,
                Direction::Random => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            })
            .collect();
        Self::new(indices, signs, heritability, direction)
    }
}

/// `score + e`, with `score_j = Σ sign_i g_ij` and `e ~ N(0, s²(1 - h²)/h²)`
/// where `s²` is the sample variance of the score.
pub fn simulate_phenotype(dosages: &[Vec<f64>], signal: &PlantedSignal, seed: u64) -> Result<Vec<f64>> {
    let n = dosages.first().map_or(0, Vec::len);
    if let Some(&bad) = signal.causal_snp_indices.iter().find(|&&i| i >= dosages.len()) {
        return Err(Error::InvalidArgument(format!("causal SNP {bad} outside the window")));
    }
    let mut score = vec![0.0; n];
    for (&i, &s) in signal.causal_snp_indices.iter().zip(&signal.signs) {
        score.iter_mut().zip(&dosages[i]).for_each(|(a, g)| *a += s * g);
    }
    if n < 2 {
        return Err(Error::Degenerate("need at least two individuals".into()));
    }
    let mean = score.iter().sum::<f64>() / n as f64;
    let s2 = score.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    if !(s2 > 0.0) {
        return Err(Error::Degenerate("genetic score has zero variance".into()));
    }
    let h2 = signal.heritability;
    let sd = (s2 * (1.0 - h2) / h2).sqrt();
    let mut rng = stream(derive_seed(seed, TAG_NOISE), 0);
    Ok(score
        .into_iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sd * z
        })
        .collect())
}

/// Per-SNP ordinary least squares against a fixed phenotype and covariates.
#[derive(Debug, Clone)]
pub struct GwasBaseline {
    projector: Projector,
    phenotype: Vec<f64>,
    yty: f64,
    dof: f64,
    t_dist: StudentsT,
}

/// Per-SNP statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnpTest {
    pub beta: f64,
    pub t: f64,
    pub p_value: f64,
}

impl GwasBaseline {
    pub fn new(phenotype: &[f64], covariates: &[Vec<f64>]) -> Result<Self> {
        let n = phenotype.len();
        if n < 2 || phenotype.iter().all(|&v| v == phenotype[0]) {
            return Err(Error::Degenerate("phenotype has zero variance".into()));
        }
        let projector = Projector::new(n, covariates)?;
        if n <= projector.rank() + 1 {
            return Err(Error::DegenerateDesign(format!(
                "{n} individuals cannot support {} covariates plus a SNP",
                projector.rank()
            )));
        }
        let mut y = phenotype.to_vec();
        projector.residualize(&mut y);
        let yty: f64 = y.iter().map(|v| v * v).sum();
        if !(yty > 0.0) {
            return Err(Error::DegenerateDesign("phenotype is explained by covariates".into()));
        }
        let dof = (n - projector.rank() - 1) as f64;
        Ok(Self {
            projector,
            phenotype: y,
            yty,
            dof,
            t_dist: StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Numerical(e.to_string()))?,
        })
    }

    fn t_stat(&self, dosage: &[f64], buf: &mut Vec<f64>) -> Option<(f64, f64)> {
        buf.clear();
        buf.extend_from_slice(dosage);
        self.projector.residualize(buf);
        let xtx: f64 = buf.iter().map(|v| v * v).sum();
        let raw: f64 = dosage.iter().map(|v| v * v).sum();
        if xtx <= 1e-10 * raw.max(1.0) {
            return None;
        }
        let xty: f64 = buf.iter().zip(&self.phenotype).map(|(a, b)| a * b).sum();
        let beta = xty / xtx;
        let rss = (self.yty - beta * xty).max(0.0);
        let se = (rss / self.dof / xtx).sqrt();
        let t = if se > 0.0 { beta / se } else { f64::INFINITY.copysign(beta) };
        Some((beta, t))
    }

    pub fn two_sided_p(&self, t: f64) -> f64 {
        if !t.is_finite() {
            return 0.0;
        }
        (2.0 * self.t_dist.sf(t.abs())).min(1.0)
    }

    /// One SNP; a monomorphic SNP gets `p = 1`.
    pub fn test(&self, dosage: &[f64]) -> Result<SnpTest> {
        if dosage.len() != self.phenotype.len() {
            return Err(Error::DimensionMismatch("dosage length differs from phenotype".into()));
        }
        let mut buf = Vec::new();
        Ok(match self.t_stat(dosage, &mut buf) {
            None => SnpTest { beta: 0.0, t: 0.0, p_value: 1.0 },
            Some((beta, t)) => SnpTest { beta, t, p_value: self.two_sided_p(t) },
        })
    }

    /// Smallest p-value over the SNPs (via the largest `|t|`) and its index.
    pub fn min_p(&self, dosages: &[Vec<f64>]) -> Result<(usize, f64)> {
        if dosages.is_empty() {
            return Err(Error::InvalidArgument("no SNPs".into()));
        }
        let mut buf = Vec::new();
        let mut best = (0usize, 0.0f64);
        for (i, d) in dosages.iter().enumerate() {
            if d.len() != self.phenotype.len() {
                return Err(Error::DimensionMismatch("dosage length differs from phenotype".into()));
            }
            if let Some((_, t)) = self.t_stat(d, &mut buf) {
                if t.abs() > best.1 {
                    best = (i, t.abs());
                }
            }
        }
        Ok((best.0, self.two_sided_p(best.1)))
    }
}

/// Per-SNP two-sided p-values of the dosage slope, adjusting for covariates.
pub fn gwas_lm_baseline(dosages: &[Vec<f64>], phenotype: &[f64], covariates: &[Vec<f64>]) -> Result<Vec<f64>> {
    let base = GwasBaseline::new(phenotype, covariates)?;
    dosages
        .par_iter()
        .map(|d| base.test(d).map(|t| t.p_value))
        .collect()
}

/// How the minimum per-SNP p-value is turned into a window-level p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GwasAdjustment {
    /// `min(1, n_snps · p_min)`, the within-window analogue of a genome-wide
    /// Bonferroni threshold.
    Bonferroni,
    /// Raw minimum p-value.
    None,
}

impl fmt::Display for GwasAdjustment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GwasAdjustment::Bonferroni => "bonferroni",
            GwasAdjustment::None => "none",
        })
    }
}

impl FromStr for GwasAdjustment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bonferroni" => Ok(GwasAdjustment::Bonferroni),
            "none" => Ok(GwasAdjustment::None),
            other => Err(Error::InvalidArgument(format!("unknown GWAS adjustment {other:?}"))),
        }
    }
}

/// Settings of a power experiment, read from `key = value` text.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerConfig {
    pub replicates: usize,
    pub n: usize,
    pub n_snps: usize,
    pub n_blocks: usize,
    pub flip_probability: f64,
    pub region_bp: u64,
    pub heritability: f64,
    pub max_components: usize,
    pub alpha_ws: f64,
    pub alpha_gwas: f64,
    pub gwas_adjustment: GwasAdjustment,
    pub simulations: usize,
    pub sigma_b: f64,
    pub min_snps_per_coeff: f64,
    pub directions: Vec<Direction>,
    pub seed: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            replicates: 200,
            n: 3000,
            n_snps: 5040,
            n_blocks: 28,
            flip_probability: 0.05,
            region_bp: 1_000_000,
            heritability: 0.02,
            max_components: 28,
            alpha_ws: 1e-4,
            alpha_gwas: 1e-4,
            gwas_adjustment: GwasAdjustment::Bonferroni,
            simulations: 100_000,
            sigma_b: crate::bayes::DEFAULT_SIGMA_B,
            min_snps_per_coeff: 10.0,
            directions: vec![Direction::Mono, Direction::Random],
            seed: 1,
        }
    }
}

impl PowerConfig {
    /// Parse `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, format!("expected key = value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            fn num<T: FromStr>(lineno: usize, k: &str, v: &str) -> Result<T> {
                v.parse().map_err(|_| Error::parse(lineno, format!("bad value for {k}: {v:?}")))
            }
            match k {
                "replicates" => c.replicates = num(lineno, k, v)?,
                "n" => c.n = num(lineno, k, v)?,
                "n_snps" => c.n_snps = num(lineno, k, v)?,
                "n_blocks" => c.n_blocks = num(lineno, k, v)?,
                "flip_probability" => c.flip_probability = num(lineno, k, v)?,
                "region_bp" => c.region_bp = num(lineno, k, v)?,
                "heritability" => c.heritability = num(lineno, k, v)?,
                "max_components" => c.max_components = num(lineno, k, v)?,
                "alpha_ws" => c.alpha_ws = num(lineno, k, v)?,
                "alpha_gwas" => c.alpha_gwas = num(lineno, k, v)?,
                "gwas_adjustment" => c.gwas_adjustment = v.parse().map_err(|e: Error| Error::parse(lineno, e.to_string()))?,
                "simulations" => c.simulations = num(lineno, k, v)?,
                "sigma_b" => c.sigma_b = num(lineno, k, v)?,
                "min_snps_per_coeff" => c.min_snps_per_coeff = num(lineno, k, v)?,
                "seed" => c.seed = num(lineno, k, v)?,
                "directions" => {
                    c.directions = v
                        .split(',')
                        .map(|s| s.parse::<Direction>().map_err(|e| Error::parse(lineno, e.to_string())))
                        .collect::<Result<_>>()?
                }
                _ => return Err(Error::parse(lineno, format!("unknown key {k:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.replicates == 0 || self.n < 10 || self.n_snps < 2 {
            return bad("replicates, n and n_snps must be positive (n ≥ 10)");
        }
        if self.n_blocks == 0 || self.n_blocks > self.n_snps {
            return bad("n_blocks must lie in 1..=n_snps");
        }
        if self.max_components == 0 || self.max_components > self.n_blocks {
            return bad("max_components must lie in 1..=n_blocks");
        }
        if !(self.heritability > 0.0 && self.heritability < 1.0) {
            return bad("heritability must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return bad("flip_probability must lie in [0, 1]");
        }
        if !(self.alpha_ws > 0.0 && self.alpha_ws < 1.0 && self.alpha_gwas > 0.0 && self.alpha_gwas < 1.0) {
            return bad("significance levels must lie in (0, 1)");
        }
        if self.directions.is_empty() {
            return bad("at least one direction mode required");
        }
        Ok(())
    }

    pub fn block_structure(&self) -> BlockStructure {
        BlockStructure {
            region_bp: self.region_bp,
            ..BlockStructure::uniform(self.n_blocks, self.flip_probability)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    WsC,
    WsD,
    GwasLm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::WsC, Method::WsD, Method::GwasLm];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::WsC => "WS-c",
            Method::WsD => "WS-d",
            Method::GwasLm => "GWAS-LM",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub direction: Direction,
    pub components: usize,
    pub p_ws_c: f64,
    pub p_ws_d: f64,
    /// Smallest per-SNP p-value, unadjusted.
    pub p_gwas: f64,
}

/// Component-count bins `1–5, 6–10, 11–15, 16–20, ≥21`.
pub const COMPONENT_BINS: [(usize, usize, &str); 5] = [
    (1, 5, "1-5"),
    (6, 10, "6-10"),
    (11, 15, "11-15"),
    (16, 20, "16-20"),
    (21, usize::MAX, ">=21"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub direction: Direction,
    pub bin: &'static str,
    pub replicates: usize,
    pub detections: [usize; 3],
}

impl PowerRow {
    pub fn power(&self, method: Method) -> f64 {
        let i = Method::ALL.iter().position(|&m| m == method).unwrap();
        if self.replicates == 0 {
            f64::NAN
        } else {
            self.detections[i] as f64 / self.replicates as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub config: PowerConfig,
    pub lambda1: f64,
    pub depth: u32,
    pub outcomes: Vec<ReplicateOutcome>,
}

impl PowerReport {
    pub fn detected(&self, o: &ReplicateOutcome, method: Method) -> bool {
        match method {
            Method::WsC => o.p_ws_c <= self.config.alpha_ws,
            Method::WsD => o.p_ws_d <= self.config.alpha_ws,
            Method::GwasLm => self.gwas_window_p(o) <= self.config.alpha_gwas,
        }
    }

    /// Window-level GWAS p-value under the configured adjustment.
    pub fn gwas_window_p(&self, o: &ReplicateOutcome) -> f64 {
        match self.config.gwas_adjustment {
            GwasAdjustment::Bonferroni => (o.p_gwas * self.config.n_snps as f64).min(1.0),
            GwasAdjustment::None => o.p_gwas,
        }
    }

    fn row(&self, direction: Direction, bin: &'static str, keep: impl Fn(usize) -> bool) -> PowerRow {
        let sel: Vec<&ReplicateOutcome> = self
            .outcomes
            .iter()
            .filter(|o| o.direction == direction && keep(o.components))
            .collect();
        let mut detections = [0; 3];
        for (i, &m) in Method::ALL.iter().enumerate() {
            detections[i] = sel.iter().filter(|o| self.detected(o, m)).count();
        }
        PowerRow {
            direction,
            bin,
            replicates: sel.len(),
            detections,
        }
    }

    /// Overall and per-bin detection rates for each direction mode.
    pub fn table(&self) -> Vec<PowerRow> {
        let mut rows = Vec::new();
        for &dir in &self.config.directions {
            rows.push(self.row(dir, "all", |_| true));
            for &(lo, hi, label) in &COMPONENT_BINS {
                rows.push(self.row(dir, label, |k| k >= lo && k <= hi));
            }
        }
        rows
    }

    /// Power over replicates with component counts in `[lo, hi]`.
    pub fn power(&self, method: Method, direction: Direction, lo: usize, hi: usize) -> (f64, usize) {
        let r = self.row(direction, "", |k| k >= lo && k <= hi);
        (r.power(method), r.replicates)
    }

    /// Logistic regression of detection on the component count.
    pub fn logit_slope(&self, method: Method, direction: Direction) -> LogisticFit {
        let (x, y): (Vec<f64>, Vec<bool>) = self
            .outcomes
            .iter()
            .filter(|o| o.direction == direction)
            .map(|o| (o.components as f64, self.detected(o, method)))
            .unzip();
        logistic_regression(&x, &y)
    }

    /// `direction bin replicates power_WS-c power_WS-d power_GWAS-LM`.
    pub fn write_table_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "direction\tcomponents\treplicates\tpower_ws_c\tpower_ws_d\tpower_gwas_lm")?;
        for r in self.table() {
            let f = |m| {
                let p = r.power(m);
                if p.is_nan() { "NA".to_string() } else { format!("{p:.4}") }
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.direction,
                r.bin,
                r.replicates,
                f(Method::WsC),
                f(Method::WsD),
                f(Method::GwasLm)
            )?;
        }
        Ok(())
    }

    /// One line per replicate.
    pub fn write_replicates_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "replicate\tdirection\tcomponents\tp_ws_c\tp_ws_d\tp_gwas_lm_min\tp_gwas_lm_window")?;
        for o in &self.outcomes {
            writeln!(
                out,
                "{}\t{}\t{}\t{:e}\t{:e}\t{:e}\t{:e}",
                o.index,
                o.direction,
                o.components,
                o.p_ws_c,
                o.p_ws_d,
                o.p_gwas,
                self.gwas_window_p(o)
            )?;
        }
        Ok(())
    }
}

/// Fixed genotypes, per-replicate phenotypes. Each replicate draws `k`
/// uniformly from `1..=max_components`, plants `k` block-centre SNPs,
/// standardises the phenotype (keeping `λ₁` fixed) and records the WS-c,
/// WS-d and minimum per-SNP p-values.
pub fn power_experiment(config: &PowerConfig) -> Result<PowerReport> {
    power_experiment_with_null(config, None)
}

/// As [`power_experiment`], optionally reusing a null sample for the
/// experiment's `λ₁` and depth.
pub fn power_experiment_with_null(config: &PowerConfig, null_sample: Option<Vec<f64>>) -> Result<PowerReport> {
    config.validate()?;
    let genotypes = generate_genotypes(config.n, config.n_snps, &config.block_structure(), config.seed)?;
    let wcfg = WindowConfig {
        window_bp: config.region_bp.max(1),
        min_snps_per_coeff: config.min_snps_per_coeff,
        ..WindowConfig::default()
    };
    let window = genotypes.window("sim", &wcfg)?;
    let spectra = WindowSpectra::compute(&window, &genotypes.chromosome("sim"), &WaveletConfig::default())?;

    // standardised phenotypes share λ₁ with any standard-normal draw
    let probe: Vec<f64> = standardize(&(0..config.n).map(|i| i as f64).collect::<Vec<_>>());
    let l1 = round_lambda1(lambda1(&build_design(&probe, &[], config.sigma_b)?), false);
    let null_seed = derive_seed(config.seed, TAG_NULL);
    let null = match null_sample {
        Some(s) => NullModel::from_sample(l1, window.depth, null_seed, s, ThresholdRule::default())?,
        None => NullModel::simulate(l1, window.depth, config.simulations, null_seed, ThresholdRule::default())?,
    };

    let jobs: Vec<(usize, Direction)> = config
        .directions
        .iter()
        .flat_map(|&d| (0..config.replicates).map(move |r| (r, d)))
        .collect();
    let mut outcomes = jobs
        .par_iter()
        .enumerate()
        .map(|(job, &(index, direction))| {
            let mut rng = stream(derive_seed(config.seed, TAG_SIGNAL), job as u64);
            let k = rng.random_range(1..=config.max_components);
            let signal = PlantedSignal::at_block_centres(&genotypes, k, config.heritability, direction, &mut rng)?;
            let y = standardize(&simulate_phenotype(&genotypes.dosages, &signal, rng.random())?);
            let ctx = build_design(&y, &[], config.sigma_b)?;
            let pc = screen_spectra(&window, &spectra, &ctx, CoefficientKind::C)?;
            let pd = screen_spectra(&window, &spectra, &ctx, CoefficientKind::D)?;
            let gwas = GwasBaseline::new(&y, &[])?;
            Ok(ReplicateOutcome {
                index,
                direction,
                components: k,
                p_ws_c: null.p_value_log(pc.log_lambda_hat)?,
                p_ws_d: null.p_value_log(pd.log_lambda_hat)?,
                p_gwas: gwas.min_p(&genotypes.dosages)?.1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    outcomes.sort_by_key(|o| (o.direction, o.index));
    Ok(PowerReport {
        config: config.clone(),
        lambda1: l1,
        depth: window.depth,
        outcomes,
    })
}

/// Centre and scale to unit sample variance.
pub fn standardize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
    x.iter().map(|v| (v - m) / sd).collect()
}

/// Counts by component bin, for reports.
pub fn component_histogram(report: &PowerReport) -> BTreeMap<&'static str, usize> {
    let mut h = BTreeMap::new();
    for o in &report.outcomes {
        for &(lo, hi, label) in &COMPONENT_BINS {
            if o.components >= lo && o.components <= hi {
                *h.entry(label).or_insert(0) += 1;
            }
        }
    }
    h
}
