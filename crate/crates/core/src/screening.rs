//! Per-window likelihood-ratio statistic and its EM maximisation.
//!
//! Within a window the evidence of every usable coefficient is combined as
//! `Λ(π) = ∏_{s,l} [π_s BF_{sl} + 1 - π_s]`. The product factorises over
//! scales, so each `π_s` is maximised on its own.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::bayes::DesignContext;
use crate::data::{Chromosome, CohortData, Window};
use crate::wavelet::{coeff_index, coeff_scale_location, CoefficientMatrix, WaveletConfig, WindowSpectra};
use crate::{Error, Result};

pub const EM_TOLERANCE: f64 = 1e-8;
pub const EM_MAX_ITERATIONS: usize = 10_000;
const EM_START: f64 = 0.5;

/// Scaling (`c`) or detail (`d`) coefficients. A screen uses one kind only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoefficientKind {
    C,
    D,
}

impl fmt::Display for CoefficientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoefficientKind::C => "c",
            CoefficientKind::D => "d",
        })
    }
}

impl FromStr for CoefficientKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c" | "C" => Ok(CoefficientKind::C),
            "d" | "D" => Ok(CoefficientKind::D),
            other => Err(Error::InvalidArgument(format!("unknown coefficient kind {other:?}"))),
        }
    }
}

/// Per-scale association proportions, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiVector(Vec<f64>);

impl PiVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("π entries must lie in [0, 1]".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(scales: usize) -> Self {
        Self(vec![0.0; scales])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Log Bayes factors of the usable coefficients, grouped by scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesFactors {
    pub log_bf: Vec<Vec<f64>>,
}

impl BayesFactors {
    /// From plain Bayes factors; every value must be positive and finite.
    pub fn from_values(per_scale: Vec<Vec<f64>>) -> Result<Self> {
        let log_bf = per_scale
            .into_iter()
            .map(|scale| {
                scale
                    .into_iter()
                    .map(|bf| {
                        if bf > 0.0 && bf.is_finite() {
                            Ok(bf.ln())
                        } else {
                            Err(Error::InvalidArgument(format!("Bayes factor must be positive, got {bf}")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { log_bf })
    }

    pub fn from_log(log_bf: Vec<Vec<f64>>) -> Self {
        Self { log_bf }
    }

    pub fn n_scales(&self) -> usize {
        self.log_bf.len()
    }
}

/// `ln(π e^b + 1 - π)` without overflow.
#[inline]
fn log_mix(log_pi: f64, log_1m_pi: f64, b: f64) -> f64 {
    let a = log_pi + b;
    let (hi, lo) = if a > log_1m_pi { (a, log_1m_pi) } else { (log_1m_pi, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log Λ_s(π_s)` for one scale.
pub fn log_lambda_scale(log_bf: &[f64], pi: f64) -> f64 {
    if pi == 0.0 {
        return 0.0;
    }
    if pi == 1.0 {
        return log_bf.iter().sum();
    }
    let (lp, lq) = (pi.ln(), (-pi).ln_1p());
    log_bf.iter().map(|&b| log_mix(lp, lq, b)).sum()
}

/// `log Λ(π)`.
pub fn log_lambda_of_pi(bf: &BayesFactors, pi: &PiVector) -> Result<f64> {
    if pi.values().len() != bf.n_scales() {
        return Err(Error::DimensionMismatch(format!(
            "π has {} scales, Bayes factors have {}",
            pi.values().len(),
            bf.n_scales()
        )));
    }
    Ok(bf
        .log_bf
        .iter()
        .zip(pi.values())
        .map(|(b, &p)| log_lambda_scale(b, p))
        .sum())
}

/// `Λ(π) = ∏ (π_s BF_sl + 1 - π_s)`, accumulated in log space.
pub fn lambda_of_pi(bf: &BayesFactors, pi: &PiVector) -> Result<f64> {
    Ok(log_lambda_of_pi(bf, pi)?.exp())
}

/// Posterior probability that a coefficient is associated, given `π_s`.
#[inline]
pub fn posterior_gamma(pi: f64, log_bf: f64) -> f64 {
    if pi == 0.0 {
        return 0.0;
    }
    if pi == 1.0 {
        return 1.0;
    }
    let z = log_bf + pi.ln() - (-pi).ln_1p();
    1.0 / (1.0 + (-z).exp())
}

/// One EM update of `π_s`.
#[inline]
pub fn em_step(log_bf: &[f64], pi: f64) -> f64 {
    log_bf.iter().map(|&b| posterior_gamma(pi, b)).sum::<f64>() / log_bf.len() as f64
}

/// Result of maximising one scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFit {
    pub pi: f64,
    pub log_lambda: f64,
    pub iterations: usize,
}

/// Maximise `Λ_s` over `π_s ∈ [0, 1]`.
///
/// `log Λ_s` is concave in `π_s`, so the sign of its slope at either end
/// certifies a boundary maximiser; otherwise EM runs from `π_s = 1/2` until
/// successive iterates differ by less than [`EM_TOLERANCE`]. `observer` sees
/// every EM iterate.
pub fn maximize_scale(log_bf: &[f64], mut observer: impl FnMut(f64)) -> ScaleFit {
    if log_bf.is_empty() {
        return ScaleFit { pi: 0.0, log_lambda: 0.0, iterations: 0 };
    }
    let slope_at_zero: f64 = log_bf.iter().map(|&b| b.exp_m1()).sum();
    if slope_at_zero <= 0.0 {
        return ScaleFit { pi: 0.0, log_lambda: 0.0, iterations: 0 };
    }
    let slope_at_one: f64 = log_bf.iter().map(|&b| -(-b).exp_m1()).sum();
    if slope_at_one >= 0.0 {
        return ScaleFit {
            pi: 1.0,
            log_lambda: log_bf.iter().sum(),
            iterations: 0,
        };
    }
    let mut pi = EM_START;
    let mut iterations = 0;
    observer(pi);
    while iterations < EM_MAX_ITERATIONS {
        let next = em_step(log_bf, pi);
        iterations += 1;
        observer(next);
        let delta = (next - pi).abs();
        pi = next;
        if delta < EM_TOLERANCE {
            break;
        }
    }
    ScaleFit {
        pi,
        log_lambda: log_lambda_scale(log_bf, pi),
        iterations,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximized {
    pub pi: PiVector,
    pub log_lambda_hat: f64,
    pub lambda_hat: f64,
}

/// `Λ̂ = max_π Λ(π)` and its maximiser.
pub fn maximize_lambda(bf: &BayesFactors) -> Maximized {
    let fits: Vec<ScaleFit> = bf.log_bf.iter().map(|b| maximize_scale(b, |_| {})).collect();
    let log_lambda_hat: f64 = fits.iter().map(|f| f.log_lambda).sum::<f64>().max(0.0);
    Maximized {
        pi: PiVector(fits.iter().map(|f| f.pi).collect()),
        log_lambda_hat,
        lambda_hat: log_lambda_hat.exp(),
    }
}

/// Outcome of screening one window with one coefficient kind.
#[derive(Debug, Clone, PartialEq)]
pub struct LocusResult {
    pub window: Window,
    pub kind: CoefficientKind,
    /// `log BF` by flat coefficient index; `None` for degenerate coefficients.
    pub log_bf: Vec<Option<f64>>,
    pub pi_hat: PiVector,
    pub log_lambda_hat: f64,
    pub lambda_hat: f64,
    pub posterior_gamma: Vec<Option<f64>>,
    pub p_value: Option<f64>,
    /// Every coefficient was degenerate; `Λ̂ = 1` by convention.
    pub all_degenerate: bool,
}

impl LocusResult {
    pub fn bf(&self, scale: u32, location: usize) -> Option<f64> {
        self.log_bf[coeff_index(scale, location)].map(f64::exp)
    }

    pub fn n_usable(&self) -> usize {
        self.log_bf.iter().flatten().count()
    }

    pub fn detail(&self) -> BfDetail {
        BfDetail {
            chromosome: self.window.chromosome.clone(),
            start_bp: self.window.start_bp,
            end_bp: self.window.end_bp,
            kind: self.kind,
            entries: self
                .log_bf
                .iter()
                .zip(&self.posterior_gamma)
                .enumerate()
                .map(|(k, (b, g))| {
                    let (scale, location) = coeff_scale_location(k);
                    BfEntry {
                        scale,
                        location,
                        bf: b.map(f64::exp),
                        posterior_gamma: *g,
                    }
                })
                .collect(),
        }
    }
}

/// `log BF` for every coefficient row, `None` where flagged degenerate.
pub fn coefficient_log_bfs(
    ctx: &DesignContext,
    matrix: &CoefficientMatrix,
    degenerate: &[bool],
) -> Result<Vec<Option<f64>>> {
    if matrix.n_individuals != ctx.n {
        return Err(Error::DimensionMismatch(format!(
            "spectra cover {} individuals, design has {}",
            matrix.n_individuals, ctx.n
        )));
    }
    (0..matrix.n_coefficients)
        .into_par_iter()
        .map_init(Vec::new, |buf, k| {
            if degenerate[k] {
                return Ok(None);
            }
            let stats = ctx.response_stats_with(matrix.row(k), buf)?;
            match ctx.log_bayes_factor_from(stats) {
                Ok(b) => Ok(Some(b)),
                // residualisation against covariates can still leave nothing
                Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Assemble a locus result from per-coefficient log Bayes factors.
pub fn locus_from_log_bfs(window: &Window, kind: CoefficientKind, log_bf: Vec<Option<f64>>) -> LocusResult {
    let depth = window.depth;
    let mut per_scale = vec![Vec::new(); depth as usize + 1];
    for (k, b) in log_bf.iter().enumerate() {
        if let Some(b) = b {
            per_scale[coeff_scale_location(k).0 as usize].push(*b);
        }
    }
    let all_degenerate = per_scale.iter().all(Vec::is_empty);
    let max = maximize_lambda(&BayesFactors::from_log(per_scale));
    let posterior_gamma = log_bf
        .iter()
        .enumerate()
        .map(|(k, b)| b.map(|b| posterior_gamma(max.pi.values()[coeff_scale_location(k).0 as usize], b)))
        .collect();
    LocusResult {
        window: window.clone(),
        kind,
        log_bf,
        pi_hat: max.pi,
        log_lambda_hat: max.log_lambda_hat,
        lambda_hat: max.lambda_hat,
        posterior_gamma,
        p_value: None,
        all_degenerate,
    }
}

/// Screen precomputed spectra with one coefficient kind.
pub fn screen_spectra(
    window: &Window,
    spectra: &WindowSpectra,
    ctx: &DesignContext,
    kind: CoefficientKind,
) -> Result<LocusResult> {
    let (matrix, degenerate) = match kind {
        CoefficientKind::C => (&spectra.c, &spectra.c_degenerate),
        CoefficientKind::D => (&spectra.d, &spectra.d_degenerate),
    };
    let log_bf = coefficient_log_bfs(ctx, matrix, degenerate)?;
    Ok(locus_from_log_bfs(window, kind, log_bf))
}

/// Full pipeline for one window of one chromosome.
pub fn screen_window_chromosome(
    window: &Window,
    chrom: &Chromosome,
    ctx: &DesignContext,
    kind: CoefficientKind,
    config: &WaveletConfig,
) -> Result<LocusResult> {
    let spectra = WindowSpectra::compute(window, chrom, config)?;
    screen_spectra(window, &spectra, ctx, kind)
}

/// Interpolate, transform, shrink, rank-normalise, test every coefficient up
/// to the window depth, and maximise `Λ`. The p-value is left unset.
pub fn screen_window(
    window: &Window,
    cohort: &CohortData,
    ctx: &DesignContext,
    kind: CoefficientKind,
    config: &WaveletConfig,
) -> Result<LocusResult> {
    let chrom = cohort
        .chromosome(&window.chromosome)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown chromosome {}", window.chromosome)))?;
    screen_window_chromosome(window, chrom, ctx, kind, config)
}

/// Screen every window with each requested kind, in window order then kind
/// order. Spectra are computed once per window. Errors name the window.
pub fn screen_cohort(
    cohort: &CohortData,
    windows: &[Window],
    ctx: &DesignContext,
    kinds: &[CoefficientKind],
    config: &WaveletConfig,
) -> Result<Vec<LocusResult>> {
    let per_window: Vec<Vec<LocusResult>> = windows
        .par_iter()
        .map(|w| {
            let run = || -> Result<Vec<LocusResult>> {
                let chrom = cohort
                    .chromosome(&w.chromosome)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown chromosome {}", w.chromosome)))?;
                let spectra = WindowSpectra::compute(w, chrom, config)?;
                kinds.iter().map(|&k| screen_spectra(w, &spectra, ctx, k)).collect()
            };
            run().map_err(|e| Error::Window {
                window: format!("{}:{}-{}", w.chromosome, w.start_bp, w.end_bp),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(per_window.into_iter().flatten().collect())
}

/// Fisher's method: survival of `χ²_{2k}` at `-2 Σ log p_i`.
pub fn fisher_combine(p_values: &[f64]) -> Result<f64> {
    if p_values.is_empty() {
        return Err(Error::InvalidArgument("no p-values to combine".into()));
    }
    if let Some(p) = p_values.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::InvalidArgument(format!("p-value {p} outside (0, 1]")));
    }
    let half: f64 = -p_values.iter().map(|p| p.ln()).sum::<f64>();
    // even degrees of freedom: e^{-x/2} Σ_{i<k} (x/2)^i / i!
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..p_values.len() {
        term *= half / i as f64;
        sum += term;
    }
    Ok(((-half).exp() * sum).min(1.0))
}

/// `chrom start end kind n_snps depth lambda_hat pi_0..pi_D p_value`, with
/// `D` the deepest scale among `results`; missing entries are `NA`.
pub fn write_results_tsv<W: Write>(results: &[LocusResult], mut out: W) -> std::io::Result<()> {
    let max_depth = results.iter().map(|r| r.window.depth).max().unwrap_or(0);
    write!(out, "chrom\tstart\tend\tkind\tn_snps\tdepth\tlambda_hat\tlog_lambda_hat")?;
    for s in 0..=max_depth {
        write!(out, "\tpi_{s}")?;
    }
    writeln!(out, "\tp_value")?;
    for r in results {
        let w = &r.window;
        write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:e}\t{}",
            w.chromosome, w.start_bp, w.end_bp, r.kind, w.n_snps, w.depth, r.lambda_hat, r.log_lambda_hat
        )?;
        for s in 0..=max_depth as usize {
            match r.pi_hat.values().get(s) {
                Some(p) => write!(out, "\t{p}")?,
                None => write!(out, "\tNA")?,
            }
        }
        match r.p_value {
            Some(p) => writeln!(out, "\t{p:e}")?,
            None => writeln!(out, "\tNA")?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfEntry {
    pub scale: u32,
    pub location: usize,
    pub bf: Option<f64>,
    pub posterior_gamma: Option<f64>,
}

/// Per-coefficient Bayes factors of one locus, as written to the detail TSV.
#[derive(Debug, Clone, PartialEq)]
pub struct BfDetail {
    pub chromosome: String,
    pub start_bp: u64,
    pub end_bp: u64,
    pub kind: CoefficientKind,
    pub entries: Vec<BfEntry>,
}

impl BfDetail {
    pub fn depth(&self) -> u32 {
        self.entries.iter().map(|e| e.scale).max().unwrap_or(0)
    }

    /// `# chrom=.. start=.. end=.. kind=..` line, then
    /// `scale location bf posterior_gamma`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# chrom={} start={} end={} kind={}",
            self.chromosome, self.start_bp, self.end_bp, self.kind
        )?;
        writeln!(out, "scale\tlocation\tbf\tposterior_gamma")?;
        let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for e in &self.entries {
            writeln!(out, "{}\t{}\t{}\t{}", e.scale, e.location, na(e.bf), na(e.posterior_gamma))?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut meta: Option<(String, u64, u64, CoefficientKind)> = None;
        let mut header_seen = false;
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (mut chrom, mut start, mut end, mut kind) = (None, None, None, None);
                for kv in rest.split_whitespace() {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::parse(lineno, format!("expected key=value, got {kv:?}")))?;
                    let bad = |_| Error::parse(lineno, format!("bad value for {k}: {v:?}"));
                    match k {
                        "chrom" => chrom = Some(v.to_string()),
                        "start" => start = Some(v.parse::<u64>().map_err(bad)?),
                        "end" => end = Some(v.parse::<u64>().map_err(bad)?),
                        "kind" => kind = Some(v.parse::<CoefficientKind>()?),
                        _ => {}
                    }
                }
                match (chrom, start, end, kind) {
                    (Some(c), Some(s), Some(e), Some(k)) if e > s => meta = Some((c, s, e, k)),
                    _ => return Err(Error::parse(lineno, "incomplete locus header")),
                }
                continue;
            }
            if !header_seen {
                if line.split('\t').collect::<Vec<_>>() != ["scale", "location", "bf", "posterior_gamma"] {
                    return Err(Error::parse(lineno, "expected column header"));
                }
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(Error::parse(lineno, format!("expected 4 columns, found {}", f.len())));
            }
            let scale: u32 = f[0].parse().map_err(|_| Error::parse(lineno, "bad scale"))?;
            if scale > 30 {
                return Err(Error::parse(lineno, "scale too deep"));
            }
            let location: usize = f[1].parse().map_err(|_| Error::parse(lineno, "bad location"))?;
            if location >= 1usize << scale {
                return Err(Error::parse(lineno, "location outside scale"));
            }
            let opt = |s: &str, what: &str| -> Result<Option<f64>> {
                if s == "NA" {
                    return Ok(None);
                }
                let v: f64 = s.parse().map_err(|_| Error::parse(lineno, format!("bad {what}")))?;
                if v.is_nan() || v < 0.0 {
                    return Err(Error::parse(lineno, format!("invalid {what} {v}")));
                }
                Ok(Some(v))
            };
            entries.push(BfEntry {
                scale,
                location,
                bf: opt(f[2], "bf")?,
                posterior_gamma: opt(f[3], "posterior_gamma")?,
            });
        }
        let (chromosome, start_bp, end_bp, kind) =
            meta.ok_or_else(|| Error::parse(1, "missing locus header line"))?;
        if entries.is_empty() {
            return Err(Error::parse(1, "no Bayes factors"));
        }
        Ok(Self {
            chromosome,
            start_bp,
            end_bp,
            kind,
            entries,
        })
    }
}
