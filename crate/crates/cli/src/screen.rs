use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use wavescream::bayes::{build_design, lambda1};
use wavescream::data::{define_windows, load_cohort, LoadOptions, WindowConfig};
use wavescream::nullsim::{load_or_simulate, round_lambda1, CacheKey, NullModel};
use wavescream::screening::{screen_cohort, write_results_tsv, LocusResult};
use wavescream::wavelet::WaveletConfig;

use crate::{require_file, with_threads, DetailArg, NullArgs, ScreenArgs, UsageError};

#[derive(Debug, Clone)]
pub struct ScreenSummary {
    pub lambda1: f64,
    pub n_windows: usize,
    pub n_results: usize,
    pub n_degenerate: usize,
    pub n_significant: usize,
    pub results_path: PathBuf,
    /// Also written to `summary.txt`.
    pub text: String,
}

pub(crate) fn null_models(
    null: &NullArgs,
    lambda1: f64,
    depths: impl IntoIterator<Item = u32>,
    seed: u64,
    output_directory: &Path,
) -> anyhow::Result<BTreeMap<u32, NullModel>> {
    let dir = null
        .cache_dir
        .clone()
        .unwrap_or_else(|| output_directory.join("null_cache"));
    let mut out = BTreeMap::new();
    for depth in depths {
        let key = CacheKey::new(lambda1, depth, null.m, seed);
        let (sample, _) = load_or_simulate(&dir, key)
            .with_context(|| format!("null simulation for depth {depth}"))?;
        let model = NullModel::from_sample(key.lambda1, depth, seed, sample, null.threshold_rule)?;
        out.insert(depth, model);
    }
    Ok(out)
}

pub(crate) fn describe_null(model: &NullModel, out: &mut String) {
    let se = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3e}"));
    let _ = write!(
        out,
        "null depth={} M={} rule={}",
        model.depth,
        model.simulations(),
        model.threshold_rule
    );
    match (&model.tail, &model.tail_error) {
        (Some(t), _) => {
            let _ = writeln!(
                out,
                " u={:.6} exceedances={} xi={:.5} (se {}) beta={:.6e} (se {})",
                t.threshold,
                t.n_exceedances,
                t.gpd.xi,
                se(t.gpd.xi_se),
                t.gpd.beta,
                se(t.gpd.beta_se)
            );
        }
        (None, e) => {
            let _ = writeln!(out, " tail fit unavailable ({}); empirical p-values only", e.as_deref().unwrap_or("?"));
        }
    }
}

fn detail_name(r: &LocusResult) -> String {
    format!("{}_{}_{}_{}.tsv", r.window.chromosome, r.window.start_bp, r.window.end_bp, r.kind)
}

/// Load, window, screen, attach p-values and write `results.tsv`,
/// `summary.txt` and Bayes-factor detail files.
pub fn run_screen(args: &ScreenArgs) -> anyhow::Result<ScreenSummary> {
    require_file(&args.genotypes, "genotype")?;
    require_file(&args.phenotype, "phenotype")?;
    if let Some(c) = &args.covariates {
        require_file(c, "covariate")?;
    }
    if !(args.significance_threshold > 0.0 && args.significance_threshold <= 1.0) {
        return Err(UsageError("--significance-threshold must lie in (0, 1]".into()).into());
    }
    let window_config = WindowConfig {
        window_bp: args.window_bp,
        overlap_fraction: args.overlap,
        max_gap_bp: args.max_gap_bp,
        min_snps_per_coeff: args.min_snps_per_coeff,
        depth_cap: args.depth_cap,
        ..WindowConfig::default()
    };
    window_config.validate().map_err(|e| UsageError(e.to_string()))?;

    with_threads(args.threads, || screen_inner(args, &window_config))?
}

fn screen_inner(args: &ScreenArgs, window_config: &WindowConfig) -> anyhow::Result<ScreenSummary> {
    let cohort = load_cohort(
        &args.genotypes,
        &args.phenotype,
        args.covariates.as_deref(),
        LoadOptions {
            min_imputation_quality: args.min_imputation_quality,
            sort_by_position: args.sort_input,
        },
    )?;
    let ctx = build_design(&cohort.phenotype, &cohort.covariates, args.sigma_b)?;
    let l1 = round_lambda1(lambda1(&ctx), args.null.round_lambda1_down);
    let windows = define_windows(&cohort, window_config)?;

    let mut results = screen_cohort(&cohort, &windows, &ctx, &args.coefficient_kind.kinds(), &WaveletConfig::default())?;
    let depths: std::collections::BTreeSet<u32> = windows.iter().map(|w| w.depth).collect();
    let nulls = null_models(&args.null, l1, depths, args.seed, &args.output_directory)?;
    for r in &mut results {
        let model = &nulls[&r.window.depth];
        r.p_value = Some(model.p_value_log(r.log_lambda_hat)?);
    }

    fs::create_dir_all(&args.output_directory)
        .with_context(|| format!("creating {}", args.output_directory.display()))?;
    let results_path = args.output_directory.join("results.tsv");
    {
        let mut w = BufWriter::new(
            fs::File::create(&results_path).with_context(|| format!("creating {}", results_path.display()))?,
        );
        write_results_tsv(&results, &mut w)?;
        w.flush()?;
    }

    let threshold = args.significance_threshold;
    let significant: Vec<&LocusResult> = results
        .iter()
        .filter(|r| r.p_value.is_some_and(|p| p <= threshold))
        .collect();
    let nominal = results.iter().filter(|r| r.p_value.is_some_and(|p| p <= 0.05)).count();
    let n_degenerate = results.iter().filter(|r| r.all_degenerate).count();

    if args.bf_detail != DetailArg::None {
        let dir = args.output_directory.join("bf");
        fs::create_dir_all(&dir)?;
        let chosen: Vec<&LocusResult> = match args.bf_detail {
            DetailArg::All => results.iter().collect(),
            _ => significant.clone(),
        };
        for r in chosen {
            let path = dir.join(detail_name(r));
            let mut w = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
            r.detail().write_tsv(&mut w)?;
            w.flush()?;
        }
    }

    let mut text = String::new();
    let _ = writeln!(text, "individuals={} snps={} windows={}", cohort.n_individuals(), cohort.n_snps(), windows.len());
    let _ = writeln!(text, "lambda1={l1:.7} sigma_b={}", args.sigma_b);
    for m in nulls.values() {
        describe_null(m, &mut text);
    }
    let _ = writeln!(text, "degenerate={n_degenerate}");
    let _ = writeln!(text, "nominal p<=0.05: {nominal} of {}", results.len());
    let _ = writeln!(text, "significant p<={threshold:e}: {} of {}", significant.len(), results.len());
    for r in &significant {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\tlog_lambda_hat={:.4}\tp={:e}",
            r.window.chromosome,
            r.window.start_bp,
            r.window.end_bp,
            r.kind,
            r.log_lambda_hat,
            r.p_value.unwrap_or(f64::NAN)
        );
    }
    fs::write(args.output_directory.join("summary.txt"), &text)?;

    Ok(ScreenSummary {
        lambda1: l1,
        n_windows: windows.len(),
        n_results: results.len(),
        n_degenerate,
        n_significant: significant.len(),
        results_path,
        text,
    })
}
