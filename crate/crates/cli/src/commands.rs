use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};

use anyhow::{bail, Context};
use wavescream::bayes::{build_design, lambda1};
use wavescream::data::{read_covariates, read_phenotype};
use wavescream::nullsim::round_lambda1;
use wavescream::screening::{fisher_combine, BfDetail};
use wavescream::simharness::{power_experiment, Method, PowerConfig};

use crate::plot::emit_pyramid_plot;
use crate::screen::{describe_null, null_models};
use crate::{require_file, with_threads, FisherArgs, NullsimArgs, PlotArgs, PowerArgs, UsageError};

fn open(path: &std::path::Path) -> anyhow::Result<BufReader<fs::File>> {
    Ok(BufReader::new(
        fs::File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

pub fn run_nullsim(args: &NullsimArgs) -> anyhow::Result<()> {
    let raw = match (args.lambda1, &args.phenotype) {
        (Some(l), _) => l,
        (None, Some(p)) => {
            require_file(p, "phenotype")?;
            let y = read_phenotype(open(p)?)?;
            let cov = match &args.covariates {
                Some(c) => {
                    require_file(c, "covariate")?;
                    read_covariates(open(c)?)?
                }
                None => Vec::new(),
            };
            let cols: Vec<Vec<f64>> = match cov.first() {
                Some(first) => (0..first.len()).map(|j| cov.iter().map(|r| r[j]).collect()).collect(),
                None => Vec::new(),
            };
            lambda1(&build_design(&y, &cols, args.sigma_b)?)
        }
        (None, None) => return Err(UsageError("give --lambda1 or --phenotype".into()).into()),
    };
    if !(raw > 0.0 && raw < 1.0) {
        return Err(UsageError(format!("λ₁ must lie in (0, 1), got {raw}")).into());
    }
    let l1 = round_lambda1(raw, args.null.round_lambda1_down);
    let models = with_threads(args.threads, || {
        null_models(&args.null, l1, [args.depth], args.seed, &args.output_directory)
    })??;
    let mut text = format!("lambda1={l1:.7}\n");
    for m in models.values() {
        describe_null(m, &mut text);
    }
    print!("{text}");
    Ok(())
}

pub fn run_power(args: &PowerArgs) -> anyhow::Result<()> {
    require_file(&args.config, "config")?;
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = PowerConfig::parse(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let report = with_threads(args.threads, || power_experiment(&config))??;
    fs::create_dir_all(&args.output_directory)?;
    let mut w = BufWriter::new(fs::File::create(args.output_directory.join("power_table.tsv"))?);
    report.write_table_tsv(&mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(fs::File::create(args.output_directory.join("power_replicates.tsv"))?);
    report.write_replicates_tsv(&mut w)?;
    w.flush()?;

    let mut table = Vec::new();
    report.write_table_tsv(&mut table)?;
    print!("{}", String::from_utf8_lossy(&table));
    println!(
        "lambda1={:.7} depth={} (window-level alpha: WS {:e}, GWAS {:e} with {} adjustment)",
        report.lambda1, report.depth, config.alpha_ws, config.alpha_gwas, config.gwas_adjustment
    );
    for &dir in &config.directions {
        for m in Method::ALL {
            let fit = report.logit_slope(m, dir);
            println!(
                "logit slope {dir:<6} {m:<8} {:+.4} (se {:.4}){}",
                fit.slope,
                fit.slope_se,
                if fit.converged { "" } else { " not converged" }
            );
        }
    }
    Ok(())
}

pub fn run_plot(args: &PlotArgs) -> anyhow::Result<()> {
    require_file(&args.bf_detail, "Bayes-factor detail")?;
    let detail = BfDetail::read_tsv(open(&args.bf_detail)?)
        .with_context(|| format!("parsing {}", args.bf_detail.display()))?;
    emit_pyramid_plot(&detail, &args.output)
}

pub fn run_fisher(args: &FisherArgs) -> anyhow::Result<()> {
    let mut ps = args.p_values.clone();
    if let Some(path) = &args.input {
        require_file(path, "p-value")?;
        for (i, line) in open(path)?.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            match t.parse::<f64>() {
                Ok(v) => ps.push(v),
                Err(_) => bail!("{}:{}: not a number: {t:?}", path.display(), i + 1),
            }
        }
    }
    let p = fisher_combine(&ps).map_err(|e| UsageError(e.to_string()))?;
    println!("{p:e}");
    Ok(())
}
