use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use wavescream::data::{write_genotypes, SnpRecord};
use wavescream::nullsim::ThresholdRule;
use wavescream_cli::{run_screen, DetailArg, KindArg, NullArgs, ScreenArgs};

const N: usize = 400;
const SNPS: usize = 1000;
const SPACING: u64 = 5000;
const FIRST: u64 = 1000;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wavescream"))
}

/// Five 1 Mb windows of 200 SNPs; the phenotype tracks the allele burden of
/// the second window.
fn write_fixture(dir: &Path) -> Vec<SnpRecord> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(17);
    let records: Vec<SnpRecord> = (0..SNPS)
        .map(|i| {
            let af: f64 = rng.random_range(0.1..0.5);
            SnpRecord {
                chromosome: "2".into(),
                position: FIRST + i as u64 * SPACING,
                id: format!("rs{i}"),
                imputation_quality: 1.0,
                dosages: (0..N)
                    .map(|_| (rng.random::<f64>() < af) as u8 as f64 + (rng.random::<f64>() < af) as u8 as f64)
                    .collect(),
            }
        })
        .collect();
    let burden: Vec<f64> = (0..N).map(|j| records[210..390].iter().map(|r| r.dosages[j]).sum()).collect();
    let m = burden.iter().sum::<f64>() / N as f64;
    let sd = (burden.iter().map(|b| (b - m) * (b - m)).sum::<f64>() / N as f64).sqrt();
    let y: String = burden
        .iter()
        .map(|b| format!("{}\n", 0.5 * (b - m) / sd + rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let ids: Vec<String> = (0..N).map(|j| format!("ind{j}")).collect();
    let mut f = fs::File::create(dir.join("geno.tsv")).unwrap();
    write_genotypes(&ids, &records, &mut f).unwrap();
    fs::write(dir.join("pheno.tsv"), format!("trait\n{y}")).unwrap();
    records
}

fn args(dir: &Path, out: &str) -> ScreenArgs {
    ScreenArgs {
        genotypes: dir.join("geno.tsv"),
        phenotype: dir.join("pheno.tsv"),
        covariates: None,
        window_bp: 1_000_000,
        overlap: 0.0,
        max_gap_bp: 10_000,
        min_snps_per_coeff: 10.0,
        sigma_b: 0.2,
        coefficient_kind: KindArg::Both,
        depth_cap: None,
        min_imputation_quality: 0.7,
        null: NullArgs {
            m: 2000,
            threshold_rule: ThresholdRule::default(),
            round_lambda1_down: false,
            cache_dir: Some(dir.join("cache")),
        },
        seed: 5,
        threads: 1,
        significance_threshold: 1e-3,
        output_directory: dir.join(out),
        sort_input: false,
        bf_detail: DetailArg::All,
    }
}

struct Row {
    start: u64,
    kind: String,
    p: f64,
}

fn results(path: &Path) -> Vec<Row> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (s, k, p) = (col("start"), col("kind"), col("p_value"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            Row { start: f[s].parse().unwrap(), kind: f[k].to_string(), p: f[p].parse().unwrap() }
        })
        .collect()
}

#[test]
fn planted_burden_is_found_in_its_window_only() {
    let tmp = tempfile::tempdir().unwrap();
    write_fixture(tmp.path());
    let summary = run_screen(&args(tmp.path(), "out")).unwrap();
    assert_eq!(summary.n_windows, 5);
    let rows = results(&summary.results_path);
    assert_eq!(rows.len(), 10);
    for r in rows.iter().filter(|r| r.kind == "c") {
        if r.start == FIRST + 1_000_000 {
            assert!(r.p <= 1e-3, "planted window p {}", r.p);
        } else {
            assert!(r.p > 1e-3, "window {} p {}", r.start, r.p);
        }
    }
    let significant = rows.iter().filter(|r| r.p <= 1e-3).count();
    assert_eq!(summary.n_significant, significant);
    assert!(summary.text.contains(&format!("significant p<=1e-3: {significant} of 10")));
    assert_eq!(fs::read_dir(tmp.path().join("out/bf")).unwrap().count(), 10);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    write_fixture(tmp.path());
    let mut a = args(tmp.path(), "one");
    a.null.cache_dir = None;
    let mut b = args(tmp.path(), "four");
    b.null.cache_dir = None;
    b.threads = 4;
    run_screen(&a).unwrap();
    run_screen(&b).unwrap();
    for f in ["results.tsv", "summary.txt", "bf/2_1001000_2001000_d.tsv"] {
        assert_eq!(fs::read(tmp.path().join("one").join(f)).unwrap(), fs::read(tmp.path().join("four").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sorted_input_matches_shuffled_input() {
    let tmp = tempfile::tempdir().unwrap();
    let records = write_fixture(tmp.path());
    let mut shuffled = records.clone();
    shuffled.reverse();
    shuffled.swap(3, 700);
    let ids: Vec<String> = (0..N).map(|j| format!("ind{j}")).collect();
    let mut f = fs::File::create(tmp.path().join("shuffled.tsv")).unwrap();
    write_genotypes(&ids, &shuffled, &mut f).unwrap();

    let mut unsorted = args(tmp.path(), "rejected");
    unsorted.genotypes = tmp.path().join("shuffled.tsv");
    assert!(run_screen(&unsorted).is_err());

    unsorted.sort_input = true;
    unsorted.output_directory = tmp.path().join("sorted");
    run_screen(&unsorted).unwrap();
    run_screen(&args(tmp.path(), "plain")).unwrap();
    assert_eq!(
        fs::read(tmp.path().join("sorted/results.tsv")).unwrap(),
        fs::read(tmp.path().join("plain/results.tsv")).unwrap()
    );
}

#[test]
fn missing_phenotype_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_fixture(tmp.path());
    let missing = tmp.path().join("nope.tsv");
    let out = bin()
        .args(["screen", "--genotypes"])
        .arg(tmp.path().join("geno.tsv"))
        .arg("--phenotype")
        .arg(&missing)
        .args(["--seed", "1", "--output-directory"])
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&missing.display().to_string()), "{err}");
}

#[test]
fn binary_screen_then_plot() {
    let tmp = tempfile::tempdir().unwrap();
    write_fixture(tmp.path());
    let out_dir = tmp.path().join("out");
    let status = bin()
        .args(["screen", "--genotypes"])
        .arg(tmp.path().join("geno.tsv"))
        .arg("--phenotype")
        .arg(tmp.path().join("pheno.tsv"))
        .args(["--overlap", "0", "--m", "1000", "--seed", "9", "--threads", "2", "--coefficient-kind", "c"])
        .args(["--significance-threshold", "0.01", "--bf-detail", "significant", "--output-directory"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_dir.join("null_cache").is_dir());
    let detail: PathBuf = out_dir.join("bf/2_1001000_2001000_c.tsv");
    assert!(detail.is_file());
    let svg = tmp.path().join("locus.svg");
    let status = bin().args(["plot", "--bf-detail"]).arg(&detail).arg("--output").arg(&svg).status().unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("<circle"));
}

#[test]
fn fisher_combines_arguments_and_files() {
    let out = bin().args(["fisher", "0.01", "0.01"]).output().unwrap();
    assert!(out.status.success());
    let p: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    let x: f64 = 1e-4;
    assert!((p - x * (1.0 - x.ln())).abs() < 1e-15);

    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("p.txt"), "# window p-values\n0.01\n0.01\n").unwrap();
    let out = bin().arg("fisher").arg("--input").arg(tmp.path().join("p.txt")).output().unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim().parse::<f64>().unwrap(), p);

    let bad = bin().args(["fisher", "1.5"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn nullsim_writes_a_reusable_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let run = || {
        bin()
            .args(["nullsim", "--lambda1", "0.98", "--depth", "4", "--m", "1000", "--seed", "3", "--output-directory"])
            .arg(tmp.path())
            .output()
            .unwrap()
    };
    let first = run();
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(tmp.path().join("null_cache/null_l0.9800000_d4_m1000_s3.tsv").is_file());
    assert_eq!(run().stdout, first.stdout);
    let bad = bin().args(["nullsim", "--lambda1", "1.5", "--depth", "4", "--seed", "3", "--output-directory"]).arg(tmp.path()).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn power_command_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("power.conf");
    fs::write(&cfg, "replicates = 3\nn = 300\nn_snps = 320\nn_blocks = 8\nmax_components = 8\nsimulations = 1000\ndirections = mono\n").unwrap();
    let out = bin().args(["power", "--config"]).arg(&cfg).arg("--output-directory").arg(tmp.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(tmp.path().join("power_table.tsv")).unwrap();
    assert!(table.starts_with("direction\tcomponents\treplicates"));
    assert_eq!(fs::read_to_string(tmp.path().join("power_replicates.tsv")).unwrap().lines().count(), 4);
}
