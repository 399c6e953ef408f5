//! On-disk null samples keyed by `(λ₁, depth, M, seed)`.
//!
//! ```text
//! # lambda1=0.9876543
//! # depth=9
//! # simulations=100000
//! # seed=7
//! lambda_hat
//! 1
//! ...
//! ```

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::{Error, Result};

use super::{round_lambda1, simulate_null, MIN_SIMULATIONS};

pub const CACHE_DIR_ENV: &str = "WAVESCREAM_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheKey {
    /// Already rounded to 1e-7.
    pub lambda1: f64,
    pub depth: u32,
    pub simulations: usize,
    pub seed: u64,
}

impl CacheKey {
    pub fn new(lambda1: f64, depth: u32, simulations: usize, seed: u64) -> Self {
        Self {
            lambda1: round_lambda1(lambda1, false),
            depth,
            simulations,
            seed,
        }
    }

    pub fn file_name(&self) -> String {
        format!(
            "null_l{:.7}_d{}_m{}_s{}.tsv",
            self.lambda1, self.depth, self.simulations, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachedSample {
    pub key: CacheKey,
    pub sample: Vec<f64>,
}

impl CachedSample {
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# lambda1={:.7}", self.key.lambda1)?;
        writeln!(out, "# depth={}", self.key.depth)?;
        writeln!(out, "# simulations={}", self.key.simulations)?;
        writeln!(out, "# seed={}", self.key.seed)?;
        writeln!(out, "lambda_hat")?;
        for v in &self.sample {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }

    /// Parse a cache file; the sample must be ascending, `≥ 1` and of the
    /// declared size.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let (mut lambda1, mut depth, mut sims, mut seed) = (None, None, None, None);
        let mut header = false;
        let mut sample = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if header {
                    return Err(Error::parse(lineno, "metadata after column header"));
                }
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| Error::parse(lineno, "expected `# key=value`"))?;
                let bad = || Error::parse(lineno, format!("bad value for {k}: {v:?}"));
                match k.trim() {
                    "lambda1" => lambda1 = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
                    "depth" => depth = Some(v.trim().parse::<u32>().map_err(|_| bad())?),
                    "simulations" => sims = Some(v.trim().parse::<usize>().map_err(|_| bad())?),
                    "seed" => seed = Some(v.trim().parse::<u64>().map_err(|_| bad())?),
                    _ => {}
                }
                continue;
            }
            if !header {
                if line != "lambda_hat" {
                    return Err(Error::parse(lineno, "expected `lambda_hat` column header"));
                }
                header = true;
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad value {line:?}")))?;
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::parse(lineno, format!("Λ̂ must be finite and ≥ 1, got {v}")));
            }
            if sample.last().is_some_and(|&p: &f64| p > v) {
                return Err(Error::parse(lineno, "sample not sorted"));
            }
            sample.push(v);
        }
        let missing = |k: &str| Error::parse(1, format!("missing `{k}` header"));
        let key = CacheKey {
            lambda1: lambda1.ok_or_else(|| missing("lambda1"))?,
            depth: depth.ok_or_else(|| missing("depth"))?,
            simulations: sims.ok_or_else(|| missing("simulations"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
        };
        if !(key.lambda1 > 0.0 && key.lambda1 < 1.0) {
            return Err(Error::parse(1, "lambda1 outside (0, 1)"));
        }
        if sample.len() != key.simulations {
            return Err(Error::parse(
                1,
                format!("expected {} values, found {}", key.simulations, sample.len()),
            ));
        }
        Ok(Self { key, sample })
    }
}

/// Cache directory from the environment, else `default`.
pub fn cache_dir(default: &Path) -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| default.to_path_buf())
}

/// Reuse a cached sample for `key` under `dir`, or simulate and store it.
/// Returns the sample and whether it came from the cache.
pub fn load_or_simulate(dir: &Path, key: CacheKey) -> Result<(Vec<f64>, bool)> {
    if key.simulations < MIN_SIMULATIONS {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_SIMULATIONS} simulations required"
        )));
    }
    let path = dir.join(key.file_name());
    if let Ok(file) = fs::File::open(&path) {
        if let Ok(cached) = CachedSample::read(BufReader::new(file)) {
            if cached.key == key {
                return Ok((cached.sample, true));
            }
        }
    }
    let sample = simulate_null(key.lambda1, key.depth, key.simulations, key.seed)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = dir.join(format!("{}.tmp{}", key.file_name(), std::process::id()));
    let cached = CachedSample { key, sample };
    {
        let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        cached.write(&mut w).map_err(|e| Error::io(&tmp, e))?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok((cached.sample, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_name_format() {
        let k = CacheKey::new(0.98765432, 9, 100_000, 7);
        assert_eq!(k.file_name(), "null_l0.9876543_d9_m100000_s7.tsv");
    }

    #[test]
    fn round_trip_is_exact() {
        let c = CachedSample {
            key: CacheKey::new(0.5, 2, 3, 1),
            sample: vec![1.0, 1.000_000_000_000_2, 3.7],
        };
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert_eq!(CachedSample::read(buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_files() {
        let head = "# lambda1=0.5\n# depth=1\n# simulations=2\n# seed=1\nlambda_hat\n";
        assert!(CachedSample::read(format!("{head}2\n1\n").as_bytes()).is_err());
        assert!(CachedSample::read(format!("{head}0.5\n1\n").as_bytes()).is_err());
        assert!(CachedSample::read(format!("{head}1\n").as_bytes()).is_err());
        assert!(CachedSample::read("lambda_hat\n1\n".as_bytes()).is_err());
    }
}
