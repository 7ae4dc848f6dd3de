use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use malelm::seed::derive_seed;
use malelm::{load_corpus, Dataset, ElmConfig, ElmModel, Featurization, Real};

use crate::error::{usage, CliResult};
use crate::output::write_atomic;
use crate::settings::{
    pick, require_seed, ConfigFile, ElmArgs, FeatureArgs, ScalarKind, ELM_KEYS, FEATURE_KEYS,
};

use super::train::DEFAULT_VEC1D;

pub const BENCH_HEADER: [&str; 5] = ["alpha", "neurons", "count", "total_seconds", "seconds_per_model"];

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Corpus root: one sub-directory of images per class.
    pub corpus: PathBuf,
    /// Comma-separated alpha values.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Comma-separated hidden-unit counts.
    #[arg(long, value_delimiter = ',')]
    pub neurons: Vec<usize>,
    /// Models trained per grid point.
    #[arg(long)]
    pub count: Option<usize>,
    /// CSV output (stdout when absent).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub scalar: Option<ScalarKind>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub elm: ElmArgs,
}

struct Grid {
    alphas: Vec<f64>,
    neurons: Vec<usize>,
    count: usize,
    base: ElmConfig,
    featurization: Featurization,
}

fn list_or<T: std::str::FromStr>(flag: &[T], file: &ConfigFile, key: &str, default: Vec<T>) -> CliResult<Vec<T>>
where
    T: Clone,
    T::Err: std::fmt::Display,
{
    if !flag.is_empty() {
        return Ok(flag.to_vec());
    }
    Ok(file.get_list(key)?.unwrap_or(default))
}

pub fn run(args: &BenchArgs, strict: bool) -> CliResult {
    let mut known = vec!["alpha", "neurons", "count", "out", "seed", "scalar"];
    known.extend(FEATURE_KEYS);
    known.extend(ELM_KEYS);
    let file = ConfigFile::load(args.config.as_deref(), &known)?;

    let seed = require_seed(strict, pick(args.seed, &file, "seed")?, "bench")?;
    let grid = Grid {
        alphas: list_or(&args.alpha, &file, "alpha", vec![1.0, 0.5])?,
        neurons: list_or(&args.neurons, &file, "neurons", vec![1024])?,
        count: pick(args.count, &file, "count")?.unwrap_or(10),
        base: args.elm.resolve(&file, ElmConfig::default().with_seed(seed))?,
        featurization: args
            .features
            .resolve(&file)?
            .unwrap_or(Featurization::vector(DEFAULT_VEC1D)),
    };
    if grid.count == 0 {
        return Err(usage("`count` must be at least 1"));
    }
    for &alpha in &grid.alphas {
        for &neurons in &grid.neurons {
            grid.base.clone().with_alpha(alpha).with_neurons(neurons).validate()?;
        }
    }
    let out = pick(args.out.clone(), &file, "out")?;
    let csv = match pick(args.scalar, &file, "scalar")?.unwrap_or_default() {
        ScalarKind::F32 => bench_typed::<f32>(&args.corpus, &grid)?,
        ScalarKind::F64 => bench_typed::<f64>(&args.corpus, &grid)?,
    };
    match out {
        Some(path) => {
            write_atomic(&path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(())
}

fn bench_typed<T: Real>(corpus: &std::path::Path, grid: &Grid) -> CliResult<Vec<u8>> {
    let data: Dataset<T> = load_corpus(corpus, &grid.featurization)?;
    grid.base.validate_for_input(data.feature_dim())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BENCH_HEADER).map_err(anyhow::Error::from)?;
    for &alpha in &grid.alphas {
        for &neurons in &grid.neurons {
            let start = Instant::now();
            for i in 0..grid.count {
                let cfg = grid
                    .base
                    .clone()
                    .with_alpha(alpha)
                    .with_neurons(neurons)
                    .with_seed(derive_seed(grid.base.seed, i as u64));
                ElmModel::train(&data, &cfg, None)?;
            }
            let total = start.elapsed().as_secs_f64();
            w.write_record([
                alpha.to_string(),
                neurons.to_string(),
                grid.count.to_string(),
                format!("{total:.6}"),
                format!("{:.6}", total / grid.count as f64),
            ])
            .map_err(anyhow::Error::from)?;
        }
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("bench csv: {e}"))?)
}
