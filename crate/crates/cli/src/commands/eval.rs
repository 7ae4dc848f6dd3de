use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use malelm::{emit_report, load_corpus, stratified_split, Dataset, Featurization, Real, ReportFormat};

use crate::artifact::{read_file, sniff, Artifact, META_SPLIT_SEED, META_TEST_FRACTION, META_TIE_SEED};
use crate::error::{usage, CliResult};
use crate::output::write_atomic;
use crate::settings::{pick, ConfigFile, FeatureArgs, FEATURE_KEYS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model (.elm) or ensemble (.elme) file.
    pub model: PathBuf,
    /// Corpus root: one sub-directory of images per class.
    pub corpus: PathBuf,
    /// Which part of the corpus to score. Defaults to the held-out part when
    /// the model records a split, else everything.
    #[arg(long, value_enum)]
    pub split: Option<SplitChoice>,
    /// Report CSV path (default: `<model>.report.csv`; the table goes next to it as .txt).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Vote tie-break seed for ensembles (default: the one used at training).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the featurization stored in the model.
    #[command(flatten)]
    pub features: FeatureArgs,
}

pub fn run(args: &EvalArgs) -> CliResult {
    let bytes = read_file(&args.model)?;
    match sniff(&bytes)?.header.scalar.as_str() {
        "f32" => eval_typed::<f32>(args, &bytes),
        "f64" => eval_typed::<f64>(args, &bytes),
        other => Err(usage(format!("unsupported scalar type `{other}` in {}", args.model.display()))),
    }
}

fn meta_value<T: std::str::FromStr>(artifact: &Artifact<impl Real>, key: &str) -> CliResult<Option<T>> {
    artifact
        .metadata()
        .get(key)
        .map(|v| v.parse().map_err(|_| usage(format!("model metadata `{key}` is malformed: `{v}`"))))
        .transpose()
}

fn eval_typed<T: Real>(args: &EvalArgs, bytes: &[u8]) -> CliResult {
    let artifact = Artifact::<T>::from_bytes(bytes)?;
    let mut known = vec!["split", "seed", "out"];
    known.extend(FEATURE_KEYS);
    let file = ConfigFile::load(args.config.as_deref(), &known)?;

    let featurization = match args.features.resolve(&file)? {
        Some(f) => f,
        None => artifact
            .stored_featurization()?
            .ok_or_else(|| usage("model records no featurization; pass --image-size or --vec1d"))?,
    };
    check_dims(&featurization, artifact.input_dim())?;

    let split = match args.split {
        Some(s) => Some(s),
        None => file
            .get::<String>("split")?
            .map(|s| SplitChoice::from_str(&s, true).map_err(|_| usage(format!("invalid value for `split`: {s}"))))
            .transpose()?,
    };
    let test_fraction: f64 = meta_value(&artifact, META_TEST_FRACTION)?.unwrap_or(0.0);
    let split_seed: u64 = meta_value(&artifact, META_SPLIT_SEED)?.unwrap_or(0);
    let split = split.unwrap_or(if test_fraction > 0.0 {
        SplitChoice::Test
    } else {
        SplitChoice::All
    });

    let data: Dataset<T> = load_corpus(&args.corpus, &featurization)?;
    if data.class_names() != artifact.class_names() {
        return Err(usage(format!(
            "corpus classes {:?} differ from the model's {:?}",
            data.class_names(),
            artifact.class_names()
        )));
    }
    let data = match split {
        SplitChoice::All => data,
        SplitChoice::Train | SplitChoice::Test => {
            if test_fraction <= 0.0 {
                return Err(usage("`split`: the model was trained without a held-out split; use --split all"));
            }
            let (train, test) = stratified_split(&data, test_fraction, split_seed)?;
            if split == SplitChoice::Train {
                train
            } else {
                test
            }
        }
    };

    let tie_seed = match pick(args.seed, &file, "seed")? {
        Some(s) => s,
        None => meta_value(&artifact, META_TIE_SEED)?.unwrap_or(0),
    };
    let scored = artifact.score(&data, tie_seed)?;

    let mut table = emit_report(&scored.report, ReportFormat::Table);
    if let Some((mean, std)) = scored.members {
        let _ = writeln!(table, "member mean accuracy: {mean:.4}");
        let _ = writeln!(table, "member std accuracy: {std:.4}");
    }
    let csv_path = match pick(args.out.clone(), &file, "out")? {
        Some(p) => p,
        None => {
            let mut p = args.model.clone().into_os_string();
            p.push(".report.csv");
            PathBuf::from(p)
        }
    };
    let table_path = csv_path.with_extension("txt");
    write_atomic(&csv_path, emit_report(&scored.report, ReportFormat::Csv).as_bytes())?;
    write_atomic(&table_path, table.as_bytes())?;

    print!("{table}");
    println!("accuracy: {:.4}", scored.report.accuracy);
    println!("wrote {} and {}", csv_path.display(), table_path.display());
    Ok(())
}

fn check_dims(featurization: &Featurization, model_dim: usize) -> CliResult {
    if featurization.dim() != model_dim {
        return Err(usage(format!(
            "dimension mismatch: model expects {model_dim} inputs but featurization {featurization} yields {}",
            featurization.dim()
        )));
    }
    Ok(())
}
