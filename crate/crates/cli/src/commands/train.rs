use std::path::PathBuf;

use clap::Args;
use log::info;
use malelm::{
    class_weights, load_corpus, stratified_split, train_ensemble, Dataset, ElmConfig, ElmModel, Ensemble,
    Featurization, Real,
};

use crate::artifact::{
    with_metadata, META_FEATURIZATION, META_SPLIT_SEED, META_TEST_FRACTION, META_TIE_SEED, META_WEIGHTED,
};
use crate::error::{usage, CliResult};
use crate::output::write_atomic;
use crate::settings::{
    pick, pick_switch, require_seed, ConfigFile, ElmArgs, FeatureArgs, ScalarKind, ELM_KEYS, FEATURE_KEYS,
};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_VEC1D: usize = 1024;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus root: one sub-directory of images per class.
    pub corpus: PathBuf,
    /// Output file (default model.elm, or ensemble.elme with --ensemble).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// key=value file mirroring the flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub elm: ElmArgs,
    /// Hidden units per model.
    #[arg(long)]
    pub neurons: Option<usize>,
    /// MLP share of the input activation; the rest goes to the RBF kernel.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Train a majority-vote committee of N models.
    #[arg(long, value_name = "N")]
    pub ensemble: Option<usize>,
    /// Reweight classes by inverse frequency.
    #[arg(long)]
    pub weighted: bool,
    /// Held-out share of every class (0 trains on everything).
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Base seed for weights, split and vote tie-breaking.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Floating-point width of the stored model.
    #[arg(long)]
    pub scalar: Option<ScalarKind>,
}

const KEYS: [&str; 8] = [
    "neurons",
    "alpha",
    "ensemble",
    "weighted",
    "test-fraction",
    "seed",
    "scalar",
    "out",
];

/// Everything `train` needs, validated.
#[derive(Debug)]
struct Plan {
    corpus: PathBuf,
    out: PathBuf,
    featurization: Featurization,
    config: ElmConfig,
    ensemble: Option<usize>,
    weighted: bool,
    test_fraction: f64,
    seed: u64,
    scalar: ScalarKind,
}

fn plan(args: &TrainArgs, strict: bool) -> CliResult<Plan> {
    let known: Vec<&str> = KEYS.iter().chain(&FEATURE_KEYS).chain(&ELM_KEYS).copied().collect();
    let file = ConfigFile::load(args.config.as_deref(), &known)?;

    let seed = require_seed(strict, pick(args.seed, &file, "seed")?, "train")?;
    let mut config = args.elm.resolve(&file, ElmConfig::default())?;
    if let Some(n) = pick(args.neurons, &file, "neurons")? {
        config.hidden_neurons = n;
    }
    if let Some(a) = pick(args.alpha, &file, "alpha")? {
        config.alpha = a;
    }
    config.seed = seed;
    config.validate()?;

    let test_fraction = pick(args.test_fraction, &file, "test-fraction")?.unwrap_or(DEFAULT_TEST_FRACTION);
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(usage(format!("`test-fraction` must be in [0, 1), got {test_fraction}")));
    }
    let ensemble = pick(args.ensemble, &file, "ensemble")?;
    if ensemble == Some(0) {
        return Err(usage("`ensemble` must be at least 1"));
    }
    let featurization = args
        .features
        .resolve(&file)?
        .unwrap_or(Featurization::vector(DEFAULT_VEC1D));
    let out = match pick(args.out.clone(), &file, "out")? {
        Some(p) => p,
        None if ensemble.is_some() => PathBuf::from("ensemble.elme"),
        None => PathBuf::from("model.elm"),
    };
    Ok(Plan {
        corpus: args.corpus.clone(),
        out,
        featurization,
        config,
        ensemble,
        weighted: pick_switch(args.weighted, &file, "weighted")?,
        test_fraction,
        seed,
        scalar: pick(args.scalar, &file, "scalar")?.unwrap_or_default(),
    })
}

pub fn run(args: &TrainArgs, strict: bool) -> CliResult {
    let plan = plan(args, strict)?;
    match plan.scalar {
        ScalarKind::F32 => train_typed::<f32>(&plan),
        ScalarKind::F64 => train_typed::<f64>(&plan),
    }
}

fn train_typed<T: Real>(plan: &Plan) -> CliResult {
    let data: Dataset<T> = load_corpus(&plan.corpus, &plan.featurization)?;
    plan.config.validate_for_input(data.feature_dim())?;
    info!(
        "loaded {} samples in {} classes as {}",
        data.len(),
        data.num_classes(),
        plan.featurization
    );
    let (train, test) = if plan.test_fraction > 0.0 {
        let (a, b) = stratified_split(&data, plan.test_fraction, plan.seed)?;
        (a, Some(b))
    } else {
        (data, None)
    };
    let weights = if plan.weighted {
        Some(class_weights::<T>(train.catalog())?)
    } else {
        None
    };
    let meta = [
        (META_FEATURIZATION, plan.featurization.to_string()),
        (META_TEST_FRACTION, plan.test_fraction.to_string()),
        (META_SPLIT_SEED, plan.seed.to_string()),
        (META_WEIGHTED, plan.weighted.to_string()),
        (META_TIE_SEED, plan.seed.to_string()),
    ];

    let bytes = match plan.ensemble {
        None => {
            let model = ElmModel::train(&train, &plan.config, weights.as_deref())?;
            let model = with_metadata(model, &meta);
            println!("train accuracy: {:.4}", model.accuracy(train.features(), train.labels())?);
            if let Some(test) = &test {
                println!("test accuracy: {:.4}", model.accuracy(test.features(), test.labels())?);
            }
            model.to_bytes()?
        }
        Some(count) => {
            let trained = train_ensemble(&train, &plan.config, count, plan.seed, weights.as_deref())?;
            let members = trained.members().iter().cloned().map(|m| with_metadata(m, &meta)).collect();
            let ens = Ensemble::new(members, plan.seed)?;
            let train_eval = ens.evaluate_members(&train, plan.seed)?;
            println!("train accuracy: {:.4}", train_eval.ensemble_accuracy);
            if let Some(test) = &test {
                let ev = ens.evaluate_members(test, plan.seed)?;
                println!("test accuracy: {:.4}", ev.ensemble_accuracy);
                println!("test member mean accuracy: {:.4}", ev.member_mean);
                println!("test member std accuracy: {:.4}", ev.member_std);
            }
            ens.to_bytes()?
        }
    };
    write_atomic(&plan.out, &bytes)?;
    println!("wrote {}", plan.out.display());
    Ok(())
}
