//! Flag / config-file / default resolution.
//!
//! A config file is flat `key=value` text whose keys mirror long flag names.
//! A flag given on the command line always wins over the file, which wins
//! over built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use malelm::{Activation, ElmConfig, FanIn, Featurization, ResizeMethod};

use crate::error::{usage, CliResult};

#[derive(Debug, Default)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Reads `path`; keys outside `known` are rejected.
    pub fn load(path: Option<&Path>, known: &[&str]) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                usage(format!("{}:{}: expected key=value, got `{line}`", path.display(), lineno + 1))
            })?;
            let key = key.trim().trim_start_matches("--").to_string();
            if !known.contains(&key.as_str()) {
                return Err(usage(format!(
                    "{}:{}: unknown key `{key}` (known: {})",
                    path.display(),
                    lineno + 1,
                    known.join(", ")
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            values,
        })
    }

    pub fn get<T>(&self, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse().map_err(|e| {
                    let origin = self.path.as_deref().map(|p| p.display().to_string()).unwrap_or_default();
                    usage(format!("invalid value for `{key}` in {origin}: {e}"))
                })
            })
            .transpose()
    }

    /// Comma-separated list value.
    pub fn get_list<T>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(raw) = self.values.get(key) else {
            return Ok(None);
        };
        raw.split(',')
            .map(|item| {
                item.trim()
                    .parse()
                    .map_err(|e| usage(format!("invalid value for `{key}` in config: {e}")))
            })
            .collect::<CliResult<Vec<T>>>()
            .map(Some)
    }
}

/// Flag value if given, else the file's value.
pub fn pick<T>(flag: Option<T>, file: &ConfigFile, key: &str) -> CliResult<Option<T>>
where
    T: FromStr,
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

/// Boolean switch: set on the command line, or `key=true` in the file.
pub fn pick_switch(flag: bool, file: &ConfigFile, key: &str) -> CliResult<bool> {
    Ok(flag || file.get::<bool>(key)?.unwrap_or(false))
}

/// `WxH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageSize {
    pub width: usize,
    pub height: usize,
}

impl FromStr for ImageSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected WIDTHxHEIGHT, got `{s}`");
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        Ok(Self {
            width: w.trim().parse().map_err(|_| bad())?,
            height: h.trim().parse().map_err(|_| bad())?,
        })
    }
}

/// `full` or a positive count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FanInArg(pub FanIn);

impl FromStr for FanInArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(Self(FanIn::Full));
        }
        s.parse::<usize>()
            .map(|k| Self(FanIn::Sparse(k)))
            .map_err(|_| format!("expected `full` or a count, got `{s}`"))
    }
}

/// Floating-point width used for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalarKind {
    F32,
    #[default]
    F64,
}

impl FromStr for ScalarKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "f32" => Ok(ScalarKind::F32),
            "f64" => Ok(ScalarKind::F64),
            _ => Err(format!("expected f32 or f64, got `{s}`")),
        }
    }
}

pub const FEATURE_KEYS: [&str; 3] = ["image-size", "vec1d", "resize"];

#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// Resize each image to WxH and flatten it.
    #[arg(long, value_name = "WxH")]
    pub image_size: Option<ImageSize>,
    /// Block-average each image's pixel stream to N values.
    #[arg(long, value_name = "N")]
    pub vec1d: Option<usize>,
    /// Interpolation for --image-size.
    #[arg(long, value_name = "METHOD")]
    pub resize: Option<ResizeMethod>,
}

impl FeatureArgs {
    /// Featurization from flags, else from the file, else `None`.
    pub fn resolve(&self, file: &ConfigFile) -> CliResult<Option<Featurization>> {
        let resize = pick(self.resize, file, "resize")?;
        if self.image_size.is_some() || self.vec1d.is_some() {
            build_featurization(self.image_size, self.vec1d, resize)
        } else {
            build_featurization(file.get("image-size")?, file.get("vec1d")?, resize)
        }
    }
}

fn build_featurization(
    size: Option<ImageSize>,
    length: Option<usize>,
    resize: Option<ResizeMethod>,
) -> CliResult<Option<Featurization>> {
    let feat = match (size, length) {
        (Some(_), Some(_)) => return Err(usage("`image-size` and `vec1d` are mutually exclusive")),
        (Some(s), None) => Featurization::Image {
            width: s.width,
            height: s.height,
            method: resize.unwrap_or_default(),
        },
        (None, Some(n)) => Featurization::Vector1d { length: n },
        (None, None) => return Ok(None),
    };
    feat.validate()?;
    Ok(Some(feat))
}

pub const ELM_KEYS: [&str; 4] = ["activation", "dropout-fanin", "rbf-width-scale", "ridge"];

/// Hidden-layer options shared by `train` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct ElmArgs {
    /// tanh, relu, softlim, hardlim or multiquadric.
    #[arg(long)]
    pub activation: Option<Activation>,
    /// Inputs read by each hidden unit (`full` for dense).
    #[arg(long, value_name = "K")]
    pub dropout_fanin: Option<FanInArg>,
    /// Multiplier on the RBF unit width.
    #[arg(long)]
    pub rbf_width_scale: Option<f64>,
    /// Tikhonov term for the least-squares fit (0 disables).
    #[arg(long)]
    pub ridge: Option<f64>,
}

impl ElmArgs {
    /// Applies flags and file values on top of `base`. Neurons, alpha and
    /// seed are filled in by the caller.
    pub fn resolve(&self, file: &ConfigFile, base: ElmConfig) -> CliResult<ElmConfig> {
        let mut cfg = base;
        if let Some(a) = pick(self.activation, file, "activation")? {
            cfg.activation = a;
        }
        if let Some(FanInArg(f)) = pick(self.dropout_fanin, file, "dropout-fanin")? {
            cfg.fan_in = f;
        }
        if let Some(s) = pick(self.rbf_width_scale, file, "rbf-width-scale")? {
            cfg.rbf_width_scale = s;
        }
        if let Some(r) = pick(self.ridge, file, "ridge")? {
            cfg.ridge = (r != 0.0).then_some(r);
        }
        Ok(cfg)
    }
}

/// Enforces `--strict-repro`: randomized commands need an explicit seed.
pub fn require_seed(strict: bool, seed: Option<u64>, command: &str) -> CliResult<u64> {
    match seed {
        Some(s) => Ok(s),
        None if strict => Err(usage(format!("`seed` is required for `{command}` under --strict-repro"))),
        None => Ok(0),
    }
}
