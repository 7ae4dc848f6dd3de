//! Model and ensemble files as seen by the commands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use malelm::elm::{read_model_header, ModelHeader, MODEL_MAGIC};
use malelm::ensemble::{ensemble_first_member, ENSEMBLE_MAGIC};
use malelm::{Dataset, ElmModel, Ensemble, EvaluationReport, Featurization, Real};

use crate::error::{usage, CliResult};

pub const META_FEATURIZATION: &str = "featurization";
pub const META_TEST_FRACTION: &str = "test_fraction";
pub const META_SPLIT_SEED: &str = "split_seed";
pub const META_WEIGHTED: &str = "weighted";
pub const META_TIE_SEED: &str = "tie_seed";

/// What a file on disk holds, read from its header only.
#[derive(Debug)]
pub struct Sniffed {
    /// `(member count, base seed)` for ensembles.
    pub ensemble: Option<(usize, u64)>,
    pub header: ModelHeader,
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    Ok(std::fs::read(path).with_context(|| format!("reading {}", path.display()))?)
}

pub fn sniff(bytes: &[u8]) -> CliResult<Sniffed> {
    if bytes.starts_with(ENSEMBLE_MAGIC) {
        let (count, seed, first) = ensemble_first_member(bytes)?;
        Ok(Sniffed {
            ensemble: Some((count, seed)),
            header: read_model_header(first)?,
        })
    } else if bytes.starts_with(MODEL_MAGIC) {
        Ok(Sniffed {
            ensemble: None,
            header: read_model_header(bytes)?,
        })
    } else {
        Err(usage("not a model or ensemble file (unrecognized magic bytes)"))
    }
}

pub enum Artifact<T> {
    Model(ElmModel<T>),
    Ensemble(Ensemble<T>),
}

/// Result of scoring an artifact on a dataset.
pub struct Scored {
    pub report: EvaluationReport,
    /// Mean and population std of member accuracies, for ensembles.
    pub members: Option<(f64, f64)>,
}

impl<T: Real> Artifact<T> {
    pub fn from_bytes(bytes: &[u8]) -> CliResult<Self> {
        if bytes.starts_with(ENSEMBLE_MAGIC) {
            Ok(Artifact::Ensemble(Ensemble::from_bytes(bytes)?))
        } else {
            Ok(Artifact::Model(ElmModel::from_bytes(bytes)?))
        }
    }

    fn primary(&self) -> &ElmModel<T> {
        match self {
            Artifact::Model(m) => m,
            Artifact::Ensemble(e) => &e.members()[0],
        }
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        self.primary().metadata()
    }

    pub fn input_dim(&self) -> usize {
        self.primary().input_dim()
    }

    pub fn class_names(&self) -> &[String] {
        self.primary().class_names()
    }

    pub fn stored_featurization(&self) -> CliResult<Option<Featurization>> {
        self.metadata()
            .get(META_FEATURIZATION)
            .map(|s| s.parse().map_err(Into::into))
            .transpose()
    }

    pub fn score(&self, data: &Dataset<T>, tie_seed: u64) -> CliResult<Scored> {
        match self {
            Artifact::Model(m) => Ok(Scored {
                report: malelm::evaluate(|x| m.predict(x), data)?,
                members: None,
            }),
            Artifact::Ensemble(e) => {
                let ev = e.evaluate_members(data, tie_seed)?;
                Ok(Scored {
                    report: ev.report,
                    members: Some((ev.member_mean, ev.member_std)),
                })
            }
        }
    }
}

/// Stamps the same metadata onto every member.
pub fn with_metadata<T: Real>(mut model: ElmModel<T>, meta: &[(&str, String)]) -> ElmModel<T> {
    for (k, v) in meta {
        model = model.with_metadata(*k, v.clone());
    }
    model
}
