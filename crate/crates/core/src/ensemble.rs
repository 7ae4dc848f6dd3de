//! Majority-vote committees of independently seeded ELMs.
//!
//! Member `i` is trained with `seed = derive_seed(base_seed, i)`. Votes are
//! tallied per class index; when several classes share the top count, the
//! winner is drawn uniformly from them (in class-index order, which is the
//! lexicographic class-name order) with a ChaCha8 stream seeded by the
//! caller's tie seed.

use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::elm::{ElmConfig, ElmModel, SliceReader};
use crate::error::{Error, Result};
use crate::metrics::EvaluationReport;
use crate::scalar::Real;
use crate::seed::{derive_seed, rng_from_seed};

pub const ENSEMBLE_MAGIC: &[u8; 4] = b"ELME";
pub const ENSEMBLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    members: Vec<ElmModel<T>>,
    base_seed: u64,
}

/// Picks the most-voted class; ties are broken by `tie_seed`.
pub fn majority(tally: &[usize], tie_seed: u64) -> usize {
    let top = tally.iter().copied().max().unwrap_or(0);
    let tied: Vec<usize> = tally
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c == top)
        .map(|(j, _)| j)
        .collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng_from_seed(tie_seed).random_range(0..tied.len())]
    }
}

pub fn train_ensemble<T: Real>(
    trainset: &Dataset<T>,
    config: &ElmConfig,
    count: usize,
    base_seed: u64,
    class_weights: Option<&[T]>,
) -> Result<Ensemble<T>> {
    if count == 0 {
        return Err(Error::invalid("ensemble", "member count must be at least 1"));
    }
    let members = (0..count)
        .into_par_iter()
        .map(|i| {
            let cfg = config.clone().with_seed(derive_seed(base_seed, i as u64));
            ElmModel::train(trainset, &cfg, class_weights)
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(members, base_seed)
}

/// Per-member and committee accuracies on one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberEvaluation {
    pub member_accuracies: Vec<f64>,
    pub member_mean: f64,
    /// Population standard deviation of the member accuracies.
    pub member_std: f64,
    pub ensemble_accuracy: f64,
    pub report: EvaluationReport,
}

impl<T: Real> Ensemble<T> {
    pub fn new(members: Vec<ElmModel<T>>, base_seed: u64) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::invalid("ensemble", "member count must be at least 1"))?;
        for m in &members[1..] {
            if m.class_names() != first.class_names() {
                return Err(Error::invalid("ensemble", "members disagree on class catalog"));
            }
            if m.input_dim() != first.input_dim() {
                return Err(Error::DimensionMismatch {
                    context: "ensemble member input dimension",
                    expected: first.input_dim(),
                    actual: m.input_dim(),
                });
            }
        }
        Ok(Self { members, base_seed })
    }

    pub fn members(&self) -> &[ElmModel<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn class_names(&self) -> &[String] {
        self.members[0].class_names()
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    /// Votes per class for one input.
    pub fn tally(&self, x: &[T]) -> Result<Vec<usize>> {
        let mut votes = vec![0; self.class_names().len()];
        for m in &self.members {
            votes[m.predict(x)?] += 1;
        }
        Ok(votes)
    }

    pub fn vote(&self, x: &[T], tie_seed: u64) -> Result<usize> {
        Ok(majority(&self.tally(x)?, tie_seed))
    }

    /// Each member's predictions for a batch, `members × N`.
    pub fn member_predictions(&self, x: ArrayView2<T>) -> Result<Vec<Vec<usize>>> {
        self.members.par_iter().map(|m| m.predict_batch(x)).collect()
    }

    /// Voted labels for a batch. Sample `i` breaks ties with
    /// `derive_seed(tie_seed, i)`.
    pub fn predict_batch(&self, x: ArrayView2<T>, tie_seed: u64) -> Result<Vec<usize>> {
        let per_member = self.member_predictions(x)?;
        Ok(self.vote_from_predictions(&per_member, x.nrows(), tie_seed))
    }

    fn vote_from_predictions(&self, per_member: &[Vec<usize>], n: usize, tie_seed: u64) -> Vec<usize> {
        let m = self.class_names().len();
        (0..n)
            .map(|i| {
                let mut votes = vec![0; m];
                for preds in per_member {
                    votes[preds[i]] += 1;
                }
                majority(&votes, derive_seed(tie_seed, i as u64))
            })
            .collect()
    }

    pub fn evaluate_members(&self, testset: &Dataset<T>, tie_seed: u64) -> Result<MemberEvaluation> {
        if testset.is_empty() {
            return Err(Error::EmptyDataset("test set"));
        }
        let labels = testset.labels();
        let per_member = self.member_predictions(testset.features())?;
        let acc = |preds: &[usize]| {
            preds.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64
        };
        let member_accuracies: Vec<f64> = per_member.iter().map(|p| acc(p)).collect();
        let k = member_accuracies.len() as f64;
        let member_mean = member_accuracies.iter().sum::<f64>() / k;
        let member_std =
            (member_accuracies.iter().map(|a| (a - member_mean).powi(2)).sum::<f64>() / k).sqrt();
        let voted = self.vote_from_predictions(&per_member, testset.len(), tie_seed);
        let report = EvaluationReport::from_predictions(self.class_names().to_vec(), labels, &voted)?;
        Ok(MemberEvaluation {
            member_accuracies,
            member_mean,
            member_std,
            ensemble_accuracy: report.accuracy,
            report,
        })
    }

    /// Container layout:
    ///
    /// ```text
    /// "ELME"                      magic
    /// version                     u32 LE
    /// member count                u64 LE
    /// base seed                   u64 LE
    /// index table                 count × (offset u64 LE, length u64 LE),
    ///                             offsets relative to the first member byte
    /// members                     concatenated model files ("ELM1" ...)
    /// ```
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let blobs = self
            .members
            .iter()
            .map(|m| m.to_bytes())
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        out.extend_from_slice(ENSEMBLE_MAGIC);
        out.extend_from_slice(&ENSEMBLE_VERSION.to_le_bytes());
        out.extend_from_slice(&(blobs.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.base_seed.to_le_bytes());
        let mut offset = 0u64;
        for b in &blobs {
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            offset += b.len() as u64;
        }
        for b in &blobs {
            out.extend_from_slice(b);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (count, base_seed, index, body) = read_container(bytes)?;
        let members = index
            .iter()
            .map(|&(off, len)| {
                let blob = off
                    .checked_add(len)
                    .and_then(|end| body.get(off..end))
                    .ok_or(Error::Truncated("ensemble member"))?;
                let mut r = SliceReader::new(blob);
                let m = ElmModel::read_one(&mut r)?;
                if r.remaining() != 0 {
                    return Err(Error::Format("ensemble member has trailing bytes".into()));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        debug_assert_eq!(members.len(), count);
        Self::new(members, base_seed)
    }
}

type Container<'a> = (usize, u64, Vec<(usize, usize)>, &'a [u8]);

fn read_container(bytes: &[u8]) -> Result<Container<'_>> {
    let mut r = SliceReader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != ENSEMBLE_MAGIC {
        return Err(Error::Format("not an ensemble file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(r.take(4, "version")?.try_into().expect("4 bytes"));
    if version != ENSEMBLE_VERSION {
        return Err(Error::Format(format!("unsupported ensemble version {version}")));
    }
    let count = r.u64("member count")? as usize;
    if count == 0 {
        return Err(Error::Format("ensemble has no members".into()));
    }
    let base_seed = r.u64("base seed")?;
    if count > r.remaining() / 16 {
        return Err(Error::Truncated("index table"));
    }
    let mut index = Vec::with_capacity(count);
    for _ in 0..count {
        let off = r.u64("index table")? as usize;
        let len = r.u64("index table")? as usize;
        index.push((off, len));
    }
    let body = r.take(r.remaining(), "members")?;
    Ok((count, base_seed, index, body))
}

/// Member count and the raw bytes of the first member, for header inspection.
pub fn ensemble_first_member(bytes: &[u8]) -> Result<(usize, u64, &[u8])> {
    let (count, seed, index, body) = read_container(bytes)?;
    let (off, len) = index[0];
    let blob = body
        .get(off..off.saturating_add(len))
        .ok_or(Error::Truncated("ensemble member"))?;
    Ok((count, seed, blob))
}
