use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2};

use super::config::ElmConfig;
use super::hidden::HiddenLayer;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{least_squares_solve, ridge_solve};
use crate::scalar::Real;

/// A trained extreme learning machine. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel<T> {
    pub(crate) config: ElmConfig,
    pub(crate) hidden: HiddenLayer<T>,
    /// `ℓ × m` output weights.
    pub(crate) beta: Array2<T>,
    pub(crate) class_names: Vec<String>,
    /// Free-form notes (featurization, split parameters, ...).
    pub(crate) metadata: BTreeMap<String, String>,
}

/// One-hot `{0, 1}` targets, `N × m`.
pub fn one_hot<T: Real>(labels: &[usize], classes: usize) -> Result<Array2<T>> {
    let mut y = Array2::zeros((labels.len(), classes));
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::invalid("label", format!("label {l} out of range for {classes} classes")));
        }
        y[[i, l]] = T::one();
    }
    Ok(y)
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax<T: Real>(scores: impl IntoIterator<Item = T>) -> usize {
    let mut best = 0;
    let mut best_val = T::neg_infinity();
    for (i, v) in scores.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

impl<T: Real> ElmModel<T> {
    /// Trains on `trainset` with a freshly drawn hidden layer.
    ///
    /// `class_weights`, when given, holds one positive factor per class; every
    /// row of `H` and `Y` is scaled by the factor of its sample's class before
    /// solving.
    pub fn train(trainset: &Dataset<T>, config: &ElmConfig, class_weights: Option<&[T]>) -> Result<Self> {
        if trainset.is_empty() {
            return Err(Error::EmptyDataset("training set"));
        }
        let hidden = HiddenLayer::init(config, trainset.feature_dim())?;
        Self::fit(
            hidden,
            config.clone(),
            trainset.features(),
            trainset.labels(),
            trainset.class_names().to_vec(),
            class_weights,
        )
    }

    /// Solves for the output weights on top of an existing hidden layer.
    pub fn fit(
        hidden: HiddenLayer<T>,
        config: ElmConfig,
        x: ArrayView2<T>,
        labels: &[usize],
        class_names: Vec<String>,
        class_weights: Option<&[T]>,
    ) -> Result<Self> {
        config.validate()?;
        if x.nrows() == 0 {
            return Err(Error::EmptyDataset("training set"));
        }
        if labels.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                context: "labels vs training samples",
                expected: x.nrows(),
                actual: labels.len(),
            });
        }
        if class_names.is_empty() {
            return Err(Error::invalid("class_names", "need at least one class"));
        }
        if config.hidden_neurons != hidden.units() {
            return Err(Error::DimensionMismatch {
                context: "configured neurons vs hidden layer units",
                expected: config.hidden_neurons,
                actual: hidden.units(),
            });
        }
        let classes = class_names.len();
        let mut h = hidden.input_activation(x, config.alpha)?;
        config.activation.apply_inplace(&mut h);
        let mut y = one_hot::<T>(labels, classes)?;

        if let Some(w) = class_weights {
            if w.len() != classes {
                return Err(Error::DimensionMismatch {
                    context: "class weights vs classes",
                    expected: classes,
                    actual: w.len(),
                });
            }
            if w.iter().any(|c| !(*c > T::zero())) {
                return Err(Error::invalid("class weights", "must all be positive"));
            }
            for (i, &l) in labels.iter().enumerate() {
                let c = w[l];
                h.row_mut(i).mapv_inplace(|v| v * c);
                y.row_mut(i).mapv_inplace(|v| v * c);
            }
        }

        let beta = match config.ridge {
            Some(lambda) if lambda > 0.0 => ridge_solve(h.view(), y.view(), T::from_f64_lossy(lambda))?,
            _ => least_squares_solve(h.view(), y.view())?,
        };

        Ok(Self {
            config,
            hidden,
            beta,
            class_names,
            metadata: BTreeMap::new(),
        })
    }

    /// Assembles a model from parts, checking shapes.
    pub fn from_parts(
        config: ElmConfig,
        hidden: HiddenLayer<T>,
        beta: Array2<T>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if beta.dim() != (hidden.units(), class_names.len()) {
            return Err(Error::invalid(
                "beta",
                format!(
                    "shape {:?} does not match {} hidden units x {} classes",
                    beta.dim(),
                    hidden.units(),
                    class_names.len()
                ),
            ));
        }
        Ok(Self {
            config,
            hidden,
            beta,
            class_names,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn config(&self) -> &ElmConfig {
        &self.config
    }

    pub fn hidden(&self) -> &HiddenLayer<T> {
        &self.hidden
    }

    pub fn beta(&self) -> &Array2<T> {
        &self.beta
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.input_dim()
    }

    /// `H = g(C(X))` for a batch.
    pub fn hidden_output(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        let mut h = self.hidden.input_activation(x, self.config.alpha)?;
        self.config.activation.apply_inplace(&mut h);
        Ok(h)
    }

    /// Class scores `g(C(X)) β`, `N × m`.
    pub fn scores_batch(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        Ok(self.hidden_output(x)?.dot(&self.beta))
    }

    pub fn predict_scores(&self, x: &[T]) -> Result<Array1<T>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.scores_batch(view)?.row(0).to_owned())
    }

    pub fn predict(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(self.predict_scores(x)?))
    }

    pub fn predict_batch(&self, x: ArrayView2<T>) -> Result<Vec<usize>> {
        let scores = self.scores_batch(x)?;
        Ok(scores.rows().into_iter().map(|r| argmax(r.iter().copied())).collect())
    }

    /// Fraction of rows of `x` whose prediction equals the label.
    pub fn accuracy(&self, x: ArrayView2<T>, labels: &[usize]) -> Result<f64> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset("evaluation set"));
        }
        let preds = self.predict_batch(x)?;
        let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
        Ok(hits as f64 / labels.len() as f64)
    }
}
