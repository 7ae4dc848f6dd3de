//! Extreme learning machines for malware classification from byte images.
//!
//! Executables are rendered as grayscale images ([`imaging`]), turned into
//! fixed-length feature vectors, and classified by single-hidden-layer random
//! networks whose output weights are fitted by minimum-norm least squares
//! ([`elm`], [`linalg`]). Committees of such networks vote ([`ensemble`]);
//! [`metrics`] summarizes the results.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar for the common cases.

pub mod dataset;
pub mod elm;
pub mod ensemble;
mod error;
pub mod imaging;
pub mod linalg;
pub mod metrics;
mod scalar;
pub mod seed;

pub use dataset::{class_weights, load_corpus, stratified_split, ClassCatalog, Dataset};
pub use elm::{Activation, ElmConfig, ElmModel, FanIn, HiddenLayer};
pub use ensemble::{train_ensemble, Ensemble, MemberEvaluation};
pub use error::{Error, Result};
pub use imaging::{
    bytes_to_image, flatten_2d, resample_1d, resize, width_for_size, FeatureVector, Featurization,
    GrayImage, ResizeMethod,
};
pub use linalg::{least_squares_solve, pseudo_inverse, ridge_solve};
pub use metrics::{emit_report, evaluate, ConfusionMatrix, EvaluationReport, ReportFormat};
pub use scalar::Real;

pub type Model = ElmModel<f64>;
pub type ModelF32 = ElmModel<f32>;
pub type Committee = Ensemble<f64>;
pub type CommitteeF32 = Ensemble<f32>;
pub type Samples = Dataset<f64>;
pub type SamplesF32 = Dataset<f32>;
pub type Layer = HiddenLayer<f64>;
pub type Features = FeatureVector<f64>;
