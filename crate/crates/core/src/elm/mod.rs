//! Extreme learning machine: a random, frozen hidden layer followed by a
//! linear output layer fitted in one least-squares solve.

mod activation;
mod config;
mod hidden;
mod io;
mod model;

pub use activation::{apply_activation, Activation};
pub use config::{ElmConfig, FanIn, DEFAULT_RIDGE};
pub use hidden::{HiddenLayer, InputWeights, RbfUnits};
pub use io::{read_model_header, ModelHeader, FORMAT_VERSION, MODEL_MAGIC};
pub(crate) use io::SliceReader;
pub use model::{argmax, one_hot, ElmModel};
