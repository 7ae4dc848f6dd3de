use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::error::{Error, Result};

/// Hidden-unit connectivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FanIn {
    #[default]
    Full,
    /// Each hidden unit reads exactly `k` randomly chosen inputs.
    Sparse(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmConfig {
    pub hidden_neurons: usize,
    pub activation: Activation,
    /// Weight of the MLP kernel; `1 − alpha` goes to the RBF kernel.
    pub alpha: f64,
    pub fan_in: FanIn,
    /// RBF width multiplier; unit widths are `scale · sqrt(n) / 2`.
    pub rbf_width_scale: f64,
    pub seed: u64,
    /// Optional Tikhonov term added to the least-squares fit.
    #[serde(default)]
    pub ridge: Option<f64>,
}

impl Default for ElmConfig {
    fn default() -> Self {
        Self {
            hidden_neurons: 1024,
            activation: Activation::Relu,
            alpha: 1.0,
            fan_in: FanIn::Full,
            rbf_width_scale: 1.0,
            seed: 0,
            ridge: None,
        }
    }
}

/// Ridge value used when the flag is switched on without an explicit amount.
pub const DEFAULT_RIDGE: f64 = 1e-8;

impl ElmConfig {
    pub fn with_neurons(mut self, n: usize) -> Self {
        self.hidden_neurons = n;
        self
    }

    pub fn with_activation(mut self, a: Activation) -> Self {
        self.activation = a;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_fan_in(mut self, fan_in: FanIn) -> Self {
        self.fan_in = fan_in;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ridge(mut self, ridge: Option<f64>) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn uses_rbf(&self) -> bool {
        self.alpha < 1.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_neurons == 0 {
            return Err(Error::invalid("neurons", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha", format!("{} is outside [0, 1]", self.alpha)));
        }
        if let FanIn::Sparse(0) = self.fan_in {
            return Err(Error::invalid("dropout-fanin", "must be at least 1"));
        }
        if !(self.rbf_width_scale > 0.0 && self.rbf_width_scale.is_finite()) {
            return Err(Error::invalid("rbf-width-scale", "must be a positive finite number"));
        }
        if let Some(r) = self.ridge {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::invalid("ridge", "must be non-negative and finite"));
            }
        }
        Ok(())
    }

    /// Checks the config against a concrete input dimension.
    pub fn validate_for_input(&self, input_dim: usize) -> Result<()> {
        self.validate()?;
        if input_dim == 0 {
            return Err(Error::invalid("input_dim", "must be at least 1"));
        }
        if let FanIn::Sparse(k) = self.fan_in {
            if k > input_dim {
                return Err(Error::invalid(
                    "dropout-fanin",
                    format!("fan-in {k} exceeds input dimension {input_dim}"),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_parameters() {
        let c = ElmConfig::default();
        assert_eq!(c.activation, Activation::Relu);
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.hidden_neurons, 1024);
        assert!(!c.uses_rbf());
        c.validate().unwrap();
    }

    #[test]
    fn invalid_fields_are_named() {
        let err = ElmConfig::default().with_alpha(1.5).validate().unwrap_err();
        assert!(err.to_string().contains("alpha"));
        let err = ElmConfig::default().with_neurons(0).validate().unwrap_err();
        assert!(err.to_string().contains("neurons"));
        let err = ElmConfig::default()
            .with_fan_in(FanIn::Sparse(9))
            .validate_for_input(4)
            .unwrap_err();
        assert!(err.to_string().contains("dropout-fanin"));
    }
}
