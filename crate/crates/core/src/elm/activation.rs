use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::Real;

/// Hidden-unit nonlinearity `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    #[default]
    Relu,
    /// `clamp(z, 0, 1)`
    Softlim,
    /// `1` if `z > 0`, else `0`
    Hardlim,
    /// `sqrt(1 + z²)`
    Multiquadric,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Tanh,
        Activation::Relu,
        Activation::Softlim,
        Activation::Hardlim,
        Activation::Multiquadric,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Softlim => "softlim",
            Activation::Hardlim => "hardlim",
            Activation::Multiquadric => "multiquadric",
        }
    }

    #[inline]
    pub fn eval<T: Real>(&self, z: T) -> T {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(T::zero()),
            Activation::Softlim => z.max(T::zero()).min(T::one()),
            Activation::Hardlim => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Multiquadric => (T::one() + z * z).sqrt(),
        }
    }

    pub fn apply_inplace<T: Real>(&self, z: &mut Array2<T>) {
        let act = *self;
        z.mapv_inplace(|v| act.eval(v));
    }

    pub fn apply<T: Real>(&self, z: &Array2<T>) -> Array2<T> {
        let act = *self;
        z.mapv(|v| act.eval(v))
    }
}

/// Applies the activation called `name` elementwise.
pub fn apply_activation<T: Real>(name: &str, z: &Array2<T>) -> Result<Array2<T>, Error> {
    Ok(name.parse::<Activation>()?.apply(z))
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownActivation(s.to_string()))
    }
}
