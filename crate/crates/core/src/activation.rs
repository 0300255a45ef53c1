//! Componentwise activation functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    #[default]
    Sigmoid,
    #[serde(rename = "relu")]
    ReLU,
}

impl ActivationKind {
    /// Evaluates the activation without the finiteness check. Used on hot paths
    /// where inputs are already known to be finite.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::ReLU => x.max(0.0),
        }
    }

    /// Derivative of [`apply`](Self::apply). The ReLU derivative at 0 is 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            ActivationKind::ReLU => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::ReLU => "relu",
        }
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "relu" => Ok(ActivationKind::ReLU),
            other => Err(Error::Domain(format!("unknown activation '{other}'"))),
        }
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

// Split on sign so exp never overflows.
#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("activation input {x} is not finite")))
    }
}

pub fn activation_eval(kind: ActivationKind, x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(kind.apply(x))
}

pub fn activation_deriv(kind: ActivationKind, x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(kind.derivative(x))
}

/// Elementwise [`activation_eval`].
pub fn activation_eval_vec(kind: ActivationKind, xs: &[f64]) -> Result<Vec<f64>> {
    xs.iter().map(|&x| activation_eval(kind, x)).collect()
}
