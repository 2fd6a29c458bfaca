//! Feed-forward and LSTM regressors trained from scratch.
//!
//! Both network kinds end in one linear unit that predicts the load at a
//! single timestamp from its feature row (FFNN) or from the trailing
//! `lookback` feature rows (LSTM). Gradients are computed analytically and
//! can be verified with [`gradient_check`].

mod adam;
mod dense;
mod gradcheck;
mod lstm;
mod network;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adam::{AdamConfig, AdamState};
pub use dense::{Activation, DenseLayer};
pub use gradcheck::{gradient_check, relu_margin};
pub use lstm::{Gate, LstmLayer, LstmState};
pub use network::{Gradients, Loss, Network};
pub use train::{fit_network, TrainConfig, TrainedModel, TrainingHistory, SNAPSHOT_FORMAT, SNAPSHOT_VERSION};

use crate::error::{Error, Result};

pub const LAYER_RANGE: std::ops::RangeInclusive<usize> = 1..=8;
pub const NEURON_CHOICES: [usize; 5] = [8, 16, 32, 64, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Ffnn,
    Lstm,
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkKind::Ffnn => "ffnn",
            NetworkKind::Lstm => "lstm",
        })
    }
}

/// Architecture of one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub kind: NetworkKind,
    pub hidden_layers: usize,
    pub neurons: usize,
    /// LSTM sequence length in steps; ignored for FFNN.
    pub lookback: usize,
}

impl NetworkConfig {
    pub const DEFAULT_LOOKBACK: usize = 12;

    pub fn ffnn(hidden_layers: usize, neurons: usize) -> Self {
        NetworkConfig {
            kind: NetworkKind::Ffnn,
            hidden_layers,
            neurons,
            lookback: 1,
        }
    }

    pub fn lstm(hidden_layers: usize, neurons: usize) -> Self {
        NetworkConfig {
            kind: NetworkKind::Lstm,
            hidden_layers,
            neurons,
            lookback: Self::DEFAULT_LOOKBACK,
        }
    }

    /// Feature rows preceding the predicted row that a sample needs.
    pub fn context_rows(&self) -> usize {
        match self.kind {
            NetworkKind::Ffnn => 0,
            NetworkKind::Lstm => self.lookback.max(1) - 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !LAYER_RANGE.contains(&self.hidden_layers) {
            return Err(Error::Config(format!(
                "hidden layers must be 1-8, got {}",
                self.hidden_layers
            )));
        }
        if !NEURON_CHOICES.contains(&self.neurons) {
            return Err(Error::Config(format!(
                "neurons per layer must be one of {NEURON_CHOICES:?}, got {}",
                self.neurons
            )));
        }
        if self.kind == NetworkKind::Lstm && self.lookback == 0 {
            return Err(Error::Config("LSTM lookback must be at least one step".into()));
        }
        Ok(())
    }
}

impl fmt::Display for NetworkConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}x{}", self.kind, self.hidden_layers, self.neurons)?;
        if self.kind == NetworkKind::Lstm && self.lookback != Self::DEFAULT_LOOKBACK {
            write!(f, "@{}", self.lookback)?;
        }
        Ok(())
    }
}

/// Parses `ffnn:4x8`, `lstm:7x8` or `lstm:7x8@24` (lookback override).
impl FromStr for NetworkConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "cannot parse network {s:?}; expected e.g. ffnn:4x8 or lstm:7x8@12"
            ))
        };
        let (kind, shape) = s.split_once(':').ok_or_else(bad)?;
        let (shape, lookback) = match shape.split_once('@') {
            Some((shape, lb)) => (shape, Some(lb.parse::<usize>().map_err(|_| bad())?)),
            None => (shape, None),
        };
        let (layers, neurons) = shape.split_once('x').ok_or_else(bad)?;
        let layers = layers.parse().map_err(|_| bad())?;
        let neurons = neurons.parse().map_err(|_| bad())?;
        let mut config = match kind.to_ascii_lowercase().as_str() {
            "ffnn" => NetworkConfig::ffnn(layers, neurons),
            "lstm" => NetworkConfig::lstm(layers, neurons),
            _ => return Err(bad()),
        };
        if let Some(lb) = lookback {
            if config.kind == NetworkKind::Ffnn {
                return Err(bad());
            }
            config.lookback = lb;
        }
        config.validate()?;
        Ok(config)
    }
}
