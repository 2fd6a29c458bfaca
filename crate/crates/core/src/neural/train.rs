use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::network::{Loss, Network};
use super::NetworkConfig;
use crate::error::{Error, Result};
use crate::timeseries::{fit_scaler, Matrix, ScalerParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub adam: AdamConfig,
    pub loss: Loss,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 2000,
            patience: 50,
            batch_size: None,
            adam: AdamConfig::default(),
            loss: Loss::Mae,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience >= self.max_epochs {
            return Err(Error::Config(format!(
                "patience ({}) must be below max epochs ({})",
                self.patience, self.max_epochs
            )));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Monitored (training) loss per epoch of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub stopped_early: bool,
}

/// Trains `network` in place on already-normalized samples and restores
/// the parameters with the lowest monitored loss.
///
/// The monitored loss of an epoch is the loss of the parameters the epoch
/// ends with, over every sample.
pub fn fit_network(
    network: &mut Network,
    optimizer: &mut AdamState,
    config: &TrainConfig,
    samples: &Matrix,
    targets: &[f64],
    shuffle_seed: u64,
) -> Result<TrainingHistory> {
    config.validate()?;
    if samples.rows() == 0 {
        return Err(Error::EmptyInput("training samples"));
    }
    let n = samples.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let full_batch = config.batch_size.is_none_or(|b| b >= n);

    let mut history = TrainingHistory {
        losses: Vec::new(),
        best_epoch: 0,
        best_loss: f64::INFINITY,
        stopped_early: false,
    };
    let mut best = network.clone();
    let mut since_best = 0usize;

    let mut record = |epoch: usize, loss: f64, net: &Network, history: &mut TrainingHistory| -> Result<bool> {
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        history.losses.push(loss);
        if loss < history.best_loss {
            history.best_loss = loss;
            history.best_epoch = epoch;
            best.clone_from(net);
            since_best = 0;
        } else {
            since_best += 1;
        }
        Ok(since_best >= config.patience)
    };

    if full_batch {
        // The gradient pass also yields the loss of the current parameters,
        // i.e. of the previous epoch's result.
        let (_, mut grads) = network.loss_and_gradient(samples, targets, &order, config.loss)?;
        for epoch in 0..config.max_epochs {
            optimizer.step(&config.adam, network, &grads);
            let (loss, next) = network.loss_and_gradient(samples, targets, &order, config.loss)?;
            grads = next;
            if record(epoch, loss, network, &mut history)? {
                history.stopped_early = true;
                break;
            }
        }
    } else {
        let batch = config.batch_size.expect("mini-batch size");
        for epoch in 0..config.max_epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let (_, grads) = network.loss_and_gradient(samples, targets, chunk, config.loss)?;
                optimizer.step(&config.adam, network, &grads);
            }
            let loss = network.loss(samples, targets, config.loss)?;
            if record(epoch, loss, network, &mut history)? {
                history.stopped_early = true;
                break;
            }
        }
    }
    *network = best;
    Ok(history)
}

pub const SNAPSHOT_FORMAT: &str = "loadcast-model";
pub const SNAPSHOT_VERSION: u32 = 1;

/// A network together with the scalers of its last fit, its optimizer
/// moments and the history of that fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: NetworkConfig,
    pub train_config: TrainConfig,
    pub network: Network,
    pub input_scaler: Option<ScalerParams>,
    pub target_scaler: Option<ScalerParams>,
    pub optimizer: AdamState,
    pub history: Option<TrainingHistory>,
    pub fits: u64,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    model: TrainedModel,
}

fn mix_seed(seed: u64, round: u64) -> u64 {
    seed ^ round.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Concatenates each row with its `lookback - 1` predecessors, oldest first.
fn build_samples(rows: &Matrix, lookback: usize) -> Matrix {
    let lookback = lookback.max(1);
    let n = rows.rows().saturating_sub(lookback - 1);
    let mut data = Vec::with_capacity(n * lookback * rows.cols());
    for end in (lookback - 1)..rows.rows() {
        for r in (end + 1 - lookback)..=end {
            data.extend_from_slice(rows.row(r));
        }
    }
    Matrix::from_vec(n, lookback * rows.cols(), data).expect("consistent sample shape")
}

impl TrainedModel {
    /// Builds and initialises the network once; later fits reuse it.
    pub fn compile(config: NetworkConfig, train_config: TrainConfig, n_features: usize) -> Result<Self> {
        train_config.validate()?;
        let network = Network::new(&config, n_features, train_config.seed)?;
        let optimizer = AdamState::new(&network);
        Ok(TrainedModel {
            config,
            train_config,
            network,
            input_scaler: None,
            target_scaler: None,
            optimizer,
            history: None,
            fits: 0,
        })
    }

    pub fn context_rows(&self) -> usize {
        self.config.context_rows()
    }

    /// Refits the scalers on `rows`/`targets` and continues training from the
    /// current parameters and optimizer moments. On failure the model is
    /// left as it was.
    ///
    /// `rows` are consecutive raw feature rows; `targets[i]` is the load at
    /// row `i`. LSTM samples start at the first row with a full lookback.
    pub fn fit(&mut self, rows: &Matrix, targets: &[f64]) -> Result<&TrainingHistory> {
        if rows.rows() != targets.len() {
            return Err(Error::LengthMismatch {
                left: rows.rows(),
                right: targets.len(),
            });
        }
        let ctx = self.context_rows();
        if rows.rows() <= ctx {
            return Err(Error::EmptyInput("training rows shorter than the lookback"));
        }
        let input_scaler = fit_scaler(rows)?;
        let target_scaler = ScalerParams::fit_values(targets)?;
        let scaled = input_scaler.transform(rows)?;
        let samples = build_samples(&scaled, self.network.lookback);
        let scaled_targets: Vec<f64> = targets[ctx..].iter().map(|&y| target_scaler.scale(0, y)).collect();
        let (network, optimizer) = (self.network.clone(), self.optimizer.clone());
        let history = match fit_network(
            &mut self.network,
            &mut self.optimizer,
            &self.train_config,
            &samples,
            &scaled_targets,
            mix_seed(self.train_config.seed, self.fits),
        ) {
            Ok(h) => h,
            Err(e) => {
                self.network = network;
                self.optimizer = optimizer;
                return Err(e);
            }
        };
        self.input_scaler = Some(input_scaler);
        self.target_scaler = Some(target_scaler);
        self.fits += 1;
        Ok(self.history.insert(history))
    }

    /// Predictions in watts for `rows[context_rows()..]`.
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>> {
        let (Some(xs), Some(ys)) = (&self.input_scaler, &self.target_scaler) else {
            return Err(Error::NotFitted("network has not been fitted"));
        };
        if rows.rows() <= self.context_rows() {
            return Err(Error::EmptyInput("prediction rows shorter than the lookback"));
        }
        let scaled = xs.transform(rows)?;
        let samples = build_samples(&scaled, self.network.lookback);
        Ok(self
            .network
            .forward(&samples)?
            .into_iter()
            .map(|p| ys.unscale(0, p))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let snap = Snapshot {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string(&snap)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text)?;
        if snap.format != SNAPSHOT_FORMAT || snap.version != SNAPSHOT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model snapshot {} v{}",
                snap.format, snap.version
            )));
        }
        Ok(snap.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
