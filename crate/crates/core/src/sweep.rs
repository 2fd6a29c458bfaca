//! Grid search over network kind, depth and width with the rolling
//! evaluation of the engine.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{self, Dataset, EngineConfig, ForecasterSpec, KeepForecasts};
use crate::error::{Error, Result};
use crate::metrics::aggregate;
use crate::neural::{NetworkConfig, NetworkKind, LAYER_RANGE, NEURON_CHOICES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub kinds: Vec<NetworkKind>,
    pub layers: Vec<usize>,
    pub neurons: Vec<usize>,
    pub lookback: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            kinds: vec![NetworkKind::Ffnn, NetworkKind::Lstm],
            layers: LAYER_RANGE.collect(),
            neurons: NEURON_CHOICES.to_vec(),
            lookback: NetworkConfig::DEFAULT_LOOKBACK,
        }
    }
}

impl SweepGrid {
    pub fn cells(&self) -> Result<Vec<NetworkConfig>> {
        let mut cells = Vec::new();
        for &kind in &self.kinds {
            for &layers in &self.layers {
                for &neurons in &self.neurons {
                    let cell = NetworkConfig {
                        kind,
                        hidden_layers: layers,
                        neurons,
                        lookback: if kind == NetworkKind::Lstm { self.lookback } else { 1 },
                    };
                    cell.validate()?;
                    cells.push(cell);
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Config("the sweep grid has no cells".into()));
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok {
        issuances: usize,
        mae_w: f64,
        rmse_w: f64,
        mase: Option<f64>,
        refits: usize,
        /// Steps whose refit or forecast failed.
        failures: usize,
    },
    Failed {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub config: NetworkConfig,
    pub outcome: CellOutcome,
    /// Wall-clock time of the cell's refits, excluded from the result table.
    #[serde(skip)]
    pub mean_refit_seconds: Option<f64>,
}

/// Evaluates every cell of the grid with the same engine settings and seed,
/// in parallel. A cell whose run errors or never issues is marked failed.
pub fn architecture_sweep(dataset: &Dataset, base: &EngineConfig, grid: &SweepGrid) -> Result<Vec<SweepCell>> {
    let cells = grid.cells()?;
    base.validate()?;
    Ok(cells
        .into_par_iter()
        .map(|cell| {
            let config = EngineConfig {
                forecasters: vec![ForecasterSpec::Neural(cell)],
                keep_forecasts: KeepForecasts::None,
                ..base.clone()
            };
            let started = Instant::now();
            let run = engine::run_configured(dataset, &config);
            let elapsed = started.elapsed().as_secs_f64();
            let (outcome, mean_refit_seconds) = match run {
                Err(e) => (CellOutcome::Failed { message: e.to_string() }, None),
                Ok(run) => {
                    let log = &run.forecasters[0];
                    let timing = (!log.refit_seconds.is_empty())
                        .then(|| log.refit_seconds.iter().sum::<f64>() / log.refit_seconds.len() as f64);
                    match aggregate(&log.reports) {
                        Ok(a) => (
                            CellOutcome::Ok {
                                issuances: a.issuances,
                                mae_w: a.mae_w,
                                rmse_w: a.rmse_w,
                                mase: a.mase,
                                refits: log.refits.len(),
                                failures: log.failures.len(),
                            },
                            timing,
                        ),
                        Err(_) => {
                            let message = log
                                .failures
                                .first()
                                .map(|f| format!("{} at {}: {}", f.stage, f.at, f.message))
                                .unwrap_or_else(|| "no forecast was issued".into());
                            (CellOutcome::Failed { message }, timing.or(Some(elapsed)))
                        }
                    }
                }
            };
            SweepCell {
                config: cell,
                outcome,
                mean_refit_seconds,
            }
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per cell; identical for identical inputs.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out =
        String::from("kind,layers,neurons,lookback,status,issuances,mae_w,rmse_w,mase,refits,failures,message\n");
    for c in cells {
        let k = &c.config;
        let _ = write!(out, "{},{},{},{},", k.kind, k.hidden_layers, k.neurons, k.lookback);
        match &c.outcome {
            CellOutcome::Ok {
                issuances,
                mae_w,
                rmse_w,
                mase,
                refits,
                failures,
            } => {
                let _ = writeln!(
                    out,
                    "ok,{issuances},{mae_w},{rmse_w},{},{refits},{failures},",
                    opt(*mase)
                );
            }
            CellOutcome::Failed { message } => {
                let _ = writeln!(out, "failed,,,,,,,\"{}\"", message.replace('"', "'"));
            }
        }
    }
    out
}

pub fn timings_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("cell,mean_refit_seconds\n");
    for c in cells {
        let _ = writeln!(out, "{},{}", c.config, opt(c.mean_refit_seconds));
    }
    out
}

/// MASE, MAE and RMSE per kind with layers as rows and neurons as columns.
pub fn sweep_table(cells: &[SweepCell]) -> String {
    let mut kinds: Vec<NetworkKind> = Vec::new();
    let mut layers: Vec<usize> = Vec::new();
    let mut neurons: Vec<usize> = Vec::new();
    for c in cells {
        if !kinds.contains(&c.config.kind) {
            kinds.push(c.config.kind);
        }
        if !layers.contains(&c.config.hidden_layers) {
            layers.push(c.config.hidden_layers);
        }
        if !neurons.contains(&c.config.neurons) {
            neurons.push(c.config.neurons);
        }
    }
    layers.sort_unstable();
    neurons.sort_unstable();
    let mut out = String::new();
    let metrics: [(&str, fn(&CellOutcome) -> Option<String>); 3] = [
        ("MASE", |o| match o {
            CellOutcome::Ok { mase, .. } => Some(mase.map_or("-".into(), |m| format!("{m:.3}"))),
            _ => None,
        }),
        ("MAE [W]", |o| match o {
            CellOutcome::Ok { mae_w, .. } => Some(format!("{mae_w:.0}")),
            _ => None,
        }),
        ("RMSE [W]", |o| match o {
            CellOutcome::Ok { rmse_w, .. } => Some(format!("{rmse_w:.0}")),
            _ => None,
        }),
    ];
    for kind in kinds {
        for (name, cell) in metrics {
            let _ = write!(out, "{} {:<10}", kind.to_string().to_uppercase(), name);
            for n in &neurons {
                let _ = write!(out, "{:>10}", format!("{n} N"));
            }
            out.push('\n');
            for l in &layers {
                let _ = write!(out, "{:<15}", format!("{l} layer(s)"));
                for n in &neurons {
                    let text = cells
                        .iter()
                        .find(|c| c.config.kind == kind && c.config.hidden_layers == *l && c.config.neurons == *n)
                        .map_or(String::new(), |c| cell(&c.outcome).unwrap_or_else(|| "failed".into()));
                    let _ = write!(out, "{text:>10}");
                }
                out.push('\n');
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_matches_the_architecture_bounds() {
        let cells = SweepGrid::default().cells().unwrap();
        assert_eq!(cells.len(), 2 * 8 * 5);
        assert!(cells.iter().all(|c| c.validate().is_ok()));
    }

    #[test]
    fn out_of_range_cells_are_rejected() {
        let grid = SweepGrid {
            layers: vec![9],
            ..SweepGrid::default()
        };
        assert!(grid.cells().is_err());
        let empty = SweepGrid {
            kinds: vec![],
            ..SweepGrid::default()
        };
        assert!(empty.cells().is_err());
    }

    #[test]
    fn failed_cells_are_marked_in_table_and_csv() {
        let cells = vec![
            SweepCell {
                config: NetworkConfig::ffnn(1, 8),
                outcome: CellOutcome::Ok {
                    issuances: 3,
                    mae_w: 1000.0,
                    rmse_w: 1500.0,
                    mase: Some(0.9),
                    refits: 1,
                    failures: 0,
                },
                mean_refit_seconds: Some(0.5),
            },
            SweepCell {
                config: NetworkConfig::ffnn(2, 8),
                outcome: CellOutcome::Failed {
                    message: "diverged".into(),
                },
                mean_refit_seconds: None,
            },
        ];
        let table = sweep_table(&cells);
        assert!(table.contains("0.900"));
        assert!(table.contains("failed"));
        let csv = sweep_csv(&cells);
        assert!(csv.lines().nth(2).unwrap().contains("failed"));
        assert!(!csv.contains("0.5"));
    }
}
