//! Optimizer, mini-batch BPTT training loop and hyperparameter grid search.

mod adam;
mod config;
mod grid;

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{Adam, AdamConfig};
pub use config::TrainConfig;
pub(crate) use config::key_values;
pub use grid::{grid_search, BestCell, GridCell, GridResult, GridRow, GridSpec, RunOutcome};

use crate::error::{Error, Result};
use crate::eval::{predict_dataset, Metrics};
use crate::features::SequenceDataset;
use crate::models::RecurrentModel;
use crate::series::csv_io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: Option<f64>,
    pub val_rmse: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned when early stopping was enabled.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn total_seconds(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.seconds)
    }

    /// Records with wall-clock times zeroed, for comparing runs.
    pub fn without_timing(&self) -> TrainHistory {
        let mut h = self.clone();
        h.records.iter_mut().for_each(|r| r.seconds = 0.0);
        h
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["epoch", "train_loss", "val_mae", "val_rmse", "seconds"]).map_err(|e| csv_io(path, e))?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.train_loss.to_string(),
                opt(r.val_mae),
                opt(r.val_rmse),
                r.seconds.to_string(),
            ])
            .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Number of trailing windows held out for early stopping.
pub fn validation_size(windows: usize) -> usize {
    if windows < 2 {
        0
    } else {
        windows.div_ceil(10)
    }
}

/// Trains `model` on `ds` with shuffled mini-batches and full-window BPTT.
///
/// Batch gradients are the mean of per-window gradients, computed in parallel and reduced
/// in window order so results do not depend on the worker count.
pub fn train(mut model: RecurrentModel, ds: &SequenceDataset, cfg: &TrainConfig) -> Result<(RecurrentModel, TrainHistory)> {
    cfg.validate()?;
    crate::parallel::init();
    if ds.is_empty() {
        return Err(Error::Invalid("training dataset has no windows".into()));
    }
    let loss = cfg.loss_fn();
    let (fit_ds, val_ds) = if cfg.patience.is_some() {
        let n_val = validation_size(ds.len());
        let cut = ds.len() - n_val;
        let idx: Vec<usize> = (0..ds.len()).collect();
        (ds.subset(&idx[..cut]), (n_val > 0).then(|| ds.subset(&idx[cut..])))
    } else {
        (ds.clone(), None)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam, model.parameter_count());
    let mut order: Vec<usize> = (0..fit_ds.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut since_best = 0;
    let clock = Instant::now();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&w| {
                    let view = fit_ds.view(w);
                    model.loss_and_grad(&view, &view.window().targets, loss)
                })
                .collect::<Result<_>>()?;
            let mut grad = vec![0.0; model.parameter_count()];
            let mut batch_loss = 0.0;
            for (l, g) in &results {
                batch_loss += l;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if let Some(c) = cfg.clip_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > c {
                    grad.iter_mut().for_each(|g| *g *= c / norm);
                }
            }
            let layout = &model.layout;
            adam.step(&mut model.params, &grad, |i| layout.describe(i))?;
            epoch_loss += batch_loss;
        }
        let mut record = EpochRecord {
            epoch,
            train_loss: epoch_loss / fit_ds.len() as f64,
            val_mae: None,
            val_rmse: None,
            seconds: 0.0,
        };
        if let Some(val) = &val_ds {
            let tr = predict_dataset(&model, val)?;
            let m = Metrics::of(&tr.pred, &tr.truth)?;
            record.val_mae = Some(m.mae);
            record.val_rmse = Some(m.rmse);
            if best.as_ref().is_none_or(|(r, _, _)| m.rmse < *r) {
                best = Some((m.rmse, epoch, model.params.clone()));
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        record.seconds = clock.elapsed().as_secs_f64();
        history.records.push(record);
        if cfg.patience.is_some_and(|p| since_best >= p) {
            history.stopped_early = true;
            break;
        }
    }
    if let Some((_, epoch, params)) = best {
        model.params = params;
        history.best_epoch = Some(epoch);
    }
    Ok((model, history))
}
