use std::io::Write;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use super::mlp::{grad, init_params, loss, predict, sample_masks, MlpParams};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::stats::weighted_f1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub h1: usize,
    pub h2: usize,
    pub leaky_slope: f64,
    pub dropout_p: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a new best validation F1.
    pub patience: usize,
    pub seed: u64,
    /// Start from all-zero parameters instead of He init. Only useful for
    /// degenerate reference models.
    pub zero_init: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            h1: 256,
            h2: 128,
            leaky_slope: 0.01,
            dropout_p: 0.3,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch: 64,
            epochs: 200,
            patience: 20,
            seed: 0,
            zero_init: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p must be in [0, 1), got {}", self.dropout_p)));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be a finite non-negative number, got {}", self.lr)));
        }
        if self.batch == 0 || self.epochs == 0 || self.h1 == 0 || self.h2 == 0 {
            return Err(Error::Config("batch, epochs and hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// Feature matrix (`n × D`) with one class index per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<usize>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Validation(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_weighted_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation weighted F1,
    /// ties broken by lower validation loss.
    pub params: MlpParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, p: &mut [f64], g: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..p.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            p[i] -= cfg.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.adam_eps);
        }
    }
}

/// Mini-batch Adam with early stopping on validation weighted F1.
/// Deterministic for a given config and data.
pub fn train(cfg: &TrainConfig, train_set: &Dataset, val_set: &Dataset, n_classes: usize) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Validation("train and validation sets must be nonempty".into()));
    }
    let d = train_set.x.ncols();
    if val_set.x.ncols() != d {
        return Err(Error::Validation(format!("train dim {d} != validation dim {}", val_set.x.ncols())));
    }
    let mut params = if cfg.zero_init {
        MlpParams::zeros(d, cfg.h1, cfg.h2, n_classes, cfg.leaky_slope)
    } else {
        init_params(d, cfg.h1, cfg.h2, n_classes, cfg.leaky_slope, derive_seed(cfg.seed, &["init".into()]))?
    };
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &["train".into()]));
    let n_params = params.n_params();
    let mut adam = Adam { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 };
    let mut flat = params.to_flat();

    // Snapshot key is (val F1, -val loss); patience only counts F1 gains
    let mut best = (f64::NEG_INFINITY, f64::INFINITY, params.clone(), 0);
    let mut best_f1 = f64::NEG_INFINITY;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let xb = train_set.x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| train_set.y[i]).collect();
            let masks = (cfg.dropout_p > 0.0).then(|| sample_masks(&mut rng, chunk.len(), cfg.h1, cfg.h2, cfg.dropout_p));
            let (l, g) = grad(&params, xb.view(), &yb, masks.as_ref())?;
            if !l.is_finite() {
                return Err(Error::Diverged { epoch, loss: l, lr: cfg.lr });
            }
            loss_sum += l * chunk.len() as f64;
            adam.step(&mut flat, &g.to_flat(), cfg);
            params.set_flat(&flat);
        }
        if !params.is_finite() {
            return Err(Error::Diverged { epoch, loss: f64::NAN, lr: cfg.lr });
        }
        let val_f1 = weighted_f1(&val_set.y, &predict(&params, val_set.x.view())?)?;
        history.push(EpochRecord { epoch, train_loss: loss_sum / train_set.len() as f64, val_weighted_f1: val_f1 });
        let val_loss = dataset_loss(&params, val_set)?;
        if val_f1 > best.0 || (val_f1 == best.0 && val_loss < best.1) {
            best = (val_f1, val_loss, params.clone(), epoch);
        }
        if val_f1 > best_f1 {
            best_f1 = val_f1;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome { params: best.2, history, best_epoch: best.3 })
}

/// Inference-mode mean cross-entropy over a whole dataset.
pub(crate) fn dataset_loss(p: &MlpParams, data: &Dataset) -> Result<f64> {
    loss(p, data.x.view(), &data.y, None)
}

/// CSV `epoch,train_loss,val_weighted_f1`.
pub fn write_history<W: Write>(writer: W, history: &[EpochRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["epoch", "train_loss", "val_weighted_f1"]).map_err(|e| Error::csv("history", e))?;
    for h in history {
        wtr.write_record([h.epoch.to_string(), format!("{:.6}", h.train_loss), format!("{:.6}", h.val_weighted_f1)])
            .map_err(|e| Error::csv("history", e))?;
    }
    wtr.flush().map_err(|e| Error::io("<history writer>", e))
}
