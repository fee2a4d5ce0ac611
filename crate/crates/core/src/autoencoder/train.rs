use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{decode, encode, loss, loss_and_grad, AeParams, PaddedBatch};
use crate::error::{Error, Result};
use crate::seqdata::Cohort;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeConfig {
    /// Feature dimension K (embedding and hidden size).
    pub dims: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub val_fraction: f64,
    pub learning_rate: f64,
    /// RMSProp decay of the squared-gradient average.
    pub rho: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        Self {
            dims: 100,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            val_fraction: 0.1,
            learning_rate: 1e-3,
            rho: 0.9,
            epsilon: 1e-8,
            clip_norm: 5.0,
            init_scale: 0.08,
            seed: 0,
        }
    }
}

impl AeConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.dims < 1 {
            errs.push("autoencoder dims must be at least 1".to_string());
        }
        if self.batch_size < 1 {
            errs.push("batch_size must be at least 1".to_string());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            errs.push(format!(
                "val_fraction {} must be in (0, 1)",
                self.val_fraction
            ));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            errs.push(format!("rho {} must be in (0, 1)", self.rho));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("epsilon", self.epsilon),
            ("clip_norm", self.clip_norm),
            ("init_scale", self.init_scale),
        ] {
            if !(v > 0.0) {
                errs.push(format!("{name} must be positive"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Per-epoch losses; epoch 0 holds the losses of the initial parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainingLog {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<training log>", e);
        writeln!(w, "epoch,train_loss,val_loss").map_err(io)?;
        for r in &self.epochs {
            writeln!(w, "{},{},{}", r.epoch, r.train_loss, r.val_loss).map_err(io)?;
        }
        Ok(())
    }
}

/// Trained weights together with the action labels they index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAutoencoder {
    pub labels: Vec<String>,
    pub params: AeParams,
}

struct RmsProp {
    acc: Vec<Vec<f64>>,
    lr: f64,
    rho: f64,
    eps: f64,
}

impl RmsProp {
    fn new(params: &AeParams, cfg: &AeConfig) -> Self {
        Self {
            acc: params
                .blocks()
                .iter()
                .map(|(_, b)| vec![0.0; b.len()])
                .collect(),
            lr: cfg.learning_rate,
            rho: cfg.rho,
            eps: cfg.epsilon,
        }
    }

    fn step(&mut self, params: &mut AeParams, grad: &AeParams) {
        for (((_, p), (_, g)), acc) in params
            .blocks_mut()
            .into_iter()
            .zip(grad.blocks())
            .zip(&mut self.acc)
        {
            for ((p, &g), a) in p.iter_mut().zip(g).zip(acc.iter_mut()) {
                *a = self.rho * *a + (1.0 - self.rho) * g * g;
                *p -= self.lr * g / (*a + self.eps).sqrt();
            }
        }
    }
}

fn clip(grad: &mut AeParams, max_norm: f64) {
    let norm = grad.norm();
    if norm > max_norm {
        let s = max_norm / norm;
        for (_, b) in grad.blocks_mut() {
            b.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Fraction of steps where the decoder's most likely action equals the
/// observed one.
pub fn reconstruction_accuracy(params: &AeParams, seqs: &[Vec<usize>]) -> Result<f64> {
    let mut hit = 0usize;
    let mut total = 0usize;
    for s in seqs {
        let probs = decode(params, &encode(params, s)?, s.len())?;
        for (t, &tok) in s.iter().enumerate() {
            let row = probs.row(t);
            let best = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .unwrap();
            hit += usize::from(best == tok);
            total += 1;
        }
    }
    Ok(hit as f64 / total.max(1) as f64)
}

/// Fits the autoencoder on `cohort` with RMSProp, holding out
/// `cfg.val_fraction` of sequences for early stopping. Returns the
/// parameters with the lowest validation loss.
pub fn train(cohort: &Cohort, cfg: &AeConfig) -> Result<(TrainedAutoencoder, TrainingLog)> {
    cfg.validate()?;
    if cohort.len() < 2 {
        return Err(Error::invalid(
            "autoencoder training needs at least 2 sequences",
        ));
    }
    let seqs = cohort.indexed();
    let n = seqs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = AeParams::random(
        cohort.vocabulary().len(),
        cfg.dims,
        cfg.init_scale,
        &mut rng,
    );

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * cfg.val_fraction).round() as usize).clamp(1, n - 1);
    let (val_idx, train_idx) = order.split_at(n_val);

    // Length buckets: sort by length, then cut into batches.
    let mut by_len = train_idx.to_vec();
    by_len.sort_by_key(|&i| (seqs[i].len(), i));
    let batches: Vec<PaddedBatch> = by_len
        .chunks(cfg.batch_size)
        .map(|c| PaddedBatch::new(&c.iter().map(|&i| seqs[i].clone()).collect::<Vec<_>>()))
        .collect();
    let train_all = PaddedBatch::new(
        &train_idx
            .iter()
            .map(|&i| seqs[i].clone())
            .collect::<Vec<_>>(),
    );
    let val_all = PaddedBatch::new(&val_idx.iter().map(|&i| seqs[i].clone()).collect::<Vec<_>>());

    let mut log = TrainingLog::default();
    let evaluate = |p: &AeParams, epoch: usize| -> Result<EpochRecord> {
        let rec = EpochRecord {
            epoch,
            train_loss: loss(p, &train_all)?,
            val_loss: loss(p, &val_all)?,
        };
        if !rec.train_loss.is_finite() || !rec.val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: if rec.train_loss.is_finite() {
                    rec.val_loss
                } else {
                    rec.train_loss
                },
            });
        }
        Ok(rec)
    };

    let first = evaluate(&params, 0)?;
    log.epochs.push(first);
    let mut best = (first.val_loss, params.clone());
    let mut stale = 0;
    let mut opt = RmsProp::new(&params, cfg);
    let mut batch_order: Vec<usize> = (0..batches.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        batch_order.shuffle(&mut rng);
        for &b in &batch_order {
            let (l, mut g) = loss_and_grad(&params, &batches[b])?;
            if !l.is_finite() {
                return Err(Error::Diverged { epoch, loss: l });
            }
            clip(&mut g, cfg.clip_norm);
            opt.step(&mut params, &g);
        }
        if !params.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: f64::NAN,
            });
        }
        let rec = evaluate(&params, epoch)?;
        log.epochs.push(rec);
        if rec.val_loss < best.0 {
            best = (rec.val_loss, params.clone());
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok((
        TrainedAutoencoder {
            labels: cohort.vocabulary().labels().to_vec(),
            params: best.1,
        },
        log,
    ))
}
