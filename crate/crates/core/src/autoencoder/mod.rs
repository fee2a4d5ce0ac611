//! Sequence-to-sequence GRU autoencoder.
//!
//! The encoder embeds each action, runs a GRU from a zero state and keeps the
//! final hidden state `theta` as the sequence's feature vector. The decoder is
//! a second GRU that receives `theta` as its input at every one of the `L`
//! steps, starting from a zero state; a softmax layer turns each decoder state
//! into a distribution over actions. Training minimises the mean per-step
//! categorical cross-entropy.

mod checkpoint;
mod gru;
mod train;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::seqdata::Cohort;

pub use gru::GruWeights;
pub use train::{
    reconstruction_accuracy, train, AeConfig, EpochRecord, TrainedAutoencoder, TrainingLog,
};

/// All trainable weights. Embedding and hidden sizes are both `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct AeParams {
    /// N_actions x K.
    pub embedding: DMatrix<f64>,
    pub encoder: GruWeights,
    pub decoder: GruWeights,
    /// K x N_actions.
    pub out_weights: DMatrix<f64>,
    pub out_bias: DVector<f64>,
}

const GATES: [&str; 3] = ["update", "reset", "candidate"];

impl AeParams {
    pub fn zeros(n_actions: usize, dims: usize) -> Self {
        Self {
            embedding: DMatrix::zeros(n_actions, dims),
            encoder: GruWeights::zeros(dims, dims),
            decoder: GruWeights::zeros(dims, dims),
            out_weights: DMatrix::zeros(dims, n_actions),
            out_bias: DVector::zeros(n_actions),
        }
    }

    /// Every weight drawn from `U(-scale, scale)`, block by block.
    pub fn random<R: Rng>(n_actions: usize, dims: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(n_actions, dims);
        for block in p.blocks_mut() {
            for v in block.1 {
                *v = rng.random_range(-scale..scale);
            }
        }
        p
    }

    pub fn dims(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn n_actions(&self) -> usize {
        self.embedding.nrows()
    }

    /// Named parameter blocks in a fixed order, each as a flat slice.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![("embedding".into(), self.embedding.as_slice())];
        for (name, g) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for (i, gate) in GATES.iter().enumerate() {
                out.push((format!("{name}.input.{gate}"), g.input[i].as_slice()));
                out.push((
                    format!("{name}.recurrent.{gate}"),
                    g.recurrent[i].as_slice(),
                ));
                out.push((format!("{name}.bias.{gate}"), g.bias[i].as_slice()));
            }
        }
        out.push(("output.weights".into(), self.out_weights.as_slice()));
        out.push(("output.bias".into(), self.out_bias.as_slice()));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> =
            vec![("embedding".into(), self.embedding.as_mut_slice())];
        for (name, g) in [
            ("encoder", &mut self.encoder),
            ("decoder", &mut self.decoder),
        ] {
            let GruWeights {
                input,
                recurrent,
                bias,
            } = g;
            for (i, ((w, u), b)) in input
                .iter_mut()
                .zip(recurrent.iter_mut())
                .zip(bias.iter_mut())
                .enumerate()
            {
                let gate = GATES[i];
                out.push((format!("{name}.input.{gate}"), w.as_mut_slice()));
                out.push((format!("{name}.recurrent.{gate}"), u.as_mut_slice()));
                out.push((format!("{name}.bias.{gate}"), b.as_mut_slice()));
            }
        }
        out.push(("output.weights".into(), self.out_weights.as_mut_slice()));
        out.push(("output.bias".into(), self.out_bias.as_mut_slice()));
        out
    }

    /// `(rows, cols)` of each block, in `blocks()` order.
    pub(crate) fn block_shapes(n_actions: usize, dims: usize) -> Vec<(usize, usize)> {
        let mut s = vec![(n_actions, dims)];
        for _ in 0..2 {
            for _ in 0..3 {
                s.extend([(dims, dims), (dims, dims), (dims, 1)]);
            }
        }
        s.extend([(dims, n_actions), (n_actions, 1)]);
        s
    }

    pub fn is_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|(_, b)| b.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn add_assign(&mut self, other: &AeParams) {
        for ((_, a), (_, b)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::invalid("cannot encode an empty sequence"));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t >= self.n_actions()) {
            return Err(Error::invalid(format!(
                "action index {t} is outside the vocabulary of size {}",
                self.n_actions()
            )));
        }
        Ok(())
    }

    fn embed(&self, token: usize) -> DVector<f64> {
        self.embedding.row(token).transpose()
    }
}

/// Encoder hidden state after every step.
pub fn encode_states(params: &AeParams, tokens: &[usize]) -> Result<Vec<DVector<f64>>> {
    params.check_tokens(tokens)?;
    let mut h = DVector::zeros(params.dims());
    let mut states = Vec::with_capacity(tokens.len());
    for &t in tokens {
        h = params.encoder.forward(&params.embed(t), &h);
        states.push(h.clone());
    }
    Ok(states)
}

/// Final encoder hidden state.
pub fn encode(params: &AeParams, tokens: &[usize]) -> Result<DVector<f64>> {
    Ok(encode_states(params, tokens)?.pop().expect("non-empty"))
}

fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let max = logits.max();
    let e = logits.map(|v| (v - max).exp());
    let s = e.sum();
    e / s
}

/// `len` x N_actions matrix whose rows are the decoder's per-step action
/// distributions.
pub fn decode(params: &AeParams, theta: &DVector<f64>, len: usize) -> Result<DMatrix<f64>> {
    if len == 0 {
        return Err(Error::invalid("decode length must be at least 1"));
    }
    if theta.len() != params.dims() {
        return Err(Error::Shape(format!(
            "theta has {} entries, expected {}",
            theta.len(),
            params.dims()
        )));
    }
    let mut y = DVector::zeros(params.dims());
    let mut out = DMatrix::zeros(len, params.n_actions());
    for t in 0..len {
        y = params.decoder.forward(theta, &y);
        let p = softmax(&(params.out_weights.tr_mul(&y) + &params.out_bias));
        out.row_mut(t).copy_from(&p.transpose());
    }
    Ok(out)
}

/// Sequences padded to a common width with an explicit mask. Only a prefix
/// of each row may be real.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    pub tokens: Vec<Vec<usize>>,
    pub mask: Vec<Vec<bool>>,
}

impl PaddedBatch {
    pub fn new<S: AsRef<[usize]>>(seqs: &[S]) -> Self {
        let width = seqs.iter().map(|s| s.as_ref().len()).max().unwrap_or(0);
        Self::with_width(seqs, width)
    }

    pub fn with_width<S: AsRef<[usize]>>(seqs: &[S], width: usize) -> Self {
        let mut tokens = Vec::with_capacity(seqs.len());
        let mut mask = Vec::with_capacity(seqs.len());
        for s in seqs {
            let s = s.as_ref();
            let w = width.max(s.len());
            let mut t = s.to_vec();
            t.resize(w, 0);
            let mut m = vec![true; s.len()];
            m.resize(w, false);
            tokens.push(t);
            mask.push(m);
        }
        Self { tokens, mask }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Real tokens of each row.
    fn rows(&self) -> Result<Vec<&[usize]>> {
        self.tokens
            .iter()
            .zip(&self.mask)
            .enumerate()
            .map(|(i, (t, m))| {
                if t.len() != m.len() {
                    return Err(Error::Shape(format!(
                        "row {i}: tokens and mask differ in length"
                    )));
                }
                let real = m.iter().take_while(|&&b| b).count();
                if m[real..].iter().any(|&b| b) {
                    return Err(Error::invalid(format!("row {i}: mask is not a prefix")));
                }
                Ok(&t[..real])
            })
            .collect()
    }
}

/// Sum of per-step cross-entropies for one sequence, plus its gradient
/// scaled by `scale` when requested.
fn sequence_pass(
    params: &AeParams,
    tokens: &[usize],
    scale: Option<f64>,
) -> (f64, Option<AeParams>) {
    let k = params.dims();
    let mut enc_caches = Vec::with_capacity(tokens.len());
    let mut h = DVector::zeros(k);
    for &t in tokens {
        let c = params.encoder.step(&params.embed(t), &h);
        h = c.h.clone();
        enc_caches.push(c);
    }
    let theta = h;

    let mut dec_caches = Vec::with_capacity(tokens.len());
    let mut probs = Vec::with_capacity(tokens.len());
    let mut y = DVector::zeros(k);
    let mut total = 0.0;
    for &t in tokens {
        let c = params.decoder.step(&theta, &y);
        y = c.h.clone();
        let p = softmax(&(params.out_weights.tr_mul(&y) + &params.out_bias));
        total -= p[t].max(f64::MIN_POSITIVE).ln();
        probs.push(p);
        dec_caches.push(c);
    }
    let Some(scale) = scale else {
        return (total, None);
    };

    let mut g = AeParams::zeros(params.n_actions(), k);
    let mut dtheta = DVector::zeros(k);
    let mut dy_next = DVector::zeros(k);
    for step in (0..tokens.len()).rev() {
        let mut dlogits = probs[step].clone();
        dlogits[tokens[step]] -= 1.0;
        dlogits *= scale;
        let y_t = &dec_caches[step].h;
        g.out_weights.ger(1.0, y_t, &dlogits, 1.0);
        g.out_bias += &dlogits;
        let dy = &params.out_weights * &dlogits + &dy_next;
        let (dx, dh_prev) = params
            .decoder
            .backward(&dec_caches[step], &dy, &mut g.decoder);
        dtheta += dx;
        dy_next = dh_prev;
    }
    let mut dh = dtheta;
    for step in (0..tokens.len()).rev() {
        let (dx, dh_prev) = params
            .encoder
            .backward(&enc_caches[step], &dh, &mut g.encoder);
        let mut row = g.embedding.row_mut(tokens[step]);
        row += dx.transpose();
        dh = dh_prev;
    }
    (total, Some(g))
}

fn checked_rows<'a>(
    params: &AeParams,
    batch: &'a PaddedBatch,
) -> Result<(Vec<&'a [usize]>, usize)> {
    if batch.is_empty() {
        return Err(Error::invalid("batch is empty"));
    }
    let rows = batch.rows()?;
    for r in &rows {
        params.check_tokens(r)?;
    }
    let steps = rows.iter().map(|r| r.len()).sum();
    Ok((rows, steps))
}

/// Mean cross-entropy over every real (unmasked) step of the batch.
pub fn loss(params: &AeParams, batch: &PaddedBatch) -> Result<f64> {
    let (rows, steps) = checked_rows(params, batch)?;
    let sums: Vec<f64> = rows
        .par_iter()
        .map(|r| sequence_pass(params, r, None).0)
        .collect();
    Ok(sums.iter().sum::<f64>() / steps as f64)
}

/// Loss and its gradient with respect to every parameter, by
/// backpropagation through time. Per-example gradients are reduced in row
/// order, so results do not depend on thread scheduling.
pub fn loss_and_grad(params: &AeParams, batch: &PaddedBatch) -> Result<(f64, AeParams)> {
    let (rows, steps) = checked_rows(params, batch)?;
    let scale = 1.0 / steps as f64;
    let parts: Vec<(f64, AeParams)> = rows
        .par_iter()
        .map(|r| {
            let (l, g) = sequence_pass(params, r, Some(scale));
            (l, g.expect("gradient requested"))
        })
        .collect();
    let mut total = 0.0;
    let mut grad = AeParams::zeros(params.n_actions(), params.dims());
    for (l, g) in &parts {
        total += l;
        grad.add_assign(g);
    }
    Ok((total * scale, grad))
}

pub fn grad(params: &AeParams, batch: &PaddedBatch) -> Result<AeParams> {
    Ok(loss_and_grad(params, batch)?.1)
}

/// Encodes every sequence of `cohort`; columns are `ae_1..ae_K`.
pub fn encode_cohort(model: &TrainedAutoencoder, cohort: &Cohort) -> Result<FeatureMatrix> {
    let k = model.params.dims();
    let index: std::collections::HashMap<&str, usize> = model
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut values = DMatrix::zeros(cohort.len(), k);
    for (i, s) in cohort.sequences().iter().enumerate() {
        let tokens = s
            .tokens
            .iter()
            .map(|t| {
                index.get(t.as_str()).copied().ok_or_else(|| {
                    Error::invalid(format!(
                        "vocabulary mismatch: action `{t}` (subject `{}`) was not seen in training",
                        s.subject_id
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        values
            .row_mut(i)
            .copy_from(&encode(&model.params, &tokens)?.transpose());
    }
    FeatureMatrix::with_prefix(cohort.subject_ids(), "ae", values)
}
