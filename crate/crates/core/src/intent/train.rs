//! Encoder/decoder training on next-action reconstruction.
//!
//! For every prefix `xi` of a stored interaction and the following commanded
//! tick `(s_k, a_k)`, the encoder embeds `xi`, a latent is drawn with the
//! reparameterization `z = mu + exp(logvar / 2) * eta`, and the decoder is
//! asked to reproduce `a_k` from `(s_k, z)`. The per-example loss is
//! `|a_k - decoder(s_k, z)|^2 + w_kl * KL(N(mu, var) || N(0, I))`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::{training_pairs, TrainingPair};
use super::feature::FeatureConfig;
use super::record::InteractionRecord;
use crate::error::{Error, Result};
use crate::nn::{Activation, DropoutMode, Gradients, Mlp, OptimizerState};
use crate::rng::{derive_seed, normal, rng_from, SimRng};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderConfig {
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub kl_weight: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Minimum passes over the data.
    pub epochs: usize,
    /// Minimum optimizer steps; small datasets get extra epochs.
    pub min_steps: usize,
    /// Dropout on the decoder's hidden layers (0 for the main model).
    pub decoder_dropout: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            latent_dim: 2,
            kl_weight: 0.01,
            lr: 1e-3,
            batch_size: 32,
            epochs: 20,
            min_steps: 3000,
            decoder_dropout: 0.0,
            seed: 0,
        }
    }
}

/// Mean training loss per epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub epoch_loss: Vec<f64>,
}

impl TrainingCurve {
    pub fn first(&self) -> Option<f64> {
        self.epoch_loss.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }

    /// CSV with an `epoch,loss` header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (i, l) in self.epoch_loss.iter().enumerate() {
            s.push_str(&format!("{i},{l}\n"));
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct AutoencoderFit<T> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
    pub curve: TrainingCurve,
}

/// Gradient buffers for one encoder/decoder pair.
pub struct AutoencoderGrads<T> {
    pub encoder: Gradients<T>,
    pub decoder: Gradients<T>,
}

impl<T: Scalar> AutoencoderGrads<T> {
    pub fn zeros(encoder: &Mlp<T>, decoder: &Mlp<T>) -> Self {
        Self {
            encoder: Gradients::zeros_like(encoder),
            decoder: Gradients::zeros_like(decoder),
        }
    }
}

/// Loss of one example for a fixed noise draw `eta`; when `grads` is given,
/// its exact gradient is accumulated into it.
#[allow(clippy::too_many_arguments)]
pub fn autoencoder_example<T: Scalar>(
    encoder: &Mlp<T>,
    decoder: &Mlp<T>,
    feature: &[T],
    state: &[T],
    target: &[T],
    eta: &[T],
    kl_weight: T,
    dropout: DropoutMode,
    grads: Option<&mut AutoencoderGrads<T>>,
) -> Result<T> {
    let d = eta.len();
    let enc = encoder.forward(feature, DropoutMode::Off)?;
    if enc.output().len() != 2 * d {
        return Err(Error::Shape { context: "encoder output", expected: 2 * d, got: enc.output().len() });
    }
    let (mu, log_var) = enc.output().split_at(d);
    let sigma: Vec<T> = log_var.iter().map(|&v| (v * T::lit(0.5)).exp()).collect();
    let mut input = state.to_vec();
    input.extend((0..d).map(|i| mu[i] + sigma[i] * eta[i]));
    let dec = decoder.forward(&input, dropout)?;
    let err: Vec<T> = dec.output().iter().zip(target).map(|(&p, &a)| p - a).collect();
    let reconstruction: T = err.iter().map(|&e| e * e).sum();
    let half = T::lit(0.5);
    let kl: T = (0..d)
        .map(|i| half * (mu[i] * mu[i] + log_var[i].exp() - T::one() - log_var[i]))
        .sum();
    let loss = reconstruction + kl_weight * kl;

    if let Some(g) = grads {
        let two = T::lit(2.0);
        let d_out: Vec<T> = err.iter().map(|&e| two * e).collect();
        let d_in = decoder.backward_into(&dec, &d_out, &mut g.decoder)?;
        let dz = &d_in[state.len()..];
        let mut d_enc = vec![T::zero(); 2 * d];
        for i in 0..d {
            d_enc[i] = dz[i] + kl_weight * mu[i];
            d_enc[d + i] = dz[i] * eta[i] * half * sigma[i] + kl_weight * half * (log_var[i].exp() - T::one());
        }
        encoder.backward_into(&enc, &d_enc, &mut g.encoder)?;
    }
    Ok(loss)
}

/// Minibatch schedule shared by every trainer in the crate: shuffled passes
/// over `n` items, at least `epochs` of them and at least `min_steps` batches.
pub(crate) fn minibatch_epochs(n: usize, batch: usize, epochs: usize, min_steps: usize) -> usize {
    let per_epoch = n.div_ceil(batch.max(1)).max(1);
    epochs.max(min_steps.div_ceil(per_epoch)).max(1)
}

pub(crate) fn shuffled(n: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

/// Fit encoder and decoder on `pairs`.
pub fn train_autoencoder_on<T: Scalar>(
    pairs: &[TrainingPair<T>],
    features: &FeatureConfig,
    cfg: &AutoencoderConfig,
) -> Result<AutoencoderFit<T>> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.latent_dim == 0 || cfg.batch_size == 0 {
        return Err(Error::config("latent_dim and batch_size must be positive"));
    }
    let n = features.state_dim;
    let d = cfg.latent_dim;
    let mut encoder = Mlp::dense(features.dim(), &cfg.hidden, 2 * d, Activation::Tanh, 0.0, derive_seed(cfg.seed, &[1]));
    let mut decoder = Mlp::dense(n + d, &cfg.hidden, n, Activation::Tanh, cfg.decoder_dropout, derive_seed(cfg.seed, &[2]));
    let lr = T::lit(cfg.lr);
    let mut enc_opt = OptimizerState::adam(&encoder, lr);
    let mut dec_opt = OptimizerState::adam(&decoder, lr);
    let mut grads = AutoencoderGrads::zeros(&encoder, &decoder);
    let kl_weight = T::lit(cfg.kl_weight);
    let use_dropout = decoder.has_dropout();
    let mut rng = rng_from(cfg.seed, &[3]);
    let epochs = minibatch_epochs(pairs.len(), cfg.batch_size, cfg.epochs, cfg.min_steps);
    let mut curve = TrainingCurve::default();
    let mut eta = vec![T::zero(); d];

    for epoch in 0..epochs {
        let order = shuffled(pairs.len(), &mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.encoder.fill_zero();
            grads.decoder.fill_zero();
            for &i in batch {
                let p = &pairs[i];
                eta.iter_mut().for_each(|e| *e = normal(&mut rng));
                let dropout = if use_dropout {
                    DropoutMode::Sample(rand::Rng::random(&mut rng))
                } else {
                    DropoutMode::Off
                };
                let loss = autoencoder_example(&encoder, &decoder, &p.feature, &p.state, &p.target, &eta, kl_weight, dropout, Some(&mut grads))?;
                total += loss.as_f64();
            }
            let k = T::one() / T::lit(batch.len() as f64);
            grads.encoder.scale(k);
            grads.decoder.scale(k);
            enc_opt.step(&mut encoder, &grads.encoder)?;
            dec_opt.step(&mut decoder, &grads.decoder)?;
        }
        let mean = total / pairs.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged(format!("autoencoder loss non-finite at epoch {epoch}")));
        }
        curve.epoch_loss.push(mean);
    }
    if !(encoder.is_finite() && decoder.is_finite()) {
        return Err(Error::Diverged("autoencoder parameters non-finite".into()));
    }
    Ok(AutoencoderFit { encoder, decoder, curve })
}

/// Fit encoder and decoder on every interaction in `records`.
pub fn train_autoencoder<T: Scalar>(
    records: &[InteractionRecord<T>],
    features: &FeatureConfig,
    cfg: &AutoencoderConfig,
) -> Result<AutoencoderFit<T>> {
    let pairs = training_pairs(records, features)?;
    train_autoencoder_on(&pairs, features, cfg)
}

/// Reconstruction error of the deterministic (latent-mean) model.
pub fn mean_reconstruction_error<T: Scalar>(encoder: &Mlp<T>, decoder: &Mlp<T>, pairs: &[TrainingPair<T>], latent_dim: usize) -> Result<f64> {
    let mut total = 0.0;
    for p in pairs {
        let out = encoder.predict(&p.feature)?;
        let mut input = p.state.clone();
        input.extend_from_slice(&out[..latent_dim]);
        let pred = decoder.predict(&input)?;
        total += pred.iter().zip(&p.target).map(|(&a, &b)| ((a - b) * (a - b)).as_f64()).sum::<f64>();
    }
    Ok(total / pairs.len().max(1) as f64)
}
