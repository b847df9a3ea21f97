//! History-conditioned behavior cloning: one network from
//! `snippet feature ++ state` straight to the next human action.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::{
    minibatch_epochs, shuffled, training_pairs, FeatureConfig, InteractionRecord, SnippetFeature, TrainingCurve,
    TrainingPair,
};
use crate::nn::{Activation, DropoutMode, Gradients, Mlp, OptimizerState};
use crate::rng::{derive_seed, rng_from};
use crate::scalar::Scalar;
use crate::sim::{ControlAction, RobotState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub min_steps: usize,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            lr: 1e-3,
            batch_size: 32,
            epochs: 20,
            min_steps: 3000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BcPolicy<T> {
    pub net: Mlp<T>,
    pub features: FeatureConfig,
    pub v_max: T,
}

fn input<T: Scalar>(feature: &[T], state: &[T]) -> Vec<T> {
    let mut x = Vec::with_capacity(feature.len() + state.len());
    x.extend_from_slice(feature);
    x.extend_from_slice(state);
    x
}

fn example<T: Scalar>(net: &Mlp<T>, p: &TrainingPair<T>, grads: Option<&mut Gradients<T>>) -> Result<T> {
    let cache = net.forward(&input(&p.feature, &p.state), DropoutMode::Off)?;
    let err: Vec<T> = cache.output().iter().zip(&p.target).map(|(&y, &t)| y - t).collect();
    if let Some(g) = grads {
        let two = T::lit(2.0);
        let d: Vec<T> = err.iter().map(|&e| two * e).collect();
        net.backward_into(&cache, &d, g)?;
    }
    Ok(err.iter().map(|&e| e * e).sum())
}

pub fn bc_train_on<T: Scalar>(
    pairs: &[TrainingPair<T>],
    features: &FeatureConfig,
    v_max: T,
    cfg: &BcConfig,
) -> Result<(BcPolicy<T>, TrainingCurve)> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    let n = features.state_dim;
    let mut net = Mlp::dense(features.dim() + n, &cfg.hidden, n, Activation::Tanh, 0.0, derive_seed(cfg.seed, &[1]));
    let mut opt = OptimizerState::adam(&net, T::lit(cfg.lr));
    let mut grads = Gradients::zeros_like(&net);
    let mut rng = rng_from(cfg.seed, &[2]);
    let mut curve = TrainingCurve::default();
    for epoch in 0..minibatch_epochs(pairs.len(), cfg.batch_size, cfg.epochs, cfg.min_steps) {
        let mut total = 0.0;
        for batch in shuffled(pairs.len(), &mut rng).chunks(cfg.batch_size) {
            grads.fill_zero();
            for &i in batch {
                total += example(&net, &pairs[i], Some(&mut grads))?.as_f64();
            }
            grads.scale(T::one() / T::lit(batch.len() as f64));
            opt.step(&mut net, &grads)?;
        }
        let mean = total / pairs.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged(format!("behavior cloning loss non-finite at epoch {epoch}")));
        }
        curve.epoch_loss.push(mean);
    }
    Ok((
        BcPolicy {
            net,
            features: features.clone(),
            v_max,
        },
        curve,
    ))
}

/// Fit a policy on the same `(prefix, next action)` pairs the autoencoder uses.
pub fn bc_train<T: Scalar>(
    records: &[InteractionRecord<T>],
    features: &FeatureConfig,
    v_max: T,
    cfg: &BcConfig,
) -> Result<(BcPolicy<T>, TrainingCurve)> {
    bc_train_on(&training_pairs(records, features)?, features, v_max, cfg)
}

impl<T: Scalar> BcPolicy<T> {
    pub fn act(&self, feature: &SnippetFeature<T>, state: &RobotState<T>) -> Result<ControlAction<T>> {
        let out = self.net.predict(&input(&feature.values, &state.0))?;
        Ok(ControlAction(out).clamped(self.v_max))
    }
}

/// Free-function form of [`BcPolicy::act`].
pub fn bc_act<T: Scalar>(policy: &BcPolicy<T>, feature: &SnippetFeature<T>, state: &RobotState<T>) -> Result<ControlAction<T>> {
    policy.act(feature, state)
}
