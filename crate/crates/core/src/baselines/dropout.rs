//! Self-confidence gating: an encoder/decoder whose decoder carries dropout
//! is sampled several times, and the spread of the sampled actions sets the
//! arbitration weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::{train_autoencoder_on, training_pairs, AutoencoderConfig, FeatureConfig, InteractionRecord, SnippetFeature, TrainingCurve};
use crate::nn::{DropoutMode, Mlp};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::sim::{ControlAction, RobotState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DropoutConfig {
    /// Dropout rate on the decoder's hidden layers.
    pub rate: f64,
    /// Stochastic passes per query.
    pub samples: usize,
    pub ceiling: f64,
    pub autoencoder: AutoencoderConfig,
}

impl Default for DropoutConfig {
    fn default() -> Self {
        Self {
            rate: 0.1,
            samples: 20,
            ceiling: 0.9,
            autoencoder: AutoencoderConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DropoutGate<T> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
    pub features: FeatureConfig,
    pub latent_dim: usize,
    pub samples: usize,
    /// Variance scale: mean sample variance over the training pairs.
    pub var0: T,
    pub ceiling: T,
    pub v_max: T,
}

/// Mean over pairs `i != j` of `|a_i - a_j|^2 / 2`, which equals the trace of
/// the unbiased sample covariance.
pub fn sample_variance<T: Scalar>(actions: &[Vec<T>]) -> T {
    let m = actions.len();
    if m < 2 {
        return T::zero();
    }
    let n = actions[0].len();
    let mf = T::lit(m as f64);
    let mut total = T::zero();
    for c in 0..n {
        // Shifted by the first sample so identical samples give exactly zero.
        let shift = actions[0][c];
        let mean = actions.iter().map(|a| a[c] - shift).sum::<T>() / mf;
        total += actions
            .iter()
            .map(|a| (a[c] - shift - mean) * (a[c] - shift - mean))
            .sum::<T>();
    }
    total / T::lit((m - 1) as f64)
}

/// `exp(-v / var0)` clamped to `[0, ceiling]`.
pub fn beta_from_variance<T: Scalar>(v: T, var0: T, ceiling: T) -> T {
    (-(v / var0)).exp().min(ceiling).max(T::zero())
}

impl<T: Scalar> DropoutGate<T> {
    fn decoder_input(&self, feature: &SnippetFeature<T>, state: &RobotState<T>) -> Result<Vec<T>> {
        let out = self.encoder.predict(&feature.values)?;
        let mut x = state.0.clone();
        x.extend_from_slice(&out[..self.latent_dim]);
        Ok(x)
    }

    /// `samples` stochastic decoder passes at the latent mean.
    pub fn sample_actions(&self, feature: &SnippetFeature<T>, state: &RobotState<T>, seed: u64) -> Result<Vec<Vec<T>>> {
        let x = self.decoder_input(feature, state)?;
        (0..self.samples)
            .map(|m| {
                let mode = DropoutMode::Sample(derive_seed(seed, &[m as u64]));
                Ok(self.decoder.forward(&x, mode)?.output().to_vec())
            })
            .collect()
    }

    pub fn beta(&self, feature: &SnippetFeature<T>, state: &RobotState<T>, seed: u64) -> Result<T> {
        let v = sample_variance(&self.sample_actions(feature, state, seed)?);
        Ok(beta_from_variance(v, self.var0, self.ceiling))
    }

    /// Deterministic assistive action (dropout off).
    pub fn act(&self, feature: &SnippetFeature<T>, state: &RobotState<T>) -> Result<ControlAction<T>> {
        let x = self.decoder_input(feature, state)?;
        Ok(ControlAction(self.decoder.predict(&x)?).clamped(self.v_max))
    }
}

pub fn dropout_beta<T: Scalar>(gate: &DropoutGate<T>, feature: &SnippetFeature<T>, state: &RobotState<T>, seed: u64) -> Result<T> {
    gate.beta(feature, state, seed)
}

pub fn train_dropout_gate<T: Scalar>(
    records: &[InteractionRecord<T>],
    features: &FeatureConfig,
    v_max: T,
    cfg: &DropoutConfig,
) -> Result<(DropoutGate<T>, TrainingCurve)> {
    if cfg.samples < 2 {
        return Err(Error::config("dropout gate needs at least two samples"));
    }
    if !(cfg.rate > 0.0 && cfg.rate < 1.0) {
        return Err(Error::config("dropout rate must lie in (0, 1)"));
    }
    let pairs = training_pairs(records, features)?;
    let ae_cfg = AutoencoderConfig {
        decoder_dropout: cfg.rate,
        ..cfg.autoencoder.clone()
    };
    let fit = train_autoencoder_on(&pairs, features, &ae_cfg)?;
    let mut gate = DropoutGate {
        encoder: fit.encoder,
        decoder: fit.decoder,
        features: features.clone(),
        latent_dim: ae_cfg.latent_dim,
        samples: cfg.samples,
        var0: T::one(),
        ceiling: T::lit(cfg.ceiling),
        v_max,
    };
    let mut total = T::zero();
    for (i, p) in pairs.iter().enumerate() {
        let feature = SnippetFeature {
            valid_len: 0,
            values: p.feature.clone(),
        };
        let acts = gate.sample_actions(&feature, &RobotState(p.state.clone()), derive_seed(ae_cfg.seed, &[0x7a, i as u64]))?;
        total += sample_variance(&acts);
    }
    let var0 = total / T::lit(pairs.len() as f64);
    if !(var0 > T::zero()) || !var0.is_finite() {
        return Err(Error::Diverged("dropout variance scale is not positive".into()));
    }
    gate.var0 = var0;
    Ok((gate, fit.curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_samples_give_the_ceiling() {
        let acts = vec![vec![0.3, -0.2]; 20];
        assert_eq!(sample_variance(&acts), 0.0);
        assert_eq!(beta_from_variance(0.0, 0.5, 0.9), 0.9);
    }

    #[test]
    fn huge_variance_gives_zero() {
        assert!(beta_from_variance(1e6, 0.5, 0.9) < 1e-12);
    }

    #[test]
    fn variance_matches_pairwise_definition() {
        // Brute-force oracle: average of |a_i - a_j|^2 / 2 over ordered pairs i != j.
        let acts: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, 1.0], vec![0.5, 0.5]];
        let m = acts.len();
        let mut brute = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    let d: f64 = (0..2).map(|c| (acts[i][c] - acts[j][c]).powi(2)).sum();
                    brute += 0.5 * d;
                }
            }
        }
        brute /= (m * (m - 1)) as f64;
        assert!((sample_variance(&acts) - brute).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn beta_non_increasing_in_variance(a in 0.0f64..10.0, b in 0.0f64..10.0, var0 in 0.01f64..5.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(beta_from_variance(hi, var0, 0.9) <= beta_from_variance(lo, var0, 0.9));
        }
    }
}
