use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::arbitration::ArbitrationConfig;
use super::feature::{FeatureConfig, SnippetFeature};
use crate::error::{Error, Result};
use crate::nn::{Activation, Checkpoint, Mlp};
use crate::scalar::{all_finite, Scalar};
use crate::sim::{ControlAction, RobotState};

pub const BUNDLE_VERSION: u32 = 1;

/// Encoder output: a diagonal Gaussian over the latent task space.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentBelief<T> {
    pub mean: Vec<T>,
    pub log_var: Vec<T>,
}

impl<T: Scalar> LatentBelief<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self) -> Vec<T> {
        self.log_var.iter().map(|v| v.exp()).collect()
    }
}

/// Encoder, decoder and discriminator trained together on one dataset.
/// Immutable once handed to a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelBundle<T> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
    pub discriminator: Mlp<T>,
    pub features: FeatureConfig,
    pub latent_dim: usize,
    /// Speed cap applied to assistive actions.
    pub v_max: T,
    pub version: u64,
    /// Fingerprint of the records the bundle was trained on.
    pub training_fingerprint: String,
}

/// Logistic function, written to stay finite for large |x|.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> ModelBundle<T> {
    /// A bundle for an empty dataset: zero assistive action and a
    /// discriminator whose confidence underflows to exactly zero.
    pub fn untrained(features: FeatureConfig, latent_dim: usize, hidden: &[usize], v_max: T, seed: u64) -> Self {
        let n = features.state_dim;
        let encoder = Mlp::dense(features.dim(), hidden, 2 * latent_dim, Activation::Tanh, 0.0, seed);
        let mut decoder = Mlp::dense(n + latent_dim, hidden, n, Activation::Tanh, 0.0, seed ^ 1);
        for t in decoder.tensors_mut() {
            t.iter_mut().for_each(|w| *w = T::zero());
        }
        let mut discriminator = Mlp::dense(features.dim(), hidden, 1, Activation::Tanh, 0.0, seed ^ 2);
        for t in discriminator.tensors_mut() {
            t.iter_mut().for_each(|w| *w = T::zero());
        }
        let last = discriminator.layers().len() - 1;
        discriminator.layers_mut()[last].bias[0] = T::lit(-1000.0);
        Self {
            encoder,
            decoder,
            discriminator,
            features,
            latent_dim,
            v_max,
            version: 0,
            training_fingerprint: String::new(),
        }
    }

    /// Shape-compatibility of the three networks with the featurization.
    pub fn validate(&self) -> Result<()> {
        let f = self.features.dim();
        let n = self.features.state_dim;
        let d = self.latent_dim;
        let checks = [
            ("encoder input", self.encoder.input_dim(), f),
            ("encoder output", self.encoder.output_dim(), 2 * d),
            ("decoder input", self.decoder.input_dim(), n + d),
            ("decoder output", self.decoder.output_dim(), n),
            ("discriminator input", self.discriminator.input_dim(), f),
            ("discriminator output", self.discriminator.output_dim(), 1),
        ];
        for (context, got, expected) in checks {
            if got != expected {
                return Err(Error::Shape { context, expected, got });
            }
        }
        if !(self.encoder.is_finite() && self.decoder.is_finite() && self.discriminator.is_finite()) {
            return Err(Error::NonFinite("bundle parameters"));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.features.state_dim
    }

    /// Embed a snippet: `(mean, log-variance)` of the latent task.
    pub fn encode(&self, feature: &SnippetFeature<T>) -> Result<LatentBelief<T>> {
        let out = self.encoder.predict(&feature.values)?;
        let (mean, log_var) = out.split_at(self.latent_dim);
        Ok(LatentBelief {
            mean: mean.to_vec(),
            log_var: log_var.to_vec(),
        })
    }

    /// Assistive action for `state` under latent task `z`, speed-capped.
    pub fn assist_action(&self, state: &RobotState<T>, z: &[T]) -> Result<ControlAction<T>> {
        if z.len() != self.latent_dim {
            return Err(Error::Shape { context: "latent", expected: self.latent_dim, got: z.len() });
        }
        if !all_finite(z) {
            return Err(Error::NonFinite("latent"));
        }
        let mut input = state.0.clone();
        input.extend_from_slice(z);
        Ok(ControlAction(self.decoder.predict(&input)?).clamped(self.v_max))
    }

    /// Probability that the snippet resembles previously seen behaviour.
    pub fn confidence(&self, feature: &SnippetFeature<T>) -> Result<T> {
        let logit = self.discriminator.predict(&feature.values)?[0];
        Ok(sigmoid(logit))
    }

    /// Content hash of parameters and configuration.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for net in [&self.encoder, &self.decoder, &self.discriminator] {
            h.update(serde_json::to_string(net).expect("networks serialize"));
        }
        h.update(self.features.fingerprint());
        h.update(self.latent_dim.to_le_bytes());
        h.update(&self.training_fingerprint);
        hex::encode(h.finalize())
    }

    pub fn to_file(&self, arbitration: Option<ArbitrationConfig<T>>) -> BundleFile<T> {
        BundleFile {
            format_version: BUNDLE_VERSION,
            features: self.features.clone(),
            latent_dim: self.latent_dim,
            v_max: self.v_max,
            version: self.version,
            training_fingerprint: self.training_fingerprint.clone(),
            encoder: Checkpoint::new(self.encoder.clone(), None, vec![]),
            decoder: Checkpoint::new(self.decoder.clone(), None, vec![]),
            discriminator: Checkpoint::new(self.discriminator.clone(), None, vec![]),
            arbitration,
        }
    }

    pub fn to_json(&self, arbitration: Option<ArbitrationConfig<T>>) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file(arbitration))?)
    }

    pub fn from_json(text: &str) -> Result<(Self, Option<ArbitrationConfig<T>>)> {
        let file: BundleFile<T> = serde_json::from_str(text)?;
        file.into_bundle()
    }
}

/// On-disk bundle: one network checkpoint per model plus configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BundleFile<T> {
    pub format_version: u32,
    pub features: FeatureConfig,
    pub latent_dim: usize,
    pub v_max: T,
    pub version: u64,
    pub training_fingerprint: String,
    pub encoder: Checkpoint<T>,
    pub decoder: Checkpoint<T>,
    pub discriminator: Checkpoint<T>,
    #[serde(default)]
    pub arbitration: Option<ArbitrationConfig<T>>,
}

impl<T: Scalar> BundleFile<T> {
    pub fn into_bundle(self) -> Result<(ModelBundle<T>, Option<ArbitrationConfig<T>>)> {
        if self.format_version != BUNDLE_VERSION {
            return Err(Error::CheckpointVersion { found: self.format_version, expected: BUNDLE_VERSION });
        }
        for ck in [&self.encoder, &self.decoder, &self.discriminator] {
            ck.validate()?;
        }
        let bundle = ModelBundle {
            encoder: self.encoder.network,
            decoder: self.decoder.network,
            discriminator: self.discriminator.network,
            features: self.features,
            latent_dim: self.latent_dim,
            v_max: self.v_max,
            version: self.version,
            training_fingerprint: self.training_fingerprint,
        };
        bundle.validate()?;
        if let Some(a) = &self.arbitration {
            a.validate()?;
        }
        Ok((bundle, self.arbitration))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::featurize;
    use crate::intent::record::Step;

    fn feature(cfg: &FeatureConfig) -> SnippetFeature<f64> {
        let steps: Vec<Step<f64>> = (0..4)
            .map(|t| Step {
                tick: t,
                state: vec![0.1 * t as f64, 0.0],
                human: vec![1.0, 0.0],
                human_idle: false,
                robot: vec![0.0, 0.0],
                beta: 0.0,
            })
            .collect();
        featurize(&steps, cfg).unwrap()
    }

    #[test]
    fn untrained_bundle_is_inert() {
        let cfg = FeatureConfig::default();
        let b = ModelBundle::<f64>::untrained(cfg.clone(), 2, &[16, 16], 1.0, 3);
        b.validate().unwrap();
        let f = feature(&cfg);
        let belief = b.encode(&f).unwrap();
        assert_eq!(belief.mean.len() + belief.log_var.len(), 4);
        assert!(b.assist_action(&RobotState(vec![0.3, 0.2]), &belief.mean).unwrap().is_zero());
        assert_eq!(b.confidence(&f).unwrap(), 0.0);
    }

    #[test]
    fn encoding_and_assist_are_deterministic() {
        let cfg = FeatureConfig::default();
        let mut b = ModelBundle::<f64>::untrained(cfg.clone(), 3, &[8], 1.0, 4);
        b.decoder = Mlp::dense(5, &[8], 2, Activation::Tanh, 0.0, 5);
        let f = feature(&cfg);
        let e1 = b.encode(&f).unwrap();
        let e2 = b.encode(&f).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.dim(), 3);
        let s = RobotState(vec![0.2, 0.4]);
        assert_eq!(b.assist_action(&s, &e1.mean).unwrap(), b.assist_action(&s, &e2.mean).unwrap());
        assert!(b.assist_action(&s, &[f64::NAN, 0.0, 0.0]).is_err());
        assert!(b.assist_action(&s, &[0.0]).is_err());
    }

    #[test]
    fn sigmoid_stays_in_unit_interval() {
        for x in [-1e6, -50.0, -1.0, 0.0, 1.0, 50.0, 1e6] {
            let y: f64 = sigmoid(x);
            assert!((0.0..=1.0).contains(&y) && y.is_finite());
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn bundle_file_round_trip_preserves_fingerprint() {
        let cfg = FeatureConfig::default();
        let mut b = ModelBundle::<f64>::untrained(cfg, 2, &[8], 1.0, 6);
        b.version = 4;
        b.training_fingerprint = "abc".into();
        let arb = ArbitrationConfig::default();
        let (back, a) = ModelBundle::<f64>::from_json(&b.to_json(Some(arb.clone())).unwrap()).unwrap();
        assert_eq!(back.fingerprint(), b.fingerprint());
        assert_eq!(a, Some(arb));
    }

    #[test]
    fn mismatched_networks_fail_validation() {
        let cfg = FeatureConfig::default();
        let mut b = ModelBundle::<f64>::untrained(cfg, 2, &[8], 1.0, 6);
        b.decoder = Mlp::dense(3, &[8], 2, Activation::Tanh, 0.0, 1);
        assert!(matches!(b.validate(), Err(Error::Shape { context: "decoder input", .. })));
    }
}
