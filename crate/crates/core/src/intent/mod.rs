//! Recognize, replicate, return: the learned assistance models.
//!
//! * the encoder embeds the operator's recent commands into a latent task;
//! * the decoder turns `(state, latent task)` into an assistive action;
//! * the discriminator scores how familiar the recent commands look, which
//!   sets how much control the robot takes.

mod arbitration;
mod bundle;
mod data;
mod discriminator;
mod feature;
mod record;
mod train;

pub use arbitration::{arbitrate, ArbitrationConfig};
pub use bundle::{sigmoid, BundleFile, LatentBelief, ModelBundle, BUNDLE_VERSION};
pub use data::{positive_snippets, records_fingerprint, training_pairs, PositiveSnippet, TrainingPair};
pub use discriminator::{
    deform, discriminator_example, rotate_directions, sample_negatives, train_discriminator, DeformationConfig,
    DiscriminatorConfig, DiscriminatorFit, NegativeKind,
};
pub use feature::{featurize, FeatureConfig, Snippet, SnippetFeature};
pub use record::{InteractionRecord, RecordMeta, Step};
pub use train::{
    autoencoder_example, mean_reconstruction_error, train_autoencoder, train_autoencoder_on, AutoencoderConfig,
    AutoencoderFit, AutoencoderGrads, TrainingCurve,
};

pub(crate) use train::{minibatch_epochs, shuffled};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::derive_seed;
use crate::scalar::Scalar;

/// Everything needed to fit a [`ModelBundle`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BundleConfig {
    pub features: FeatureConfig,
    pub autoencoder: AutoencoderConfig,
    pub discriminator: DiscriminatorConfig,
}

impl Default for BundleConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            autoencoder: AutoencoderConfig::default(),
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

impl BundleConfig {
    /// Same configuration with every training seed derived from `seed`.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.autoencoder.seed = derive_seed(seed, &[0xae]);
        c.discriminator.seed = derive_seed(seed, &[0xd1]);
        c
    }
}

/// Training report accompanying a fitted bundle.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BundleCurves {
    pub autoencoder: TrainingCurve,
    pub discriminator: TrainingCurve,
}

/// Fit encoder, decoder and discriminator from scratch on `records`.
pub fn train_bundle<T: Scalar>(
    records: &[InteractionRecord<T>],
    cfg: &BundleConfig,
    v_max: T,
    version: u64,
) -> Result<(ModelBundle<T>, BundleCurves)> {
    let ae = train_autoencoder(records, &cfg.features, &cfg.autoencoder)?;
    let disc = train_discriminator(records, &cfg.features, v_max, &cfg.discriminator)?;
    let bundle = ModelBundle {
        encoder: ae.encoder,
        decoder: ae.decoder,
        discriminator: disc.net,
        features: cfg.features.clone(),
        latent_dim: cfg.autoencoder.latent_dim,
        v_max,
        version,
        training_fingerprint: records_fingerprint(records),
    };
    bundle.validate()?;
    Ok((
        bundle,
        BundleCurves {
            autoencoder: ae.curve,
            discriminator: disc.curve,
        },
    ))
}
