use serde::{Deserialize, Serialize};

use super::{Mlp, OptimizerState};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned JSON checkpoint of a network, its optimizer and the seeds it was
/// derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Checkpoint<T> {
    pub format_version: u32,
    pub network: Mlp<T>,
    #[serde(default)]
    pub optimizer: Option<OptimizerState<T>>,
    #[serde(default)]
    pub seed_lineage: Vec<u64>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(network: Mlp<T>, optimizer: Option<OptimizerState<T>>, seed_lineage: Vec<u64>) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            network,
            optimizer,
            seed_lineage,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse and validate: version, layer chain and finiteness are checked.
    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        ck.validate()?;
        Ok(ck)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: self.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        Mlp::from_layers(self.network.layers().to_vec())?;
        if let Some(opt) = &self.optimizer {
            let shapes: Vec<usize> = self.network.tensors().map(Vec::len).collect();
            let m: Vec<usize> = opt.first_moment.iter().map(Vec::len).collect();
            let v: Vec<usize> = opt.second_moment.iter().map(Vec::len).collect();
            if shapes != m || shapes != v {
                return Err(Error::config("optimizer accumulators do not match network shape"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Gradients};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn checkpoint_round_trips_exactly(seed in any::<u64>(), hidden in 1usize..6) {
            let mut net = Mlp::<f64>::dense(3, &[hidden], 2, Activation::Tanh, 0.1, seed);
            let mut opt = OptimizerState::adam(&net, 1e-3);
            let mut g = Gradients::zeros_like(&net);
            g.tensors_mut().for_each(|t| t.iter_mut().enumerate().for_each(|(i, x)| *x = (i as f64).sin()));
            opt.step(&mut net, &g).unwrap();
            let ck = Checkpoint::new(net, Some(opt), vec![seed, 3]);
            let back = Checkpoint::<f64>::from_json(&ck.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, ck);
        }
    }

    #[test]
    fn rejects_unknown_version_and_broken_shapes() {
        let net = Mlp::<f64>::dense(2, &[3], 1, Activation::Relu, 0.0, 0);
        let mut ck = Checkpoint::new(net, None, vec![]);
        ck.format_version = 99;
        let err = Checkpoint::<f64>::from_json(&ck.to_json().unwrap()).unwrap_err();
        assert!(matches!(err, Error::CheckpointVersion { found: 99, .. }));

        ck.format_version = CHECKPOINT_VERSION;
        let mut v: serde_json::Value = serde_json::from_str(&ck.to_json().unwrap()).unwrap();
        v["network"]["layers"][0]["weights"] = serde_json::json!([1.0]);
        assert!(Checkpoint::<f64>::from_json(&v.to_string()).is_err());
    }
}
