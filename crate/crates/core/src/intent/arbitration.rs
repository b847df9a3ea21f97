use serde::{Deserialize, Serialize};

use super::bundle::ModelBundle;
use super::feature::featurize;
use super::record::Step;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How discriminator confidence becomes the arbitration weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct ArbitrationConfig<T> {
    /// Proportionality gain between confidence and raw weight.
    pub gain: T,
    /// Upper limit on the weight, so the operator always keeps some control.
    pub ceiling: T,
    /// Exponential smoothing factor per tick.
    pub smoothing: T,
}

impl<T: Scalar> Default for ArbitrationConfig<T> {
    fn default() -> Self {
        Self {
            gain: T::one(),
            ceiling: T::lit(0.9),
            smoothing: T::lit(0.8),
        }
    }
}

impl<T: Scalar> ArbitrationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > T::zero()) {
            return Err(Error::config("arbitration gain must be positive"));
        }
        if !(self.ceiling >= T::zero() && self.ceiling <= T::one()) {
            return Err(Error::config("arbitration ceiling must lie in [0, 1]"));
        }
        if !(self.smoothing >= T::zero() && self.smoothing < T::one()) {
            return Err(Error::config("arbitration smoothing must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Smoothed weight from a raw confidence in [0, 1].
    pub fn update(&self, confidence: T, previous: T) -> T {
        let raw = (self.gain * confidence).min(self.ceiling).max(T::zero());
        let beta = self.smoothing * previous + (T::one() - self.smoothing) * raw;
        beta.max(T::zero()).min(self.ceiling)
    }
}

/// Arbitration weight for the current interaction prefix.
pub fn arbitrate<T: Scalar>(bundle: &ModelBundle<T>, prefix: &[Step<T>], cfg: &ArbitrationConfig<T>, previous: T) -> Result<T> {
    let feature = featurize(prefix, &bundle.features)?;
    let c = bundle.confidence(&feature)?;
    Ok(cfg.update(c, previous))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_confidence_decays_geometrically() {
        let cfg = ArbitrationConfig::<f64>::default();
        let mut beta = 0.9;
        for k in 1..=20 {
            beta = cfg.update(0.0, beta);
            assert!((beta - 0.9 * 0.8f64.powi(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn full_confidence_converges_to_ceiling() {
        let cfg = ArbitrationConfig::<f64>::default();
        let mut beta = 0.0;
        for _ in 0..200 {
            beta = cfg.update(1.0, beta);
        }
        assert!((beta - 0.9).abs() < 1e-12);
    }

    #[test]
    fn alternating_confidence_oscillation_is_bounded() {
        // Steady state of beta_{k+1} = s beta_k + (1 - s) r_k with r alternating
        // between c and 0: the two fixed points differ by c (1 - s) / (1 + s).
        let cfg = ArbitrationConfig::<f64>::default();
        let bound = 0.9 * (1.0 - 0.8) / (1.0 + 0.8);
        let mut beta = 0.0;
        let mut trace = vec![];
        for k in 0..400 {
            beta = cfg.update(if k % 2 == 0 { 1.0 } else { 0.0 }, beta);
            trace.push(beta);
        }
        let tail = &trace[300..];
        let amp = tail.iter().cloned().fold(f64::MIN, f64::max) - tail.iter().cloned().fold(f64::MAX, f64::min);
        assert!((amp - bound).abs() < 1e-9);
        assert!(amp < 0.2 * 0.9);
    }

    #[test]
    fn config_validation() {
        let mut c = ArbitrationConfig::<f64>::default();
        c.validate().unwrap();
        c.smoothing = 1.0;
        assert!(c.validate().is_err());
        c = ArbitrationConfig { gain: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn weight_is_monotone_in_confidence(c1 in 0.0f64..=1.0, c2 in 0.0f64..=1.0, prev in 0.0f64..=0.9,
                                            gain in 0.1f64..3.0, ceiling in 0.0f64..=1.0, s in 0.0f64..0.99) {
            let cfg = ArbitrationConfig { gain, ceiling, smoothing: s };
            let prev = prev.min(ceiling);
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            let (blo, bhi) = (cfg.update(lo, prev), cfg.update(hi, prev));
            prop_assert!(blo <= bhi);
            prop_assert!(bhi >= 0.0 && bhi <= ceiling);
        }
    }
}
