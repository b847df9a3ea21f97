//! Fixed-size snippet features over the most recent operator commands.
//!
//! The window holds the last `window` commanded `(state, human action)` pairs,
//! oldest first and left-padded with zeros, followed by the fraction of the
//! window that is filled. Idle ticks carry no operator information and are
//! skipped. Robot actions, arbitration values and record metadata are never
//! read.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::record::Step;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Window length `H` in commanded ticks.
    pub window: usize,
    /// Robot state / action dimension `n`.
    pub state_dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { window: 10, state_dim: 2 }
    }
}

impl FeatureConfig {
    /// `H * 2n + 1`.
    pub fn dim(&self) -> usize {
        self.window * 2 * self.state_dim + 1
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("snippet-v1:{}:{}", self.window, self.state_dim));
        hex::encode(&h.finalize()[..8])
    }
}

/// Ordered `(state, human action)` pairs, oldest first, at most `H` long.
#[derive(Clone, Debug, PartialEq)]
pub struct Snippet<T> {
    pub states: Vec<Vec<T>>,
    pub actions: Vec<Vec<T>>,
}

impl<T: Scalar> Snippet<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// The last `cfg.window` commanded pairs of `steps`.
    pub fn from_steps(steps: &[Step<T>], cfg: &FeatureConfig) -> Self {
        let mut states = Vec::with_capacity(cfg.window);
        let mut actions = Vec::with_capacity(cfg.window);
        for s in steps.iter().rev().filter(|s| !s.human_idle).take(cfg.window) {
            states.push(s.state.clone());
            actions.push(s.human.clone());
        }
        states.reverse();
        actions.reverse();
        Self { states, actions }
    }

    pub fn to_feature(&self, cfg: &FeatureConfig) -> Result<SnippetFeature<T>> {
        let n = cfg.state_dim;
        if self.len() > cfg.window {
            return Err(Error::Shape {
                context: "snippet length",
                expected: cfg.window,
                got: self.len(),
            });
        }
        let mut values = vec![T::zero(); cfg.dim()];
        let pad = cfg.window - self.len();
        for (j, (s, a)) in self.states.iter().zip(&self.actions).enumerate() {
            if s.len() != n || a.len() != n {
                return Err(Error::Shape {
                    context: "snippet pair",
                    expected: n,
                    got: s.len().min(a.len()),
                });
            }
            let base = (pad + j) * 2 * n;
            values[base..base + n].copy_from_slice(s);
            values[base + n..base + 2 * n].copy_from_slice(a);
        }
        values[cfg.dim() - 1] = T::lit(self.len() as f64 / cfg.window as f64);
        Ok(SnippetFeature {
            values,
            valid_len: self.len(),
        })
    }
}

/// Flattened, fixed-dimension snippet.
#[derive(Clone, Debug, PartialEq)]
pub struct SnippetFeature<T> {
    pub values: Vec<T>,
    /// Number of real (non-padding) pairs in the window.
    pub valid_len: usize,
}

/// Featurize an interaction prefix.
pub fn featurize<T: Scalar>(prefix: &[Step<T>], cfg: &FeatureConfig) -> Result<SnippetFeature<T>> {
    if prefix.is_empty() {
        return Err(Error::EmptyPrefix);
    }
    Snippet::from_steps(prefix, cfg).to_feature(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steps(n: usize) -> Vec<Step<f64>> {
        (0..n)
            .map(|t| Step {
                tick: t,
                state: vec![t as f64, -(t as f64)],
                human: vec![1.0, 0.5 * t as f64],
                human_idle: false,
                robot: vec![0.0, 0.0],
                beta: 0.0,
            })
            .collect()
    }

    #[test]
    fn dimension_is_fixed() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.dim(), 41);
        for n in [1, 3, 10, 25] {
            assert_eq!(featurize(&steps(n), &cfg).unwrap().values.len(), 41);
        }
    }

    #[test]
    fn short_prefix_is_left_padded() {
        let cfg = FeatureConfig::default();
        let f = featurize(&steps(3), &cfg).unwrap();
        assert_eq!(f.valid_len, 3);
        assert!(f.values[..7 * 4].iter().all(|&x| x == 0.0));
        assert_eq!(&f.values[7 * 4..7 * 4 + 4], &[0.0, -0.0, 1.0, 0.0]);
        assert_eq!(&f.values[9 * 4..10 * 4], &[2.0, -2.0, 1.0, 1.0]);
        assert!((f.values[40] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn long_prefix_keeps_last_window() {
        let cfg = FeatureConfig::default();
        let f = featurize(&steps(25), &cfg).unwrap();
        assert_eq!(f.valid_len, 10);
        assert_eq!(f.values[0], 15.0);
        assert_eq!(f.values[9 * 4], 24.0);
        assert_eq!(f.values[40], 1.0);
    }

    #[test]
    fn robot_actions_and_beta_are_ignored() {
        let cfg = FeatureConfig::default();
        let clean = steps(12);
        let mut noisy = clean.clone();
        for s in &mut noisy {
            s.robot = vec![3.0, -7.0];
            s.beta = 0.8;
        }
        assert_eq!(featurize(&clean, &cfg).unwrap(), featurize(&noisy, &cfg).unwrap());
    }

    #[test]
    fn idle_ticks_are_skipped() {
        let cfg = FeatureConfig::default();
        let mut s = steps(4);
        let before = featurize(&s, &cfg).unwrap();
        s.push(Step {
            tick: 4,
            state: vec![9.0, 9.0],
            human: vec![0.0, 0.0],
            human_idle: true,
            robot: vec![1.0, 0.0],
            beta: 0.5,
        });
        assert_eq!(featurize(&s, &cfg).unwrap(), before);
    }

    #[test]
    fn empty_prefix_is_rejected() {
        assert!(matches!(featurize::<f64>(&[], &FeatureConfig::default()), Err(Error::EmptyPrefix)));
    }
}
