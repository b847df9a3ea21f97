//! Seen-versus-unseen classifier over snippet features.
//!
//! Positives are windows of stored interactions. Negatives are synthesized
//! from positives each epoch, half by each recipe:
//!
//! * action deformation: a Gaussian random walk over the window, smoothed by
//!   a moving average and rescaled to peak norm `amplitude * v_max`, is added
//!   to the human actions;
//! * direction randomization: the window's human actions are rotated by a
//!   random angle of magnitude at least `min_rotation` in a random plane.
//!
//! In both cases the change in commanded velocity is integrated into the
//! window's states, so the negative stays kinematically consistent.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::{positive_snippets, PositiveSnippet};
use super::feature::{FeatureConfig, Snippet};
use super::record::InteractionRecord;
use super::train::{minibatch_epochs, shuffled, TrainingCurve};
use crate::error::{Error, Result};
use crate::nn::{Activation, DropoutMode, Gradients, Mlp, OptimizerState};
use crate::rng::{derive_seed, normal, rng_from, SimRng};
use crate::scalar::{norm, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeformationConfig {
    /// Peak perturbation as a fraction of `v_max`.
    pub amplitude: f64,
    /// Moving-average width in ticks.
    pub smoothing: usize,
    /// Smallest rotation (radians) used for direction randomization.
    pub min_rotation: f64,
}

impl Default for DeformationConfig {
    fn default() -> Self {
        Self {
            amplitude: 0.5,
            smoothing: 5,
            min_rotation: std::f64::consts::FRAC_PI_6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub min_steps: usize,
    pub deformation: DeformationConfig,
    pub seed: u64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            lr: 1e-3,
            batch_size: 32,
            epochs: 20,
            min_steps: 5000,
            deformation: DeformationConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiscriminatorFit<T> {
    pub net: Mlp<T>,
    pub curve: TrainingCurve,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NegativeKind {
    Deformed,
    Rotated,
}

fn integrate_change<T: Scalar>(snippet: &Snippet<T>, new_actions: Vec<Vec<T>>, dt: T) -> Snippet<T> {
    let n = snippet.states.first().map_or(0, Vec::len);
    let mut offset = vec![T::zero(); n];
    let mut states = Vec::with_capacity(snippet.len());
    for (j, s) in snippet.states.iter().enumerate() {
        states.push(s.iter().zip(&offset).map(|(&x, &o)| x + o).collect());
        for c in 0..n {
            offset[c] += dt * (new_actions[j][c] - snippet.actions[j][c]);
        }
    }
    Snippet { states, actions: new_actions }
}

/// Add a smoothed random-walk perturbation to the window's actions.
pub fn deform<T: Scalar>(snippet: &Snippet<T>, dt: T, v_max: T, cfg: &DeformationConfig, rng: &mut SimRng) -> Snippet<T> {
    let len = snippet.len();
    if len == 0 {
        return snippet.clone();
    }
    let n = snippet.actions[0].len();
    let mut walk = Vec::with_capacity(len);
    let mut cur = vec![T::zero(); n];
    for _ in 0..len {
        cur.iter_mut().for_each(|c| *c += normal::<T, _>(rng));
        walk.push(cur.clone());
    }
    let w = cfg.smoothing.max(1);
    let smooth: Vec<Vec<T>> = (0..len)
        .map(|j| {
            let lo = j.saturating_sub(w - 1);
            let k = T::lit((j - lo + 1) as f64);
            (0..n).map(|c| walk[lo..=j].iter().map(|v| v[c]).sum::<T>() / k).collect()
        })
        .collect();
    let peak = smooth.iter().map(|v| norm(v)).fold(T::zero(), T::max);
    let scale = if peak > T::zero() { T::lit(cfg.amplitude) * v_max / peak } else { T::zero() };
    let actions = snippet
        .actions
        .iter()
        .zip(&smooth)
        .map(|(a, p)| a.iter().zip(p).map(|(&x, &y)| x + scale * y).collect())
        .collect();
    integrate_change(snippet, actions, dt)
}

/// Random orthonormal pair spanning the rotation plane.
fn random_plane<T: Scalar>(n: usize, rng: &mut SimRng) -> (Vec<T>, Vec<T>) {
    loop {
        let u: Vec<T> = (0..n).map(|_| normal(rng)).collect();
        let v: Vec<T> = (0..n).map(|_| normal(rng)).collect();
        let nu = norm(&u);
        if nu < T::lit(1e-6) {
            continue;
        }
        let u: Vec<T> = u.iter().map(|&x| x / nu).collect();
        let proj: T = u.iter().zip(&v).map(|(&a, &b)| a * b).sum();
        let v: Vec<T> = v.iter().zip(&u).map(|(&b, &a)| b - proj * a).collect();
        let nv = norm(&v);
        if nv < T::lit(1e-6) {
            continue;
        }
        return (u, v.iter().map(|&x| x / nv).collect());
    }
}

/// Rotate every action of the window by one random angle.
pub fn rotate_directions<T: Scalar>(snippet: &Snippet<T>, dt: T, cfg: &DeformationConfig, rng: &mut SimRng) -> Snippet<T> {
    let len = snippet.len();
    if len == 0 {
        return snippet.clone();
    }
    let n = snippet.actions[0].len();
    if n < 2 {
        // A line has no rotations; reverse the motion instead.
        let actions = snippet.actions.iter().map(|a| a.iter().map(|&x| -x).collect()).collect();
        return integrate_change(snippet, actions, dt);
    }
    let (u, v) = random_plane::<T>(n, rng);
    let mag = rng.random_range(cfg.min_rotation..=std::f64::consts::PI);
    let theta = T::lit(if rng.random::<bool>() { mag } else { -mag });
    let (c, s) = (theta.cos(), theta.sin());
    let actions = snippet
        .actions
        .iter()
        .map(|a| {
            let au: T = a.iter().zip(&u).map(|(&x, &y)| x * y).sum();
            let av: T = a.iter().zip(&v).map(|(&x, &y)| x * y).sum();
            let (ru, rv) = (c * au - s * av, s * au + c * av);
            (0..n).map(|i| a[i] + (ru - au) * u[i] + (rv - av) * v[i]).collect()
        })
        .collect();
    integrate_change(snippet, actions, dt)
}

/// Binary cross-entropy of one example (label 1 = seen) with exact gradient
/// accumulation.
pub fn discriminator_example<T: Scalar>(net: &Mlp<T>, feature: &[T], label: T, grads: Option<&mut Gradients<T>>) -> Result<T> {
    let cache = net.forward(feature, DropoutMode::Off)?;
    let logit = cache.output()[0];
    // softplus(l) - y * l, computed stably.
    let softplus = logit.max(T::zero()) + (T::one() + (-logit.abs()).exp()).ln();
    let loss = softplus - label * logit;
    if let Some(g) = grads {
        let p = super::bundle::sigmoid(logit);
        net.backward_into(&cache, &[p - label], g)?;
    }
    Ok(loss)
}

/// Build one epoch of negatives, half of each kind.
pub fn sample_negatives<T: Scalar>(
    positives: &[PositiveSnippet<T>],
    v_max: T,
    cfg: &DeformationConfig,
    rng: &mut SimRng,
) -> Vec<(Snippet<T>, NegativeKind)> {
    let order = shuffled(positives.len(), rng);
    order
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let p = &positives[i];
            if j % 2 == 0 {
                (deform(&p.snippet, p.dt, v_max, cfg, rng), NegativeKind::Deformed)
            } else {
                (rotate_directions(&p.snippet, p.dt, cfg, rng), NegativeKind::Rotated)
            }
        })
        .collect()
}

pub fn train_discriminator<T: Scalar>(
    records: &[InteractionRecord<T>],
    features: &FeatureConfig,
    v_max: T,
    cfg: &DiscriminatorConfig,
) -> Result<DiscriminatorFit<T>> {
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    let positives = positive_snippets(records, features)?;
    let pos_features: Vec<Vec<T>> = positives
        .iter()
        .map(|p| p.snippet.to_feature(features).map(|f| f.values))
        .collect::<Result<_>>()?;
    let mut net = Mlp::dense(features.dim(), &cfg.hidden, 1, Activation::Tanh, 0.0, derive_seed(cfg.seed, &[1]));
    let mut opt = OptimizerState::adam(&net, T::lit(cfg.lr));
    let mut grads = Gradients::zeros_like(&net);
    let mut rng = rng_from(cfg.seed, &[2]);
    let n_items = 2 * positives.len();
    let epochs = minibatch_epochs(n_items, cfg.batch_size, cfg.epochs, cfg.min_steps);
    let mut curve = TrainingCurve::default();

    for epoch in 0..epochs {
        let negatives = sample_negatives(&positives, v_max, &cfg.deformation, &mut rng);
        let neg_features: Vec<Vec<T>> = negatives
            .iter()
            .map(|(s, _)| s.to_feature(features).map(|f| f.values))
            .collect::<Result<_>>()?;
        let order = shuffled(n_items, &mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            for &i in batch {
                let (x, y) = if i < positives.len() {
                    (&pos_features[i], T::one())
                } else {
                    (&neg_features[i - positives.len()], T::zero())
                };
                total += discriminator_example(&net, x, y, Some(&mut grads))?.as_f64();
            }
            grads.scale(T::one() / T::lit(batch.len() as f64));
            opt.step(&mut net, &grads)?;
        }
        let mean = total / n_items as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged(format!("discriminator loss non-finite at epoch {epoch}")));
        }
        curve.epoch_loss.push(mean);
    }
    Ok(DiscriminatorFit { net, curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snippet() -> Snippet<f64> {
        let actions: Vec<Vec<f64>> = (0..8).map(|j| vec![0.6, 0.8 - 0.05 * j as f64]).collect();
        let mut states = vec![vec![0.0, 0.0]];
        for a in &actions[..7] {
            let last = states.last().unwrap().clone();
            states.push(vec![last[0] + 0.05 * a[0], last[1] + 0.05 * a[1]]);
        }
        Snippet { states, actions }
    }

    #[test]
    fn deformation_has_requested_peak_and_consistent_states() {
        let s = snippet();
        let cfg = DeformationConfig::default();
        let mut rng = rng_from(1, &[]);
        let d = deform(&s, 0.05, 1.0, &cfg, &mut rng);
        let peak = d
            .actions
            .iter()
            .zip(&s.actions)
            .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        assert!((peak - 0.5).abs() < 1e-12);
        assert_eq!(d.states[0], s.states[0]);
        // Consecutive states still follow the (new) commanded velocities.
        for j in 0..7 {
            for c in 0..2 {
                let ds = d.states[j + 1][c] - d.states[j][c];
                assert!((ds - 0.05 * d.actions[j][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_preserves_speed_and_turns_by_at_least_the_minimum() {
        let s = snippet();
        let cfg = DeformationConfig::default();
        let mut rng = rng_from(2, &[]);
        for _ in 0..50 {
            let r = rotate_directions(&s, 0.05, &cfg, &mut rng);
            for (a, b) in r.actions.iter().zip(&s.actions) {
                let na = (a[0] * a[0] + a[1] * a[1]).sqrt();
                let nb = (b[0] * b[0] + b[1] * b[1]).sqrt();
                assert!((na - nb).abs() < 1e-12);
                let cos = (a[0] * b[0] + a[1] * b[1]) / (na * nb);
                assert!(cos <= cfg.min_rotation.cos() + 1e-9);
            }
        }
    }

    #[test]
    fn negatives_split_evenly() {
        let positives: Vec<PositiveSnippet<f64>> = (0..10).map(|_| PositiveSnippet { snippet: snippet(), dt: 0.05 }).collect();
        let mut rng = rng_from(3, &[]);
        let negs = sample_negatives(&positives, 1.0, &DeformationConfig::default(), &mut rng);
        let deformed = negs.iter().filter(|(_, k)| *k == NegativeKind::Deformed).count();
        assert_eq!(deformed, 5);
        assert_eq!(negs.len(), 10);
    }
}
