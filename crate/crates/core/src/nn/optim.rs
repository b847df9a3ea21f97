use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// The gradient held a NaN or infinity; parameters were left untouched.
    SkippedNonFinite,
}

/// Optimizer accumulators, one tensor per network parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OptimizerState<T> {
    pub lr: T,
    pub kind: OptimizerKind,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
    pub steps: u64,
    pub skipped: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(net: &Mlp<T>, lr: T, kind: OptimizerKind) -> Self {
        let zeros: Vec<Vec<T>> = net.tensors().map(|t| vec![T::zero(); t.len()]).collect();
        Self {
            lr,
            kind,
            first_moment: zeros.clone(),
            second_moment: zeros,
            steps: 0,
            skipped: 0,
        }
    }

    pub fn adam(net: &Mlp<T>, lr: T) -> Self {
        Self::new(net, lr, OptimizerKind::default())
    }

    fn check_shapes(&self, net: &Mlp<T>, grads: &Gradients<T>) -> Result<()> {
        for ((p, g), m) in net.tensors().zip(grads.tensors()).zip(&self.first_moment) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::Shape {
                    context: "optimizer step",
                    expected: p.len(),
                    got: g.len().min(m.len()),
                });
            }
        }
        if net.tensors().count() != self.first_moment.len() {
            return Err(Error::Shape {
                context: "optimizer tensors",
                expected: net.tensors().count(),
                got: self.first_moment.len(),
            });
        }
        Ok(())
    }

    /// Apply one descent step of `grads` to `net`.
    pub fn step(&mut self, net: &mut Mlp<T>, grads: &Gradients<T>) -> Result<StepOutcome> {
        self.check_shapes(net, grads)?;
        if !grads.is_finite() {
            self.skipped += 1;
            return Ok(StepOutcome::SkippedNonFinite);
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in net.tensors_mut().zip(grads.tensors()) {
                    p.iter_mut().zip(g).for_each(|(w, &d)| *w -= self.lr * d);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(eps));
                let t = self.steps as i32;
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                let tensors = net
                    .tensors_mut()
                    .zip(grads.tensors())
                    .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()));
                for ((p, g), (m, v)) in tensors {
                    for i in 0..p.len() {
                        let d = g[i];
                        m[i] = b1 * m[i] + (T::one() - b1) * d;
                        v[i] = b2 * v[i] + (T::one() - b2) * d * d;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= self.lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(StepOutcome::Applied)
    }
}
