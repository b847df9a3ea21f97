//! Goal inference over a known goal set with a Boltzmann-rational
//! directional likelihood `P(a_H | g, s) ~ exp(lambda * cos(a_H, g - s))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, norm, Scalar};
use crate::sim::{ControlAction, RobotState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GoalPrior<T> {
    pub goals: Vec<Vec<T>>,
    pub posterior: Vec<T>,
    pub rationality: T,
}

impl<T: Scalar> GoalPrior<T> {
    /// Uniform prior over `goals`.
    pub fn uniform(goals: Vec<Vec<T>>, rationality: T) -> Result<Self> {
        if goals.is_empty() {
            return Err(Error::config("goal set is empty"));
        }
        if !(rationality >= T::zero()) {
            return Err(Error::config("rationality must be non-negative"));
        }
        let p = T::one() / T::lit(goals.len() as f64);
        Ok(Self {
            posterior: vec![p; goals.len()],
            goals,
            rationality,
        })
    }

    /// Cosine between the command and the direction to each goal; 0 (no
    /// information) for a goal the robot is sitting on.
    fn cosines(&self, state: &RobotState<T>, a_h: &[T]) -> Vec<T> {
        let na = norm(a_h);
        self.goals
            .iter()
            .map(|g| {
                let d: Vec<T> = g.iter().zip(&state.0).map(|(&g, &s)| g - s).collect();
                let nd = norm(&d);
                if nd <= T::zero() || na <= T::zero() {
                    T::zero()
                } else {
                    dot(a_h, &d) / (na * nd)
                }
            })
            .collect()
    }

    /// Posterior after observing command `a_h` at `state`. A zero command
    /// carries no information and leaves the posterior unchanged.
    pub fn update(&self, state: &RobotState<T>, a_h: &ControlAction<T>) -> Result<Self> {
        if state.dim() != a_h.dim() {
            return Err(Error::Shape { context: "bayes update", expected: state.dim(), got: a_h.dim() });
        }
        if a_h.is_zero() {
            return Ok(self.clone());
        }
        let logits: Vec<T> = self
            .cosines(state, &a_h.0)
            .iter()
            .zip(&self.posterior)
            .map(|(&c, &p)| p.ln() + self.rationality * c)
            .collect();
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let w: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
        let z: T = w.iter().copied().sum();
        Ok(Self {
            goals: self.goals.clone(),
            posterior: w.iter().map(|&x| x / z).collect(),
            rationality: self.rationality,
        })
    }

    /// Index of the most probable goal (lowest index on ties).
    pub fn map_goal(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.posterior.iter().enumerate() {
            if p > self.posterior[best] {
                best = i;
            }
        }
        best
    }

    /// Full-speed motion towards the MAP goal, weighted by its posterior.
    pub fn assist(&self, state: &RobotState<T>, v_max: T, ceiling: T) -> (ControlAction<T>, T) {
        let g = &self.goals[self.map_goal()];
        let d: Vec<T> = g.iter().zip(&state.0).map(|(&g, &s)| g - s).collect();
        let nd = norm(&d);
        let a = if nd > T::zero() {
            ControlAction(d.iter().map(|&x| x / nd * v_max).collect())
        } else {
            ControlAction::zeros(d.len())
        };
        (a, self.posterior[self.map_goal()].min(ceiling))
    }
}

pub fn bayes_update<T: Scalar>(prior: &GoalPrior<T>, state: &RobotState<T>, a_h: &ControlAction<T>) -> Result<GoalPrior<T>> {
    prior.update(state, a_h)
}

pub fn bayes_assist<T: Scalar>(prior: &GoalPrior<T>, state: &RobotState<T>, v_max: T, ceiling: T) -> (ControlAction<T>, T) {
    prior.assist(state, v_max, ceiling)
}
