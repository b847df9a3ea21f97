use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One control tick of an interaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Step<T> {
    pub tick: usize,
    /// Robot state at the start of the tick.
    pub state: Vec<T>,
    /// Operator command (zero when idle).
    pub human: Vec<T>,
    /// The operator issued no command this tick.
    #[serde(default)]
    pub human_idle: bool,
    /// Robot's assistive action.
    pub robot: Vec<T>,
    pub beta: T,
}

/// Evaluation-only metadata. Never read by featurization or training.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    #[serde(default)]
    pub task_label: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

/// A complete (or in-progress) interaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct InteractionRecord<T> {
    pub id: u64,
    pub dt: T,
    pub steps: Vec<Step<T>>,
    /// State after the last step, when the interaction has ended.
    #[serde(default)]
    pub final_state: Option<Vec<T>>,
    #[serde(default)]
    pub meta: RecordMeta,
}

impl<T: Scalar> InteractionRecord<T> {
    pub fn new(id: u64, dt: T) -> Self {
        Self {
            id,
            dt,
            steps: Vec::new(),
            final_state: None,
            meta: RecordMeta::default(),
        }
    }

    /// Append a step; ticks must strictly increase.
    pub fn push(&mut self, step: Step<T>) -> Result<()> {
        if let Some(last) = self.steps.last() {
            if step.tick <= last.tick {
                return Err(Error::config(format!(
                    "record {}: tick {} does not follow {}",
                    self.id, step.tick, last.tick
                )));
            }
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Indices of ticks where the operator issued a command.
    pub fn commanded(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.human_idle)
            .map(|(i, _)| i)
    }

    pub fn commanded_ticks(&self) -> usize {
        self.commanded().count()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) {
            return Err(Error::config("record dt must be positive"));
        }
        for w in self.steps.windows(2) {
            if w[1].tick <= w[0].tick {
                return Err(Error::config(format!("record {}: ticks not increasing", self.id)));
            }
        }
        Ok(())
    }

    /// Final state if recorded, otherwise the last step's state.
    pub fn last_state(&self) -> Option<&[T]> {
        self.final_state
            .as_deref()
            .or_else(|| self.steps.last().map(|s| s.state.as_slice()))
    }
}
