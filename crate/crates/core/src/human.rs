//! Scripted operators and human-effort accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::InteractionRecord;
use crate::rng::{normal, rng_from, SimRng};
use crate::scalar::{dot, Scalar};
use crate::sim::{ControlAction, RobotState, TaskSpec, TaskTracker};

/// What the operator sends on one tick.
#[derive(Clone, Debug, PartialEq)]
pub enum HumanInput<T> {
    Command(ControlAction<T>),
    /// No command; the operator is letting the robot drive.
    Idle,
}

impl<T: Scalar> HumanInput<T> {
    pub fn is_idle(&self) -> bool {
        matches!(self, HumanInput::Idle)
    }

    /// Command vector, zero when idle.
    pub fn action(&self, n: usize) -> ControlAction<T> {
        match self {
            HumanInput::Command(a) => a.clone(),
            HumanInput::Idle => ControlAction::zeros(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct HumanParams<T> {
    /// Standard deviation of the white noise added per action component.
    pub noise: T,
    /// The operator stops commanding when the robot's motion is within this
    /// angle (radians) of where they want to go, or will carry it through the
    /// active target's acceptance radius...
    pub trust_angle: T,
    /// ...and the arbitration weight is at least this large.
    pub idle_threshold: T,
}

impl<T: Scalar> Default for HumanParams<T> {
    fn default() -> Self {
        Self {
            noise: T::zero(),
            trust_angle: T::lit(0.35),
            idle_threshold: T::lit(0.4),
        }
    }
}

/// A simulated operator pursuing one task along the shortest path.
#[derive(Clone, Debug)]
pub struct HumanModel<T> {
    pub params: HumanParams<T>,
    pub v_max: T,
    pub dt: T,
    tracker: TaskTracker<T>,
    rng: SimRng,
}

impl<T: Scalar> HumanModel<T> {
    pub fn new(task: TaskSpec<T>, params: HumanParams<T>, v_max: T, dt: T, seed: u64) -> Result<Self> {
        if !(params.noise >= T::zero()) {
            return Err(Error::config("operator noise must be non-negative"));
        }
        let pi = T::lit(std::f64::consts::PI);
        if !(params.trust_angle > T::zero() && params.trust_angle < pi) {
            return Err(Error::config("trust angle must lie in (0, pi)"));
        }
        Ok(Self {
            params,
            v_max,
            dt,
            tracker: TaskTracker::new(task),
            rng: rng_from(seed, &[0x4855]),
        })
    }

    pub fn task(&self) -> &TaskSpec<T> {
        self.tracker.task()
    }

    /// Noise-free command towards the current target: full speed, slowing on
    /// the final approach so the terminal target is not overshot.
    pub fn desired(&mut self, state: &RobotState<T>) -> ControlAction<T> {
        self.tracker.update(state);
        let target = self.tracker.current_target();
        let delta: Vec<T> = target.iter().zip(&state.0).map(|(&g, &s)| g - s).collect();
        let dist = crate::scalar::norm(&delta);
        if dist <= T::zero() {
            return ControlAction::zeros(delta.len());
        }
        let last = self.tracker.active() + 1 == self.task().num_targets();
        let speed = if last { self.v_max.min(dist / self.dt) } else { self.v_max };
        ControlAction(delta.iter().map(|&d| d / dist * speed).collect())
    }

    /// One tick of operator behaviour. `last_motion` is the previously
    /// executed (blended) action, `beta` the current arbitration weight.
    pub fn act(&mut self, state: &RobotState<T>, last_motion: Option<&ControlAction<T>>, beta: T) -> HumanInput<T> {
        let desired = self.desired(state);
        if beta >= self.params.idle_threshold {
            if let Some(m) = last_motion {
                let target = self.tracker.current_target();
                let radius = self.task().radius(self.tracker.active());
                if within_angle(&m.0, &desired.0, self.params.trust_angle) || passes_within(&state.0, &m.0, target, radius) {
                    return HumanInput::Idle;
                }
            }
        }
        let sigma = self.params.noise;
        let noisy = desired
            .0
            .iter()
            .map(|&d| d + sigma * normal::<T, _>(&mut self.rng))
            .collect();
        HumanInput::Command(ControlAction(noisy))
    }
}

/// Whether the ray from `from` along `dir` comes within `radius` of `target`.
fn passes_within<T: Scalar>(from: &[T], dir: &[T], target: &[T], radius: T) -> bool {
    let nd = dot(dir, dir);
    if nd <= T::zero() {
        return false;
    }
    let delta: Vec<T> = target.iter().zip(from).map(|(&g, &s)| g - s).collect();
    let along = dot(&delta, dir);
    if along <= T::zero() {
        return false;
    }
    let miss_sq = dot(&delta, &delta) - along * along / nd;
    miss_sq <= radius * radius
}

fn within_angle<T: Scalar>(a: &[T], b: &[T], angle: T) -> bool {
    let na = crate::scalar::norm(a);
    let nb = crate::scalar::norm(b);
    if na <= T::zero() || nb <= T::zero() {
        return false;
    }
    dot(a, b) / (na * nb) >= angle.cos()
}

/// Per-interaction effort metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EffortReport<T> {
    pub commanded_ticks: usize,
    pub total_ticks: usize,
    pub completion_time: T,
    /// Operator command time over the scenario's mean no-assist completion time.
    pub effort: T,
    pub final_error: T,
    pub success: bool,
    pub beta_trace: Vec<T>,
}

impl<T: Scalar> EffortReport<T> {
    pub fn mean_beta(&self) -> T {
        if self.beta_trace.is_empty() {
            return T::zero();
        }
        self.beta_trace.iter().copied().sum::<T>() / T::lit(self.beta_trace.len() as f64)
    }
}

/// Score a finished interaction against its task.
pub fn score_interaction<T: Scalar>(record: &InteractionRecord<T>, task: &TaskSpec<T>, no_assist_mean_time: T) -> Result<EffortReport<T>> {
    if !(no_assist_mean_time > T::zero()) {
        return Err(Error::ZeroNormalizer(no_assist_mean_time.as_f64()));
    }
    let mut tracker = TaskTracker::new(task.clone());
    let mut success = false;
    let states = record
        .steps
        .iter()
        .map(|s| s.state.as_slice())
        .chain(record.final_state.as_deref());
    for s in states {
        let state = RobotState(s.to_vec());
        success |= tracker.update(&state).done;
    }
    let last = record.last_state().ok_or(Error::EmptyPrefix)?;
    let final_error = RobotState(last.to_vec()).distance_to(task.terminal());
    let commanded = record.commanded_ticks();
    Ok(EffortReport {
        commanded_ticks: commanded,
        total_ticks: record.len(),
        completion_time: T::lit(record.len() as f64) * record.dt,
        effort: T::lit(commanded as f64) * record.dt / no_assist_mean_time,
        final_error,
        success,
        beta_trace: record.steps.iter().map(|s| s.beta).collect(),
    })
}
