//! Kinematic point/joint-space simulator: integration, control blending and
//! task environments.
//!
//! Everything here is a pure function of its inputs. A session's only state is
//! the `RobotState` it threads through `step` and the `TaskTracker` on the
//! evaluator side.

mod task;

pub use task::{task_progress, ProgressReport, TaskKind, TaskSpec, TaskTracker, Waypoint};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{all_finite, norm, Scalar};

/// Robot configuration: a position in workspace (or joint) coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "T: Scalar")]
pub struct RobotState<T>(pub Vec<T>);

/// Velocity command in workspace units per second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "T: Scalar")]
pub struct ControlAction<T>(pub Vec<T>);

impl<T: Scalar> RobotState<T> {
    pub fn new(q: Vec<T>) -> Self {
        Self(q)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn distance_to(&self, p: &[T]) -> T {
        debug_assert_eq!(self.0.len(), p.len());
        self.0
            .iter()
            .zip(p)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }
}

impl<T: Scalar> ControlAction<T> {
    pub fn new(v: Vec<T>) -> Self {
        Self(v)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn norm(&self) -> T {
        norm(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }

    /// Rescale so the Euclidean norm does not exceed `v_max`.
    pub fn clamped(mut self, v_max: T) -> Self {
        let n = self.norm();
        if n > v_max && n > T::zero() {
            let k = v_max / n;
            self.0.iter_mut().for_each(|x| *x *= k);
        }
        self
    }
}

/// Axis-aligned workspace bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Workspace<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn contains(&self, q: &[T]) -> bool {
        q.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
    }

    pub fn clamp(&self, q: &mut [T]) {
        for (x, (&lo, &hi)) in q.iter_mut().zip(self.min.iter().zip(&self.max)) {
            *x = x.max(lo).min(hi);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimConfig<T> {
    /// Integration timestep in seconds.
    pub dt: T,
    /// Speed cap applied to every executed action.
    pub v_max: T,
    /// Maximum ticks per interaction.
    pub max_ticks: usize,
    pub workspace: Workspace<T>,
    pub seed: u64,
}

impl<T: Scalar> SimConfig<T> {
    /// Planar defaults: dt = 0.05 s, v_max = 1, 200 ticks,
    /// workspace [-1.5, 1.5] x [-0.5, 1.5].
    pub fn planar() -> Self {
        Self {
            dt: T::lit(0.05),
            v_max: T::one(),
            max_ticks: 200,
            workspace: Workspace {
                min: vec![T::lit(-1.5), T::lit(-0.5)],
                max: vec![T::lit(1.5), T::lit(1.5)],
            },
            seed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.workspace.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::config("dt must be positive"));
        }
        if !(self.v_max > T::zero()) || !self.v_max.is_finite() {
            return Err(Error::config("v_max must be positive"));
        }
        if self.max_ticks == 0 {
            return Err(Error::config("max_ticks must be positive"));
        }
        let n = self.workspace.min.len();
        if n == 0 || n > 7 || self.workspace.max.len() != n {
            return Err(Error::config("workspace must have 1..=7 matching bounds"));
        }
        if self
            .workspace
            .min
            .iter()
            .zip(&self.workspace.max)
            .any(|(lo, hi)| !(lo < hi))
        {
            return Err(Error::config("workspace min must be below max"));
        }
        Ok(())
    }
}

/// Integrate one tick: `s + dt * a`, with the action speed-capped and the
/// result clamped to the workspace.
pub fn step<T: Scalar>(
    state: &RobotState<T>,
    action: &ControlAction<T>,
    cfg: &SimConfig<T>,
) -> Result<RobotState<T>> {
    let n = cfg.dim();
    if state.dim() != n {
        return Err(Error::Shape {
            context: "step state",
            expected: n,
            got: state.dim(),
        });
    }
    if action.dim() != n {
        return Err(Error::Shape {
            context: "step action",
            expected: n,
            got: action.dim(),
        });
    }
    if !all_finite(&state.0) {
        return Err(Error::NonFinite("step state"));
    }
    if !all_finite(&action.0) {
        return Err(Error::NonFinite("step action"));
    }
    let a = action.clone().clamped(cfg.v_max);
    let mut q: Vec<T> = state
        .0
        .iter()
        .zip(&a.0)
        .map(|(&s, &v)| s + cfg.dt * v)
        .collect();
    cfg.workspace.clamp(&mut q);
    Ok(RobotState(q))
}

/// Linear arbitration `beta * a_r + (1 - beta) * a_h`, speed-capped at `v_max`.
pub fn blend<T: Scalar>(
    a_r: &ControlAction<T>,
    a_h: &ControlAction<T>,
    beta: T,
    v_max: T,
) -> Result<ControlAction<T>> {
    if !(beta >= T::zero() && beta <= T::one()) {
        return Err(Error::BetaOutOfRange(beta.as_f64()));
    }
    if a_r.dim() != a_h.dim() {
        return Err(Error::Shape {
            context: "blend",
            expected: a_h.dim(),
            got: a_r.dim(),
        });
    }
    let mixed = a_r
        .0
        .iter()
        .zip(&a_h.0)
        .map(|(&r, &h)| beta * r + (T::one() - beta) * h)
        .collect();
    Ok(ControlAction(mixed).clamped(v_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> SimConfig<f64> {
        SimConfig {
            dt: 0.1,
            ..SimConfig::planar()
        }
    }

    #[test]
    fn step_integrates_velocity() {
        let s = step(
            &RobotState(vec![0.0, 0.0]),
            &ControlAction(vec![1.0, -1.0]),
            &SimConfig {
                v_max: 2.0,
                ..cfg()
            },
        )
        .unwrap();
        assert!((s.0[0] - 0.1).abs() < 1e-15 && (s.0[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_action_is_a_fixed_point() {
        let s0 = RobotState(vec![0.5, 0.5]);
        assert_eq!(step(&s0, &ControlAction::zeros(2), &cfg()).unwrap(), s0);
    }

    #[test]
    fn outward_action_at_edge_clamps_to_boundary() {
        let c = cfg();
        let s = step(&RobotState(vec![1.5, 1.45]), &ControlAction(vec![0.6, 0.8]), &c).unwrap();
        assert_eq!(s.0[0], c.workspace.max[0]);
        assert_eq!(s.0[1], c.workspace.max[1]);
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let err = step(&RobotState(vec![f64::NAN, 0.0]), &ControlAction::zeros(2), &cfg());
        assert!(matches!(err, Err(Error::NonFinite(_))));
        let err = step(&RobotState(vec![0.0, 0.0]), &ControlAction(vec![f64::INFINITY, 0.0]), &cfg());
        assert!(matches!(err, Err(Error::NonFinite(_))));
        let err = step(&RobotState(vec![0.0]), &ControlAction::zeros(2), &cfg());
        assert!(matches!(err, Err(Error::Shape { .. })));
    }

    #[test]
    fn blend_endpoints_and_midpoint() {
        let v = 100.0;
        let b = blend(&ControlAction(vec![5.0, 5.0]), &ControlAction(vec![1.0, 0.0]), 0.0, v).unwrap();
        assert_eq!(b.0, vec![1.0, 0.0]);
        let b = blend(&ControlAction(vec![1.0, 0.0]), &ControlAction(vec![9.0, 9.0]), 1.0, v).unwrap();
        assert_eq!(b.0, vec![1.0, 0.0]);
        let b = blend(&ControlAction(vec![1.0, 0.0]), &ControlAction(vec![0.0, 1.0]), 0.5, v).unwrap();
        assert_eq!(b.0, vec![0.5, 0.5]);
    }

    #[test]
    fn blend_rejects_beta_outside_unit_interval() {
        let a = ControlAction(vec![0.0, 0.0]);
        assert!(matches!(blend(&a, &a, 1.2, 1.0), Err(Error::BetaOutOfRange(_))));
        assert!(matches!(blend(&a, &a, -0.1, 1.0), Err(Error::BetaOutOfRange(_))));
        assert!(blend(&a, &a, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn blend_caps_speed() {
        let b = blend(&ControlAction(vec![3.0, 4.0]), &ControlAction(vec![3.0, 4.0]), 0.3, 1.0).unwrap();
        assert!((b.norm() - 1.0f64).abs() < 1e-12);
        assert!((b.0[0] - 0.6f64).abs() < 1e-12);
    }

    #[test]
    fn planar_config_is_valid() {
        SimConfig::<f32>::planar().validate().unwrap();
        let bad = SimConfig { dt: 0.0, ..cfg() };
        assert!(bad.validate().is_err());
        let bad = SimConfig { max_ticks: 0, ..cfg() };
        assert!(bad.validate().is_err());
    }

    fn vec2() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 2)
    }

    proptest! {
        #[test]
        fn blend_of_identical_actions_is_identity(a in vec2(), beta in 0.0f64..=1.0) {
            let act = ControlAction(a.clone());
            let b = blend(&act, &act, beta, 1e9).unwrap();
            for (x, y) in b.0.iter().zip(&a) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn blend_is_linear_in_beta(r in vec2(), h in vec2(), b1 in 0.0f64..=1.0, b2 in 0.0f64..=1.0) {
            let (r, h) = (ControlAction(r), ControlAction(h));
            let mid = 0.5 * (b1 + b2);
            let x1 = blend(&r, &h, b1, 1e9).unwrap();
            let x2 = blend(&r, &h, b2, 1e9).unwrap();
            let xm = blend(&r, &h, mid, 1e9).unwrap();
            for i in 0..2 {
                prop_assert!((xm.0[i] - 0.5 * (x1.0[i] + x2.0[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn step_respects_speed_cap_and_bounds(s in vec2(), a in prop::collection::vec(-50.0f64..50.0, 2)) {
            let c = cfg();
            let mut s0 = RobotState(s);
            c.workspace.clamp(&mut s0.0);
            let s1 = step(&s0, &ControlAction(a), &c).unwrap();
            prop_assert!(c.workspace.contains(&s1.0));
            prop_assert!(s1.distance_to(&s0.0) <= c.v_max * c.dt + 1e-12);
        }

        #[test]
        fn step_is_deterministic(s in vec2(), a in vec2()) {
            let c = cfg();
            let x = step(&RobotState(s.clone()), &ControlAction(a.clone()), &c).unwrap();
            let y = step(&RobotState(s), &ControlAction(a), &c).unwrap();
            prop_assert_eq!(x.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            y.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
