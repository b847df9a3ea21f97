use serde::{Deserialize, Serialize};

use super::RobotState;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Waypoint<T> {
    pub position: Vec<T>,
    /// Radius within which this waypoint counts as visited.
    pub tolerance: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum TaskKind<T> {
    DiscreteGoal { goal: Vec<T> },
    ContinuousSkill { waypoints: Vec<Waypoint<T>> },
}

/// A simulated task. Known to the simulated operator and the evaluator only;
/// nothing on the learner side takes a `TaskSpec`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TaskSpec<T> {
    pub label: String,
    #[serde(flatten)]
    pub kind: TaskKind<T>,
    pub success_radius: T,
}

impl<T: Scalar> TaskSpec<T> {
    pub fn goal(label: impl Into<String>, goal: Vec<T>, success_radius: T) -> Self {
        Self {
            label: label.into(),
            kind: TaskKind::DiscreteGoal { goal },
            success_radius,
        }
    }

    pub fn skill(label: impl Into<String>, waypoints: Vec<Waypoint<T>>, success_radius: T) -> Self {
        Self {
            label: label.into(),
            kind: TaskKind::ContinuousSkill { waypoints },
            success_radius,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.success_radius > T::zero()) {
            return Err(Error::config(format!("task `{}`: success radius must be positive", self.label)));
        }
        match &self.kind {
            TaskKind::DiscreteGoal { goal } if goal.len() != dim => Err(Error::Shape {
                context: "task goal",
                expected: dim,
                got: goal.len(),
            }),
            TaskKind::ContinuousSkill { waypoints } if waypoints.is_empty() => Err(Error::config(
                format!("task `{}`: a skill needs at least one waypoint", self.label),
            )),
            TaskKind::ContinuousSkill { waypoints } => {
                for w in waypoints {
                    if w.position.len() != dim {
                        return Err(Error::Shape {
                            context: "task waypoint",
                            expected: dim,
                            got: w.position.len(),
                        });
                    }
                    if !(w.tolerance > T::zero()) {
                        return Err(Error::config("waypoint tolerance must be positive"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn num_targets(&self) -> usize {
        match &self.kind {
            TaskKind::DiscreteGoal { .. } => 1,
            TaskKind::ContinuousSkill { waypoints } => waypoints.len(),
        }
    }

    /// Position of target `i` (the goal, or the i-th waypoint).
    pub fn target(&self, i: usize) -> &[T] {
        match &self.kind {
            TaskKind::DiscreteGoal { goal } => goal,
            TaskKind::ContinuousSkill { waypoints } => &waypoints[i].position,
        }
    }

    /// Acceptance radius of target `i`; the final target always uses the
    /// success radius.
    pub fn radius(&self, i: usize) -> T {
        let last = self.num_targets() - 1;
        match &self.kind {
            TaskKind::ContinuousSkill { waypoints } if i < last => waypoints[i].tolerance,
            _ => self.success_radius,
        }
    }

    pub fn terminal(&self) -> &[T] {
        self.target(self.num_targets() - 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProgressReport<T> {
    pub done: bool,
    /// Distance to the active target plus the length of the remaining path.
    pub distance: T,
    pub active: usize,
}

fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// Evaluate progress given the currently active target index. The returned
/// index is never below `active`.
pub fn task_progress<T: Scalar>(state: &RobotState<T>, task: &TaskSpec<T>, active: usize) -> ProgressReport<T> {
    let last = task.num_targets() - 1;
    let mut active = active.min(last);
    while active < last && dist(&state.0, task.target(active)) <= task.radius(active) {
        active += 1;
    }
    let here = dist(&state.0, task.target(active));
    let done = active == last && here <= task.success_radius;
    let remaining: T = (active..last)
        .map(|i| dist(task.target(i), task.target(i + 1)))
        .sum();
    ProgressReport {
        done,
        distance: here + remaining,
        active,
    }
}

/// Evaluator-side progress tracker for one interaction.
#[derive(Clone, Debug)]
pub struct TaskTracker<T> {
    task: TaskSpec<T>,
    active: usize,
}

impl<T: Scalar> TaskTracker<T> {
    pub fn new(task: TaskSpec<T>) -> Self {
        Self { task, active: 0 }
    }

    pub fn task(&self) -> &TaskSpec<T> {
        &self.task
    }

    pub fn active(&self) -> usize {
        self.active
    }

    /// Current target position for the operator to head towards.
    pub fn current_target(&self) -> &[T] {
        self.task.target(self.active)
    }

    pub fn update(&mut self, state: &RobotState<T>) -> ProgressReport<T> {
        let report = task_progress(state, &self.task, self.active);
        self.active = report.active;
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drawer() -> TaskSpec<f64> {
        TaskSpec::skill(
            "drawer",
            vec![
                Waypoint { position: vec![0.25, 1.2], tolerance: 0.08 },
                Waypoint { position: vec![0.25, 0.8], tolerance: 0.05 },
            ],
            0.05,
        )
    }

    #[test]
    fn at_goal_is_done_with_zero_distance() {
        let t = TaskSpec::goal("cup", vec![0.3, 0.4], 0.05);
        let p = task_progress(&RobotState(vec![0.3, 0.4]), &t, 0);
        assert!(p.done);
        assert_eq!(p.distance, 0.0);
    }

    #[test]
    fn reaching_first_waypoint_advances_index() {
        let t = TaskSpec::skill(
            "s",
            vec![
                Waypoint { position: vec![0.0, 1.0], tolerance: 0.05 },
                Waypoint { position: vec![1.0, 1.0], tolerance: 0.05 },
                Waypoint { position: vec![1.0, 0.0], tolerance: 0.05 },
            ],
            0.05,
        );
        let p = task_progress(&RobotState(vec![0.0, 1.0]), &t, 0);
        assert!(!p.done);
        assert_eq!(p.active, 1);
        assert!((p.distance - 2.0f64).abs() < 1e-12);
    }

    #[test]
    fn mid_skill_distance_is_remaining_path_length() {
        // Brute force: walk the remaining path densely and sum the hops.
        let t = drawer();
        let s = RobotState(vec![0.1, 0.5]);
        let p = task_progress(&s, &t, 0);
        let mut pts = vec![s.0.clone()];
        for i in p.active..t.num_targets() {
            pts.push(t.target(i).to_vec());
        }
        let mut brute = 0.0;
        for w in pts.windows(2) {
            let n = 10_000;
            for k in 0..n {
                let a = k as f64 / n as f64;
                let b = (k + 1) as f64 / n as f64;
                let pa: Vec<f64> = (0..2).map(|j| w[0][j] + a * (w[1][j] - w[0][j])).collect();
                let pb: Vec<f64> = (0..2).map(|j| w[0][j] + b * (w[1][j] - w[0][j])).collect();
                brute += dist(&pa, &pb);
            }
        }
        assert!((p.distance - brute).abs() < 1e-9, "{} vs {}", p.distance, brute);
        assert!((brute - (0.15f64.hypot(0.7) + 0.4)).abs() < 1e-9);
    }

    #[test]
    fn skill_requires_ordered_visitation() {
        let t = drawer();
        // Sitting on the final waypoint before touching the handle is not done.
        let p = task_progress(&RobotState(vec![0.25, 0.8]), &t, 0);
        assert!(!p.done);
        assert_eq!(p.active, 0);
        let mut tr = TaskTracker::new(t);
        assert_eq!(tr.update(&RobotState(vec![0.25, 1.18])).active, 1);
        // Moving away again never decreases the index.
        assert_eq!(tr.update(&RobotState(vec![-1.0, -0.5])).active, 1);
        assert!(tr.update(&RobotState(vec![0.25, 0.82])).done);
    }

    #[test]
    fn validation_catches_bad_tasks() {
        assert!(TaskSpec::goal("g", vec![0.0, 0.0], 0.0).validate(2).is_err());
        assert!(TaskSpec::<f64>::skill("s", vec![], 0.1).validate(2).is_err());
        assert!(TaskSpec::goal("g", vec![0.0], 0.1).validate(2).is_err());
        drawer().validate(2).unwrap();
    }
}
