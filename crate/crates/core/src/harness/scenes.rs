//! Scene geometry: workspace, start pose and the tasks available in it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from, uniform};
use crate::sim::{RobotState, SimConfig, TaskKind, TaskSpec, Waypoint};

/// A visible object, for rendering only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop {
    pub name: String,
    pub position: Vec<f64>,
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub sim: SimConfig<f64>,
    pub start: Vec<f64>,
    /// Each start coordinate is drawn uniformly within +-jitter.
    #[serde(default)]
    pub start_jitter: f64,
    pub tasks: Vec<TaskSpec<f64>>,
}

impl Default for Scene {
    fn default() -> Self {
        Self::household()
    }
}

fn goal(label: &str, p: [f64; 2]) -> TaskSpec<f64> {
    TaskSpec::goal(label, p.to_vec(), 0.05)
}

fn skill(label: &str, points: &[([f64; 2], f64)]) -> TaskSpec<f64> {
    let waypoints = points
        .iter()
        .map(|(p, tol)| Waypoint { position: p.to_vec(), tolerance: *tol })
        .collect();
    TaskSpec::skill(label, waypoints, 0.05)
}

impl Scene {
    /// Planar tabletop: four reachable objects, a drawer whose handle is
    /// pulled sideways, and a glass that is reached and then lifted.
    pub fn household() -> Self {
        Self {
            sim: SimConfig::planar(),
            start: vec![0.0, 0.0],
            start_jitter: 0.05,
            tasks: vec![
                goal("can", [0.9, 0.3]),
                goal("notepad", [0.5, 1.0]),
                goal("tape", [-0.7, 0.8]),
                goal("cup", [-0.95, 0.1]),
                skill("drawer", &[([-0.1, 1.25], 0.08), ([0.35, 1.25], 0.05)]),
                skill("glass", &[([-0.5, 0.9], 0.08), ([-0.5, 1.3], 0.05)]),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        let n = self.sim.dim();
        if self.start.len() != n {
            return Err(Error::Shape { context: "scene start", expected: n, got: self.start.len() });
        }
        if !(self.start_jitter >= 0.0) {
            return Err(Error::config("start jitter must be non-negative"));
        }
        for (i, t) in self.tasks.iter().enumerate() {
            t.validate(n)?;
            if self.tasks[..i].iter().any(|o| o.label == t.label) {
                return Err(Error::config(format!("duplicate task `{}`", t.label)));
            }
        }
        Ok(())
    }

    pub fn task(&self, label: &str) -> Result<&TaskSpec<f64>> {
        self.tasks
            .iter()
            .find(|t| t.label == label)
            .ok_or_else(|| Error::UnknownTask(label.to_string()))
    }

    /// Terminal position of each named task (used as a known goal set).
    pub fn goal_positions(&self, labels: &[String]) -> Result<Vec<Vec<f64>>> {
        labels.iter().map(|l| Ok(self.task(l)?.terminal().to_vec())).collect()
    }

    pub fn start_state(&self, seed: u64) -> RobotState<f64> {
        let mut rng = rng_from(seed, &[0x57a7]);
        let mut q: Vec<f64> = self
            .start
            .iter()
            .map(|&x| {
                if self.start_jitter > 0.0 {
                    x + uniform::<f64, _>(&mut rng, -self.start_jitter, self.start_jitter)
                } else {
                    x
                }
            })
            .collect();
        self.sim.workspace.clamp(&mut q);
        RobotState(q)
    }

    pub fn props(&self) -> Vec<Prop> {
        let mut out = Vec::new();
        for t in &self.tasks {
            match &t.kind {
                TaskKind::DiscreteGoal { goal } => out.push(Prop {
                    name: t.label.clone(),
                    position: goal.clone(),
                    kind: "goal".into(),
                }),
                TaskKind::ContinuousSkill { waypoints } => {
                    for (i, w) in waypoints.iter().enumerate() {
                        out.push(Prop {
                            name: format!("{}/{}", t.label, i),
                            position: w.position.clone(),
                            kind: if i == 0 { "handle".into() } else { "waypoint".into() },
                        });
                    }
                }
            }
        }
        out
    }
}
