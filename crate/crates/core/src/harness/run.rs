//! Running interactions to completion with simulated operators.

use serde::{Deserialize, Serialize};

use super::controller::{Assistant, Controller, TickOutput};
use super::scenes::Scene;
use crate::error::{Error, Result};
use crate::human::{score_interaction, EffortReport, HumanInput, HumanModel, HumanParams};
use crate::intent::InteractionRecord;
use crate::rng::{derive_seed, label};
use crate::sim::{ControlAction, TaskSpec, TaskTracker};

/// Source of operator input for a running interaction.
pub trait Operator {
    fn act(&mut self, ctl: &mut Controller) -> Result<HumanInput<f64>>;
}

impl Operator for HumanModel<f64> {
    fn act(&mut self, ctl: &mut Controller) -> Result<HumanInput<f64>> {
        Ok(HumanModel::act(self, ctl.state(), ctl.last_motion(), ctl.beta()))
    }
}

/// Replays a fixed command sequence (`None` = idle), then idles.
#[derive(Clone, Debug, Default)]
pub struct ScriptedOperator {
    pub commands: Vec<Option<Vec<f64>>>,
}

impl Operator for ScriptedOperator {
    fn act(&mut self, ctl: &mut Controller) -> Result<HumanInput<f64>> {
        Ok(match self.commands.get(ctl.tick()) {
            Some(Some(v)) => HumanInput::Command(ControlAction(v.clone())),
            _ => HumanInput::Idle,
        })
    }
}

/// The operator drives alone for `prefix_ticks` ticks, then lets go and the
/// robot acts with full autonomy.
pub struct PrefixOperator {
    pub human: HumanModel<f64>,
    pub prefix_ticks: usize,
}

impl Operator for PrefixOperator {
    fn act(&mut self, ctl: &mut Controller) -> Result<HumanInput<f64>> {
        if ctl.tick() < self.prefix_ticks {
            ctl.force_beta(Some(0.0))?;
            Ok(HumanModel::act(&mut self.human, ctl.state(), ctl.last_motion(), 0.0))
        } else {
            ctl.force_beta(Some(1.0))?;
            Ok(HumanInput::Idle)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub record: InteractionRecord<f64>,
    pub success: bool,
    pub ticks: Vec<TickOutput>,
}

/// Tick until the task is done or `max_ticks` have elapsed.
pub fn run_interaction(mut ctl: Controller, operator: &mut dyn Operator, task: &TaskSpec<f64>) -> Result<Outcome> {
    task.validate(ctl.sim().dim())?;
    ctl.set_task_label(Some(task.label.clone()));
    let max_ticks = ctl.sim().max_ticks;
    let mut tracker = TaskTracker::new(task.clone());
    let mut ticks = Vec::new();
    let mut success = false;
    loop {
        if tracker.update(ctl.state()).done {
            success = true;
            break;
        }
        if ctl.tick() >= max_ticks {
            break;
        }
        let input = operator.act(&mut ctl)?;
        ticks.push(ctl.step(input)?);
    }
    Ok(Outcome { record: ctl.finish(), success, ticks })
}

/// A simulated operator for `task` at noise `sigma` (absolute units).
pub fn operator(scene: &Scene, task: &TaskSpec<f64>, params: &HumanParams<f64>, sigma: f64, seed: u64) -> Result<HumanModel<f64>> {
    let p = HumanParams { noise: sigma, ..params.clone() };
    HumanModel::new(task.clone(), p, scene.sim.v_max, scene.sim.dt, derive_seed(seed, &[label("human")]))
}

/// Run one interaction of `task` under `assistant` and score it.
#[allow(clippy::too_many_arguments)]
pub fn run_scored(
    scene: &Scene,
    task: &TaskSpec<f64>,
    assistant: Assistant,
    params: &HumanParams<f64>,
    sigma: f64,
    normalizer: f64,
    id: u64,
    seed: u64,
) -> Result<(Outcome, EffortReport<f64>)> {
    let ctl = Controller::new(assistant, scene.sim.clone(), scene.start_state(seed), id, seed)?;
    let mut human = operator(scene, task, params, sigma, seed)?;
    let out = run_interaction(ctl, &mut human, task)?;
    let report = score_interaction(&out.record, task, normalizer)?;
    Ok((out, report))
}

/// Mean no-assist completion time of `task` over `runs` calibration runs.
pub fn calibrate(scene: &Scene, task: &TaskSpec<f64>, params: &HumanParams<f64>, sigma: f64, runs: usize, seed: u64) -> Result<f64> {
    if runs == 0 {
        return Err(Error::config("calibration needs at least one run"));
    }
    let mut total = 0.0;
    for k in 0..runs {
        let s = derive_seed(seed, &[label("calibration"), label(&task.label), k as u64]);
        let ctl = Controller::new(Assistant::NoAssist, scene.sim.clone(), scene.start_state(s), k as u64, s)?;
        let mut human = operator(scene, task, params, sigma, s)?;
        let out = run_interaction(ctl, &mut human, task)?;
        total += out.record.len() as f64 * scene.sim.dt;
    }
    let mean = total / runs as f64;
    if !(mean > 0.0) {
        return Err(Error::ZeroNormalizer(mean));
    }
    Ok(mean)
}

/// Unassisted demonstrations of `task`.
pub fn demonstrations(
    scene: &Scene,
    task: &TaskSpec<f64>,
    params: &HumanParams<f64>,
    sigma: f64,
    count: usize,
    first_id: u64,
    seed: u64,
) -> Result<Vec<InteractionRecord<f64>>> {
    (0..count)
        .map(|k| {
            let s = derive_seed(seed, &[label("demo"), label(&task.label), k as u64]);
            let ctl = Controller::new(Assistant::NoAssist, scene.sim.clone(), scene.start_state(s), first_id + k as u64, s)?;
            let mut human = operator(scene, task, params, sigma, s)?;
            Ok(run_interaction(ctl, &mut human, task)?.record)
        })
        .collect()
}

/// Per-(task, noise) normalizer, reported alongside the metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub task: String,
    pub noise: f64,
    pub mean_time: f64,
}
