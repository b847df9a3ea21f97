//! Scenario files (TOML).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::continual::MethodConfig;
use super::controller::Method;
use super::scenes::Scene;
use crate::error::{Error, Result};
use crate::human::HumanParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSpec {
    pub task: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub task: String,
    pub method: Method,
    #[serde(default = "one")]
    pub repetitions: usize,
}

fn one() -> usize {
    1
}

/// After the schedule: revisit `tasks` with the model trained on the whole
/// dataset ("all") and with one trained only on the records of `tasks`
/// ("task").
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalEval {
    pub tasks: Vec<String>,
    #[serde(default = "one")]
    pub repetitions: usize,
}

/// Operator drives for `prefix_ticks`, then the robot finishes alone.
/// Replaces the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutonomyPrefix {
    pub prefix_ticks: usize,
    /// Demonstrations per task, one condition per entry.
    pub demo_counts: Vec<usize>,
    pub tasks: Vec<String>,
    pub methods: Vec<Method>,
    #[serde(default = "one")]
    pub repetitions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Independent repetitions of the whole scenario, seeded `seed..seed + seeds`.
    #[serde(default = "five")]
    pub seeds: usize,
    /// Operator noise levels as multiples of `v_max`.
    #[serde(default = "default_noise")]
    pub noise: Vec<f64>,
    #[serde(default = "three")]
    pub cadence: usize,
    /// When false, the initial models are used for the whole schedule.
    #[serde(default = "yes")]
    pub retrain: bool,
    #[serde(default = "five")]
    pub calibration_runs: usize,
    #[serde(default = "yes")]
    pub traces: bool,
    #[serde(default)]
    pub human: HumanParams<f64>,
    #[serde(default)]
    pub scene: Scene,
    #[serde(default)]
    pub demos: Vec<DemoSpec>,
    #[serde(default)]
    pub schedule: Vec<ScheduleEntry>,
    #[serde(default)]
    pub final_eval: Option<FinalEval>,
    #[serde(default)]
    pub autonomy_prefix: Option<AutonomyPrefix>,
    #[serde(default)]
    pub training: MethodConfig,
}

fn five() -> usize {
    5
}

fn three() -> usize {
    3
}

fn yes() -> bool {
    true
}

fn default_noise() -> Vec<f64> {
    vec![0.1]
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Every task the scenario runs, calibrates or demonstrates, in order of
    /// first mention.
    pub fn tasks(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut add = |t: &String| {
            if !out.contains(t) {
                out.push(t.clone());
            }
        };
        self.demos.iter().for_each(|d| add(&d.task));
        self.schedule.iter().for_each(|e| add(&e.task));
        if let Some(f) = &self.final_eval {
            f.tasks.iter().for_each(&mut add);
        }
        if let Some(a) = &self.autonomy_prefix {
            a.tasks.iter().for_each(&mut add);
        }
        out
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = self.schedule.iter().map(|e| e.method).collect();
        if let Some(a) = &self.autonomy_prefix {
            out.extend(&a.methods);
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if self.seeds == 0 {
            return Err(Error::config("seeds must be at least 1"));
        }
        if self.cadence == 0 {
            return Err(Error::config("cadence must be at least 1"));
        }
        if self.noise.is_empty() || self.noise.iter().any(|&n| !(n >= 0.0) || !n.is_finite()) {
            return Err(Error::config("noise levels must be a non-empty list of non-negative numbers"));
        }
        match &self.autonomy_prefix {
            Some(a) => {
                if a.demo_counts.is_empty() || a.tasks.is_empty() || a.methods.is_empty() || a.prefix_ticks == 0 {
                    return Err(Error::config("autonomy_prefix needs demo counts, tasks, methods and a prefix"));
                }
            }
            None if self.schedule.is_empty() => return Err(Error::config("schedule is empty")),
            None => {}
        }
        for t in self.tasks() {
            self.scene.task(&t)?;
        }
        if self.methods().contains(&Method::Bayes) {
            if self.training.bayes.goals.is_empty() {
                return Err(Error::config("bayes needs training.bayes.goals"));
            }
            self.scene.goal_positions(&self.training.bayes.goals)?;
        }
        Ok(())
    }
}
