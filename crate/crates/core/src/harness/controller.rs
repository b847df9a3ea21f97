//! Per-tick shared-control loop shared by offline runs and the live service.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::baselines::{BcPolicy, DropoutGate, GoalPrior};
use crate::error::{Error, Result};
use crate::human::HumanInput;
use crate::intent::{featurize, ArbitrationConfig, FeatureConfig, InteractionRecord, ModelBundle, Snippet, SnippetFeature, Step};
use crate::rng::derive_seed;
use crate::scalar::all_finite;
use crate::sim::{blend, step, ControlAction, RobotState, SimConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ours,
    Bayes,
    Dagger,
    Dropout,
    #[serde(rename = "noassist")]
    NoAssist,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ours, Method::Bayes, Method::Dagger, Method::Dropout, Method::NoAssist];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Bayes => "bayes",
            Method::Dagger => "dagger",
            Method::Dropout => "dropout",
            Method::NoAssist => "noassist",
        }
    }

    /// Whether the method learns from the dataset.
    pub fn learns(self) -> bool {
        matches!(self, Method::Ours | Method::Dagger | Method::Dropout)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method `{s}`")))
    }
}

/// Trained artifacts of one method, ready to drive interactions. Cheap to
/// clone; the learned parts are shared and never mutated.
#[derive(Clone, Debug)]
pub enum Assistant {
    NoAssist,
    Ours {
        bundle: Arc<ModelBundle<f64>>,
        arbitration: ArbitrationConfig<f64>,
    },
    Bayes {
        prior: GoalPrior<f64>,
        ceiling: f64,
    },
    /// `None` until there is data to clone from.
    Dagger {
        policy: Option<Arc<BcPolicy<f64>>>,
        beta: f64,
        version: u64,
    },
    Dropout {
        gate: Option<Arc<DropoutGate<f64>>>,
        arbitration: ArbitrationConfig<f64>,
        version: u64,
    },
}

impl Assistant {
    pub fn method(&self) -> Method {
        match self {
            Assistant::NoAssist => Method::NoAssist,
            Assistant::Ours { .. } => Method::Ours,
            Assistant::Bayes { .. } => Method::Bayes,
            Assistant::Dagger { .. } => Method::Dagger,
            Assistant::Dropout { .. } => Method::Dropout,
        }
    }

    /// Version of the learned artifacts (0 when nothing has been trained).
    pub fn version(&self) -> u64 {
        match self {
            Assistant::Ours { bundle, .. } => bundle.version,
            Assistant::Dagger { version, .. } | Assistant::Dropout { version, .. } => *version,
            _ => 0,
        }
    }

    fn features(&self) -> Option<&FeatureConfig> {
        match self {
            Assistant::Ours { bundle, .. } => Some(&bundle.features),
            Assistant::Dagger { policy: Some(p), .. } => Some(&p.features),
            Assistant::Dropout { gate: Some(g), .. } => Some(&g.features),
            _ => None,
        }
    }

    /// Reject artifacts whose shapes do not fit the simulator.
    pub fn check(&self, n: usize) -> Result<()> {
        if let Some(f) = self.features() {
            if f.state_dim != n {
                return Err(Error::Shape { context: "featurization state dimension", expected: n, got: f.state_dim });
            }
        }
        match self {
            Assistant::Ours { bundle, arbitration } => {
                bundle.validate()?;
                arbitration.validate()
            }
            Assistant::Dropout { arbitration, .. } => arbitration.validate(),
            Assistant::Bayes { prior, ceiling } => {
                if prior.goals.iter().any(|g| g.len() != n) {
                    return Err(Error::Shape { context: "bayes goal", expected: n, got: prior.goals[0].len() });
                }
                if !(0.0..=1.0).contains(ceiling) {
                    return Err(Error::BetaOutOfRange(*ceiling));
                }
                Ok(())
            }
            Assistant::Dagger { beta, .. } if !(0.0..=1.0).contains(beta) => Err(Error::BetaOutOfRange(*beta)),
            _ => Ok(()),
        }
    }
}

/// Everything that happened on one tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickOutput {
    pub tick: usize,
    /// State at the start of the tick.
    pub state: Vec<f64>,
    pub a_h: Vec<f64>,
    pub human_idle: bool,
    pub a_r: Vec<f64>,
    pub beta: f64,
    pub next_state: Vec<f64>,
    pub bundle_version: u64,
}

/// One interaction in progress.
#[derive(Clone, Debug)]
pub struct Controller {
    assistant: Assistant,
    sim: SimConfig<f64>,
    record: InteractionRecord<f64>,
    state: RobotState<f64>,
    beta: f64,
    last_motion: Option<ControlAction<f64>>,
    forced_beta: Option<f64>,
    seed: u64,
    tick: usize,
}

impl Controller {
    /// Validates artifacts against the simulator before the first tick.
    pub fn new(assistant: Assistant, sim: SimConfig<f64>, start: RobotState<f64>, id: u64, seed: u64) -> Result<Self> {
        sim.validate()?;
        let n = sim.dim();
        if start.dim() != n {
            return Err(Error::Shape { context: "start state", expected: n, got: start.dim() });
        }
        if !all_finite(&start.0) {
            return Err(Error::NonFinite("start state"));
        }
        assistant.check(n)?;
        let mut record = InteractionRecord::new(id, sim.dt);
        record.meta.seed = seed;
        Ok(Self {
            assistant,
            sim,
            record,
            state: start,
            beta: 0.0,
            last_motion: None,
            forced_beta: None,
            seed,
            tick: 0,
        })
    }

    pub fn state(&self) -> &RobotState<f64> {
        &self.state
    }

    /// Arbitration weight of the most recent tick.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Executed (blended) action of the most recent tick.
    pub fn last_motion(&self) -> Option<&ControlAction<f64>> {
        self.last_motion.as_ref()
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn record(&self) -> &InteractionRecord<f64> {
        &self.record
    }

    pub fn assistant(&self) -> &Assistant {
        &self.assistant
    }

    pub fn sim(&self) -> &SimConfig<f64> {
        &self.sim
    }

    /// Override the arbitration weight (the method still computes `a_R`).
    pub fn force_beta(&mut self, beta: Option<f64>) -> Result<()> {
        if let Some(b) = beta {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::BetaOutOfRange(b));
            }
        }
        self.forced_beta = beta;
        Ok(())
    }

    pub fn set_task_label(&mut self, label: Option<String>) {
        self.record.meta.task_label = label;
    }

    /// Robot action and arbitration weight for the step just pushed. Actions
    /// are predicted from the behaviour before this tick, as in training; the
    /// discriminator judges the window that ends with this tick.
    fn assist(&mut self, a_h: &ControlAction<f64>, idle: bool) -> Result<(ControlAction<f64>, f64)> {
        let n = self.sim.dim();
        let steps = &self.record.steps;
        let history = &steps[..steps.len() - 1];
        Ok(match &mut self.assistant {
            Assistant::NoAssist => (ControlAction::zeros(n), 0.0),
            Assistant::Ours { bundle, arbitration } => {
                let a_r = match history_feature(history, &bundle.features)? {
                    Some(f) => bundle.assist_action(&self.state, &bundle.encode(&f)?.mean)?,
                    None => ControlAction::zeros(n),
                };
                let beta = arbitration.update(bundle.confidence(&featurize(steps, &bundle.features)?)?, self.beta);
                (a_r, beta)
            }
            Assistant::Bayes { prior, ceiling } => {
                if !idle {
                    *prior = prior.update(&self.state, a_h)?;
                }
                prior.assist(&self.state, self.sim.v_max, *ceiling)
            }
            Assistant::Dagger { policy: None, .. } | Assistant::Dropout { gate: None, .. } => (ControlAction::zeros(n), 0.0),
            Assistant::Dagger { policy: Some(p), beta, .. } => {
                match history_feature(history, &p.features)? {
                    Some(f) => (p.act(&f, &self.state)?, *beta),
                    None => (ControlAction::zeros(n), *beta),
                }
            }
            Assistant::Dropout { gate: Some(g), arbitration, .. } => {
                let (a_r, raw) = match history_feature(history, &g.features)? {
                    Some(f) => (g.act(&f, &self.state)?, g.beta(&f, &self.state, derive_seed(self.seed, &[0xd0, self.tick as u64]))?),
                    None => (ControlAction::zeros(n), 0.0),
                };
                (a_r, arbitration.update(raw, self.beta))
            }
        })
    }

    /// Advance one tick with the operator's input.
    pub fn step(&mut self, input: HumanInput<f64>) -> Result<TickOutput> {
        let n = self.sim.dim();
        let idle = input.is_idle();
        let a_h = input.action(n);
        if a_h.dim() != n {
            return Err(Error::Shape { context: "human command", expected: n, got: a_h.dim() });
        }
        if !all_finite(&a_h.0) {
            return Err(Error::NonFinite("human command"));
        }
        self.record.push(Step {
            tick: self.tick,
            state: self.state.0.clone(),
            human: a_h.0.clone(),
            human_idle: idle,
            robot: vec![0.0; n],
            beta: 0.0,
        })?;
        let (a_r, beta) = self.assist(&a_h, idle)?;
        let beta = self.forced_beta.unwrap_or(beta);
        let motion = blend(&a_r, &a_h, beta, self.sim.v_max)?;
        let next = step(&self.state, &motion, &self.sim)?;
        let last = self.record.steps.last_mut().expect("step was pushed");
        last.robot = a_r.0.clone();
        last.beta = beta;
        let out = TickOutput {
            tick: self.tick,
            state: self.state.0.clone(),
            a_h: a_h.0,
            human_idle: idle,
            a_r: a_r.0,
            beta,
            next_state: next.0.clone(),
            bundle_version: self.assistant.version(),
        };
        self.state = next;
        self.beta = beta;
        self.last_motion = Some(motion);
        self.tick += 1;
        Ok(out)
    }

    /// Close the interaction and return its record.
    pub fn finish(mut self) -> InteractionRecord<f64> {
        self.record.final_state = Some(self.state.0.clone());
        self.record
    }
}

/// Snippet of the commanded behaviour in `history`, if there is any.
fn history_feature(history: &[Step<f64>], cfg: &FeatureConfig) -> Result<Option<SnippetFeature<f64>>> {
    let snippet = Snippet::from_steps(history, cfg);
    if snippet.is_empty() {
        return Ok(None);
    }
    snippet.to_feature(cfg).map(Some)
}
