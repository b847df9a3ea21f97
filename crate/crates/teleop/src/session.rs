//! One live teleoperation session: the interaction in progress, the shared
//! dataset and the published models. Purely synchronous; the server drives
//! it from its control loop.

use std::path::PathBuf;

use reprise_core::harness::{
    train_assistant, Assistant, ContinualLearner, Controller, Dataset, Method, MethodConfig, RetrainEvent, Scene,
    TickOutput, TrainingJob,
};
use reprise_core::human::HumanInput;
use reprise_core::rng::{derive_seed, label};
use reprise_core::{Error, Result};
use tracing::{info, warn};

use crate::protocol::{Mode, ServerMessage};

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub scene: Scene,
    pub training: MethodConfig,
    /// Interactions between refits.
    pub cadence: usize,
    pub seed: u64,
    /// Commands received more than this many ticks ago count as idle.
    pub stale_ticks: u64,
    /// An interaction ends by itself after this many ticks.
    pub max_ticks: usize,
    pub method: Method,
    /// Written after every stored interaction.
    pub dataset_path: Option<PathBuf>,
}

impl SessionConfig {
    pub fn new(scene: Scene, training: MethodConfig) -> Self {
        Self {
            scene,
            training,
            cadence: 3,
            seed: 0,
            stale_ticks: 2,
            max_ticks: 1200,
            method: Method::Ours,
            dataset_path: None,
        }
    }
}

/// What happened when an interaction ended.
#[derive(Debug)]
pub struct Ended {
    pub stored: bool,
    /// A refit that is now due; run it off the control loop and hand the
    /// result to [`Session::publish`].
    pub job: Option<TrainingJob>,
}

pub struct Session {
    cfg: SessionConfig,
    learner: ContinualLearner,
    bayes: Option<Assistant>,
    method: Method,
    mode: Mode,
    ctl: Option<Controller>,
    started: u64,
}

impl Session {
    /// Fit the initial model on `initial` (which may be empty).
    pub fn new(cfg: SessionConfig, initial: Dataset) -> Result<Self> {
        let learner = ContinualLearner::new(Method::Ours, cfg.training.clone(), cfg.scene.clone(), initial, cfg.cadence, cfg.seed)?;
        let bayes = if cfg.training.bayes.goals.is_empty() {
            None
        } else {
            Some(train_assistant(Method::Bayes, &[], &cfg.training, &cfg.scene, 0, cfg.seed)?)
        };
        let mut s = Self { learner, bayes, method: Method::Ours, mode: Mode::Paused, ctl: None, started: 0, cfg };
        s.set_method(s.cfg.method)?;
        Ok(s)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn dataset(&self) -> &Dataset {
        self.learner.dataset()
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    /// Version of the model the next interaction will use.
    pub fn bundle_version(&self) -> u64 {
        self.assistant().map(|a| a.version()).unwrap_or(0)
    }

    pub fn is_live(&self) -> bool {
        self.ctl.is_some()
    }

    /// Seed of the `k`-th interaction of this session.
    pub fn interaction_seed(&self, k: u64) -> u64 {
        derive_seed(self.cfg.seed, &[label("live"), k])
    }

    /// The assistance the next interaction will start with.
    pub fn assistant(&self) -> Result<Assistant> {
        Ok(match self.method {
            Method::Ours => self.learner.assistant().clone(),
            Method::NoAssist => Assistant::NoAssist,
            Method::Bayes => self.bayes.clone().ok_or_else(|| Error::config("bayes needs a goal set"))?,
            m => return Err(Error::config(format!("method `{m}` is not available live"))),
        })
    }

    /// Choose the assistance for subsequent interactions.
    pub fn set_method(&mut self, method: Method) -> Result<()> {
        if self.ctl.is_some() {
            return Err(Error::config("cannot change method during an interaction"));
        }
        let previous = std::mem::replace(&mut self.method, method);
        if let Err(e) = self.assistant() {
            self.method = previous;
            return Err(e);
        }
        Ok(())
    }

    /// Begin an interaction with the currently published model, which stays
    /// fixed until the interaction ends.
    pub fn start(&mut self, task_hint: Option<String>) -> Result<()> {
        match self.mode {
            Mode::Live => return Err(Error::config("an interaction is already running")),
            Mode::Retraining => return Err(Error::config("retraining in progress")),
            Mode::Paused => {}
        }
        let seed = self.interaction_seed(self.started);
        let id = self.learner.dataset().len() as u64;
        let mut ctl = Controller::new(self.assistant()?, self.cfg.scene.sim.clone(), self.cfg.scene.start_state(seed), id, seed)?;
        ctl.set_task_label(task_hint);
        self.ctl = Some(ctl);
        self.started += 1;
        self.mode = Mode::Live;
        Ok(())
    }

    /// Advance the live interaction by one tick. Returns `None` when paused.
    pub fn tick(&mut self, input: HumanInput<f64>) -> Result<Option<TickOutput>> {
        match &mut self.ctl {
            Some(ctl) => ctl.step(input).map(Some),
            None => Ok(None),
        }
    }

    /// Whether the running interaction has hit its tick limit.
    pub fn expired(&self) -> bool {
        self.ctl.as_ref().is_some_and(|c| c.tick() >= self.cfg.max_ticks)
    }

    /// Close the running interaction and store it. Empty interactions are
    /// discarded.
    pub fn end(&mut self) -> Result<Ended> {
        let ctl = self.ctl.take().ok_or_else(|| Error::config("no interaction is running"))?;
        self.mode = Mode::Paused;
        let record = ctl.finish();
        if record.commanded_ticks() == 0 {
            info!("discarding interaction without commands");
            return Ok(Ended { stored: false, job: None });
        }
        let due = self.learner.push(record)?;
        if let Some(path) = &self.cfg.dataset_path {
            if let Err(e) = self.learner.dataset().save(path) {
                warn!(error = %e, path = %path.display(), "could not save the dataset");
            }
        }
        let job = due.then(|| {
            self.mode = Mode::Retraining;
            self.learner.job()
        });
        Ok(Ended { stored: true, job })
    }

    /// Install the result of a refit started by [`Session::end`].
    pub fn publish(&mut self, job: &TrainingJob, result: Result<Assistant>) -> RetrainEvent {
        let event = self.learner.publish(job, result);
        self.mode = Mode::Paused;
        event
    }

    pub fn scene_message(&self) -> ServerMessage {
        let scene = &self.cfg.scene;
        ServerMessage::Scene { workspace: scene.sim.workspace.clone(), start: scene.start.clone(), props: scene.props() }
    }

    pub fn status(&self, notice: Option<String>) -> ServerMessage {
        ServerMessage::Status {
            mode: self.mode,
            method: self.method,
            bundle: self.bundle_version(),
            interactions: self.learner.dataset().len(),
            notice,
        }
    }
}

/// Latest-value command slot. A command is used by at most one tick and is
/// ignored once it is older than the staleness limit.
#[derive(Debug, Default)]
pub struct Mailbox {
    slot: Option<(Vec<f64>, u64)>,
}

impl Mailbox {
    /// Store `v`, received during tick `now`; replaces any unread command.
    pub fn put(&mut self, v: Vec<f64>, now: u64) {
        self.slot = Some((v, now));
    }

    /// Input for tick `now`.
    pub fn take(&mut self, now: u64, stale_ticks: u64) -> HumanInput<f64> {
        match self.slot.take() {
            Some((v, at)) if now.saturating_sub(at) <= stale_ticks => HumanInput::Command(reprise_core::sim::ControlAction(v)),
            _ => HumanInput::Idle,
        }
    }
}
