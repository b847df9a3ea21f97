//! Continual learning: append each finished interaction to the dataset and
//! refit the method from scratch every `cadence` interactions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::controller::{Assistant, Method};
use super::dataset::Dataset;
use super::scenes::Scene;
use crate::baselines::{bc_train, train_dropout_gate, BcConfig, DropoutConfig, GoalPrior};
use crate::error::{Error, Result};
use crate::intent::{train_bundle, ArbitrationConfig, BundleConfig, InteractionRecord, ModelBundle};
use crate::rng::{derive_seed, label};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BayesConfig {
    /// Known goal set, by task name.
    pub goals: Vec<String>,
    pub rationality: f64,
    pub ceiling: f64,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            goals: Vec::new(),
            rationality: 5.0,
            ceiling: 0.9,
        }
    }
}

/// Hyperparameters of every method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    pub bundle: BundleConfig,
    pub arbitration: ArbitrationConfig<f64>,
    pub bc: BcConfig,
    /// Constant arbitration weight of the behavior-cloning policy in shared control.
    pub dagger_beta: f64,
    pub dropout: DropoutConfig,
    pub bayes: BayesConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            bundle: BundleConfig::default(),
            arbitration: ArbitrationConfig::default(),
            bc: BcConfig::default(),
            dagger_beta: 0.5,
            dropout: DropoutConfig::default(),
            bayes: BayesConfig::default(),
        }
    }
}

/// Fit `method` on `records`. Methods that do not learn ignore the data.
pub fn train_assistant(
    method: Method,
    records: &[InteractionRecord<f64>],
    cfg: &MethodConfig,
    scene: &Scene,
    version: u64,
    seed: u64,
) -> Result<Assistant> {
    let v_max = scene.sim.v_max;
    let seed = derive_seed(seed, &[label("train"), label(method.name()), version]);
    let has_data = records.iter().any(|r| r.commanded_ticks() >= 2);
    Ok(match method {
        Method::NoAssist => Assistant::NoAssist,
        Method::Bayes => {
            if cfg.bayes.goals.is_empty() {
                return Err(Error::config("bayes needs a goal set"));
            }
            Assistant::Bayes {
                prior: GoalPrior::uniform(scene.goal_positions(&cfg.bayes.goals)?, cfg.bayes.rationality)?,
                ceiling: cfg.bayes.ceiling,
            }
        }
        Method::Ours => {
            let bundle = if has_data {
                let (mut b, _) = train_bundle(records, &cfg.bundle.reseeded(seed), v_max, version)?;
                b.version = version;
                b
            } else {
                let mut b = ModelBundle::untrained(
                    cfg.bundle.features.clone(),
                    cfg.bundle.autoencoder.latent_dim,
                    &cfg.bundle.autoencoder.hidden,
                    v_max,
                    seed,
                );
                b.version = version;
                b
            };
            Assistant::Ours { bundle: Arc::new(bundle), arbitration: cfg.arbitration.clone() }
        }
        Method::Dagger => {
            let policy = if has_data {
                let bc = BcConfig { seed, ..cfg.bc.clone() };
                Some(Arc::new(bc_train(records, &cfg.bundle.features, v_max, &bc)?.0))
            } else {
                None
            };
            Assistant::Dagger { policy, beta: cfg.dagger_beta, version }
        }
        Method::Dropout => {
            let gate = if has_data {
                let mut d = cfg.dropout.clone();
                d.autoencoder.seed = seed;
                Some(Arc::new(train_dropout_gate(records, &cfg.bundle.features, v_max, &d)?.0))
            } else {
                None
            };
            Assistant::Dropout { gate, arbitration: cfg.arbitration.clone(), version }
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrainEvent {
    /// Number of interactions in the dataset when the refit started.
    pub dataset_len: usize,
    pub version: u64,
    pub ok: bool,
    #[serde(default)]
    pub error: Option<String>,
}

/// A refit detached from the learner, so it can run on another thread.
#[derive(Clone, Debug)]
pub struct TrainingJob {
    pub method: Method,
    pub records: Vec<InteractionRecord<f64>>,
    pub cfg: MethodConfig,
    pub scene: Scene,
    pub version: u64,
    pub seed: u64,
}

impl TrainingJob {
    pub fn run(&self) -> Result<Assistant> {
        train_assistant(self.method, &self.records, &self.cfg, &self.scene, self.version, self.seed)
    }
}

/// Dataset plus the currently published artifacts of one method.
#[derive(Clone, Debug)]
pub struct ContinualLearner {
    method: Method,
    cfg: MethodConfig,
    scene: Scene,
    dataset: Dataset,
    assistant: Assistant,
    cadence: usize,
    retrain: bool,
    since_retrain: usize,
    seed: u64,
    next_version: u64,
    pub events: Vec<RetrainEvent>,
}

impl ContinualLearner {
    /// Fit the initial artifacts (version 0) on `initial`.
    pub fn new(method: Method, cfg: MethodConfig, scene: Scene, initial: Dataset, cadence: usize, seed: u64) -> Result<Self> {
        if cadence == 0 {
            return Err(Error::config("retrain cadence must be at least 1"));
        }
        let assistant = train_assistant(method, initial.records(), &cfg, &scene, 0, seed)?;
        Ok(Self {
            method,
            cfg,
            scene,
            dataset: initial,
            assistant,
            cadence,
            retrain: true,
            since_retrain: 0,
            seed,
            next_version: 1,
            events: Vec::new(),
        })
    }

    /// Keep the initial artifacts for the whole run.
    pub fn frozen(mut self) -> Self {
        self.retrain = false;
        self
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn assistant(&self) -> &Assistant {
        &self.assistant
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn cadence(&self) -> usize {
        self.cadence
    }

    /// Append a finished interaction; returns whether a refit is now due.
    pub fn push(&mut self, record: InteractionRecord<f64>) -> Result<bool> {
        self.dataset.push(record)?;
        self.since_retrain += 1;
        Ok(self.retrain && self.since_retrain >= self.cadence)
    }

    /// Snapshot of the data for the next refit.
    pub fn job(&self) -> TrainingJob {
        TrainingJob {
            method: self.method,
            records: self.dataset.records().to_vec(),
            cfg: self.cfg.clone(),
            scene: self.scene.clone(),
            version: self.next_version,
            seed: self.seed,
        }
    }

    /// Publish the result of a refit. On failure the previous artifacts stay
    /// in place and the event is flagged.
    pub fn publish(&mut self, job: &TrainingJob, result: Result<Assistant>) -> RetrainEvent {
        self.since_retrain = 0;
        let event = match result {
            Ok(a) => {
                self.assistant = a;
                self.next_version = job.version + 1;
                RetrainEvent { dataset_len: job.records.len(), version: job.version, ok: true, error: None }
            }
            Err(e) => {
                warn!(version = job.version, error = %e, "retraining failed; keeping previous model");
                RetrainEvent {
                    dataset_len: job.records.len(),
                    version: self.assistant.version(),
                    ok: false,
                    error: Some(e.to_string()),
                }
            }
        };
        self.events.push(event.clone());
        event
    }

    /// Append and, when due, refit synchronously.
    pub fn record(&mut self, record: InteractionRecord<f64>) -> Result<Option<RetrainEvent>> {
        if !self.push(record)? {
            return Ok(None);
        }
        let job = self.job();
        let result = job.run();
        Ok(Some(self.publish(&job, result)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::demonstrations;
    use crate::human::HumanParams;

    fn small_cfg() -> MethodConfig {
        let mut cfg = MethodConfig::default();
        for h in [&mut cfg.bundle.autoencoder.hidden, &mut cfg.bundle.discriminator.hidden] {
            *h = vec![8];
        }
        cfg.bundle.autoencoder.min_steps = 20;
        cfg.bundle.autoencoder.epochs = 1;
        cfg.bundle.discriminator.min_steps = 20;
        cfg.bundle.discriminator.epochs = 1;
        cfg
    }

    fn demos(n: usize) -> Vec<InteractionRecord<f64>> {
        let scene = Scene::household();
        demonstrations(&scene, scene.task("can").unwrap(), &HumanParams::default(), 0.1, n, 0, 9).unwrap()
    }

    #[test]
    fn cadence_one_retrains_after_every_interaction() {
        let mut l = ContinualLearner::new(Method::Ours, small_cfg(), Scene::household(), Dataset::new(), 1, 3).unwrap();
        let mut versions = vec![l.assistant().version()];
        for r in demos(5) {
            assert!(l.record(r).unwrap().unwrap().ok);
            versions.push(l.assistant().version());
        }
        assert_eq!(l.events.len(), 5);
        assert_eq!(versions, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn cadence_three_counts_interactions() {
        let mut l = ContinualLearner::new(Method::Ours, small_cfg(), Scene::household(), Dataset::new(), 3, 3).unwrap();
        let due: Vec<bool> = demos(7).into_iter().map(|r| l.record(r).unwrap().is_some()).collect();
        assert_eq!(due, vec![false, false, true, false, false, true, false]);
    }

    #[test]
    fn divergence_keeps_the_previous_model() {
        let mut cfg = small_cfg();
        cfg.bundle.autoencoder.lr = 1e200;
        cfg.bundle.autoencoder.min_steps = 200;
        let mut l = ContinualLearner::new(Method::Ours, cfg, Scene::household(), Dataset::new(), 1, 3).unwrap();
        let before = match l.assistant() {
            Assistant::Ours { bundle, .. } => bundle.fingerprint(),
            _ => unreachable!(),
        };
        let ev = l.record(demos(1).remove(0)).unwrap().unwrap();
        assert!(!ev.ok, "{ev:?}");
        assert!(ev.error.is_some());
        match l.assistant() {
            Assistant::Ours { bundle, .. } => assert_eq!(bundle.fingerprint(), before),
            _ => unreachable!(),
        }
        assert_eq!(l.dataset().len(), 1);
    }

    #[test]
    fn retraining_is_deterministic() {
        let d = Dataset::from_records(demos(3)).unwrap();
        let fp = |seed| match train_assistant(Method::Ours, d.records(), &small_cfg(), &Scene::household(), 1, seed).unwrap() {
            Assistant::Ours { bundle, .. } => bundle.fingerprint(),
            _ => unreachable!(),
        };
        assert_eq!(fp(5), fp(5));
        assert_ne!(fp(5), fp(6));
    }
}
