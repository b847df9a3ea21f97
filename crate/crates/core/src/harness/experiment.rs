//! Scenario runner: demonstrations, calibration, the scheduled interactions
//! with continual retraining, and the optional revisit phase.

use std::collections::BTreeMap;

use tracing::info;

use super::continual::{train_assistant, ContinualLearner, RetrainEvent};
use super::controller::{Assistant, Controller, Method};
use super::dataset::Dataset;
use super::report::{Report, Trace, TrialRow};
use super::run::{calibrate, demonstrations, operator, run_interaction, run_scored, Normalizer, Outcome, PrefixOperator};
use super::scenario::Scenario;
use crate::error::Result;
use crate::human::{score_interaction, EffortReport};
use crate::intent::InteractionRecord;
use crate::rng::{derive_seed, label};

/// Everything a scenario run produces.
#[derive(Clone, Debug, Default)]
pub struct ScenarioOutput {
    pub report: Report,
    /// Final dataset of each learner in the first (seed, noise) run.
    pub datasets: Vec<(Method, Dataset)>,
    /// Final artifacts of each learner in the first (seed, noise) run.
    pub assistants: Vec<Assistant>,
    pub retrains: Vec<RetrainEvent>,
}

struct Ctx<'a> {
    sc: &'a Scenario,
    seed: u64,
    noise: f64,
    sigma: f64,
    normalizers: &'a BTreeMap<(String, u64), f64>,
}

impl Ctx<'_> {
    fn normalizer(&self, task: &str) -> f64 {
        self.normalizers[&(task.to_string(), self.noise.to_bits())]
    }

    fn row(&self, variant: &str, trial: usize, method: Method, task: &str, rep: &EffortReport<f64>, version: u64) -> TrialRow {
        TrialRow {
            seed: self.seed,
            noise: self.noise,
            variant: variant.to_string(),
            trial,
            method: method.name().to_string(),
            task: task.to_string(),
            effort: rep.effort,
            final_error: rep.final_error,
            success: rep.success,
            mean_beta: rep.mean_beta(),
            commanded_ticks: rep.commanded_ticks,
            total_ticks: rep.total_ticks,
            completion_time: rep.completion_time,
            bundle_version: version,
        }
    }

    fn trace(&self, report: &mut Report, row: &TrialRow, out: &Outcome) {
        if !self.sc.traces {
            return;
        }
        let variant = if row.variant.is_empty() { String::new() } else { format!("_{}", row.variant) };
        report.traces.push(Trace {
            name: format!("s{}_n{}{}_{}_{}_{}", row.seed, row.noise, variant, row.method, row.task, row.trial).replace(['/', ' '], "-"),
            ticks: out.ticks.clone(),
        });
    }

    fn demos(&self, count_override: Option<usize>) -> Result<Vec<InteractionRecord<f64>>> {
        let mut out = Vec::new();
        for d in &self.sc.demos {
            let task = self.sc.scene.task(&d.task)?;
            let n = count_override.unwrap_or(d.count);
            out.extend(demonstrations(&self.sc.scene, task, &self.sc.human, self.sigma, n, out.len() as u64, self.seed)?);
        }
        Ok(out)
    }
}

/// Unassisted demonstrations for the scenario's first noise level.
pub fn generate_demos(sc: &Scenario) -> Result<Dataset> {
    let noise = sc.noise[0];
    let normalizers = BTreeMap::new();
    let ctx = Ctx { sc, seed: sc.seed, noise, sigma: noise * sc.scene.sim.v_max, normalizers: &normalizers };
    Dataset::from_records(ctx.demos(None)?)
}

fn calibrate_all(sc: &Scenario) -> Result<(BTreeMap<(String, u64), f64>, Vec<Normalizer>)> {
    let mut map = BTreeMap::new();
    let mut list = Vec::new();
    for &noise in &sc.noise {
        for t in sc.tasks() {
            let task = sc.scene.task(&t)?;
            let mean_time = calibrate(&sc.scene, task, &sc.human, noise * sc.scene.sim.v_max, sc.calibration_runs, sc.seed)?;
            map.insert((t.clone(), noise.to_bits()), mean_time);
            list.push(Normalizer { task: t, noise, mean_time });
        }
    }
    Ok((map, list))
}

/// Run a whole scenario over all seeds and noise levels.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioOutput> {
    sc.validate()?;
    let (normalizers, list) = calibrate_all(sc)?;
    let mut output = ScenarioOutput::default();
    output.report.normalizers = list;
    for i in 0..sc.seeds {
        for &noise in &sc.noise {
            let ctx = Ctx {
                sc,
                seed: sc.seed + i as u64,
                noise,
                sigma: noise * sc.scene.sim.v_max,
                normalizers: &normalizers,
            };
            info!(scenario = %sc.name, seed = ctx.seed, noise, "running");
            let first = output.datasets.is_empty() && output.assistants.is_empty();
            if sc.autonomy_prefix.is_some() {
                run_prefix(&ctx, &mut output, first)?;
            } else {
                run_schedule(&ctx, &mut output, first)?;
            }
        }
    }
    Ok(output)
}

/// Score a fixed `assistant` on every scheduled task, whatever method the
/// schedule names, without retraining.
pub fn evaluate(sc: &Scenario, assistant: &Assistant) -> Result<Report> {
    sc.validate()?;
    assistant.check(sc.scene.sim.dim())?;
    let (normalizers, list) = calibrate_all(sc)?;
    let mut report = Report { normalizers: list, ..Report::default() };
    let method = assistant.method();
    for i in 0..sc.seeds {
        for &noise in &sc.noise {
            let ctx = Ctx { sc, seed: sc.seed + i as u64, noise, sigma: noise * sc.scene.sim.v_max, normalizers: &normalizers };
            let mut trials: BTreeMap<String, usize> = BTreeMap::new();
            for (e, entry) in sc.schedule.iter().enumerate() {
                let task = sc.scene.task(&entry.task)?;
                for rep in 0..entry.repetitions {
                    let seed = derive_seed(ctx.seed, &[label("trial"), noise.to_bits(), e as u64, rep as u64]);
                    let (out, r) = run_scored(&sc.scene, task, assistant.clone(), &sc.human, ctx.sigma, ctx.normalizer(&entry.task), rep as u64, seed)?;
                    let trial = trials.entry(entry.task.clone()).or_default();
                    *trial += 1;
                    let row = ctx.row("", *trial, method, &entry.task, &r, assistant.version());
                    ctx.trace(&mut report, &row, &out);
                    report.rows.push(row);
                }
            }
        }
    }
    Ok(report)
}

fn run_schedule(ctx: &Ctx, output: &mut ScenarioOutput, keep: bool) -> Result<()> {
    let sc = ctx.sc;
    let initial = Dataset::from_records(ctx.demos(None)?)?;
    let mut learners: BTreeMap<Method, ContinualLearner> = BTreeMap::new();
    for m in sc.methods() {
        let l = ContinualLearner::new(m, sc.training.clone(), sc.scene.clone(), initial.clone(), sc.cadence, ctx.seed)?;
        learners.insert(m, if sc.retrain { l } else { l.frozen() });
    }
    let mut trials: BTreeMap<(Method, String), usize> = BTreeMap::new();
    for (e, entry) in sc.schedule.iter().enumerate() {
        let task = sc.scene.task(&entry.task)?;
        for rep in 0..entry.repetitions {
            let learner = learners.get_mut(&entry.method).expect("learner per scheduled method");
            let assistant = learner.assistant().clone();
            let version = assistant.version();
            let seed = derive_seed(ctx.seed, &[label("trial"), ctx.noise.to_bits(), e as u64, rep as u64]);
            let id = learner.dataset().len() as u64;
            let (out, rep_) = run_scored(&sc.scene, task, assistant, &sc.human, ctx.sigma, ctx.normalizer(&entry.task), id, seed)?;
            let trial = trials.entry((entry.method, entry.task.clone())).or_default();
            *trial += 1;
            let row = ctx.row("", *trial, entry.method, &entry.task, &rep_, version);
            ctx.trace(&mut output.report, &row, &out);
            output.report.rows.push(row);
            learner.record(out.record)?;
        }
    }
    if let Some(fe) = &sc.final_eval {
        for (m, learner) in &learners {
            // "task": the same method trained only on the revisited tasks' records.
            let specific = if m.learns() {
                let subset: Vec<_> = fe.tasks.iter().flat_map(|t| learner.dataset().labelled(t)).collect();
                Some(train_assistant(*m, &subset, &sc.training, &sc.scene, 0, derive_seed(ctx.seed, &[label("task")]))?)
            } else {
                None
            };
            for t in &fe.tasks {
                let task = sc.scene.task(t)?;
                let mut variants = vec![("all", learner.assistant().clone())];
                if let Some(a) = &specific {
                    variants.push(("task", a.clone()));
                }
                for (variant, assistant) in variants {
                    for rep in 0..fe.repetitions {
                        let seed = derive_seed(ctx.seed, &[label("revisit"), ctx.noise.to_bits(), label(t), rep as u64]);
                        let version = assistant.version();
                        let (out, r) = run_scored(&sc.scene, task, assistant.clone(), &sc.human, ctx.sigma, ctx.normalizer(t), 0, seed)?;
                        let row = ctx.row(variant, rep + 1, *m, t, &r, version);
                        ctx.trace(&mut output.report, &row, &out);
                        output.report.rows.push(row);
                    }
                }
            }
        }
    }
    for l in learners.into_values() {
        output.retrains.extend(l.events.iter().cloned());
        if keep {
            output.datasets.push((l.method(), l.dataset().clone()));
            output.assistants.push(l.assistant().clone());
        }
    }
    Ok(())
}

fn run_prefix(ctx: &Ctx, output: &mut ScenarioOutput, keep: bool) -> Result<()> {
    let sc = ctx.sc;
    let ap = sc.autonomy_prefix.as_ref().expect("checked by caller");
    let max = ap.demo_counts.iter().copied().max().unwrap_or(0);
    // Smaller conditions use a prefix of the larger demo set.
    let mut by_task: Vec<(String, Vec<InteractionRecord<f64>>)> = Vec::new();
    for t in &ap.tasks {
        let task = sc.scene.task(t)?;
        by_task.push((t.clone(), demonstrations(&sc.scene, task, &sc.human, ctx.sigma, max, 0, ctx.seed)?));
    }
    for &count in &ap.demo_counts {
        let mut records: Vec<InteractionRecord<f64>> = by_task.iter().flat_map(|(_, d)| d[..count].to_vec()).collect();
        for (i, r) in records.iter_mut().enumerate() {
            r.id = i as u64;
        }
        let variant = format!("demos={count}");
        for &m in &ap.methods {
            let assistant = train_assistant(m, &records, &sc.training, &sc.scene, 0, derive_seed(ctx.seed, &[count as u64]))?;
            for t in &ap.tasks {
                let task = sc.scene.task(t)?;
                for rep in 0..ap.repetitions {
                    let seed = derive_seed(ctx.seed, &[label("prefix"), ctx.noise.to_bits(), label(t), rep as u64]);
                    let ctl = Controller::new(assistant.clone(), sc.scene.sim.clone(), sc.scene.start_state(seed), 0, seed)?;
                    let mut op = PrefixOperator {
                        human: operator(&sc.scene, task, &sc.human, ctx.sigma, seed)?,
                        prefix_ticks: ap.prefix_ticks,
                    };
                    let out = run_interaction(ctl, &mut op, task)?;
                    let r = score_interaction(&out.record, task, ctx.normalizer(t))?;
                    let row = ctx.row(&variant, rep + 1, m, t, &r, assistant.version());
                    ctx.trace(&mut output.report, &row, &out);
                    output.report.rows.push(row);
                }
            }
            if keep && count == max {
                output.assistants.push(assistant);
            }
        }
        if keep && count == max {
            output.datasets.push((Method::Ours, Dataset::from_records(records)?));
        }
    }
    Ok(())
}
