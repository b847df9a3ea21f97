//! Metrics tables, per-tick traces and summaries.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::controller::TickOutput;
use super::run::Normalizer;
use crate::error::Result;

/// One scored interaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub seed: u64,
    /// Operator noise as a multiple of `v_max`.
    pub noise: f64,
    /// Protocol-specific condition (demo count, model variant), may be empty.
    pub variant: String,
    /// 1-based repetition index of this task under this method.
    pub trial: usize,
    pub method: String,
    pub task: String,
    pub effort: f64,
    pub final_error: f64,
    pub success: bool,
    pub mean_beta: f64,
    pub commanded_ticks: usize,
    pub total_ticks: usize,
    pub completion_time: f64,
    pub bundle_version: u64,
}

const HEADER: &[&str] = &[
    "seed",
    "noise",
    "variant",
    "trial",
    "method",
    "task",
    "effort",
    "final_error",
    "success",
    "mean_beta",
    "commanded_ticks",
    "total_ticks",
    "completion_time",
    "bundle_version",
];

/// Per-tick trace of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub name: String,
    pub ticks: Vec<TickOutput>,
}

impl Trace {
    pub fn to_csv(&self) -> Result<String> {
        let n = self.ticks.first().map_or(0, |t| t.state.len());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["tick".to_string()];
        for prefix in ["s", "a_h", "a_r"] {
            header.extend((0..n).map(|i| format!("{prefix}{i}")));
        }
        header.extend(["beta".into(), "idle".into()]);
        w.write_record(&header)?;
        for t in &self.ticks {
            let mut row = vec![t.tick.to_string()];
            row.extend(t.state.iter().chain(&t.a_h).chain(&t.a_r).map(|x| x.to_string()));
            row.push(t.beta.to_string());
            row.push((t.human_idle as u8).to_string());
            w.write_record(&row)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub noise: f64,
    pub method: String,
    pub task: String,
    pub n: usize,
    pub effort: f64,
    pub final_error: f64,
    pub success_rate: f64,
    pub mean_beta: f64,
}

/// Group means over `(variant, noise, method, task)`, in sorted key order.
pub fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, u64, String, String), Vec<&TrialRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.variant.clone(), r.noise.to_bits(), r.method.clone(), r.task.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((variant, noise, method, task), g)| {
            let n = g.len() as f64;
            let mean = |f: &dyn Fn(&TrialRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / n;
            SummaryRow {
                variant,
                noise: f64::from_bits(noise),
                method,
                task,
                n: g.len(),
                effort: mean(&|r| r.effort),
                final_error: mean(&|r| r.final_error),
                success_rate: mean(&|r| r.success as u8 as f64),
                mean_beta: mean(&|r| r.mean_beta),
            }
        })
        .collect()
}

/// `metrics.csv`: header plus one line per trial.
pub fn metrics_csv(rows: &[TrialRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

/// Parse a `metrics.csv` back into rows.
pub fn read_metrics_csv(text: &str) -> Result<Vec<TrialRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<TrialRow>,
    pub normalizers: Vec<Normalizer>,
    pub traces: Vec<Trace>,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    normalizers: &'a [Normalizer],
    groups: Vec<SummaryRow>,
}

impl Report {
    pub fn summary_csv(&self) -> Result<String> {
        let mut out = String::new();
        for n in &self.normalizers {
            out.push_str(&format!("# normalizer task={} noise={} mean_time={}\n", n.task, n.noise, n.mean_time));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let groups = summarize(&self.rows);
        if groups.is_empty() {
            w.write_record(["variant", "noise", "method", "task", "n", "effort", "final_error", "success_rate", "mean_beta"])?;
        }
        for g in groups {
            w.serialize(g)?;
        }
        out.push_str(std::str::from_utf8(&w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"));
        Ok(out)
    }

    /// Write `metrics.csv`, `trials.jsonl`, `summary.csv`, `summary.json` and
    /// `traces/*.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("traces"))?;
        fs::write(dir.join("metrics.csv"), metrics_csv(&self.rows)?)?;
        let mut jsonl = String::new();
        for r in &self.rows {
            jsonl.push_str(&serde_json::to_string(r)?);
            jsonl.push('\n');
        }
        fs::write(dir.join("trials.jsonl"), jsonl)?;
        fs::write(dir.join("summary.csv"), self.summary_csv()?)?;
        let summary = SummaryFile {
            normalizers: &self.normalizers,
            groups: summarize(&self.rows),
        };
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        for t in &self.traces {
            fs::write(dir.join("traces").join(format!("{}.csv", t.name)), t.to_csv()?)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, method: &str, task: &str, effort: f64) -> TrialRow {
        TrialRow {
            seed,
            noise: 0.1,
            variant: String::new(),
            trial: 1,
            method: method.into(),
            task: task.into(),
            effort,
            final_error: effort / 10.0,
            success: effort < 0.5,
            mean_beta: 1.0 - effort,
            commanded_ticks: 3,
            total_ticks: 20,
            completion_time: 1.0,
            bundle_version: 0,
        }
    }

    #[test]
    fn empty_metrics_are_header_only() {
        let csv = metrics_csv(&[]).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("seed,noise,variant,trial,method,task,effort"));
    }

    #[test]
    fn one_line_per_trial() {
        let mut rows = vec![];
        for m in ["ours", "bayes", "noassist"] {
            for t in ["notepad", "tape"] {
                for s in 0..5 {
                    rows.push(row(s, m, t, 0.1 * s as f64));
                }
            }
        }
        let csv = metrics_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 31);
        assert_eq!(read_metrics_csv(&csv).unwrap(), rows);
    }

    #[test]
    fn summary_means_match_recomputation() {
        let rows: Vec<TrialRow> = (0..12)
            .map(|i| row(i, ["ours", "noassist"][i as usize % 2], ["a", "b", "c"][i as usize % 3], (i as f64).sqrt() / 4.0))
            .collect();
        let groups = summarize(&rows);
        assert_eq!(groups.len(), 6);
        for g in groups {
            let members: Vec<&TrialRow> = rows.iter().filter(|r| r.method == g.method && r.task == g.task).collect();
            let effort = members.iter().map(|r| r.effort).sum::<f64>() / members.len() as f64;
            let success = members.iter().filter(|r| r.success).count() as f64 / members.len() as f64;
            assert_eq!(g.n, members.len());
            assert!((g.effort - effort).abs() < 1e-12);
            assert!((g.success_rate - success).abs() < 1e-12);
        }
    }

    #[test]
    fn writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let report = Report {
            rows: vec![row(0, "ours", "can", 0.3)],
            normalizers: vec![Normalizer { task: "can".into(), noise: 0.1, mean_time: 1.0 }],
            traces: vec![Trace { name: "t".into(), ticks: vec![] }],
        };
        report.write(dir.path()).unwrap();
        for f in ["metrics.csv", "trials.jsonl", "summary.csv", "summary.json", "traces/t.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with("# normalizer task=can"));
    }
}
