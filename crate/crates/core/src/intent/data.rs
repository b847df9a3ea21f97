//! Training examples drawn from a dataset of interactions.

use sha2::{Digest, Sha256};
use tracing::warn;

use super::feature::{FeatureConfig, Snippet};
use super::record::InteractionRecord;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `(snippet feature before tick k, state at k, human action at k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair<T> {
    pub feature: Vec<T>,
    pub state: Vec<T>,
    pub target: Vec<T>,
}

/// A window ending at (and including) a commanded tick.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveSnippet<T> {
    pub snippet: Snippet<T>,
    pub dt: T,
}

fn commanded_pairs<T: Scalar>(r: &InteractionRecord<T>) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    r.steps
        .iter()
        .filter(|s| !s.human_idle)
        .map(|s| (s.state.clone(), s.human.clone()))
        .unzip()
}

fn window<T: Scalar>(states: &[Vec<T>], actions: &[Vec<T>], end: usize, h: usize) -> Snippet<T> {
    let start = end.saturating_sub(h);
    Snippet {
        states: states[start..end].to_vec(),
        actions: actions[start..end].to_vec(),
    }
}

/// Every `(prefix, next commanded action)` pair in `records`. Records with
/// fewer than two commanded ticks are skipped.
pub fn training_pairs<T: Scalar>(records: &[InteractionRecord<T>], cfg: &FeatureConfig) -> Result<Vec<TrainingPair<T>>> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut out = Vec::new();
    for r in records {
        let (states, actions) = commanded_pairs(r);
        if states.len() < 2 {
            warn!(record = r.id, "skipping record with fewer than two commanded ticks");
            continue;
        }
        for k in 1..states.len() {
            let f = window(&states, &actions, k, cfg.window).to_feature(cfg)?;
            out.push(TrainingPair {
                feature: f.values,
                state: states[k].clone(),
                target: actions[k].clone(),
            });
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// Windows ending at every commanded tick of `records`.
pub fn positive_snippets<T: Scalar>(records: &[InteractionRecord<T>], cfg: &FeatureConfig) -> Result<Vec<PositiveSnippet<T>>> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut out = Vec::new();
    for r in records {
        let (states, actions) = commanded_pairs(r);
        for k in 1..=states.len() {
            out.push(PositiveSnippet {
                snippet: window(&states, &actions, k, cfg.window),
                dt: r.dt,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// Content hash of a sequence of records (their canonical JSON lines).
pub fn records_fingerprint<T: Scalar>(records: &[InteractionRecord<T>]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(serde_json::to_string(r).expect("records serialize"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::featurize;
    use crate::intent::record::Step;

    fn record(n: usize, idle_every: usize) -> InteractionRecord<f64> {
        let mut r = InteractionRecord::new(1, 0.05);
        for t in 0..n {
            let idle = idle_every > 0 && t % idle_every == idle_every - 1;
            r.push(Step {
                tick: t,
                state: vec![0.01 * t as f64, 0.02 * t as f64],
                human: if idle { vec![0.0, 0.0] } else { vec![0.6, 0.8] },
                human_idle: idle,
                robot: vec![0.1, 0.1],
                beta: 0.3,
            })
            .unwrap();
        }
        r
    }

    #[test]
    fn pairs_match_featurize_of_the_prefix() {
        let cfg = FeatureConfig::default();
        let r = record(30, 4);
        let pairs = training_pairs(std::slice::from_ref(&r), &cfg).unwrap();
        let commanded: Vec<usize> = r.commanded().collect();
        assert_eq!(pairs.len(), commanded.len() - 1);
        for (j, p) in pairs.iter().enumerate() {
            let k = commanded[j + 1];
            let f = featurize(&r.steps[..k], &cfg).unwrap();
            assert_eq!(p.feature, f.values);
            assert_eq!(p.state, r.steps[k].state);
        }
    }

    #[test]
    fn degenerate_records_are_skipped() {
        let cfg = FeatureConfig::default();
        let recs = vec![record(1, 0), record(5, 0)];
        assert_eq!(training_pairs(&recs, &cfg).unwrap().len(), 4);
        assert!(matches!(training_pairs(&[record(1, 0)], &cfg), Err(Error::EmptyDataset)));
        assert!(matches!(training_pairs::<f64>(&[], &cfg), Err(Error::EmptyDataset)));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = vec![record(5, 0)];
        let mut b = a.clone();
        assert_eq!(records_fingerprint(&a), records_fingerprint(&b));
        b[0].steps[2].human[0] = 0.61;
        assert_ne!(records_fingerprint(&a), records_fingerprint(&b));
    }
}
