//! Append-only interaction dataset stored as JSON lines.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::intent::{records_fingerprint, InteractionRecord};
use crate::scalar::all_finite;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    records: Vec<InteractionRecord<f64>>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<InteractionRecord<f64>>) -> Result<Self> {
        let mut d = Self::new();
        for r in records {
            d.push(r)?;
        }
        Ok(d)
    }

    /// Append a finished record.
    pub fn push(&mut self, record: InteractionRecord<f64>) -> Result<()> {
        record.validate()?;
        let finite = record
            .steps
            .iter()
            .all(|s| all_finite(&s.state) && all_finite(&s.human) && all_finite(&s.robot) && s.beta.is_finite());
        if !finite {
            return Err(Error::NonFinite("dataset record"));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[InteractionRecord<f64>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records whose evaluation label is `task`.
    pub fn labelled(&self, task: &str) -> Vec<InteractionRecord<f64>> {
        self.records
            .iter()
            .filter(|r| r.meta.task_label.as_deref() == Some(task))
            .cloned()
            .collect()
    }

    pub fn fingerprint(&self) -> String {
        records_fingerprint(&self.records)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    fn read(reader: impl std::io::Read) -> Result<Self> {
        let mut d = Self::new();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            d.push(serde_json::from_str(&line)?)?;
        }
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(fs::File::open(path)?)
    }
}
