//! Line-delimited metrics stream, one self-describing JSON record per
//! update.
//!
//! Wall-clock time is tracked in memory and logged to stderr but excluded
//! from the stream so that identical configurations produce byte-identical
//! files.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub update: u64,
    /// Rollout counts by outcome category.
    pub passed: u64,
    pub failed: u64,
    pub runtime_error: u64,
    pub compile_error: u64,
    pub mean_reward: f64,
    /// pass@1 over this update's rollouts, averaged over batch tasks.
    pub pass1_train: f64,
    /// pass@1 on the eval split at the eval cadence.
    pub pass1_eval: Option<f64>,
    /// Mean curriculum stage over all training samples.
    pub mean_stage: f64,
    /// Fraction of completion tokens excluded by the coverage mask.
    pub masked_fraction: f64,
    pub kl_mean: f64,
    pub clip_fraction: f64,
    pub value_loss: f64,
    #[serde(skip)]
    pub wall_clock_ms: u64,
}

impl MetricsRecord {
    pub fn total_rollouts(&self) -> u64 {
        self.passed + self.failed + self.runtime_error + self.compile_error
    }
}

pub struct MetricsWriter {
    file: File,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> std::io::Result<MetricsWriter> {
        Ok(MetricsWriter {
            file: File::create(path)?,
        })
    }

    pub fn append(path: &Path) -> std::io::Result<MetricsWriter> {
        Ok(MetricsWriter {
            file: OpenOptions::new().create(true).append(true).open(path)?,
        })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> std::io::Result<()> {
        let line = serde_json::to_string(record).expect("metrics serialize");
        writeln!(self.file, "{line}")
    }
}

pub fn read_metrics(path: &Path) -> std::io::Result<Vec<MetricsRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MetricsRecord = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_wall_clock_excluded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.jsonl");
        let rec = MetricsRecord {
            update: 3,
            passed: 10,
            failed: 4,
            runtime_error: 1,
            compile_error: 1,
            mean_reward: 0.35,
            pass1_train: 0.625,
            pass1_eval: None,
            mean_stage: 1.25,
            masked_fraction: 0.1,
            kl_mean: 0.02,
            clip_fraction: 0.0,
            value_loss: 0.5,
            wall_clock_ms: 1234,
        };
        let mut w = MetricsWriter::create(&path).unwrap();
        w.write(&rec).unwrap();
        drop(w);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("wall_clock"));
        let back = read_metrics(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].total_rollouts(), 16);
        assert_eq!(back[0].wall_clock_ms, 0);
        assert_eq!(back[0].mean_reward, rec.mean_reward);
    }
}
