//! Demonstration datasets as JSON lines.
//!
//! The first line is a header object
//! `{"env", "episodes", "seed", "obs_dim", "action_dim", "action_kind"}`;
//! every following line is one sample `{"s": [...], "a": [...]}`. Floats are
//! written in scientific notation with 17 significant digits, which is
//! enough to read back the identical 64-bit value.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use swarmbc_core::{ActionKind, Dataset, DatasetMeta, Sample};

use crate::error::{CliError, Result};
use crate::files;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    env: String,
    episodes: usize,
    seed: u64,
    obs_dim: usize,
    action_dim: usize,
    action_kind: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    s: Vec<f64>,
    a: Vec<f64>,
}

/// Formats `v` with 17 significant digits.
pub fn float17(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_array(line: &mut String, values: &[f64]) {
    line.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        line.push_str(&float17(*v));
    }
    line.push(']');
}

pub fn to_jsonl(dataset: &Dataset) -> String {
    let meta = dataset.meta();
    let header = Header {
        env: meta.env.clone(),
        episodes: meta.episodes,
        seed: meta.seed,
        obs_dim: meta.obs_dim,
        action_dim: meta.action_dim,
        action_kind: meta.action_kind.name().to_string(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for sample in dataset.samples() {
        out.push_str("{\"s\":");
        push_array(&mut out, &sample.state);
        out.push_str(",\"a\":");
        push_array(&mut out, &sample.action);
        let _ = writeln!(out, "}}");
    }
    out
}

pub fn write_dataset(path: &Path, dataset: &Dataset, force: bool) -> Result<()> {
    let mut out = files::create(path, force)?;
    out.write_all(to_jsonl(dataset).as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn parse_jsonl(path: &Path, text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| CliError::format(path, "empty dataset file"))?;
    let header: Header = serde_json::from_str(first)
        .map_err(|e| CliError::format(path, format!("line 1: bad header: {e}")))?;
    let action_kind = ActionKind::from_name(&header.action_kind).ok_or_else(|| {
        CliError::format(path, format!("line 1: unknown action kind {:?}", header.action_kind))
    })?;
    let samples = lines
        .map(|(i, line)| {
            let rec: Record = serde_json::from_str(line)
                .map_err(|e| CliError::format(path, format!("line {}: {e}", i + 1)))?;
            Ok(Sample {
                state: rec.s,
                action: rec.a,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = DatasetMeta {
        env: header.env,
        episodes: header.episodes,
        seed: header.seed,
        obs_dim: header.obs_dim,
        action_dim: header.action_dim,
        action_kind,
    };
    Dataset::new(meta, samples).map_err(|e| CliError::format(path, e.to_string()))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_jsonl(path, &files::read_to_string(path)?)
}
