//! Results store: one CSV row per evaluated cell plus a baseline cache.
//!
//! Both files start with a `#` schema line followed by a header row. Rows
//! are appended as cells finish, so an interrupted sweep can resume;
//! [`ResultsStore::finalize`] rewrites the table in canonical key order.
//! When a key appears twice, the later row wins.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use swarmbc_core::metrics::baseline_returns;
use swarmbc_core::{Baselines, EnvId};

use crate::error::{CliError, Result};
use crate::method::Method;

pub const RESULTS_FILE: &str = "results.csv";
pub const BASELINES_FILE: &str = "baselines.csv";
pub const RESULTS_SCHEMA: &str = "# swarmbc results schema 1";
pub const BASELINES_SCHEMA: &str = "# swarmbc baselines schema 1";

/// Unique identity of a sweep cell.
#[derive(Debug, Clone, Copy)]
pub struct CellKey {
    pub env: EnvId,
    pub method: Method,
    pub episodes: usize,
    pub tau: f64,
    pub n: usize,
    pub seed: usize,
}

fn env_rank(env: EnvId) -> usize {
    EnvId::ALL.iter().position(|&e| e == env).unwrap_or(usize::MAX)
}

impl Ord for CellKey {
    fn cmp(&self, other: &Self) -> Ordering {
        env_rank(self.env)
            .cmp(&env_rank(other.env))
            .then(self.method.cmp(&other.method))
            .then(self.episodes.cmp(&other.episodes))
            .then(self.tau.total_cmp(&other.tau))
            .then(self.n.cmp(&other.n))
            .then(self.seed.cmp(&other.seed))
    }
}

impl PartialOrd for CellKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for CellKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for CellKey {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    /// Mean scaled return over the evaluation episodes.
    pub scaled_return: f64,
    /// Episode-averaged mean action difference; absent for single policies.
    pub mean_action_difference: Option<f64>,
    /// Mean raw episode return.
    pub episode_return: f64,
    /// Training epochs run, when the cell trained a model.
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub key: CellKey,
    pub outcome: Result<CellMetrics, String>,
}

/// One CSV row. `method` is free text so that `eval --expert` can label its
/// row `expert`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub env: String,
    pub method: String,
    pub episodes: usize,
    pub tau: f64,
    pub n: usize,
    pub seed: u64,
    pub status: String,
    pub scaled_return: Option<f64>,
    pub mean_action_difference: Option<f64>,
    pub episode_return: Option<f64>,
    pub epochs: Option<usize>,
    pub error: String,
}

impl Row {
    pub fn from_record(record: &RunRecord) -> Self {
        let k = &record.key;
        let (status, metrics, error) = match &record.outcome {
            Ok(m) => ("ok", Some(m), String::new()),
            Err(e) => ("failed", None, e.clone()),
        };
        Row {
            env: k.env.name().to_string(),
            method: k.method.name().to_string(),
            episodes: k.episodes,
            tau: k.tau,
            n: k.n,
            seed: k.seed as u64,
            status: status.to_string(),
            scaled_return: metrics.map(|m| m.scaled_return),
            mean_action_difference: metrics.and_then(|m| m.mean_action_difference),
            episode_return: metrics.map(|m| m.episode_return),
            epochs: metrics.and_then(|m| m.epochs),
            error,
        }
    }

    fn to_record(&self) -> std::result::Result<RunRecord, String> {
        let env = EnvId::from_name(&self.env).ok_or_else(|| format!("unknown env {:?}", self.env))?;
        let method = Method::from_name(&self.method).ok_or_else(|| format!("unknown method {:?}", self.method))?;
        let key = CellKey {
            env,
            method,
            episodes: self.episodes,
            tau: self.tau,
            n: self.n,
            seed: self.seed as usize,
        };
        let outcome = match self.status.as_str() {
            "ok" => Ok(CellMetrics {
                scaled_return: self.scaled_return.ok_or("ok row without scaled_return")?,
                mean_action_difference: self.mean_action_difference,
                episode_return: self.episode_return.ok_or("ok row without episode_return")?,
                epochs: self.epochs,
            }),
            "failed" => Err(self.error.clone()),
            other => return Err(format!("unknown status {other:?}")),
        };
        Ok(RunRecord { key, outcome })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BaselineRow {
    env: String,
    episodes: usize,
    seed: u64,
    random_return: f64,
    expert_return: f64,
}

fn csv_text<T: Serialize>(schema: &str, rows: &[T], with_header: bool) -> String {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(with_header)
        .from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("rows serialize");
    }
    let body = String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("csv is utf-8");
    if with_header {
        format!("{schema}\n{body}")
    } else {
        body
    }
}

/// The table as it is written to disk: schema line, header, rows.
pub fn results_csv(rows: &[Row]) -> String {
    if rows.is_empty() {
        // serde cannot derive a header without a row.
        return format!("{RESULTS_SCHEMA}\n{}\n", RESULTS_HEADER.join(","));
    }
    csv_text(RESULTS_SCHEMA, rows, true)
}

pub const RESULTS_HEADER: [&str; 12] = [
    "env",
    "method",
    "episodes",
    "tau",
    "n",
    "seed",
    "status",
    "scaled_return",
    "mean_action_difference",
    "episode_return",
    "epochs",
    "error",
];

fn read_table<T: for<'de> Deserialize<'de>>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let text = crate::files::read_to_string(path)?;
    let body = text
        .strip_prefix(schema)
        .and_then(|rest| rest.strip_prefix('\n'))
        .ok_or_else(|| CliError::format(path, format!("missing schema line {schema:?}")))?;
    csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| CliError::format(path, format!("row {}: {e}", i + 1))))
        .collect()
}

/// Appends CSV rows to `path`, writing schema and header first if the file
/// is new.
fn append_rows<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<()> {
    let fresh = !path.exists();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    let text = csv_text(schema, rows, fresh);
    file.write_all(text.as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| CliError::io(path, e))
}

#[derive(Debug)]
pub struct ResultsStore {
    dir: PathBuf,
    records: BTreeMap<CellKey, RunRecord>,
    baselines: BTreeMap<(usize, usize, u64), Baselines>,
}

impl ResultsStore {
    /// Opens the store in `dir`, loading whatever an earlier run left there.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut store = ResultsStore {
            dir: dir.to_path_buf(),
            records: BTreeMap::new(),
            baselines: BTreeMap::new(),
        };
        let results = store.results_path();
        if results.exists() {
            for row in read_table::<Row>(&results, RESULTS_SCHEMA)? {
                let record = row.to_record().map_err(|e| CliError::format(&results, e))?;
                store.records.insert(record.key, record);
            }
        }
        let baselines = store.baselines_path();
        if baselines.exists() {
            for row in read_table::<BaselineRow>(&baselines, BASELINES_SCHEMA)? {
                let env = EnvId::from_name(&row.env)
                    .ok_or_else(|| CliError::format(&baselines, format!("unknown env {:?}", row.env)))?;
                store.baselines.insert(
                    (env_rank(env), row.episodes, row.seed),
                    Baselines {
                        random: row.random_return,
                        expert: row.expert_return,
                    },
                );
            }
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn results_path(&self) -> PathBuf {
        self.dir.join(RESULTS_FILE)
    }

    pub fn baselines_path(&self) -> PathBuf {
        self.dir.join(BASELINES_FILE)
    }

    pub fn get(&self, key: &CellKey) -> Option<&RunRecord> {
        self.records.get(key)
    }

    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn append(&mut self, record: RunRecord) -> Result<()> {
        append_rows(&self.results_path(), RESULTS_SCHEMA, &[Row::from_record(&record)])?;
        self.records.insert(record.key, record);
        Ok(())
    }

    /// Cached baselines for `(env, episodes, seed)`, computed and appended to
    /// the cache on first use.
    pub fn baselines(&mut self, env: EnvId, episodes: usize, seed: u64) -> Result<Baselines> {
        let key = (env_rank(env), episodes, seed);
        if let Some(b) = self.baselines.get(&key) {
            return Ok(*b);
        }
        let b = baseline_returns(env, episodes, seed)?;
        // Fail here rather than on every cell that would scale against it.
        b.scale(b.expert)?;
        let row = BaselineRow {
            env: env.name().to_string(),
            episodes,
            seed,
            random_return: b.random,
            expert_return: b.expert,
        };
        append_rows(&self.baselines_path(), BASELINES_SCHEMA, &[row])?;
        self.baselines.insert(key, b);
        Ok(b)
    }

    /// Rewrites the results table with one row per key in canonical order.
    pub fn finalize(&self) -> Result<()> {
        let rows: Vec<Row> = self.records.values().map(Row::from_record).collect();
        let path = self.results_path();
        let tmp = self.dir.join(format!("{RESULTS_FILE}.tmp"));
        fs::write(&tmp, results_csv(&rows)).map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(seed: usize, tau: f64) -> CellKey {
        CellKey {
            env: EnvId::PointReach,
            method: Method::Swarm,
            episodes: 1,
            tau,
            n: 4,
            seed,
        }
    }

    fn ok(v: f64) -> Result<CellMetrics, String> {
        Ok(CellMetrics {
            scaled_return: v,
            mean_action_difference: Some(0.5 * v),
            episode_return: -v,
            epochs: Some(3),
        })
    }

    #[test]
    fn keys_order_by_env_then_method() {
        let a = CellKey { env: EnvId::CartBalance, method: Method::Bc, ..key(0, 0.0) };
        let b = CellKey { env: EnvId::PointReach, method: Method::Swarm, ..key(0, 0.25) };
        assert!(b < a);
        assert!(key(0, 0.25) < key(0, 0.5));
        assert_eq!(key(1, 0.25), key(1, 0.25));
    }

    #[test]
    fn append_reopen_and_finalize() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ResultsStore::open(dir.path()).unwrap();
        store.append(RunRecord { key: key(1, 0.25), outcome: ok(0.1) }).unwrap();
        store.append(RunRecord { key: key(0, 0.25), outcome: Err("diverged, twice".into()) }).unwrap();
        store.append(RunRecord { key: key(1, 0.25), outcome: ok(0.3) }).unwrap();

        let reopened = ResultsStore::open(dir.path()).unwrap();
        assert_eq!(reopened.len(), 2);
        assert_eq!(reopened.get(&key(1, 0.25)).unwrap().outcome, ok(0.3));
        assert_eq!(
            reopened.get(&key(0, 0.25)).unwrap().outcome,
            Err("diverged, twice".to_string())
        );

        reopened.finalize().unwrap();
        let text = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULTS_SCHEMA);
        assert_eq!(lines[1], RESULTS_HEADER.join(","));
        assert_eq!(lines.len(), 4);
        assert!(lines[2].contains(",0,failed,"), "{}", lines[2]);
        assert!(lines[3].starts_with("point_reach,swarm,1,0.25,4,1,ok,0.3,"), "{}", lines[3]);
    }

    #[test]
    fn empty_table_has_header() {
        assert_eq!(results_csv(&[]).lines().nth(1).unwrap(), RESULTS_HEADER.join(","));
    }

    #[test]
    fn baselines_are_cached() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ResultsStore::open(dir.path()).unwrap();
        let first = store.baselines(EnvId::CartBalance, 3, 9).unwrap();
        let text = fs::read_to_string(store.baselines_path()).unwrap();
        let mut again = ResultsStore::open(dir.path()).unwrap();
        assert_eq!(again.baselines(EnvId::CartBalance, 3, 9).unwrap(), first);
        assert_eq!(fs::read_to_string(again.baselines_path()).unwrap(), text);
        assert!(text.starts_with(BASELINES_SCHEMA));
    }
}
