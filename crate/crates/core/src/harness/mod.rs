//! Cross-validated hyperparameter sweeps with a resumable on-disk ledger.
//!
//! Output directory layout:
//!
//! ```text
//! sweep.json             resolved configuration and dataset digest
//! dataset_summary.json
//! runs/<key>.json        one per (algorithm, params, fold)
//! aggregates/<key>.json  one per (algorithm, params), fold means
//! ledger.csv             one row per run, sorted
//! aggregates.csv         one row per grid point, sorted
//! metrics.csv            one row per value: fold or mean, metric, group, category
//! timings.csv            wall time per executed run (appended, not stable)
//! ```
//!
//! Keys are SHA-256 digests of the run identity, so reruns find earlier
//! results and skip them.

mod config;
mod select;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{expand_grid, AlgorithmGrid, Band, Bands, SweepConfig, DEFAULT_FOLDS, DEFAULT_LIST_SIZE, DEFAULT_SEED};
pub use select::{frontier, select_equal_ndcg, select_in_band, FrontierPoint, PointSummary, Selection, SelectionStatus};

use crate::dataset::{kfold_split, Dataset, Interactions, TrustGraph};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_fold, FoldInputs, FoldMetrics, MetricReport};
use crate::models::{top_n, Algorithm, Family, TrainContext};
use crate::params::HyperParams;

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

/// Digest of the dataset content and group designation.
pub fn dataset_digest(data: &Dataset) -> String {
    let mut h = Sha256::new();
    let users = &data.ratings.users;
    let items = &data.ratings.items;
    for r in data.ratings.interactions().entries() {
        h.update(format!("r\t{}\t{}\t{}\n", users.id(r.user), items.id(r.item), r.value).as_bytes());
    }
    let node = |n: usize| {
        if n < users.len() {
            users.id(n).to_owned()
        } else {
            format!("?{}", data.trust.quarantined().id(n - users.len()))
        }
    };
    for &(a, b) in data.trust.edges() {
        h.update(format!("t\t{}\t{}\n", node(a), node(b)).as_bytes());
    }
    for u in 0..users.len() {
        if let Some(g) = data.groups.group_of(u) {
            h.update(format!("g\t{}\t{}\n", users.id(u), data.groups.label(g)).as_bytes());
        }
    }
    h.update(
        format!(
            "p\t{}\t{}\n",
            data.groups.label(data.groups.protected()),
            data.groups.label(data.groups.unprotected())
        )
        .as_bytes(),
    );
    for i in 0..items.len() {
        for &c in data.categories.categories_of(i) {
            h.update(format!("c\t{}\t{}\n", items.id(i), data.categories.label(c)).as_bytes());
        }
    }
    hex(&h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub key: String,
    pub algorithm: Algorithm,
    pub params: HyperParams,
    pub fold: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub metrics: Option<FoldMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub key: String,
    pub algorithm: Algorithm,
    pub family: Family,
    pub params: HyperParams,
    pub status: RunStatus,
    pub failed_folds: Vec<usize>,
    pub report: Option<MetricReport>,
}

impl AggregateRecord {
    pub fn mean(&self) -> Option<&FoldMetrics> {
        self.report.as_ref().map(|r| &r.mean)
    }
}

#[derive(Serialize)]
struct KeyParts<'a> {
    algorithm: &'a str,
    params: String,
    fold: Option<usize>,
    seed: u64,
    folds: usize,
    list_size: usize,
    dataset: &'a str,
}

fn key(cfg: &SweepConfig, algorithm: Algorithm, params: &HyperParams, fold: Option<usize>, digest: &str) -> String {
    let parts = KeyParts {
        algorithm: algorithm.name(),
        params: params.canonical(),
        fold,
        seed: cfg.seed,
        folds: cfg.folds,
        list_size: cfg.list_size,
        dataset: digest,
    };
    sha256(&serde_json::to_string(&parts).expect("key parts serialize"))
}

/// Seed handed to a model fit on `fold`.
pub fn model_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// All runs and aggregates in a ledger directory, sorted by algorithm,
/// parameters and fold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRecord>,
}

fn read_json_dir<T: for<'de> Deserialize<'de>>(dir: &Path) -> Result<Vec<T>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: p.clone(),
                line: e.line(),
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| x.to_string())
}

impl Ledger {
    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::Validation(format!("{}: not a ledger directory", dir.display())));
        }
        let mut ledger = Ledger {
            runs: read_json_dir(&dir.join("runs"))?,
            aggregates: read_json_dir(&dir.join("aggregates"))?,
        };
        ledger.sort();
        Ok(ledger)
    }

    fn sort(&mut self) {
        self.runs.sort_by(|a, b| {
            (a.algorithm, a.params.canonical(), a.fold).cmp(&(b.algorithm, b.params.canonical(), b.fold))
        });
        self.aggregates
            .sort_by(|a, b| (a.algorithm, a.params.canonical()).cmp(&(b.algorithm, b.params.canonical())));
    }

    pub fn completed_aggregates(&self) -> impl Iterator<Item = &AggregateRecord> {
        self.aggregates.iter().filter(|a| a.status == RunStatus::Completed && a.report.is_some())
    }

    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        let csv_err = |path: &Path| {
            let path = path.to_owned();
            move |e: csv::Error| Error::Validation(format!("{}: {e}", path.display()))
        };

        let path = dir.join("ledger.csv");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["key", "algorithm", "params", "fold", "status", "ndcg", "coverage", "average_disparity", "average_disparity_normalized", "error"])
            .map_err(csv_err(&path))?;
        for r in &self.runs {
            let m = r.metrics.as_ref();
            w.write_record([
                r.key.clone(),
                r.algorithm.name().to_owned(),
                r.params.canonical(),
                r.fold.to_string(),
                status_label(r.status).to_owned(),
                opt(m.map(|m| m.ndcg)),
                opt(m.map(|m| m.coverage)),
                opt(m.and_then(|m| m.average_disparity)),
                opt(m.and_then(|m| m.average_disparity_normalized)),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(csv_err(&path))?;
        }
        finish_csv(w, &path)?;

        let path = dir.join("aggregates.csv");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["key", "algorithm", "family", "params", "status", "failed_folds", "ndcg", "coverage", "average_disparity", "average_disparity_normalized"])
            .map_err(csv_err(&path))?;
        for a in &self.aggregates {
            let m = a.mean();
            w.write_record([
                a.key.clone(),
                a.algorithm.name().to_owned(),
                a.family.to_string(),
                a.params.canonical(),
                status_label(a.status).to_owned(),
                a.failed_folds.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
                opt(m.map(|m| m.ndcg)),
                opt(m.map(|m| m.coverage)),
                opt(m.and_then(|m| m.average_disparity)),
                opt(m.and_then(|m| m.average_disparity_normalized)),
            ])
            .map_err(csv_err(&path))?;
        }
        finish_csv(w, &path)?;

        let path = dir.join("metrics.csv");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["algorithm", "params", "fold", "metric", "group", "category", "value"])
            .map_err(csv_err(&path))?;
        for a in self.completed_aggregates() {
            let report = a.report.as_ref().expect("completed aggregate has a report");
            let folds = report.folds.iter().enumerate().map(|(f, m)| (f.to_string(), m));
            for (fold, m) in folds.chain([("mean".to_owned(), &report.mean)]) {
                let mut row = |metric: &str, group: &str, category: &str, value: Option<f64>| {
                    w.write_record([
                        a.algorithm.name(),
                        &a.params.canonical(),
                        &fold,
                        metric,
                        group,
                        category,
                        &opt(value),
                    ])
                };
                row("ndcg", "", "", Some(m.ndcg)).map_err(csv_err(&path))?;
                row("coverage", "", "", Some(m.coverage)).map_err(csv_err(&path))?;
                row("average_disparity", "", "", m.average_disparity).map_err(csv_err(&path))?;
                row("average_disparity_normalized", "", "", m.average_disparity_normalized)
                    .map_err(csv_err(&path))?;
                for c in &m.categories {
                    for (metric, v) in [
                        ("pr_train", c.pr_train),
                        ("pr_recs", c.pr_recs),
                        ("bias_train", c.bias_train),
                        ("bias_recs", c.bias_recs),
                        ("disparity", c.disparity),
                    ] {
                        row(metric, &c.group, &c.category, v).map_err(csv_err(&path))?;
                    }
                }
            }
        }
        finish_csv(w, &path)
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>, path: &Path) -> Result<()> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    write_atomic(path, &bytes)
}

pub fn status_label(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Completed => "completed",
        RunStatus::Failed => "failed",
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    /// Stop after this many executed runs, leaving the rest for a later
    /// resume.
    pub task_limit: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub executed: usize,
    pub cached: usize,
    pub failed: usize,
    pub pending: usize,
    pub ledger: Ledger,
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    config: &'a SweepConfig,
    dataset_digest: &'a str,
}

struct Task<'a> {
    key: String,
    algorithm: Algorithm,
    params: &'a HyperParams,
    fold: usize,
}

/// Serializes writes into the ledger directory.
struct Appender {
    runs_dir: PathBuf,
    timings: fs::File,
}

impl Appender {
    fn append(&mut self, record: &RunRecord, seconds: f64) -> Result<()> {
        write_json(&self.runs_dir.join(format!("{}.json", record.key)), record)?;
        writeln!(
            self.timings,
            "{},{},\"{}\",{},{seconds:.3}",
            record.key,
            record.algorithm.name(),
            record.params.canonical(),
            record.fold
        )
        .map_err(|e| Error::io(self.runs_dir.join("../timings.csv"), e))
    }
}

fn execute(
    task: &Task<'_>,
    cfg: &SweepConfig,
    data: &Dataset,
    trust: &Arc<TrustGraph>,
    folds: &[(Arc<Interactions>, Interactions)],
) -> RunRecord {
    let (train, test) = &folds[task.fold];
    let outcome = (|| -> Result<FoldMetrics> {
        let ctx = TrainContext {
            train: train.clone(),
            trust: trust.clone(),
        };
        let scorer = task.algorithm.fit(task.params, &ctx, model_seed(cfg.seed, task.fold))?;
        let recs = top_n(scorer.as_ref(), train, cfg.list_size)?;
        evaluate_fold(&FoldInputs {
            train,
            test,
            recs: &recs,
            groups: &data.groups,
            categories: &data.categories,
        })
    })();
    let (status, error, metrics) = match outcome {
        Ok(m) => (RunStatus::Completed, None, Some(m)),
        Err(e) => (RunStatus::Failed, Some(e.to_string()), None),
    };
    RunRecord {
        key: task.key.clone(),
        algorithm: task.algorithm,
        params: task.params.clone(),
        fold: task.fold,
        seed: cfg.seed,
        status,
        error,
        metrics,
    }
}

/// Runs every (grid point, fold) not already completed in `out`, then
/// rebuilds the aggregates and CSV exports from the run files.
pub fn run_sweep(cfg: &SweepConfig, data: &Dataset, out: &Path, opts: &SweepOptions) -> Result<SweepOutcome> {
    cfg.validate()?;
    let runs_dir = out.join("runs");
    let agg_dir = out.join("aggregates");
    for d in [out, &runs_dir, &agg_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let digest = dataset_digest(data);
    write_json(&out.join("sweep.json"), &SweepManifest { config: cfg, dataset_digest: &digest })?;
    write_json(&out.join("dataset_summary.json"), &data.summary())?;

    let all = data.ratings.interactions();
    let split = kfold_split(all, cfg.folds, cfg.seed)?;
    let folds: Vec<(Arc<Interactions>, Interactions)> = (0..cfg.folds)
        .map(|f| (Arc::new(split.train(all, f)), split.test(all, f)))
        .collect();
    let trust = Arc::new(data.trust.clone());

    let existing: HashMap<String, RunRecord> = read_json_dir::<RunRecord>(&runs_dir)?
        .into_iter()
        .map(|r| (r.key.clone(), r))
        .collect();
    let mut tasks = Vec::new();
    let mut cached = 0;
    for grid in &cfg.algorithms {
        for params in &grid.points {
            for fold in 0..cfg.folds {
                let k = key(cfg, grid.algorithm, params, Some(fold), &digest);
                if existing.get(&k).is_some_and(|r| r.status == RunStatus::Completed) {
                    cached += 1;
                    continue;
                }
                tasks.push(Task { key: k, algorithm: grid.algorithm, params, fold });
            }
        }
    }
    let pending = opts.task_limit.map_or(0, |l| tasks.len().saturating_sub(l));
    tasks.truncate(tasks.len() - pending);
    log::info!("{} runs to execute, {cached} cached", tasks.len());

    let timings_path = out.join("timings.csv");
    let timings = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&timings_path)
        .map_err(|e| Error::io(&timings_path, e))?;
    let appender = Mutex::new(Appender { runs_dir: runs_dir.clone(), timings });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let total = tasks.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<Result<RunStatus>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let start = Instant::now();
                let record = execute(task, cfg, data, &trust, &folds);
                let seconds = start.elapsed().as_secs_f64();
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                match &record.error {
                    None => log::info!("[{n}/{total}] {} {} fold {} done", task.algorithm, task.params, task.fold),
                    Some(e) => log::warn!("[{n}/{total}] {} {} fold {} failed: {e}", task.algorithm, task.params, task.fold),
                }
                let status = record.status;
                appender.lock().expect("appender lock").append(&record, seconds)?;
                Ok(status)
            })
            .collect()
    });
    let mut failed = 0;
    for r in results {
        if r? == RunStatus::Failed {
            failed += 1;
        }
    }

    let runs: HashMap<String, RunRecord> = read_json_dir::<RunRecord>(&runs_dir)?
        .into_iter()
        .map(|r| (r.key.clone(), r))
        .collect();
    for grid in &cfg.algorithms {
        for params in &grid.points {
            let fold_runs: Option<Vec<&RunRecord>> = (0..cfg.folds)
                .map(|f| runs.get(&key(cfg, grid.algorithm, params, Some(f), &digest)))
                .collect();
            let Some(fold_runs) = fold_runs else { continue };
            let agg = aggregate(key(cfg, grid.algorithm, params, None, &digest), grid.algorithm, params, &fold_runs)?;
            write_json(&agg_dir.join(format!("{}.json", agg.key)), &agg)?;
        }
    }
    let ledger = Ledger::load(out)?;
    ledger.write_csv(out)?;
    Ok(SweepOutcome {
        executed: total,
        cached,
        failed,
        pending,
        ledger,
    })
}

fn aggregate(key: String, algorithm: Algorithm, params: &HyperParams, runs: &[&RunRecord]) -> Result<AggregateRecord> {
    let failed_folds: Vec<usize> = runs
        .iter()
        .filter(|r| r.status == RunStatus::Failed)
        .map(|r| r.fold)
        .collect();
    let report = if failed_folds.is_empty() {
        let folds = runs
            .iter()
            .map(|r| r.metrics.clone().expect("completed run has metrics"))
            .collect();
        Some(MetricReport::aggregate(algorithm.name(), params, folds)?)
    } else {
        None
    };
    Ok(AggregateRecord {
        key,
        algorithm,
        family: algorithm.family(),
        params: params.clone(),
        status: if failed_folds.is_empty() { RunStatus::Completed } else { RunStatus::Failed },
        failed_folds,
        report,
    })
}
