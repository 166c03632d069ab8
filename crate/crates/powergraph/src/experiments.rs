//! Reproducible parameter sweeps: generate, cluster, score, persist.
//!
//! Rows append to a schema-tagged CSV as they finish (a rerun skips rows
//! already present, so interrupted sweeps resume), and the file is
//! rewritten in sorted order on completion. Per-row seeds derive from
//! `(base seed, grid index, method label, trial)`, so results do not
//! depend on execution order or parallelism; the determinism hash covers
//! every column except the runtime.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generators::{self, GbmParams, HbmParams};
use crate::graph::LabeledGraph;
use crate::pipeline::{PsiParams, RRule, DEFAULT_POWERING_COEFF};
use crate::rng;
use crate::spectral::{self, Method, Partition, RChoice};

pub const SCHEMA_TAG: &str = "# powergraph-sweep-v1";

/// One grid point of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelPoint {
    Er { n: usize, d: f64 },
    Sbm { n: usize, a: f64, b: f64 },
    Gbm { n: usize, s: f64, t: f64 },
    Hbm { n: usize, a: f64, b: f64, s: f64, t: f64, h1: f64, h2: f64 },
    Regular { n: usize, d: usize },
}

impl ModelPoint {
    /// Generate the graph (labels when the model has them).
    pub fn generate(&self, seed: u64) -> Result<(std::sync::Arc<crate::Graph>, Option<LabeledGraph>)> {
        match *self {
            ModelPoint::Er { n, d } => {
                Ok((std::sync::Arc::new(generators::gen_er(n, d, seed)?), None))
            }
            ModelPoint::Sbm { n, a, b } => {
                let lg = generators::gen_sbm_sym(n, a, b, seed)?;
                Ok((std::sync::Arc::new(lg.graph.clone()), Some(lg)))
            }
            ModelPoint::Gbm { n, s, t } => {
                let lg = generators::gen_gbm(&GbmParams { n, s, t }, seed)?;
                Ok((std::sync::Arc::new(lg.graph.clone()), Some(lg)))
            }
            ModelPoint::Hbm { n, a, b, s, t, h1, h2 } => {
                let lg = generators::gen_hbm(&HbmParams { n, a, b, s, t, h1, h2 }, seed)?;
                Ok((std::sync::Arc::new(lg.graph.clone()), Some(lg)))
            }
            ModelPoint::Regular { n, d } => Ok((
                std::sync::Arc::new(generators::gen_random_regular(n, d, seed)?),
                None,
            )),
        }
    }

    pub fn params_json(&self) -> String {
        serde_json::to_string(self).expect("model point serializes")
    }
}

/// Method selection in a sweep configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    Adjacency,
    Laplacian,
    NormalizedLaplacian,
    RandomWalk,
    Nonbacktracking,
    PoweredAdjacency {
        #[serde(default)]
        r: Option<usize>,
        #[serde(default)]
        r_frac_diam: Option<f64>,
    },
    PoweredNonbacktracking {
        #[serde(default)]
        r: Option<usize>,
        #[serde(default)]
        r_frac_diam: Option<f64>,
    },
    DistanceMatrix {
        #[serde(default)]
        r: Option<usize>,
        #[serde(default)]
        r_frac_diam: Option<f64>,
    },
    Meta {
        #[serde(default)]
        tau: Option<f64>,
        #[serde(default)]
        c: Option<f64>,
        #[serde(default)]
        r: Option<usize>,
        #[serde(default)]
        sqrt_rule: Option<bool>,
    },
}

fn r_choice(r: Option<usize>, frac: Option<f64>) -> Result<RChoice> {
    match (r, frac) {
        (Some(r), None) => Ok(RChoice::Fixed(r)),
        (None, Some(f)) => Ok(RChoice::FracDiam(f)),
        (None, None) => Ok(RChoice::FracDiam(0.4)),
        (Some(_), Some(_)) => {
            Err(Error::InvalidParams("give either r or r_frac_diam, not both".into()))
        }
    }
}

impl MethodSpec {
    pub fn to_method(&self) -> Result<Method> {
        Ok(match self.clone() {
            MethodSpec::Adjacency => Method::Adjacency,
            MethodSpec::Laplacian => Method::Laplacian,
            MethodSpec::NormalizedLaplacian => Method::NormalizedLaplacian,
            MethodSpec::RandomWalk => Method::RandomWalk,
            MethodSpec::Nonbacktracking => Method::Nonbacktracking,
            MethodSpec::PoweredAdjacency { r, r_frac_diam } => {
                Method::PoweredAdjacency { r: r_choice(r, r_frac_diam)? }
            }
            MethodSpec::PoweredNonbacktracking { r, r_frac_diam } => {
                Method::PoweredNonbacktracking { r: r_choice(r, r_frac_diam)? }
            }
            MethodSpec::DistanceMatrix { r, r_frac_diam } => {
                Method::DistanceMatrix { r: r_choice(r, r_frac_diam)? }
            }
            MethodSpec::Meta { tau, c, r, sqrt_rule } => {
                let rule = if sqrt_rule.unwrap_or(false) {
                    RRule::SqrtDiam
                } else {
                    RRule::LogCube { c: c.unwrap_or(DEFAULT_POWERING_COEFF) }
                };
                Method::Meta { params: PsiParams { tau, rule, r_override: r } }
            }
        })
    }

    /// Stable label used in the CSV and in seed derivation.
    pub fn label(&self) -> String {
        serde_json::to_string(self).expect("method spec serializes")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: Vec<ModelPoint>,
    pub methods: Vec<MethodSpec>,
    pub trials: usize,
    pub base_seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

/// One sweep result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub grid_index: usize,
    pub model: String,
    pub params: String,
    pub method: String,
    pub trial: usize,
    pub seed: u64,
    pub agreement: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub r_used: Option<usize>,
    pub final_n: Option<usize>,
    pub final_m: Option<usize>,
    pub error: Option<String>,
    pub runtime_ms: Option<u64>,
}

impl ResultRow {
    /// Canonical form entering the determinism hash: everything except
    /// the runtime column.
    fn canonical(&self) -> String {
        fn f(x: &Option<f64>) -> String {
            x.map(|v| format!("{v:.12e}")).unwrap_or_default()
        }
        [
            self.grid_index.to_string(),
            self.model.clone(),
            self.params.clone(),
            self.method.clone(),
            self.trial.to_string(),
            self.seed.to_string(),
            f(&self.agreement),
            f(&self.lambda1),
            f(&self.lambda2),
            f(&self.lambda3),
            self.r_used.map(|v| v.to_string()).unwrap_or_default(),
            self.final_n.map(|v| v.to_string()).unwrap_or_default(),
            self.final_m.map(|v| v.to_string()).unwrap_or_default(),
            self.error.clone().unwrap_or_default(),
        ]
        .join("\x1f")
    }

    fn key(&self) -> (usize, String, usize) {
        (self.grid_index, self.method.clone(), self.trial)
    }
}

fn model_name(point: &ModelPoint) -> &'static str {
    match point {
        ModelPoint::Er { .. } => "er",
        ModelPoint::Sbm { .. } => "sbm",
        ModelPoint::Gbm { .. } => "gbm",
        ModelPoint::Hbm { .. } => "hbm",
        ModelPoint::Regular { .. } => "regular",
    }
}

fn run_one(
    config: &ExperimentConfig,
    gi: usize,
    mi: usize,
    trial: usize,
) -> ResultRow {
    let point = &config.grid[gi];
    let spec = &config.methods[mi];
    let label = spec.label();
    let seed = rng::mix(config.base_seed, &[gi as u64, rng::label_hash(&label), trial as u64]);
    let tol = config.tol.unwrap_or(spectral::DEFAULT_TOL);
    let max_iter = config.max_iter.unwrap_or(20_000);

    let mut row = ResultRow {
        grid_index: gi,
        model: model_name(point).to_string(),
        params: point.params_json(),
        method: label,
        trial,
        seed,
        agreement: None,
        lambda1: None,
        lambda2: None,
        lambda3: None,
        r_used: None,
        final_n: None,
        final_m: None,
        error: None,
        runtime_ms: None,
    };

    let started = Instant::now();
    let outcome = (|| -> Result<()> {
        let (graph, labeled) = point.generate(seed)?;
        let method = spec.to_method()?;
        let out = spectral::spectral_cluster(&graph, &method, tol, max_iter, seed)?;
        row.lambda1 = out.eigenvalues.first().copied();
        row.lambda2 = out.eigenvalues.get(1).copied();
        row.lambda3 = out.eigenvalues.get(2).copied();
        row.r_used = out.r_used;
        if let Some(report) = &out.cleaning {
            row.final_n = Some(report.final_n);
            row.final_m = Some(report.final_m);
        }
        if let Some(lg) = &labeled {
            let truth = Partition::new(lg.labels.clone(), lg.k)?;
            row.agreement = Some(spectral::agreement(&truth, &out.partition)?);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        row.error = Some(e.to_string());
    }
    row.runtime_ms = Some(started.elapsed().as_millis() as u64);
    row
}

fn write_all(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut file = File::create(path)?;
    writeln!(file, "{SCHEMA_TAG}")?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Parse a sweep CSV (schema-checked).
pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim() != SCHEMA_TAG {
        return Err(Error::SchemaMismatch(format!(
            "expected '{SCHEMA_TAG}', found '{}'",
            first.trim()
        )));
    }
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for record in csv_reader.deserialize() {
        let row: ResultRow = record.map_err(|e| Error::SchemaMismatch(e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Run every `(grid point, method, trial)` cell not already present in
/// the output CSV; returns all rows (old and new) in sorted order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    if config.trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    if config.grid.is_empty() || config.methods.is_empty() {
        return Err(Error::InvalidParams("grid and methods must be non-empty".into()));
    }
    for spec in &config.methods {
        spec.to_method()?;
    }

    let mut done: Vec<ResultRow> = if config.output.exists() {
        read_rows(&config.output)?
    } else {
        if let Some(parent) = config.output.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut file = File::create(&config.output)?;
        writeln!(file, "{SCHEMA_TAG}")?;
        let mut writer = csv::Writer::from_writer(file);
        // Header comes from serializing zero rows; csv writes it lazily,
        // so force it with an explicit record layout.
        writer.write_record([
            "grid_index",
            "model",
            "params",
            "method",
            "trial",
            "seed",
            "agreement",
            "lambda1",
            "lambda2",
            "lambda3",
            "r_used",
            "final_n",
            "final_m",
            "error",
            "runtime_ms",
        ])?;
        writer.flush()?;
        Vec::new()
    };

    let have: std::collections::HashSet<(usize, String, usize)> =
        done.iter().map(|r| r.key()).collect();
    let mut tasks = Vec::new();
    for gi in 0..config.grid.len() {
        for mi in 0..config.methods.len() {
            let label = config.methods[mi].label();
            for trial in 0..config.trials {
                if !have.contains(&(gi, label.clone(), trial)) {
                    tasks.push((gi, mi, trial));
                }
            }
        }
    }

    let append = Mutex::new(csv::WriterBuilder::new().has_headers(false).from_writer(
        OpenOptions::new().append(true).open(&config.output)?,
    ));
    let new_rows: Vec<ResultRow> = tasks
        .par_iter()
        .map(|&(gi, mi, trial)| {
            let row = run_one(config, gi, mi, trial);
            let mut writer = append.lock().expect("csv writer lock");
            writer.serialize(&row).expect("append row");
            writer.flush().expect("flush row");
            row
        })
        .collect();
    drop(append);

    done.extend(new_rows);
    done.sort_by(|a, b| {
        a.grid_index
            .cmp(&b.grid_index)
            .then_with(|| a.method.cmp(&b.method))
            .then_with(|| a.trial.cmp(&b.trial))
    });
    write_all(&config.output, &done)?;
    Ok(done)
}

/// Determinism hash: SHA-256 over the sorted canonical rows (runtime
/// excluded).
pub fn determinism_hash(rows: &[ResultRow]) -> String {
    let mut lines: Vec<String> = rows.iter().map(ResultRow::canonical).collect();
    lines.sort();
    let mut hasher = Sha256::new();
    for line in &lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Aggregated cell of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub model: String,
    pub params: String,
    pub method: String,
    pub trials: usize,
    pub errors: usize,
    pub mean_agreement: Option<f64>,
    pub std_agreement: Option<f64>,
    pub mean_lambda1: Option<f64>,
    pub mean_runtime_ms: Option<f64>,
}

/// Aggregate rows by `(params, method)` into mean / sample-stddev cells
/// (stddev 0 for a single observation), long format.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(String, String, String), Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.model.clone(), row.params.clone(), row.method.clone()))
            .or_default()
            .push(row);
    }
    let mean = |xs: &[f64]| -> Option<f64> {
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    };
    groups
        .into_iter()
        .map(|((model, params, method), rows)| {
            let agreements: Vec<f64> = rows.iter().filter_map(|r| r.agreement).collect();
            let lambda1s: Vec<f64> = rows.iter().filter_map(|r| r.lambda1).collect();
            let runtimes: Vec<f64> =
                rows.iter().filter_map(|r| r.runtime_ms.map(|v| v as f64)).collect();
            let mean_agreement = mean(&agreements);
            let std_agreement = mean_agreement.map(|m| {
                if agreements.len() <= 1 {
                    0.0
                } else {
                    (agreements.iter().map(|a| (a - m) * (a - m)).sum::<f64>()
                        / (agreements.len() - 1) as f64)
                        .sqrt()
                }
            });
            SummaryRow {
                model,
                params,
                method,
                trials: rows.len(),
                errors: rows.iter().filter(|r| r.error.is_some()).count(),
                mean_agreement,
                std_agreement,
                mean_lambda1: mean(&lambda1s),
                mean_runtime_ms: mean(&runtimes),
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(File::create(path)?);
    for row in summary {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: &Path, name: &str) -> ExperimentConfig {
        ExperimentConfig {
            grid: vec![ModelPoint::Sbm { n: 120, a: 8.0, b: 1.0 }],
            methods: vec![
                MethodSpec::Adjacency,
                MethodSpec::PoweredAdjacency { r: Some(2), r_frac_diam: None },
            ],
            trials: 2,
            base_seed: 99,
            output: dir.join(name),
            tol: Some(1e-7),
            max_iter: Some(20_000),
        }
    }

    #[test]
    fn sweep_produces_one_row_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path(), "out.csv");
        let rows = run_sweep(&config).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.error.is_none()));
        assert!(rows.iter().all(|r| r.agreement.is_some()));
    }

    #[test]
    fn rerun_skips_existing_rows() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path(), "out.csv");
        let first = run_sweep(&config).unwrap();
        let second = run_sweep(&config).unwrap();
        assert_eq!(first.len(), second.len());
        // Same rows, including seeds (runtime may differ).
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.agreement, b.agreement);
        }
    }

    #[test]
    fn determinism_hash_is_stable_across_runs() {
        let dir = tempfile::tempdir().unwrap();
        let a = run_sweep(&tiny_config(dir.path(), "a.csv")).unwrap();
        let b = run_sweep(&tiny_config(dir.path(), "b.csv")).unwrap();
        assert_eq!(determinism_hash(&a), determinism_hash(&b));
        // Round-trip through the file keeps the hash.
        let config = tiny_config(dir.path(), "a.csv");
        let reread = read_rows(&config.output).unwrap();
        assert_eq!(determinism_hash(&a), determinism_hash(&reread));
    }

    #[test]
    fn summarize_mean_and_std() {
        let mk = |agreement: f64| ResultRow {
            grid_index: 0,
            model: "sbm".into(),
            params: "{}".into(),
            method: "m".into(),
            trial: 0,
            seed: 0,
            agreement: Some(agreement),
            lambda1: None,
            lambda2: None,
            lambda3: None,
            r_used: None,
            final_n: None,
            final_m: None,
            error: None,
            runtime_ms: Some(5),
        };
        let one = summarize(&[mk(0.7)]);
        assert_eq!(one[0].mean_agreement, Some(0.7));
        assert_eq!(one[0].std_agreement, Some(0.0));
        let two = summarize(&[mk(0.6), mk(0.8)]);
        assert!((two[0].mean_agreement.unwrap() - 0.7).abs() < 1e-12);
        assert!(two[0].std_agreement.unwrap() > 0.0);
    }
}
