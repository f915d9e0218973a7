//! Multi-seed experiment harness.
//!
//! An [`ExperimentSpec`] names a training configuration, a set of
//! initialization schemes, seeds and datasets. Every (scheme, seed, dataset)
//! cell is an independent run: it seeds its own generator with
//! `(base_seed, seed)`, initializes a network, trains it with [`train_best`]
//! and yields a [`RunRecord`]. Runs fan out over a thread pool and are merged
//! in a fixed order, so every output file is reproducible byte for byte.
//!
//! A run that fails (for example on a non-finite cost) is reported as a
//! failed cell; its siblings are unaffected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{csv_file_width, format_csv_value, write_atomic, Dataset, Samples};
use crate::error::{Error, Result};
use crate::init::{init_network, InitScheme, SPARSE3_C1, SPARSE3_C2};
use crate::matrix::Matrix;
use crate::nn::{train_best, EpochRecord, Network, TrainConfig, UpdateClock};
use crate::rng::RngState;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "TINYNET_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Compare,
    Curves,
    Gridsearch,
    Crossdata,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Compare => "compare",
            Mode::Curves => "curves",
            Mode::Gridsearch => "gridsearch",
            Mode::Crossdata => "crossdata",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "compare" => Ok(Mode::Compare),
            "curves" => Ok(Mode::Curves),
            "gridsearch" | "grid" => Ok(Mode::Gridsearch),
            "crossdata" => Ok(Mode::Crossdata),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

/// Parallel train and validation CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DataPaths {
    pub name: String,
    pub train_data: PathBuf,
    pub train_labels: PathBuf,
    pub val_data: PathBuf,
    pub val_labels: PathBuf,
}

impl DataPaths {
    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.train_data, &mut self.train_labels, &mut self.val_data, &mut self.val_labels] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Base constants and offsets of the sparse-3 grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct GridSpec {
    pub c1: f64,
    pub c2: f64,
    pub c1_offsets: Vec<f64>,
    pub c2_offsets: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            c1: SPARSE3_C1,
            c2: SPARSE3_C2,
            c1_offsets: vec![-0.06, -0.03, 0.0, 0.03, 0.06],
            c2_offsets: vec![-0.2, -0.1, 0.0, 0.1, 0.2],
        }
    }
}

impl GridSpec {
    pub fn c1_values(&self) -> Vec<f64> {
        self.c1_offsets.iter().map(|d| self.c1 + d).collect()
    }

    pub fn c2_values(&self) -> Vec<f64> {
        self.c2_offsets.iter().map(|d| self.c2 + d).collect()
    }
}

fn default_schemes() -> Vec<InitScheme> {
    vec![InitScheme::sparse(), InitScheme::sparse3()]
}

fn default_seeds() -> Vec<u32> {
    (1..=5).collect()
}

fn default_base_seed() -> u32 {
    10
}

/// One experiment invocation, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentSpec {
    pub mode: Mode,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<InitScheme>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u32>,
    #[serde(default = "default_base_seed")]
    pub base_seed: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
    /// The first entry is the primary dataset; crossdata uses all of them.
    #[serde(default)]
    pub datasets: Vec<DataPaths>,
    #[serde(default)]
    pub grid: GridSpec,
}

impl ExperimentSpec {
    pub fn new(mode: Mode, train: TrainConfig, datasets: Vec<DataPaths>) -> Self {
        ExperimentSpec {
            mode,
            schemes: default_schemes(),
            seeds: default_seeds(),
            base_seed: default_base_seed(),
            out_dir: None,
            train,
            datasets,
            grid: GridSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a spec file. Relative paths inside it are taken relative to the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut spec.datasets {
            d.resolve(base);
        }
        if let Some(out) = &spec.out_dir {
            if out.is_relative() {
                spec.out_dir = Some(base.join(out));
            }
        }
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment specs serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.schemes.is_empty() {
            return bad("at least one initialization scheme is required");
        }
        for s in &self.schemes {
            s.validate()?;
        }
        if self.datasets.is_empty() {
            return bad("no dataset given");
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset names must be distinct");
        }
        if self.mode == Mode::Gridsearch && (self.grid.c1_offsets.is_empty() || self.grid.c2_offsets.is_empty()) {
            return bad("grid search needs at least one offset for each constant");
        }
        Ok(())
    }

    /// SHA-256 of the spec in canonical JSON form, output directory excluded.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        let json = serde_json::to_vec(&canonical).expect("experiment specs serialize");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A dataset held in memory, batched according to a training configuration.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub name: String,
    pub train: Dataset,
    pub val_input: Matrix,
    pub val_target: Matrix,
}

fn check_width(name: &str, path: &Path, found: usize, expected: usize, what: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Config(format!(
            "dataset {name:?}: {} has {found} values per line but {what} is {expected}",
            path.display()
        )));
    }
    Ok(())
}

impl LoadedData {
    /// Reads `nBatches x batchsize` training and `testsize` validation
    /// samples.
    pub fn load(paths: &DataPaths, config: &TrainConfig) -> Result<Self> {
        let n_in = config.layer_sizes[0];
        let n_out = *config.layer_sizes.last().expect("validated layer sizes");
        for (p, width, what) in [
            (&paths.train_data, n_in, "layerSizes[0]"),
            (&paths.val_data, n_in, "layerSizes[0]"),
            (&paths.train_labels, n_out, "the output layer size"),
            (&paths.val_labels, n_out, "the output layer size"),
        ] {
            check_width(&paths.name, p, csv_file_width(p)?, width, what)?;
        }
        let train = Dataset::load(
            &paths.train_data,
            &paths.train_labels,
            n_in,
            n_out,
            config.batchsize,
            config.n_batches,
        )?;
        let val = Dataset::load(&paths.val_data, &paths.val_labels, n_in, n_out, config.testsize, 1)?;
        Ok(LoadedData {
            name: paths.name.clone(),
            val_input: val.inputs()[0].clone(),
            val_target: val.targets()[0].clone(),
            train,
        })
    }

    /// Batches in-memory samples the same way [`LoadedData::load`] batches
    /// files.
    pub fn from_samples(name: &str, train: &Samples, val: &Samples, config: &TrainConfig) -> Result<Self> {
        let needed = config.batchsize * config.n_batches;
        if train.len() < needed || val.len() < config.testsize {
            return Err(Error::Config(format!(
                "dataset {name:?}: need {needed} training and {} validation samples, have {} and {}",
                config.testsize,
                train.len(),
                val.len()
            )));
        }
        let n_in = config.layer_sizes[0];
        if train.inputs[0].len() != n_in {
            return Err(Error::Config(format!(
                "dataset {name:?}: samples have {} inputs but layerSizes[0] is {n_in}",
                train.inputs[0].len()
            )));
        }
        let head = |s: &Samples, n: usize| Samples {
            inputs: s.inputs[..n].to_vec(),
            labels: s.labels[..n].to_vec(),
            num_classes: s.num_classes,
        };
        let train = head(train, needed).into_dataset(config.batchsize)?;
        let val = head(val, config.testsize).into_dataset(config.testsize)?;
        Ok(LoadedData {
            name: name.to_string(),
            val_input: val.inputs()[0].clone(),
            val_target: val.targets()[0].clone(),
            train,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub scheme: String,
    pub dataset: String,
    pub seed: u32,
    pub history: Vec<EpochRecord>,
    pub best_val_error: f64,
    pub final_val_error: f64,
    pub wall_time: Duration,
}

/// A run either completes or fails with a message.
pub type RunResult = std::result::Result<RunRecord, String>;

/// Initializes and trains one network.
pub fn run_single(
    config: &TrainConfig,
    scheme: InitScheme,
    base_seed: u32,
    seed: u32,
    data: &LoadedData,
) -> Result<RunRecord> {
    let start = Instant::now();
    let mut rng = RngState::new(base_seed, seed);
    let inits = init_network(&mut rng, &config.layer_sizes, scheme, &[])?;
    let mut net = Network::from_init(inits, config.act_type, config.cost_type)?;
    let outcome = train_best(
        &mut net,
        data.train.inputs(),
        data.train.targets(),
        &data.val_input,
        &data.val_target,
        config,
        &mut UpdateClock::default(),
    )?;
    let final_val_error = outcome
        .history
        .last()
        .map_or(outcome.best_val_error, |r| r.val_error);
    Ok(RunRecord {
        scheme: scheme.id(),
        dataset: data.name.clone(),
        seed,
        history: outcome.history,
        best_val_error: outcome.best_val_error,
        final_val_error,
        wall_time: start.elapsed(),
    })
}

/// Runs every job in parallel; results come back in job order.
fn run_all(spec: &ExperimentSpec, jobs: &[(InitScheme, u32, &LoadedData)]) -> Vec<RunResult> {
    jobs.par_iter()
        .map(|&(scheme, seed, data)| {
            run_single(&spec.train, scheme, spec.base_seed, seed, data).map_err(|e| e.to_string())
        })
        .collect()
}

/// Population mean and standard deviation of the finite values.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

/// Left-aligned first column, right-aligned others.
fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                write!(line, "{cell:<w$}", w = widths[0]).unwrap();
            } else {
                write!(line, "  {cell:>w$}", w = widths[c]).unwrap();
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// One column of a comparison: a scheme on a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub scheme: String,
    pub dataset: String,
}

impl Column {
    fn label(&self, with_dataset: bool) -> String {
        if with_dataset {
            format!("{}@{}", self.scheme, self.dataset)
        } else {
            self.scheme.clone()
        }
    }
}

/// Best validation errors of every (column, seed) cell.
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub columns: Vec<Column>,
    pub seeds: Vec<u32>,
    /// `runs[c][s]` is the run of column `c` with seed `seeds[s]`.
    pub runs: Vec<Vec<RunResult>>,
}

impl ComparisonTable {
    pub fn cell(&self, column: usize, seed_index: usize) -> Option<f64> {
        self.runs[column][seed_index].as_ref().ok().map(|r| r.best_val_error)
    }

    /// Best errors of the completed runs of a column.
    pub fn completed(&self, column: usize) -> Vec<f64> {
        (0..self.seeds.len()).filter_map(|s| self.cell(column, s)).collect()
    }

    pub fn stats(&self, column: usize) -> Option<(f64, f64)> {
        mean_std(&self.completed(column))
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().flatten().filter(|r| r.is_err()).count()
    }

    fn multi_dataset(&self) -> bool {
        self.columns.iter().any(|c| c.dataset != self.columns[0].dataset)
    }

    /// Mean differences between the schemes of each dataset, later minus
    /// earlier.
    pub fn deltas(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.columns.len() {
            for j in i + 1..self.columns.len() {
                if self.columns[i].dataset != self.columns[j].dataset {
                    continue;
                }
                if let (Some((a, _)), Some((b, _))) = (self.stats(i), self.stats(j)) {
                    out.push((i, j, b - a));
                }
            }
        }
        out
    }

    pub fn render_text(&self) -> String {
        let multi = self.multi_dataset();
        let labels: Vec<String> = self.columns.iter().map(|c| c.label(multi)).collect();
        let mut out = String::from("Best validation error per seed\n\n");
        let mut rows = vec![std::iter::once("seed".to_string()).chain(labels.iter().cloned()).collect::<Vec<_>>()];
        for (s, seed) in self.seeds.iter().enumerate() {
            let mut row = vec![seed.to_string()];
            for c in 0..self.columns.len() {
                row.push(self.cell(c, s).map_or("failed".into(), pct));
            }
            rows.push(row);
        }
        let mut mean_row = vec!["mean".to_string()];
        for c in 0..self.columns.len() {
            mean_row.push(self.stats(c).map_or("failed".into(), |(m, _)| pct(m)));
        }
        rows.push(mean_row);
        out.push_str(&align(&rows));

        out.push_str("\nMean +- population std of best validation error\n\n");
        let mut rows = vec![vec!["scheme".to_string(), "n".into(), "mean".into(), "std".into(), "failed".into()]];
        for (c, label) in labels.iter().enumerate() {
            let done = self.completed(c).len();
            let (m, sd) = self
                .stats(c)
                .map_or(("-".into(), "-".into()), |(m, sd)| (pct(m), pct(sd)));
            rows.push(vec![
                label.clone(),
                done.to_string(),
                m,
                sd,
                (self.seeds.len() - done).to_string(),
            ]);
        }
        out.push_str(&align(&rows));

        let deltas = self.deltas();
        if !deltas.is_empty() {
            out.push('\n');
            for (i, j, d) in deltas {
                writeln!(out, "delta({} - {}) = {:+.2} pp", labels[j], labels[i], 100.0 * d).unwrap();
            }
        }
        let mut failed = String::new();
        for (c, col) in self.runs.iter().enumerate() {
            for (s, r) in col.iter().enumerate() {
                if let Err(msg) = r {
                    writeln!(failed, "{} seed {}: {msg}", labels[c], self.seeds[s]).unwrap();
                }
            }
        }
        if !failed.is_empty() {
            out.push_str("\nFailed runs\n");
            out.push_str(&failed);
        }
        out
    }

    /// `scheme,dataset,n,mean,std,failed`, one line per column.
    pub fn render_summary_csv(&self) -> String {
        let mut out = String::from("scheme,dataset,n,mean,std,failed\n");
        for (c, col) in self.columns.iter().enumerate() {
            let n = self.completed(c).len();
            let (m, sd) = self
                .stats(c)
                .map_or((String::new(), String::new()), |(m, sd)| (format_csv_value(m), format_csv_value(sd)));
            writeln!(out, "{},{},{n},{m},{sd},{}", col.scheme, col.dataset, self.seeds.len() - n).unwrap();
        }
        out
    }

    /// One row per seed, one column per (scheme, dataset); failed cells are
    /// empty.
    pub fn render_per_seed_csv(&self) -> String {
        let multi = self.multi_dataset();
        let mut out = String::from("seed");
        for c in &self.columns {
            write!(out, ",{}", c.label(multi)).unwrap();
        }
        out.push('\n');
        for (s, seed) in self.seeds.iter().enumerate() {
            out.push_str(&seed.to_string());
            for c in 0..self.columns.len() {
                out.push(',');
                if let Some(v) = self.cell(c, s) {
                    out.push_str(&format_csv_value(v));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn comparison(spec: &ExperimentSpec, datasets: &[LoadedData]) -> Result<ComparisonTable> {
    spec.validate()?;
    let mut columns = Vec::new();
    let mut jobs = Vec::new();
    for data in datasets {
        for &scheme in &spec.schemes {
            columns.push(Column {
                scheme: scheme.id(),
                dataset: data.name.clone(),
            });
            jobs.extend(spec.seeds.iter().map(|&seed| (scheme, seed, data)));
        }
    }
    let mut results = run_all(spec, &jobs).into_iter();
    let runs = columns
        .iter()
        .map(|_| results.by_ref().take(spec.seeds.len()).collect())
        .collect();
    Ok(ComparisonTable {
        columns,
        seeds: spec.seeds.clone(),
        runs,
    })
}

/// Every scheme and seed on one dataset.
pub fn run_compare(spec: &ExperimentSpec, data: &LoadedData) -> Result<ComparisonTable> {
    comparison(spec, std::slice::from_ref(data))
}

/// Every scheme and seed on each of several datasets.
pub fn run_crossdata(spec: &ExperimentSpec, datasets: &[LoadedData]) -> Result<ComparisonTable> {
    if datasets.is_empty() {
        return Err(Error::Config("crossdata needs at least one dataset".into()));
    }
    comparison(spec, datasets)
}

/// Per-epoch histories of every (scheme, seed) run.
#[derive(Debug, Clone)]
pub struct CurvesReport {
    pub schemes: Vec<String>,
    pub seeds: Vec<u32>,
    pub dataset: String,
    pub lr: f64,
    pub wd: String,
    /// `runs[scheme][seed]`.
    pub runs: Vec<Vec<RunResult>>,
}

impl CurvesReport {
    pub fn file_name(&self, scheme: usize, seed_index: usize) -> String {
        format!(
            "curve_{}_seed{}_lr{}_wd{}.csv",
            self.schemes[scheme], self.seeds[seed_index], self.lr, self.wd
        )
    }

    pub fn render_run(record: &RunRecord) -> String {
        let mut out = String::from("epoch,train_cost,val_error\n");
        for r in &record.history {
            writeln!(
                out,
                "{},{},{}",
                r.epoch,
                format_csv_value(r.train_cost),
                format_csv_value(r.val_error)
            )
            .unwrap();
        }
        out
    }

    /// Mean validation error of a scheme's completed runs after `epoch`
    /// (one-based).
    pub fn mean_val_error(&self, scheme: usize, epoch: usize) -> Option<f64> {
        let values: Vec<f64> = self.runs[scheme]
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .filter_map(|r| r.history.get(epoch.checked_sub(1)?).map(|e| e.val_error))
            .collect();
        mean_std(&values).map(|(m, _)| m)
    }

    fn epochs(&self) -> usize {
        self.runs
            .iter()
            .flatten()
            .filter_map(|r| r.as_ref().ok())
            .map(|r| r.history.len())
            .max()
            .unwrap_or(0)
    }

    /// `epoch` then the mean validation error of each scheme.
    pub fn render_summary_csv(&self) -> String {
        let mut out = String::from("epoch");
        for s in &self.schemes {
            write!(out, ",{s}").unwrap();
        }
        out.push('\n');
        for epoch in 1..=self.epochs() {
            out.push_str(&epoch.to_string());
            for s in 0..self.schemes.len() {
                out.push(',');
                if let Some(v) = self.mean_val_error(s, epoch) {
                    out.push_str(&format_csv_value(v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("Mean validation error by epoch over {} seeds\n\n", self.seeds.len());
        let mut rows = vec![std::iter::once("epoch".to_string()).chain(self.schemes.iter().cloned()).collect::<Vec<_>>()];
        for epoch in 1..=self.epochs() {
            let mut row = vec![epoch.to_string()];
            for s in 0..self.schemes.len() {
                row.push(self.mean_val_error(s, epoch).map_or("-".into(), pct));
            }
            rows.push(row);
        }
        out.push_str(&align(&rows));
        out
    }
}

pub fn run_curves(spec: &ExperimentSpec, data: &LoadedData) -> Result<CurvesReport> {
    let table = run_compare(spec, data)?;
    Ok(CurvesReport {
        schemes: table.columns.iter().map(|c| c.scheme.clone()).collect(),
        seeds: table.seeds,
        dataset: data.name.clone(),
        lr: spec.train.lr,
        wd: format!("{:?}{}", spec.train.wd_type, spec.train.wd_value),
        runs: table.runs,
    })
}

/// Best validation errors of sparse-3 over a grid of constants.
#[derive(Debug, Clone)]
pub struct GridTable {
    pub c1_values: Vec<f64>,
    pub c2_values: Vec<f64>,
    /// Reference constants the offsets are measured from.
    pub base: (f64, f64),
    pub seeds: Vec<u32>,
    /// `runs[i][j][s]` for `c1_values[i]`, `c2_values[j]`, `seeds[s]`.
    pub runs: Vec<Vec<Vec<RunResult>>>,
}

impl GridTable {
    pub fn cell_mean(&self, i: usize, j: usize) -> Option<f64> {
        let values: Vec<f64> = self.runs[i][j]
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|r| r.best_val_error)
            .collect();
        mean_std(&values).map(|(m, _)| m)
    }

    /// The cell with the lowest mean; ties go to the first in row order.
    pub fn best_cell(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.c1_values.len() {
            for j in 0..self.c2_values.len() {
                if let Some(v) = self.cell_mean(i, j) {
                    if best.is_none_or(|(_, _, b)| v < b) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        best.map(|(i, j, _)| (i, j))
    }

    fn offset_label(v: f64, base: f64) -> String {
        format!("{:+.2}", v - base)
    }

    pub fn render_text(&self) -> String {
        let best = self.best_cell();
        let mut out = format!(
            "Mean best validation error over {} seeds; rows offset c1 = {}, columns offset c2 = {}; * marks the minimum\n\n",
            self.seeds.len(),
            self.base.0,
            self.base.1
        );
        let mut header = vec!["c1 \\ c2".to_string()];
        header.extend(self.c2_values.iter().map(|&v| Self::offset_label(v, self.base.1)));
        let mut rows = vec![header];
        for (i, &c1) in self.c1_values.iter().enumerate() {
            let mut row = vec![Self::offset_label(c1, self.base.0)];
            for j in 0..self.c2_values.len() {
                let mark = if best == Some((i, j)) { "*" } else { "" };
                row.push(self.cell_mean(i, j).map_or("failed".into(), |v| format!("{mark}{}", pct(v))));
            }
            rows.push(row);
        }
        out.push_str(&align(&rows));
        out
    }

    /// `c1,c2,n,mean,best`, one line per cell in row order.
    pub fn render_csv(&self) -> String {
        let best = self.best_cell();
        let mut out = String::from("c1,c2,n,mean,best\n");
        for (i, &c1) in self.c1_values.iter().enumerate() {
            for (j, &c2) in self.c2_values.iter().enumerate() {
                let n = self.runs[i][j].iter().filter(|r| r.is_ok()).count();
                let mean = self.cell_mean(i, j).map_or(String::new(), format_csv_value);
                let flag = u8::from(best == Some((i, j)));
                writeln!(out, "{},{},{n},{mean},{flag}", format_csv_value(c1), format_csv_value(c2)).unwrap();
            }
        }
        out
    }
}

pub fn run_gridsearch(
    spec: &ExperimentSpec,
    data: &LoadedData,
    c1_values: &[f64],
    c2_values: &[f64],
) -> Result<GridTable> {
    spec.validate()?;
    if c1_values.is_empty() || c2_values.is_empty() {
        return Err(Error::Config("grid search needs non-empty value grids".into()));
    }
    let mut jobs = Vec::new();
    for &c1 in c1_values {
        for &c2 in c2_values {
            let scheme = InitScheme::Sparse3 { c1, c2 };
            scheme.validate()?;
            jobs.extend(spec.seeds.iter().map(|&seed| (scheme, seed, data)));
        }
    }
    let mut results = run_all(spec, &jobs).into_iter();
    let runs = c1_values
        .iter()
        .map(|_| {
            c2_values
                .iter()
                .map(|_| results.by_ref().take(spec.seeds.len()).collect())
                .collect()
        })
        .collect();
    Ok(GridTable {
        c1_values: c1_values.to_vec(),
        c2_values: c2_values.to_vec(),
        base: (spec.grid.c1, spec.grid.c2),
        seeds: spec.seeds.clone(),
        runs,
    })
}

#[derive(Debug, Clone)]
pub enum Report {
    Comparison(ComparisonTable),
    Curves(CurvesReport),
    Grid(GridTable),
}

impl Report {
    pub fn text(&self) -> String {
        match self {
            Report::Comparison(t) => t.render_text(),
            Report::Curves(c) => c.render_text(),
            Report::Grid(g) => g.render_text(),
        }
    }

    fn all_runs(&self) -> Vec<&RunResult> {
        match self {
            Report::Comparison(t) => t.runs.iter().flatten().collect(),
            Report::Curves(c) => c.runs.iter().flatten().collect(),
            Report::Grid(g) => g.runs.iter().flatten().flatten().collect(),
        }
    }

    /// Completed runs, in output order.
    pub fn records(&self) -> Vec<&RunRecord> {
        self.all_runs().into_iter().filter_map(|r| r.as_ref().ok()).collect()
    }

    pub fn failures(&self) -> usize {
        self.all_runs().iter().filter(|r| r.is_err()).count()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub out_dir: PathBuf,
    /// Written files, relative to `out_dir`, in write order.
    pub files: Vec<String>,
    pub report: Report,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    mode: Mode,
    spec_sha256: String,
    base_seed: u32,
    seeds: &'a [u32],
    schemes: Vec<String>,
    datasets: &'a [DataPaths],
    completed_runs: usize,
    failed_runs: usize,
    files: &'a [String],
}

/// Creates the output directory and checks that it accepts files.
pub fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(format!(".tinynet-probe{}", std::process::id()));
    fs::write(&probe, b"").map_err(|e| Error::io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Output directory: the spec's, else the environment's, else `results`.
pub fn resolve_out_dir(spec: &ExperimentSpec) -> PathBuf {
    spec.out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

/// Loads the spec's datasets. Compare, curves and gridsearch only use the
/// first one.
pub fn load_datasets(spec: &ExperimentSpec) -> Result<Vec<LoadedData>> {
    let wanted = if spec.mode == Mode::Crossdata { spec.datasets.len() } else { 1 };
    spec.datasets[..wanted]
        .iter()
        .map(|d| LoadedData::load(d, &spec.train))
        .collect()
}

/// Runs the spec's mode on already loaded data and writes its outputs.
pub fn execute_with_data(spec: &ExperimentSpec, datasets: &[LoadedData], out_dir: &Path) -> Result<ExperimentOutput> {
    spec.validate()?;
    prepare_out_dir(out_dir)?;
    let primary = datasets
        .first()
        .ok_or_else(|| Error::Config("no dataset given".into()))?;
    let mut outputs: Vec<(String, String)> = Vec::new();
    let report = match spec.mode {
        Mode::Compare | Mode::Crossdata => {
            let table = if spec.mode == Mode::Compare {
                run_compare(spec, primary)?
            } else {
                run_crossdata(spec, datasets)?
            };
            let stem = spec.mode.as_str();
            outputs.push((format!("{stem}_summary.txt"), table.render_text()));
            outputs.push((format!("{stem}_summary.csv"), table.render_summary_csv()));
            outputs.push((format!("{stem}_per_seed.csv"), table.render_per_seed_csv()));
            Report::Comparison(table)
        }
        Mode::Curves => {
            let curves = run_curves(spec, primary)?;
            for (s, runs) in curves.runs.iter().enumerate() {
                for (k, run) in runs.iter().enumerate() {
                    if let Ok(record) = run {
                        outputs.push((curves.file_name(s, k), CurvesReport::render_run(record)));
                    }
                }
            }
            outputs.push(("curves_summary.txt".into(), curves.render_text()));
            outputs.push(("curves_summary.csv".into(), curves.render_summary_csv()));
            Report::Curves(curves)
        }
        Mode::Gridsearch => {
            let grid = run_gridsearch(spec, primary, &spec.grid.c1_values(), &spec.grid.c2_values())?;
            outputs.push(("grid.txt".into(), grid.render_text()));
            outputs.push(("grid.csv".into(), grid.render_csv()));
            Report::Grid(grid)
        }
    };
    for (name, text) in &outputs {
        write_atomic(&out_dir.join(name), text.as_bytes())?;
    }
    let mut files: Vec<String> = outputs.into_iter().map(|(name, _)| name).collect();
    let manifest = Manifest {
        program: "tinynet",
        version: env!("CARGO_PKG_VERSION"),
        mode: spec.mode,
        spec_sha256: spec.digest(),
        base_seed: spec.base_seed,
        seeds: &spec.seeds,
        schemes: spec.schemes.iter().map(InitScheme::to_spec).collect(),
        datasets: &spec.datasets,
        completed_runs: report.records().len(),
        failed_runs: report.failures(),
        files: &files,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_atomic(&out_dir.join("manifest.json"), json.as_bytes())?;
    files.push("manifest.json".into());
    Ok(ExperimentOutput {
        out_dir: out_dir.to_path_buf(),
        files,
        report,
    })
}

/// Loads data, runs the spec's mode and writes every output file.
pub fn execute(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let out_dir = resolve_out_dir(spec);
    prepare_out_dir(&out_dir)?;
    let datasets = load_datasets(spec)?;
    execute_with_data(spec, &datasets, &out_dir)
}
