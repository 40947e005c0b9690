//! Matrix generation, single trials, and batched sampling.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use csisa_core::basp::Tolerances;
use csisa_core::isa::{isa_run, random_init, InstantonRecord};
use csisa_core::linalg::{gaussian_matrix, orthonormalize_rows, Matrix};
use csisa_core::Error as CoreError;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, MatrixSource};
use crate::error::{HarnessError, Result};
use crate::histogram::Histogram;
use crate::record::{record_to_json, write_file};

/// Rows of a seeded Gaussian matrix, orthonormalized.
pub fn generate_matrix(rows: usize, cols: usize, seed: u64) -> Result<Matrix> {
    Ok(orthonormalize_rows(&gaussian_matrix(rows, cols, seed)?)?)
}

pub fn load_matrix(path: &Path) -> Result<Matrix> {
    Matrix::load(path).map_err(|e| match e {
        CoreError::Io(source) => HarnessError::io(path, source),
        other => HarnessError::Core(other),
    })
}

pub fn resolve_matrix(source: &MatrixSource) -> Result<Matrix> {
    match source {
        MatrixSource::File(path) => load_matrix(path),
        MatrixSource::Generate { rows, cols, seed } => generate_matrix(*rows, *cols, *seed),
    }
}

pub fn trial_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add(index as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Instanton(Box<InstantonRecord>),
    /// Basis pursuit decoded the starting vector correctly.
    Discarded,
    Failed(String),
}

/// One search from `random_init(cols, init_k, seed)`.
///
/// Numerical errors are returned as [`TrialOutcome::Failed`] so a batch can
/// report them per trial.
pub fn run_trial(f: &Matrix, seed: u64, init_k: usize, tol: &Tolerances) -> Result<TrialOutcome> {
    let e0 = random_init(f.cols(), init_k, seed)?;
    Ok(match isa_run(f, &e0, init_k, tol) {
        Ok(mut record) => {
            record.trace.seed = Some(seed);
            TrialOutcome::Instanton(Box::new(record))
        }
        Err(CoreError::InitNotFailing) => TrialOutcome::Discarded,
        Err(e) => TrialOutcome::Failed(e.to_string()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub matrix_id: String,
    pub rows: usize,
    pub cols: usize,
    pub trials: usize,
    pub init_k: usize,
    pub base_seed: u64,
    pub tolerances: Tolerances,
    pub instantons: u64,
    pub discarded: u64,
    pub failed: u64,
    pub min_length: Option<usize>,
    pub discarded_trials: Vec<usize>,
    pub failed_trials: Vec<(usize, String)>,
    pub histogram: Vec<(usize, u64)>,
}

#[derive(Debug)]
pub struct SampleReport {
    pub summary: Summary,
    pub histogram: Histogram,
    pub outcomes: Vec<TrialOutcome>,
    pub mean_trial_time: Duration,
}

impl SampleReport {
    pub fn records(&self) -> impl Iterator<Item = (usize, &InstantonRecord)> {
        self.outcomes
            .iter()
            .enumerate()
            .filter_map(|(i, o)| match o {
                TrialOutcome::Instanton(r) => Some((i, r.as_ref())),
                _ => None,
            })
    }
}

pub fn record_file_name(index: usize) -> String {
    format!("trial_{index:05}.json")
}

/// Runs every trial of `cfg` on `f`. Results are ordered by trial index
/// whatever the worker count.
pub fn sample(f: &Matrix, cfg: &ExperimentConfig) -> Result<SampleReport> {
    cfg.validate(f.cols(), f.rows())?;
    let init_k = cfg.effective_init_k(f.rows());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Usage(format!("worker pool: {e}")))?;
    let timed: Vec<Result<(TrialOutcome, Duration)>> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| {
                let start = Instant::now();
                let outcome = run_trial(f, trial_seed(cfg.base_seed, i), init_k, &cfg.tolerances)?;
                log::debug!("trial {i} finished in {:?}", start.elapsed());
                Ok((outcome, start.elapsed()))
            })
            .collect()
    });

    let mut histogram = Histogram::default();
    let mut outcomes = Vec::with_capacity(cfg.trials);
    let mut total = Duration::ZERO;
    let mut discarded_trials = Vec::new();
    let mut failed_trials = Vec::new();
    for (i, item) in timed.into_iter().enumerate() {
        let (outcome, elapsed) = item?;
        total += elapsed;
        match &outcome {
            TrialOutcome::Instanton(r) => histogram.record_instanton(r.length),
            TrialOutcome::Discarded => {
                histogram.record_discard();
                discarded_trials.push(i);
            }
            TrialOutcome::Failed(msg) => {
                log::warn!("trial {i} failed: {msg}");
                histogram.record_failure();
                failed_trials.push((i, msg.clone()));
            }
        }
        outcomes.push(outcome);
    }
    let summary = Summary {
        matrix_id: f.content_hash(),
        rows: f.rows(),
        cols: f.cols(),
        trials: cfg.trials,
        init_k,
        base_seed: cfg.base_seed,
        tolerances: cfg.tolerances,
        instantons: histogram.instantons(),
        discarded: histogram.trials_discarded,
        failed: histogram.trials_failed,
        min_length: histogram.min_length,
        discarded_trials,
        failed_trials,
        histogram: histogram.bins.iter().map(|(&k, &v)| (k, v)).collect(),
    };
    Ok(SampleReport {
        summary,
        histogram,
        outcomes,
        mean_trial_time: total / cfg.trials as u32,
    })
}

/// Writes `histogram.csv`, `summary.json`, and optionally
/// `records/trial_NNNNN.json` under `dir`. Returns the written paths.
pub fn write_outputs(report: &SampleReport, dir: &Path, records: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let csv_path = dir.join("histogram.csv");
    write_file(&csv_path, &report.histogram.to_csv()?)?;
    written.push(csv_path);

    let summary_path = dir.join("summary.json");
    let mut summary = serde_json::to_string_pretty(&report.summary)?;
    summary.push('\n');
    write_file(&summary_path, &summary)?;
    written.push(summary_path);

    if records {
        for (i, record) in report.records() {
            let path = dir.join("records").join(record_file_name(i));
            write_file(&path, &record_to_json(record)?)?;
            written.push(path);
        }
    }
    Ok(written)
}
