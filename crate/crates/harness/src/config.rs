//! Experiment configuration: defaults, an optional TOML file, and command
//! line overrides, applied in that order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use csisa_core::basp::Tolerances;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_BASE_SEED: u64 = 0;
pub const DEFAULT_MATRIX_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixSource {
    File(PathBuf),
    Generate { rows: usize, cols: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub matrix: MatrixSource,
    pub trials: usize,
    /// Nonzeros in each starting vector; `None` picks `rows / 3`.
    pub init_k: Option<usize>,
    pub base_seed: u64,
    pub workers: usize,
    pub tolerances: Tolerances,
    pub output_dir: Option<PathBuf>,
    pub write_records: bool,
}

impl ExperimentConfig {
    pub fn new(matrix: MatrixSource) -> Self {
        Self {
            matrix,
            trials: DEFAULT_TRIALS,
            init_k: None,
            base_seed: DEFAULT_BASE_SEED,
            workers: default_workers(),
            tolerances: Tolerances::default(),
            output_dir: None,
            write_records: true,
        }
    }

    /// Starting sparsity for a matrix with `rows` rows: the explicit value,
    /// else a third of the rows (40 for 120 rows).
    pub fn effective_init_k(&self, rows: usize) -> usize {
        self.init_k.unwrap_or_else(|| default_init_k(rows))
    }

    pub fn validate(&self, cols: usize, rows: usize) -> Result<()> {
        if self.trials == 0 {
            return Err(HarnessError::Usage("trials must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(HarnessError::Usage("workers must be at least 1".into()));
        }
        let k = self.effective_init_k(rows);
        if k == 0 || k > cols {
            return Err(HarnessError::Usage(format!(
                "init-k {k} must lie in 1..={cols}"
            )));
        }
        self.tolerances
            .validate()
            .map_err(|e| HarnessError::Usage(e.to_string()))
    }
}

pub fn default_init_k(rows: usize) -> usize {
    ((rows as f64 / 3.0).round() as usize).max(1)
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Keys accepted in a config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub seed: Option<u64>,
    pub matrix: Option<PathBuf>,
    pub trials: Option<usize>,
    pub init_k: Option<usize>,
    pub base_seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub eps_fail: Option<f64>,
    pub tau: Option<f64>,
    pub feas_tol: Option<f64>,
    pub gap_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub records: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            rows: over.rows.or(self.rows),
            cols: over.cols.or(self.cols),
            seed: over.seed.or(self.seed),
            matrix: over.matrix.or(self.matrix),
            trials: over.trials.or(self.trials),
            init_k: over.init_k.or(self.init_k),
            base_seed: over.base_seed.or(self.base_seed),
            workers: over.workers.or(self.workers),
            out: over.out.or(self.out),
            eps_fail: over.eps_fail.or(self.eps_fail),
            tau: over.tau.or(self.tau),
            feas_tol: over.feas_tol.or(self.feas_tol),
            gap_tol: over.gap_tol.or(self.gap_tol),
            max_iter: over.max_iter.or(self.max_iter),
            records: over.records.or(self.records),
        }
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let matrix = match (self.matrix, self.rows, self.cols) {
            (Some(path), None, None) => MatrixSource::File(path),
            (Some(_), _, _) => {
                return Err(HarnessError::Usage(
                    "give either --matrix or --rows/--cols, not both".into(),
                ))
            }
            (None, Some(rows), Some(cols)) => MatrixSource::Generate {
                rows,
                cols,
                seed: self.seed.unwrap_or(DEFAULT_MATRIX_SEED),
            },
            (None, _, _) => {
                return Err(HarnessError::Usage(
                    "a matrix is required: --matrix PATH or --rows R --cols C [--seed S]".into(),
                ))
            }
        };
        let defaults = Tolerances::default();
        let mut cfg = ExperimentConfig::new(matrix);
        cfg.trials = self.trials.unwrap_or(DEFAULT_TRIALS);
        cfg.init_k = self.init_k;
        cfg.base_seed = self.base_seed.unwrap_or(DEFAULT_BASE_SEED);
        cfg.workers = self.workers.unwrap_or_else(default_workers);
        cfg.output_dir = self.out;
        cfg.write_records = self.records.unwrap_or(true);
        cfg.tolerances = Tolerances {
            eps_fail: self.eps_fail.unwrap_or(defaults.eps_fail),
            tau: self.tau.unwrap_or(defaults.tau),
            feas_tol: self.feas_tol.unwrap_or(defaults.feas_tol),
            gap_tol: self.gap_tol.unwrap_or(defaults.gap_tol),
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
        };
        Ok(cfg)
    }
}

/// The tolerance table printed by `--show-config`.
pub fn show_config(cfg: Option<&ExperimentConfig>) -> String {
    let d = Tolerances::default();
    let eff = cfg.map_or(d, |c| c.tolerances);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>12} {:>12}  meaning",
        "name", "default", "effective"
    );
    let rows: [(&str, String, String, &str); 5] = [
        (
            "eps-fail",
            format!("{:e}", d.eps_fail),
            format!("{:e}", eff.eps_fail),
            "max |d - e| counted as recovery",
        ),
        (
            "tau",
            format!("{:e}", d.tau),
            format!("{:e}", eff.tau),
            "magnitudes <= tau count as zero",
        ),
        (
            "feas-tol",
            format!("{:e}", d.feas_tol),
            format!("{:e}", eff.feas_tol),
            "LP relative feasibility",
        ),
        (
            "gap-tol",
            format!("{:e}", d.gap_tol),
            format!("{:e}", eff.gap_tol),
            "LP relative duality gap",
        ),
        (
            "max-iter",
            d.max_iter.to_string(),
            eff.max_iter.to_string(),
            "LP iteration cap",
        ),
    ];
    for (name, def, e, meaning) in rows {
        let _ = writeln!(out, "{name:<10} {def:>12} {e:>12}  {meaning}");
    }
    if let Some(c) = cfg {
        let _ = writeln!(out);
        match &c.matrix {
            MatrixSource::File(p) => {
                let _ = writeln!(out, "matrix     {}", p.display());
            }
            MatrixSource::Generate { rows, cols, seed } => {
                let _ = writeln!(out, "matrix     generated {rows}x{cols}, seed {seed}");
            }
        }
        let init_k = c
            .init_k
            .map_or_else(|| "rows/3".to_string(), |k| k.to_string());
        let _ = writeln!(out, "trials     {}", c.trials);
        let _ = writeln!(out, "init-k     {init_k}");
        let _ = writeln!(out, "base-seed  {}", c.base_seed);
        let _ = writeln!(out, "workers    {}", c.workers);
        if let Some(dir) = &c.output_dir {
            let _ = writeln!(out, "out        {}", dir.display());
        }
    }
    out
}
