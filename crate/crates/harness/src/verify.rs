//! Re-checks an instanton record against a matrix.

use std::fmt;

use csisa_core::basp::{l0_norm, threshold_support};
use csisa_core::isa::{verify_instanton, InstantonRecord};
use csisa_core::linalg::{matvec, Matrix, Vector};
use csisa_core::oracle::{dual_certificate, l0_oracle, FIT_TOL};
use csisa_core::Error as CoreError;
use serde::Serialize;

use crate::engine::{run_trial, TrialOutcome};
use crate::error::Result;

/// Largest column count for the dual-certificate cross-check.
pub const CERTIFICATE_MAX_COLS: usize = 256;
/// Default cap on supports the ℓ0 cross-check may enumerate.
pub const DEFAULT_L0_BUDGET: u128 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failed_checks(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .map(|c| c.name)
            .collect()
    }

    pub fn status_of(&self, name: &str) -> Option<CheckStatus> {
        self.checks
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.status)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skipped => "SKIP",
            };
            writeln!(f, "{tag}  {:<20} {}", c.name, c.detail)?;
        }
        let verdict = if self.passed() {
            "certified"
        } else {
            "NOT certified"
        };
        writeln!(f, "{verdict}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub replay: bool,
    pub oracles: bool,
    pub l0_budget: u128,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            replay: true,
            oracles: true,
            l0_budget: DEFAULT_L0_BUDGET,
        }
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: &'static str, status: CheckStatus, detail: impl Into<String>) {
        self.0.push(Check {
            name,
            status,
            detail: detail.into(),
        });
    }

    fn pass_if(&mut self, name: &'static str, ok: bool, detail: impl Into<String>) {
        let status = if ok {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        self.push(name, status, detail);
    }
}

fn structural_problem(f: &Matrix, record: &InstantonRecord) -> Option<String> {
    if record.dim != f.cols() {
        return Some(format!(
            "dim {} but matrix has {} columns",
            record.dim,
            f.cols()
        ));
    }
    if let Err(e) = record.tolerances.validate() {
        return Some(e.to_string());
    }
    if !record.instanton.windows(2).all(|w| w[0].0 < w[1].0) {
        return Some("instanton indices are not strictly increasing".into());
    }
    let e = match record.instanton_vector() {
        Ok(e) => e,
        Err(err) => return Some(err.to_string()),
    };
    let l0 = l0_norm(&e, record.tolerances.tau);
    if record.length != l0 || record.instanton.len() != l0 {
        return Some(format!(
            "length {} but {} stored entries with {l0} above tau",
            record.length,
            record.instanton.len()
        ));
    }
    if record.leave_one_out_verdicts.len() != record.length {
        return Some(format!(
            "{} reduction verdicts for length {}",
            record.leave_one_out_verdicts.len(),
            record.length
        ));
    }
    if let Err(err) = record.trace.check_descent() {
        return Some(err.to_string());
    }
    None
}

fn binomial_sum(n: u128, k_max: u128) -> u128 {
    let mut total = 0u128;
    let mut c = 1u128;
    for k in 1..=k_max.min(n) {
        c = c.saturating_mul(n - k + 1) / k;
        total = total.saturating_add(c);
    }
    total
}

/// Runs every check on `record` against `f`. A matrix hash mismatch stops
/// the remaining checks.
pub fn verify_record(
    f: &Matrix,
    record: &InstantonRecord,
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    let mut checks = Checks(Vec::new());
    let hash = f.content_hash();
    if hash != record.matrix_id {
        checks.push(
            "matrix-hash",
            CheckStatus::Fail,
            format!("record {} but matrix {hash}", record.matrix_id),
        );
        return Ok(VerifyReport { checks: checks.0 });
    }
    checks.push("matrix-hash", CheckStatus::Pass, hash);

    if let Some(problem) = structural_problem(f, record) {
        checks.push("record-consistent", CheckStatus::Fail, problem);
        return Ok(VerifyReport { checks: checks.0 });
    }
    checks.push(
        "record-consistent",
        CheckStatus::Pass,
        format!("length {}", record.length),
    );

    let tol = record.tolerances;
    let e = record.instanton_vector()?;
    let report = verify_instanton(f, &e, &tol)?;
    checks.pass_if(
        "basp-fails",
        !report.verdict.is_success(),
        format!("deviation {:.3e}", report.deviation),
    );
    let failing = report.failing_reductions();
    checks.pass_if(
        "reductions-succeed",
        failing.is_empty(),
        if failing.is_empty() {
            format!(
                "{} of {} decode correctly",
                report.reductions.len(),
                report.reductions.len()
            )
        } else {
            format!("removing entry {failing:?} still fails")
        },
    );
    let recorded_ok = record.leave_one_out_verdicts.iter().all(|&v| v);
    checks.pass_if(
        "recorded-verdicts",
        recorded_ok,
        if recorded_ok {
            "all recorded reductions succeed".to_string()
        } else {
            "record lists a failing reduction".to_string()
        },
    );

    if !opts.replay {
        checks.push("replay", CheckStatus::Skipped, "disabled");
    } else if let Some(seed) = record.trace.seed {
        match run_trial(f, seed, record.trace.init_k, &tol)? {
            TrialOutcome::Instanton(replayed) => {
                let same = *replayed == *record;
                checks.pass_if(
                    "replay",
                    same,
                    if same {
                        format!("seed {seed} reproduces the record")
                    } else {
                        format!(
                            "seed {seed} gives a different record (length {})",
                            replayed.length
                        )
                    },
                );
            }
            TrialOutcome::Discarded => checks.push(
                "replay",
                CheckStatus::Fail,
                format!("seed {seed} start decodes correctly"),
            ),
            TrialOutcome::Failed(msg) => checks.push("replay", CheckStatus::Fail, msg),
        }
    } else {
        checks.push("replay", CheckStatus::Skipped, "record has no seed");
    }

    if !opts.oracles {
        checks.push("oracle-certificate", CheckStatus::Skipped, "disabled");
        checks.push("oracle-l0", CheckStatus::Skipped, "disabled");
        return Ok(VerifyReport { checks: checks.0 });
    }

    if f.cols() > CERTIFICATE_MAX_COLS {
        checks.push(
            "oracle-certificate",
            CheckStatus::Skipped,
            format!("{} columns exceed {CERTIFICATE_MAX_COLS}", f.cols()),
        );
    } else {
        let (status, detail) = certificate_check(f, &e, tol.tau)?;
        checks.push("oracle-certificate", status, detail);
    }

    let supports = binomial_sum(f.cols() as u128, record.length as u128);
    if supports > opts.l0_budget {
        checks.push(
            "oracle-l0",
            CheckStatus::Skipped,
            format!("{supports} supports exceed budget {}", opts.l0_budget),
        );
    } else {
        let y = matvec(f, &e)?;
        match l0_oracle(f, &y, record.length) {
            Ok(Some(sol)) => checks.pass_if(
                "oracle-l0",
                sol.residual <= FIT_TOL && sol.k <= record.length,
                format!(
                    "sparsest fit has {} entries, residual {:.1e}",
                    sol.k, sol.residual
                ),
            ),
            Ok(None) => checks.push(
                "oracle-l0",
                CheckStatus::Fail,
                "no fit up to the instanton length",
            ),
            Err(CoreError::CombinatorialBudgetExceeded(n)) => checks.push(
                "oracle-l0",
                CheckStatus::Skipped,
                format!("{n} supports over budget"),
            ),
            Err(err) => return Err(err.into()),
        }
    }
    Ok(VerifyReport { checks: checks.0 })
}

/// The instanton must lack a strict certificate; each reduction must have
/// one. Certificates within the margin of 1 are reported, not failed.
fn certificate_check(f: &Matrix, e: &Vector, tau: f64) -> Result<(CheckStatus, String)> {
    let mut boundary = 0usize;
    match dual_certificate(f, e) {
        Ok(Some(c)) if c.strict => {
            return Ok((
                CheckStatus::Fail,
                format!(
                    "instanton has a strict certificate ({:.3e})",
                    c.max_off_support
                ),
            ))
        }
        Ok(Some(c)) if c.is_boundary() => boundary += 1,
        Ok(_) | Err(CoreError::RankDeficientSupport) => {}
        Err(err) => return Err(err.into()),
    }
    for i in threshold_support(e, tau) {
        let mut r = e.clone();
        r.as_mut_slice()[i] = 0.0;
        match dual_certificate(f, &r) {
            Ok(Some(c)) if c.strict => {}
            Ok(Some(c)) if c.is_boundary() => boundary += 1,
            Ok(_) | Err(CoreError::RankDeficientSupport) => {
                return Ok((
                    CheckStatus::Fail,
                    format!("reduction without entry {i} has no strict certificate"),
                ))
            }
            Err(err) => return Err(err.into()),
        }
    }
    let detail = if boundary == 0 {
        "instanton uncertified, every reduction strictly certified".to_string()
    } else {
        format!("{boundary} boundary certificate(s) within margin")
    };
    Ok((CheckStatus::Pass, detail))
}
