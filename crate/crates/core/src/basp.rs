//! Basis pursuit: `min ||d||_1` subject to `F d = ỹ`, and the success/failure
//! verdict against a known error vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm1, norm_inf, HouseholderQr, Matrix, Vector};
use crate::lp::{solve_lp, LpOptions, LpStatus, StandardFormLp};

/// Relative residual a least-squares refit must reach to replace the
/// interior-point iterate.
const POLISH_RESIDUAL: f64 = 1e-10;
/// Largest entrywise move a refit may make away from the iterate.
const POLISH_MAX_SHIFT: f64 = 1e-4;

/// Numerical thresholds shared by decoding and instanton search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `d` and `e` count as different when `||d - e||_inf > eps_fail`.
    pub eps_fail: f64,
    /// Entries with magnitude `<= tau` count as zero.
    pub tau: f64,
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_fail: 1e-6,
            tau: 1e-6,
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
        }
    }
}

impl Tolerances {
    pub fn lp_options(&self) -> LpOptions {
        LpOptions {
            feas_tol: self.feas_tol,
            gap_tol: self.gap_tol,
            max_iter: self.max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_fail", self.eps_fail),
            ("feas_tol", self.feas_tol),
            ("gap_tol", self.gap_tol),
        ] {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(Error::ContractViolation(format!(
                    "{name} = {v} outside (0, 1e-2]"
                )));
            }
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::ContractViolation(format!(
                "tau = {} must be >= 0",
                self.tau
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::ContractViolation("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Success,
    Failure,
}

impl Verdict {
    pub fn is_success(self) -> bool {
        self == Verdict::Success
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpDiagnostics {
    pub status: LpStatus,
    pub iterations: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub duality_gap: f64,
    /// The iterate was replaced by an exact refit on its support.
    pub polished: bool,
}

/// An ℓ1 minimizer for given measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Solution {
    pub d: Vector,
    pub l1_norm: f64,
    pub lp_diag: LpDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaspResult {
    pub d: Vector,
    pub verdict: Verdict,
    pub l1_norm: f64,
    pub deviation: f64,
    pub lp_diag: LpDiagnostics,
}

/// `{i : |v_i| > tau}` in increasing order.
pub fn threshold_support(v: &[f64], tau: f64) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.abs() > tau)
        .map(|(i, _)| i)
        .collect()
}

pub fn l0_norm(v: &[f64], tau: f64) -> usize {
    v.iter().filter(|x| x.abs() > tau).count()
}

/// Split-variable LP: variables `(d+, d-) >= 0`, cost `sum(d+ + d-)`,
/// constraints `F d+ - F d- = ỹ`.
pub fn encode_basp(f: &Matrix, y_tilde: &[f64]) -> Result<StandardFormLp> {
    if y_tilde.len() != f.rows() {
        return Err(Error::DimensionMismatch {
            expected: f.rows(),
            found: y_tilde.len(),
        });
    }
    let m = f.cols();
    let mut entries = Vec::with_capacity(2 * m * f.rows());
    for i in 0..f.rows() {
        entries.extend_from_slice(f.row(i));
        entries.extend(f.row(i).iter().map(|x| -x));
    }
    StandardFormLp::new(
        Vector::new(vec![1.0; 2 * m])?,
        Matrix::new(f.rows(), 2 * m, entries)?,
        Vector::new(y_tilde.to_vec())?,
    )
}

/// Refits the interior-point iterate on its numerical support. Returns the
/// refit only when it is an exact, no-worse ℓ1 solution on a support with
/// full column rank, in which case it is the unique minimizer on that face.
fn polish(f: &Matrix, y: &[f64], d: &[f64], tol: &Tolerances) -> Option<Vec<f64>> {
    let support = threshold_support(d, tol.tau);
    let y_scale = 1.0 + norm_inf(y);
    if support.is_empty() {
        return (norm_inf(y) <= POLISH_RESIDUAL * y_scale).then(|| vec![0.0; d.len()]);
    }
    if support.len() > f.rows() {
        return None;
    }
    let qr = HouseholderQr::factor(f.columns_of(&support));
    let x = qr.solve_least_squares(y).ok()?;
    let mut refit = vec![0.0; d.len()];
    for (&j, &v) in support.iter().zip(&x) {
        refit[j] = v;
    }
    let residual = f
        .mul_slice(&refit)
        .iter()
        .zip(y)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    let l1_old = norm1(d);
    let shift = support
        .iter()
        .fold(0.0f64, |acc, &j| acc.max((refit[j] - d[j]).abs()));
    let ok = residual <= POLISH_RESIDUAL * y_scale
        && norm1(&refit) <= l1_old + tol.gap_tol * (1.0 + l1_old)
        && shift <= POLISH_MAX_SHIFT;
    ok.then_some(refit)
}

/// Solves basis pursuit for measurements `y_tilde`.
pub fn basp_solve(f: &Matrix, y_tilde: &[f64], tol: &Tolerances) -> Result<L1Solution> {
    let lp = encode_basp(f, y_tilde)?;
    let sol = solve_lp(&lp, &tol.lp_options())?;
    let (Some(x), LpStatus::Optimal) = (sol.x.as_ref(), sol.status) else {
        return Err(Error::DecodeFailed {
            status: sol.status,
            iterations: sol.iterations,
            primal_residual: sol.primal_residual,
            duality_gap: sol.duality_gap,
        });
    };
    let m = f.cols();
    let raw: Vec<f64> = (0..m).map(|i| x[i] - x[m + i]).collect();
    let refit = polish(f, y_tilde, &raw, tol);
    let polished = refit.is_some();
    let d = Vector::new(refit.unwrap_or(raw))?;

    let residual = f
        .mul_slice(&d)
        .iter()
        .zip(y_tilde)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    if residual > 1e-7 * (1.0 + norm_inf(y_tilde)) {
        return Err(Error::ContractViolation(format!(
            "decoded vector misses the measurements by {residual:e}"
        )));
    }
    Ok(L1Solution {
        l1_norm: d.norm1(),
        d,
        lp_diag: LpDiagnostics {
            status: sol.status,
            iterations: sol.iterations,
            objective: sol.objective,
            primal_residual: sol.primal_residual,
            duality_gap: sol.duality_gap,
            polished,
        },
    })
}

/// Decodes `ỹ = F e` and judges whether the minimizer recovers `e`.
///
/// A different minimizer of equal ℓ1 norm is a failure.
pub fn basp_decode(f: &Matrix, e: &[f64], tol: &Tolerances) -> Result<BaspResult> {
    if e.len() != f.cols() {
        return Err(Error::DimensionMismatch {
            expected: f.cols(),
            found: e.len(),
        });
    }
    tol.validate()?;
    let y = f.mul_slice(e);
    let sol = basp_solve(f, &y, tol)?;
    let deviation = sol
        .d
        .iter()
        .zip(e)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    let verdict = if deviation <= tol.eps_fail {
        Verdict::Success
    } else {
        Verdict::Failure
    };
    Ok(BaspResult {
        d: sol.d,
        verdict,
        l1_norm: sol.l1_norm,
        deviation,
        lp_diag: sol.lp_diag,
    })
}
