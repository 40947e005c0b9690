//! Standard-form linear programming: `min c^T x` subject to `A x = b`,
//! `x >= 0`.
//!
//! The solver is a homogeneous self-dual interior-point method with a
//! Mehrotra predictor-corrector step (Andersen & Andersen, "The MOSEK
//! interior point optimizer for linear programming"). Each Newton system is
//! reduced to the normal equations `A D A^T` and factored densely. The
//! homogeneous embedding lets the same iteration certify infeasibility and
//! unboundedness.
//!
//! Linearly dependent equality rows are removed before iterating; a
//! dependent row whose right-hand side disagrees with the rest is reported
//! as infeasible straight away.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_inf, Matrix, Vector, RANK_TOL};

const STEP_FRACTION: f64 = 0.99995;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormLp {
    pub c: Vector,
    pub a: Matrix,
    pub b: Vector,
}

impl StandardFormLp {
    pub fn new(c: Vector, a: Matrix, b: Vector) -> Result<Self> {
        if c.len() != a.cols() {
            return Err(Error::MalformedLp(format!(
                "cost has length {} but A has {} columns",
                c.len(),
                a.cols()
            )));
        }
        if b.len() != a.rows() {
            return Err(Error::MalformedLp(format!(
                "rhs has length {} but A has {} rows",
                b.len(),
                a.rows()
            )));
        }
        Ok(Self { c, a, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalBreakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; present iff `status == Optimal`.
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    /// Equality multipliers; present iff `status == Optimal`.
    pub dual: Option<Vec<f64>>,
    pub iterations: usize,
    /// `||A x - b||_inf` on the original rows.
    pub primal_residual: f64,
    /// `||c - A^T y - z||_inf`.
    pub dual_residual: f64,
    /// `|c^T x - b^T y|`.
    pub duality_gap: f64,
    pub reason: Option<String>,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize, reason: impl Into<String>) -> Self {
        Self {
            status,
            x: None,
            objective: f64::NAN,
            dual: None,
            iterations,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            duality_gap: f64::NAN,
            reason: Some(reason.into()),
        }
    }
}

/// Rows kept by presolve, with their orthogonalization run alongside.
struct Presolved {
    kept: Vec<usize>,
}

fn presolve(lp: &StandardFormLp, feas_tol: f64) -> std::result::Result<Presolved, String> {
    let b_scale = 1.0 + lp.b.norm_inf();
    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut kept = Vec::new();
    let mut max_pivot: f64 = 0.0;
    for i in 0..lp.a.rows() {
        let row = lp.a.row(i);
        let row_norm = dot(row, row).sqrt();
        let mut r = row.to_vec();
        let mut rb = lp.b[i];
        for _ in 0..2 {
            for (q, qb) in &basis {
                let coef = dot(q, &r);
                axpy(-coef, q, &mut r);
                rb -= coef * qb;
            }
        }
        let pivot = dot(&r, &r).sqrt();
        if pivot == 0.0 || pivot <= RANK_TOL * row_norm.max(max_pivot) {
            if rb.abs() > feas_tol * b_scale {
                return Err(format!(
                    "equality row {i} is a combination of earlier rows with inconsistent rhs \
                     (mismatch {:e})",
                    rb.abs()
                ));
            }
            continue;
        }
        max_pivot = max_pivot.max(pivot);
        r.iter_mut().for_each(|x| *x /= pivot);
        basis.push((r, rb / pivot));
        kept.push(i);
    }
    Ok(Presolved { kept })
}

/// Dense Cholesky factor of a symmetric positive semidefinite matrix.
///
/// Pivots that collapse relative to the largest diagonal are replaced by a
/// huge value, which zeroes the matching solution component instead of
/// failing the factorization.
struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn factor(mut m: Vec<f64>, n: usize) -> Option<Self> {
        let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(m[i * n + i]));
        let floor = 1e-30 * max_diag.max(1e-300);
        for j in 0..n {
            let row_j = &mut m[j * n..(j + 1) * n];
            let mut d = row_j[j] - dot(&row_j[..j], &row_j[..j]);
            if !d.is_finite() {
                return None;
            }
            if d <= floor {
                d = 1e128;
            }
            let ljj = d.sqrt();
            row_j[j] = ljj;
            let lj = row_j[..j].to_vec();
            for i in j + 1..n {
                let row_i = &mut m[i * n..(i + 1) * n];
                let s = row_i[j] - dot(&row_i[..j], &lj);
                row_i[j] = s / ljj;
            }
        }
        Some(Self { n, l: m })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            y[i] = (y[i] - dot(row, &y[..i])) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

struct Reduced<'a> {
    rows: Vec<&'a [f64]>,
    b: Vec<f64>,
    c: &'a [f64],
    n: usize,
    /// One representative per class of columns equal up to sign; such
    /// columns contribute the same outer product to `A D A^T`.
    representatives: Vec<usize>,
    /// Class of each column, indexing `representatives`.
    class_of: Vec<usize>,
}

impl<'a> Reduced<'a> {
    fn new(rows: Vec<&'a [f64]>, b: Vec<f64>, c: &'a [f64]) -> Self {
        let n = c.len();
        let mut classes: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut representatives = Vec::new();
        let mut class_of = Vec::with_capacity(n);
        for j in 0..n {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            if col.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0) {
                col.iter_mut().for_each(|v| *v = -*v);
            }
            // +0.0 and -0.0 share a class.
            let key = col.iter().map(|v| (v + 0.0).to_bits()).collect();
            let next = representatives.len();
            let class = *classes.entry(key).or_insert(next);
            if class == next {
                representatives.push(j);
            }
            class_of.push(class);
        }
        Self {
            rows,
            b,
            c,
            n,
            representatives,
            class_of,
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| dot(r, x)).collect()
    }

    fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (r, &yi) in self.rows.iter().zip(y) {
            axpy(yi, r, &mut out);
        }
        out
    }

    fn normal_matrix(&self, d: &[f64]) -> Vec<f64> {
        let k = self.rows.len();
        let mut weight = vec![0.0; self.representatives.len()];
        for (&class, dj) in self.class_of.iter().zip(d) {
            weight[class] += dj;
        }
        let sqrt_w: Vec<f64> = weight.iter().map(|v| v.sqrt()).collect();
        let scaled: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                self.representatives
                    .iter()
                    .zip(&sqrt_w)
                    .map(|(&j, s)| r[j] * s)
                    .collect()
            })
            .collect();
        let mut m = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                let v = dot(&scaled[i], &scaled[j]);
                m[i * k + j] = v;
                m[j * k + i] = v;
            }
        }
        m
    }
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

fn max_step(it: &Iterate, d: &Direction, fraction: f64) -> f64 {
    let ratio = |v: &[f64], dv: &[f64]| {
        v.iter()
            .zip(dv)
            .filter(|(_, dvi)| **dvi < 0.0)
            .fold(f64::INFINITY, |m, (vi, dvi)| m.min(vi / -dvi))
    };
    let mut alpha = 1.0f64;
    alpha = alpha.min(fraction * ratio(&it.x, &d.x));
    alpha = alpha.min(fraction * ratio(&it.z, &d.z));
    if d.tau < 0.0 {
        alpha = alpha.min(fraction * it.tau / -d.tau);
    }
    if d.kappa < 0.0 {
        alpha = alpha.min(fraction * it.kappa / -d.kappa);
    }
    alpha
}

/// Solves the homogeneous Newton system through the normal equations.
fn search_direction(prob: &Reduced, it: &Iterate, chol: &Cholesky, dinv: &[f64]) -> Direction {
    let n = prob.n;
    let b = &prob.b;
    let c = prob.c;
    let ax = prob.mul(&it.x);
    let aty = prob.mul_t(&it.y);
    let r_p: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi * it.tau - ai).collect();
    let r_d: Vec<f64> = (0..n).map(|i| c[i] * it.tau - aty[i] - it.z[i]).collect();
    let r_g = dot(c, &it.x) - dot(b, &it.y) + it.kappa;
    let mu = (dot(&it.x, &it.z) + it.tau * it.kappa) / (n as f64 + 1.0);

    let sym_solve = |r1: &[f64], r2: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let dr1: Vec<f64> = dinv.iter().zip(r1).map(|(d, r)| d * r).collect();
        let mut r = prob.mul(&dr1);
        axpy(1.0, r2, &mut r);
        let v = chol.solve(&r);
        let atv = prob.mul_t(&v);
        let u = (0..n).map(|i| dinv[i] * (atv[i] - r1[i])).collect();
        (u, v)
    };

    let (p, q) = sym_solve(c, b);
    let denom_pq = -dot(c, &p) + dot(b, &q);

    let mut gamma = 0.0;
    let mut prev: Option<Direction> = None;
    for pass in 0..2 {
        let eta = 1.0 - gamma;
        let mut rhs_xs: Vec<f64> = (0..n).map(|i| gamma * mu - it.x[i] * it.z[i]).collect();
        let mut rhs_tk = gamma * mu - it.tau * it.kappa;
        if let Some(pred) = &prev {
            for i in 0..n {
                rhs_xs[i] -= pred.x[i] * pred.z[i];
            }
            rhs_tk -= pred.tau * pred.kappa;
        }
        let r1: Vec<f64> = (0..n).map(|i| eta * r_d[i] - rhs_xs[i] / it.x[i]).collect();
        let r2: Vec<f64> = r_p.iter().map(|v| eta * v).collect();
        let (u, v) = sym_solve(&r1, &r2);
        let d_tau = (eta * r_g + rhs_tk / it.tau - (-dot(c, &u) + dot(b, &v)))
            / (it.kappa / it.tau + denom_pq);
        let d_x: Vec<f64> = (0..n).map(|i| u[i] + p[i] * d_tau).collect();
        let d_y: Vec<f64> = v.iter().zip(&q).map(|(vi, qi)| vi + qi * d_tau).collect();
        let d_z: Vec<f64> = (0..n)
            .map(|i| (rhs_xs[i] - it.z[i] * d_x[i]) / it.x[i])
            .collect();
        let d_kappa = (rhs_tk - it.kappa * d_tau) / it.tau;
        let dir = Direction {
            x: d_x,
            y: d_y,
            z: d_z,
            tau: d_tau,
            kappa: d_kappa,
        };
        if pass == 0 {
            let alpha = max_step(it, &dir, 1.0);
            gamma = (1.0 - alpha).powi(2) * (1.0 - alpha).min(0.1);
        }
        prev = Some(dir);
    }
    prev.expect("two passes")
}

fn validate(lp: &StandardFormLp, opts: &LpOptions) -> Result<()> {
    for (name, tol) in [("feas_tol", opts.feas_tol), ("gap_tol", opts.gap_tol)] {
        if !(tol > 0.0 && tol <= 1e-2) {
            return Err(Error::MalformedLp(format!(
                "{name} = {tol} outside (0, 1e-2]"
            )));
        }
    }
    if opts.max_iter == 0 {
        return Err(Error::MalformedLp("max_iter must be at least 1".into()));
    }
    if lp.c.len() != lp.a.cols() || lp.b.len() != lp.a.rows() {
        return Err(Error::MalformedLp("inconsistent dimensions".into()));
    }
    Ok(())
}

pub fn solve_lp(lp: &StandardFormLp, opts: &LpOptions) -> Result<LpSolution> {
    validate(lp, opts)?;
    let presolved = match presolve(lp, opts.feas_tol) {
        Ok(p) => p,
        Err(reason) => return Ok(LpSolution::without_point(LpStatus::Infeasible, 0, reason)),
    };
    let n = lp.a.cols();
    let prob = Reduced::new(
        presolved.kept.iter().map(|&i| lp.a.row(i)).collect(),
        presolved.kept.iter().map(|&i| lp.b[i]).collect(),
        lp.c.as_slice(),
    );
    let k = prob.rows.len();
    let b = &prob.b;
    let c = prob.c;
    let b_scale = 1.0 + norm_inf(b);
    let c_scale = 1.0 + norm_inf(c);

    let mut it = Iterate {
        x: vec![1.0; n],
        y: vec![0.0; k],
        z: vec![1.0; n],
        tau: 1.0,
        kappa: 1.0,
    };

    // Normalizers for the infeasibility indicators: residuals at the start.
    let ones = vec![1.0; n];
    let ax0 = prob.mul(&ones);
    let rp0 = b
        .iter()
        .zip(&ax0)
        .map(|(bi, ai)| (bi - ai).powi(2))
        .sum::<f64>()
        .sqrt();
    let rd0 = c.iter().map(|ci| (ci - 1.0).powi(2)).sum::<f64>().sqrt();
    let rg0 = (c.iter().sum::<f64>() + 1.0).abs();
    let tol = opts.feas_tol.min(opts.gap_tol);

    let mut iterations = 0;
    loop {
        let ax = prob.mul(&it.x);
        let aty = prob.mul_t(&it.y);
        let cx = dot(c, &it.x);
        let by = dot(b, &it.y);

        // Optimality on the de-homogenized point.
        let inv_tau = 1.0 / it.tau;
        let pres = b
            .iter()
            .zip(&ax)
            .fold(0.0f64, |m, (bi, ai)| m.max((bi - ai * inv_tau).abs()));
        let dres = (0..n).fold(0.0f64, |m, i| {
            m.max((c[i] - (aty[i] + it.z[i]) * inv_tau).abs())
        });
        let obj = cx * inv_tau;
        let gap = (cx - by).abs() * inv_tau;
        if pres <= opts.feas_tol * b_scale
            && dres <= opts.feas_tol * c_scale
            && gap <= opts.gap_tol * (1.0 + obj.abs())
        {
            return Ok(finish(lp, &presolved.kept, &it, iterations));
        }

        // Infeasibility / unboundedness indicators on the homogeneous point.
        let rho_p = b
            .iter()
            .zip(&ax)
            .map(|(bi, ai)| (bi * it.tau - ai).powi(2))
            .sum::<f64>()
            .sqrt()
            / rp0.max(1.0);
        let rho_d = (0..n)
            .map(|i| (c[i] * it.tau - aty[i] - it.z[i]).powi(2))
            .sum::<f64>()
            .sqrt()
            / rd0.max(1.0);
        let rho_g = (cx - by + it.kappa).abs() / rg0.max(1.0);
        let mu = (dot(&it.x, &it.z) + it.tau * it.kappa) / (n as f64 + 1.0);
        let degenerate =
            (rho_p < tol && rho_d < tol && rho_g < tol && it.tau < tol * it.kappa.max(1.0))
                || (mu < tol && it.tau < tol * it.kappa.min(1.0));
        if degenerate {
            let status = if by > tol {
                LpStatus::Infeasible
            } else if cx < -tol {
                LpStatus::Unbounded
            } else {
                LpStatus::NumericalBreakdown
            };
            let reason = match status {
                LpStatus::Infeasible => format!("Farkas ray with b^T y = {by:e}"),
                LpStatus::Unbounded => format!("improving ray with c^T x = {cx:e}"),
                _ => "homogeneous iterate collapsed without a certificate".to_string(),
            };
            return Ok(LpSolution::without_point(status, iterations, reason));
        }

        if iterations >= opts.max_iter {
            let mut sol = finish(lp, &presolved.kept, &it, iterations);
            sol.status = LpStatus::IterationLimit;
            sol.x = None;
            sol.dual = None;
            sol.reason = Some(format!("no convergence in {} iterations", opts.max_iter));
            return Ok(sol);
        }

        let dinv: Vec<f64> = it.x.iter().zip(&it.z).map(|(x, z)| x / z).collect();
        let Some(chol) = Cholesky::factor(prob.normal_matrix(&dinv), k) else {
            return Ok(LpSolution::without_point(
                LpStatus::NumericalBreakdown,
                iterations,
                "normal-equations factorization produced non-finite values",
            ));
        };
        let dir = search_direction(&prob, &it, &chol, &dinv);
        let alpha = max_step(&it, &dir, STEP_FRACTION);
        axpy(alpha, &dir.x, &mut it.x);
        axpy(alpha, &dir.y, &mut it.y);
        axpy(alpha, &dir.z, &mut it.z);
        it.tau += alpha * dir.tau;
        it.kappa += alpha * dir.kappa;
        iterations += 1;

        let finite = it.x.iter().chain(&it.y).chain(&it.z).all(|v| v.is_finite())
            && it.tau.is_finite()
            && it.kappa.is_finite();
        if !finite || it.tau <= 0.0 {
            return Ok(LpSolution::without_point(
                LpStatus::NumericalBreakdown,
                iterations,
                format!("iterate became invalid at step {iterations} (alpha {alpha:e})"),
            ));
        }
    }
}

fn finish(lp: &StandardFormLp, kept: &[usize], it: &Iterate, iterations: usize) -> LpSolution {
    let x: Vec<f64> = it.x.iter().map(|v| v / it.tau).collect();
    let mut dual = vec![0.0; lp.a.rows()];
    for (&row, yi) in kept.iter().zip(&it.y) {
        dual[row] = yi / it.tau;
    }
    let z: Vec<f64> = it.z.iter().map(|v| v / it.tau).collect();
    let ax = lp.a.mul_slice(&x);
    let aty = lp.a.mul_transpose_slice(&dual);
    let primal_residual = ax
        .iter()
        .zip(lp.b.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let dual_residual = (0..x.len()).fold(0.0f64, |m, i| m.max((lp.c[i] - aty[i] - z[i]).abs()));
    let objective = dot(&lp.c, &x);
    let duality_gap = (objective - dot(&lp.b, &dual)).abs();
    LpSolution {
        status: LpStatus::Optimal,
        x: Some(x),
        objective,
        dual: Some(dual),
        iterations,
        primal_residual,
        dual_residual,
        duality_gap,
        reason: None,
    }
}
