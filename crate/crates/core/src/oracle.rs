//! Ground truth that does not go through the interior-point solver.
//!
//! [`l0_oracle`] enumerates supports to find the sparsest exact fit of the
//! measurements. [`dual_certificate`] decides whether a vector is the unique
//! ℓ1 minimizer for its own measurements: with `S` its support and
//! `s = sign(d_S)`, that holds exactly when `F_S` has full column rank and
//! some `w` satisfies `F_S^T w = s` with `|F_j^T w| < 1` off `S`. The best
//! such `w` is found with a small dense simplex.

use serde::{Deserialize, Serialize};

use crate::basp::{threshold_support, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf, HouseholderQr, Matrix, Vector};

/// Largest number of supports `l0_oracle` will enumerate.
pub const SUPPORT_BUDGET: u128 = 10_000_000;
/// A support fits when the least-squares residual is at most this.
pub const FIT_TOL: f64 = 1e-8;
/// Margin separating strict from boundary certificates.
pub const CERT_MARGIN: f64 = 1e-8;

const PIVOT_EPS: f64 = 1e-12;
const SIMPLEX_MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsestSolution {
    pub d: Vector,
    pub k: usize,
    pub support: Vec<usize>,
    pub residual: f64,
    pub supports_examined: u64,
    /// Number of size-`k` supports that fit; 1 means the sparsest fit is
    /// unique at that size.
    pub fitting_supports: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub w: Vector,
    /// `max_{j ∉ S} |F_j^T w|`.
    pub max_off_support: f64,
    /// `||F_S^T w - sign(d_S)||_inf`.
    pub equality_residual: f64,
    pub strict: bool,
}

impl DualCertificate {
    /// Neither clearly strict nor clearly violated.
    pub fn is_boundary(&self) -> bool {
        (self.max_off_support - 1.0).abs() <= CERT_MARGIN
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Advances `idx` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn fit_support(f: &Matrix, y: &[f64], support: &[usize]) -> Option<(Vec<f64>, f64)> {
    let qr = HouseholderQr::factor(f.columns_of(support));
    let x = qr.solve_least_squares(y).ok()?;
    let mut fitted = vec![0.0; f.rows()];
    for (&j, &xj) in support.iter().zip(&x) {
        for (i, fi) in fitted.iter_mut().enumerate() {
            *fi += f.get(i, j) * xj;
        }
    }
    let residual = fitted
        .iter()
        .zip(y)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Some((x, residual))
}

/// Sparsest `d` with `F d = ỹ`, by enumerating supports of size
/// `1..=k_max` in lexicographic order. `None` when nothing up to `k_max`
/// fits.
pub fn l0_oracle(f: &Matrix, y_tilde: &[f64], k_max: usize) -> Result<Option<SparsestSolution>> {
    if y_tilde.len() != f.rows() {
        return Err(Error::DimensionMismatch {
            expected: f.rows(),
            found: y_tilde.len(),
        });
    }
    let m = f.cols();
    let k_max = k_max.min(m);
    let total: u128 = (1..=k_max as u64).map(|k| binomial(m as u64, k)).sum();
    if total > SUPPORT_BUDGET {
        return Err(Error::CombinatorialBudgetExceeded(total));
    }
    if norm_inf(y_tilde) <= FIT_TOL {
        return Ok(Some(SparsestSolution {
            d: Vector::zeros(m),
            k: 0,
            support: Vec::new(),
            residual: norm_inf(y_tilde),
            supports_examined: 0,
            fitting_supports: 1,
        }));
    }
    let mut examined = 0u64;
    for k in 1..=k_max {
        let mut idx: Vec<usize> = (0..k).collect();
        let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
        let mut fitting = 0u64;
        loop {
            examined += 1;
            if let Some((x, residual)) = fit_support(f, y_tilde, &idx) {
                if residual <= FIT_TOL {
                    fitting += 1;
                    if best.is_none() {
                        best = Some((idx.clone(), x, residual));
                    }
                }
            }
            if !next_combination(&mut idx, m) {
                break;
            }
        }
        if let Some((support, x, residual)) = best {
            let mut d = vec![0.0; m];
            for (&j, &v) in support.iter().zip(&x) {
                d[j] = v;
            }
            return Ok(Some(SparsestSolution {
                d: Vector::new(d)?,
                k,
                support,
                residual,
                supports_examined: examined,
                fitting_supports: fitting,
            }));
        }
    }
    Ok(None)
}

/// Minimizes `max_j |a_j + b_j^T z|` over `z`, returning `(z, optimum)`.
///
/// With `T = max |a_j|`, substitute `t = T - u` and `z = z+ - z-`:
/// maximize `u` subject to `B z + u <= T - a` and `-B z + u <= T + a`, all
/// variables nonnegative. The right-hand sides are nonnegative, so the slack
/// basis is feasible and a single phase with Bland's rule suffices.
fn chebyshev_fit(a: &[f64], b: &[Vec<f64>], r: usize) -> Result<(Vec<f64>, f64)> {
    let q = a.len();
    let top = norm_inf(a);
    if r == 0 || q == 0 {
        return Ok((vec![0.0; r], top));
    }
    let n_struct = 2 * r + 1;
    let rows = 2 * q;
    let cols = n_struct + rows;
    // Tableau rows: constraints, then the objective (reduced costs of -u).
    let width = cols + 1;
    let mut tab = vec![0.0; (rows + 1) * width];
    for j in 0..q {
        for (sign, row) in [(1.0, j), (-1.0, q + j)] {
            let base = row * width;
            for l in 0..r {
                tab[base + l] = sign * b[j][l];
                tab[base + r + l] = -sign * b[j][l];
            }
            tab[base + 2 * r] = 1.0;
            tab[base + n_struct + row] = 1.0;
            tab[base + cols] = top - sign * a[j];
        }
    }
    let obj = rows * width;
    tab[obj + 2 * r] = -1.0;
    let mut basis: Vec<usize> = (n_struct..cols).collect();

    for _ in 0..SIMPLEX_MAX_PIVOTS {
        let Some(enter) = (0..cols).find(|&c| tab[obj + c] < -PIVOT_EPS) else {
            let mut x = vec![0.0; cols];
            for (row, &var) in basis.iter().enumerate() {
                x[var] = tab[row * width + cols];
            }
            let z = (0..r).map(|l| x[l] - x[r + l]).collect();
            return Ok((z, top - x[2 * r]));
        };
        let mut leave: Option<(usize, f64)> = None;
        for row in 0..rows {
            let coef = tab[row * width + enter];
            if coef > PIVOT_EPS {
                let ratio = tab[row * width + cols] / coef;
                let better = match leave {
                    None => true,
                    Some((best_row, best)) => {
                        ratio < best - PIVOT_EPS
                            || (ratio <= best + PIVOT_EPS && basis[row] < basis[best_row])
                    }
                };
                if better {
                    leave = Some((row, ratio));
                }
            }
        }
        let Some((prow, _)) = leave else {
            return Err(Error::ContractViolation(
                "certificate program unbounded; it is bounded by construction".into(),
            ));
        };
        let pivot = tab[prow * width + enter];
        for c in 0..width {
            tab[prow * width + c] /= pivot;
        }
        let pivot_row: Vec<f64> = tab[prow * width..(prow + 1) * width].to_vec();
        for row in 0..=rows {
            if row == prow {
                continue;
            }
            let factor = tab[row * width + enter];
            if factor != 0.0 {
                let dst = &mut tab[row * width..(row + 1) * width];
                for (d, p) in dst.iter_mut().zip(&pivot_row) {
                    *d -= factor * p;
                }
            }
        }
        basis[prow] = enter;
    }
    Err(Error::ContractViolation(
        "certificate simplex did not terminate".into(),
    ))
}

/// Best dual certificate for `d` as an ℓ1 minimizer of `ỹ = F d`.
///
/// `Ok(None)` means no `w` keeps `|F_j^T w| <= 1` off the support, so `d`
/// is not an ℓ1 minimizer at all. A returned certificate is `strict` when
/// the off-support magnitudes stay below `1 - CERT_MARGIN`, which together
/// with full column rank makes `d` the unique minimizer.
pub fn dual_certificate(f: &Matrix, d: &[f64]) -> Result<Option<DualCertificate>> {
    if d.len() != f.cols() {
        return Err(Error::DimensionMismatch {
            expected: f.cols(),
            found: d.len(),
        });
    }
    let tau = Tolerances::default().tau;
    let support = threshold_support(d, tau);
    if support.is_empty() {
        return Err(Error::ContractViolation(
            "certificate needs a nonzero vector".into(),
        ));
    }
    let p = f.rows();
    let k = support.len();
    if k > p {
        return Err(Error::RankDeficientSupport);
    }
    let qr = HouseholderQr::factor(f.columns_of(&support));
    if !qr.is_full_rank() {
        return Err(Error::RankDeficientSupport);
    }
    let signs: Vec<f64> = support.iter().map(|&j| d[j].signum()).collect();
    let w0 = qr.solve_min_norm_transposed(&signs)?;

    let off: Vec<usize> = (0..f.cols()).filter(|j| !support.contains(j)).collect();
    let columns = f.columns_of(&off);
    let a: Vec<f64> = columns.iter().map(|g| dot(g, &w0)).collect();

    let w = if norm_inf(&a) < 1.0 - CERT_MARGIN {
        w0
    } else {
        // w = w0 + N z with N spanning the null space of F_S^T.
        let null_basis = qr.complement_basis();
        let b: Vec<Vec<f64>> = columns
            .iter()
            .map(|g| null_basis.iter().map(|nv| dot(g, nv)).collect())
            .collect();
        let (z, _) = chebyshev_fit(&a, &b, null_basis.len())?;
        let mut w = w0;
        for (nv, zl) in null_basis.iter().zip(&z) {
            for (wi, ni) in w.iter_mut().zip(nv) {
                *wi += zl * ni;
            }
        }
        w
    };

    let max_off_support = columns.iter().fold(0.0f64, |m, g| m.max(dot(g, &w).abs()));
    let equality_residual = support.iter().zip(&signs).fold(0.0f64, |m, (&j, s)| {
        let col = f.column(j);
        m.max((dot(&col, &w) - s).abs())
    });
    if equality_residual > FIT_TOL {
        return Err(Error::ContractViolation(format!(
            "certificate misses the sign pattern by {equality_residual:e}"
        )));
    }
    if max_off_support > 1.0 + CERT_MARGIN {
        return Ok(None);
    }
    Ok(Some(DualCertificate {
        w: Vector::new(w)?,
        max_off_support,
        equality_residual,
        strict: max_off_support < 1.0 - CERT_MARGIN,
    }))
}
