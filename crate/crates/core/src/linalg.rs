//! Dense real matrices and vectors.
//!
//! Storage is row-major `f64`. Only what the decoders and oracles need is
//! provided: products, Householder QR (row orthonormalization and least
//! squares), Gaussian sampling, and null-space projection.

use std::fmt::Write as _;
use std::fs;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{Purpose, SeededStream};

/// Pivot ratio below which a Householder diagonal counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Entries at or below this magnitude are treated as zero when picking the
/// sign of an orthonormalized row.
const SIGN_EPS: f64 = 1e-12;

const NULL_SPACE_RESIDUAL: f64 = 1e-9;
const NULL_SPACE_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    entries: Vec<f64>,
}

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { entries })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            entries: vec![0.0; len],
        }
    }

    /// Builds a length-`len` vector from `(index, value)` pairs.
    pub fn from_sparse(len: usize, pairs: &[(usize, f64)]) -> Result<Self> {
        let mut entries = vec![0.0; len];
        for &(i, v) in pairs {
            if i >= len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: i + 1,
                });
            }
            entries[i] = v;
        }
        Self::new(entries)
    }

    /// Nonzero entries as `(index, value)` pairs in increasing index order.
    pub fn to_sparse(&self) -> Vec<(usize, f64)> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.entries
    }

    pub fn norm1(&self) -> f64 {
        norm1(&self.entries)
    }

    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.entries)
    }

    pub fn norm2(&self) -> f64 {
        dot(&self.entries, &self.entries).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector {
            entries: self.entries.iter().map(|x| x * factor).collect(),
        }
    }

    /// Copy with every entry of magnitude `<= tau` set to exactly zero.
    pub fn thresholded(&self, tau: f64) -> Vector {
        Vector {
            entries: self
                .entries
                .iter()
                .map(|&x| if x.abs() > tau { x } else { 0.0 })
                .collect(),
        }
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.entries
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.entries
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions { rows, cols });
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        if let Some(i) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Columns `support` of `self`, each as an owned vector.
    pub fn columns_of(&self, support: &[usize]) -> Vec<Vec<f64>> {
        support.iter().map(|&j| self.column(j)).collect()
    }

    /// `self * v` without dimension checks on a raw slice.
    pub(crate) fn mul_slice(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self^T * w` on a raw slice.
    pub(crate) fn mul_transpose_slice(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            axpy(wi, self.row(i), &mut out);
        }
        out
    }

    /// Largest entry of `|self * self^T - I|`.
    pub fn max_gram_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.rows {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(self.row(i), self.row(j)) - target).abs());
            }
        }
        worst
    }

    /// SHA-256 over the shape and the IEEE-754 bits of every entry.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"csisa-matrix-v1");
        hasher.update((self.rows as u64).to_le_bytes());
        hasher.update((self.cols as u64).to_le_bytes());
        for x in &self.entries {
            hasher.update(x.to_bits().to_le_bytes());
        }
        format!("sha256:{}", hex::encode(hasher.finalize()))
    }

    /// Text form: a `rows cols` header, then one line of `cols` values per row.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|x| format!("{x:e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad header {header:?}")))
            })
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Parse(format!(
                "header must be `rows cols`, got {header:?}"
            )));
        };
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing row {r}")))?;
            let before = entries.len();
            for tok in line.split_whitespace() {
                entries.push(parse_real(tok)?);
            }
            if entries.len() - before != cols {
                return Err(Error::Parse(format!(
                    "row {r} has {} values, expected {cols}",
                    entries.len() - before
                )));
            }
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing data after last row".into()));
        }
        Matrix::new(rows, cols, entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Text form of a vector: a `len` header, then one value per line.
pub fn vector_to_text(v: &Vector) -> String {
    let mut out = format!("{}\n", v.len());
    for x in v.iter() {
        let _ = writeln!(out, "{x:e}");
    }
    out
}

pub fn vector_from_text(text: &str) -> Result<Vector> {
    let mut tokens = text.split_whitespace();
    let len: usize = tokens
        .next()
        .ok_or_else(|| Error::Parse("empty vector file".into()))?
        .parse()
        .map_err(|_| Error::Parse("bad vector header".into()))?;
    let entries = tokens.map(parse_real).collect::<Result<Vec<_>>>()?;
    if entries.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            found: entries.len(),
        });
    }
    Vector::new(entries)
}

fn parse_real(tok: &str) -> Result<f64> {
    tok.parse()
        .map_err(|_| Error::Parse(format!("not a real number: {tok:?}")))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Eight fixed accumulators: vectorizes, and the summation order stays
    // identical from run to run.
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (xa, xb) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += xa[l] * xb[l];
        }
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Result<Matrix> {
    if rows == 0 || cols == 0 || rows > cols {
        return Err(Error::InvalidDimensions { rows, cols });
    }
    let mut stream = SeededStream::for_purpose(seed, Purpose::Matrix);
    let entries = (0..rows * cols).map(|_| stream.standard_normal()).collect();
    Matrix::new(rows, cols, entries)
}

pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vector> {
    if v.len() != m.cols {
        return Err(Error::DimensionMismatch {
            expected: m.cols,
            found: v.len(),
        });
    }
    Vector::new(m.mul_slice(v))
}

pub fn matvec_transpose(m: &Matrix, w: &[f64]) -> Result<Vector> {
    if w.len() != m.rows {
        return Err(Error::DimensionMismatch {
            expected: m.rows,
            found: w.len(),
        });
    }
    Vector::new(m.mul_transpose_slice(w))
}

/// Householder QR of the tall matrix whose columns are `columns`.
///
/// Columns must share one length `n >= columns.len()`.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    n: usize,
    reflectors: Vec<Vec<f64>>,
    betas: Vec<f64>,
    /// Upper-triangular factor, `r[i][j]` for `i <= j`.
    r: Vec<Vec<f64>>,
}

impl HouseholderQr {
    pub fn factor(mut columns: Vec<Vec<f64>>) -> Self {
        let k = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        debug_assert!(columns.iter().all(|c| c.len() == n));
        let mut reflectors = Vec::with_capacity(k);
        let mut betas = Vec::with_capacity(k);
        let mut r = vec![vec![0.0; k]; k];
        for j in 0..k.min(n) {
            let x = &columns[j][j..];
            let sigma = dot(x, x).sqrt();
            let mut v = x.to_vec();
            let alpha = if x[0] >= 0.0 { -sigma } else { sigma };
            v[0] -= alpha;
            let vnorm2 = dot(&v, &v);
            let beta = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };
            for col in columns.iter_mut().skip(j) {
                let tail = &mut col[j..];
                let s = beta * dot(&v, tail);
                axpy(-s, &v, tail);
            }
            for (l, col) in columns.iter().enumerate().skip(j) {
                for (i, row) in r.iter_mut().enumerate().take(j + 1) {
                    row[l] = col[i];
                }
            }
            reflectors.push(v);
            betas.push(beta);
        }
        Self {
            n,
            reflectors,
            betas,
            r,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.reflectors.len()).map(|j| self.r[j][j]).collect()
    }

    /// Number of diagonal pivots at or above `RANK_TOL` times the largest.
    pub fn numerical_rank(&self) -> usize {
        let diag = self.diagonal();
        let max = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if max == 0.0 {
            return 0;
        }
        diag.iter().filter(|d| d.abs() >= RANK_TOL * max).count()
    }

    pub fn is_full_rank(&self) -> bool {
        self.reflectors.len() == self.r.len() && self.numerical_rank() == self.r.len()
    }

    fn apply_qt(&self, b: &mut [f64]) {
        for (j, (v, &beta)) in self.reflectors.iter().zip(&self.betas).enumerate() {
            let tail = &mut b[j..];
            let s = beta * dot(v, tail);
            axpy(-s, v, tail);
        }
    }

    fn apply_q(&self, b: &mut [f64]) {
        for (j, (v, &beta)) in self.reflectors.iter().zip(&self.betas).enumerate().rev() {
            let tail = &mut b[j..];
            let s = beta * dot(v, tail);
            axpy(-s, v, tail);
        }
    }

    /// Thin orthonormal factor, returned column by column.
    pub fn thin_q(&self) -> Vec<Vec<f64>> {
        (0..self.reflectors.len())
            .map(|j| {
                let mut e = vec![0.0; self.n];
                e[j] = 1.0;
                self.apply_q(&mut e);
                e
            })
            .collect()
    }

    /// Orthonormal basis of the orthogonal complement of the column space.
    pub fn complement_basis(&self) -> Vec<Vec<f64>> {
        (self.reflectors.len()..self.n)
            .map(|j| {
                let mut e = vec![0.0; self.n];
                e[j] = 1.0;
                self.apply_q(&mut e);
                e
            })
            .collect()
    }

    /// Least-squares solution of `A x ≈ b`. Fails on rank deficiency.
    pub fn solve_least_squares(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: b.len(),
            });
        }
        if !self.is_full_rank() {
            return Err(Error::RankDeficient {
                rank: self.numerical_rank(),
                rows: self.r.len(),
            });
        }
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let k = self.r.len();
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = qtb[i];
            for j in i + 1..k {
                s -= self.r[i][j] * x[j];
            }
            x[i] = s / self.r[i][i];
        }
        Ok(x)
    }

    /// Minimum-norm solution of the underdetermined system `A^T w = s`.
    pub fn solve_min_norm_transposed(&self, s: &[f64]) -> Result<Vec<f64>> {
        let k = self.r.len();
        if s.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: s.len(),
            });
        }
        if !self.is_full_rank() {
            return Err(Error::RankDeficient {
                rank: self.numerical_rank(),
                rows: k,
            });
        }
        // A = QR, so A^T w = R^T (Q^T w) = s; take Q^T w = z from the
        // triangular solve and w = Q z.
        let mut z = vec![0.0; k];
        for i in 0..k {
            let mut acc = s[i];
            for (j, zj) in z.iter().enumerate().take(i) {
                acc -= self.r[j][i] * zj;
            }
            z[i] = acc / self.r[i][i];
        }
        let mut w = vec![0.0; self.n];
        w[..k].copy_from_slice(&z);
        self.apply_q(&mut w);
        Ok(w)
    }
}

/// Orthonormal basis of the row space of `m`, returned as the rows of a
/// matrix with the same shape. The first entry of each row with magnitude
/// above 1e-12 is made positive.
pub fn orthonormalize_rows(m: &Matrix) -> Result<Matrix> {
    if m.rows > m.cols {
        return Err(Error::InvalidDimensions {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let columns: Vec<Vec<f64>> = (0..m.rows).map(|i| m.row(i).to_vec()).collect();
    let qr = HouseholderQr::factor(columns);
    let rank = qr.numerical_rank();
    if rank < m.rows {
        return Err(Error::RankDeficient { rank, rows: m.rows });
    }
    let mut rows = qr.thin_q();
    for row in &mut rows {
        if let Some(first) = row.iter().find(|x| x.abs() > SIGN_EPS) {
            if *first < 0.0 {
                row.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    Matrix::from_rows(&rows)
}

/// A nonzero vector `e` with `F e ≈ 0`, built by projecting a Gaussian draw
/// onto the null space of `f`. Requires orthonormal rows.
pub fn null_space_sample(f: &Matrix, seed: u64) -> Result<Vector> {
    if f.rows >= f.cols {
        return Err(Error::InvalidDimensions {
            rows: f.rows,
            cols: f.cols,
        });
    }
    let mut stream = SeededStream::for_purpose(seed, Purpose::NullSpace);
    for _ in 0..NULL_SPACE_ATTEMPTS {
        let v: Vec<f64> = (0..f.cols).map(|_| stream.standard_normal()).collect();
        let mut e = v.clone();
        // Two projection passes keep the residual at rounding level.
        for _ in 0..2 {
            let coeffs = f.mul_slice(&e);
            let back = f.mul_transpose_slice(&coeffs);
            axpy(-1.0, &back, &mut e);
        }
        let residual = norm_inf(&f.mul_slice(&e));
        let size = dot(&e, &e).sqrt();
        if residual > NULL_SPACE_RESIDUAL {
            return Err(Error::NotOrthonormal(f.max_gram_deviation()));
        }
        if size > 1e-12 * dot(&v, &v).sqrt() {
            return Vector::new(e);
        }
    }
    Err(Error::DegenerateSample(NULL_SPACE_ATTEMPTS))
}
