//! Instanton search.
//!
//! Starting from a vector on which basis pursuit fails, each step decodes the
//! current vector `e`, forms the residual `e - d`, and keeps its *median*:
//! the fewest largest-magnitude entries carrying at least half of its ℓ1
//! mass. The residual lies in the null space of `F`, so basis pursuit fails on
//! the median too, and the median is never longer than `e`. When the median
//! is strictly shorter it becomes the next vector. When it has the same
//! length, each single-entry removal is decoded: if all of them succeed the
//! median is an instanton, otherwise the first failing removal (lowest index)
//! becomes the next vector. Supports shrink strictly, so a start with `k`
//! nonzeros needs at most `k` steps.

use serde::{Deserialize, Serialize};

use crate::basp::{basp_decode, l0_norm, threshold_support, BaspResult, Tolerances, Verdict};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::rng::{Purpose, SeededStream};

/// Smallest magnitude `random_init` will emit.
pub const MIN_INIT_MAGNITUDE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MedianResult {
    pub median: Vector,
    pub t: usize,
    /// Retained indices, increasing.
    pub support: Vec<usize>,
}

/// Keeps the `t` largest-magnitude entries of `v`, with `t` the smallest
/// count whose magnitudes sum to at least half of `||v||_1`. Magnitude ties
/// go to the lower index.
pub fn median(v: &[f64]) -> Result<MedianResult> {
    let total: f64 = v.iter().map(|x| x.abs()).sum();
    if total == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    let half = total / 2.0;
    let mut acc = 0.0;
    let mut t = 0;
    for &i in &order {
        acc += v[i].abs();
        t += 1;
        if acc >= half {
            break;
        }
    }
    let mut support = order[..t].to_vec();
    support.sort_unstable();
    let mut out = vec![0.0; v.len()];
    for &i in &support {
        out[i] = v[i];
    }
    Ok(MedianResult {
        median: Vector::new(out)?,
        t,
        support,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepCase {
    /// The starting vector.
    Init,
    MedianStep,
    LeaveOneOutStep,
    /// The certified instanton.
    Halt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub case: StepCase,
    pub l0: usize,
    pub verdict: Verdict,
    /// Nonzero entries as `[index, value]` pairs.
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsaTrace {
    pub seed: Option<u64>,
    pub init_k: usize,
    pub steps: Vec<TraceStep>,
}

impl IsaTrace {
    /// Number of search steps taken (every entry after the starting vector).
    pub fn iterations(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    /// Checks strict support descent up to the halt entry and that the halt
    /// entry is no longer than the vector it came from.
    pub fn check_descent(&self) -> Result<()> {
        let Some((last, body)) = self.steps.split_last() else {
            return Err(Error::ContractViolation("empty trace".into()));
        };
        for pair in body.windows(2) {
            if pair[1].l0 >= pair[0].l0 {
                return Err(Error::ContractViolation(format!(
                    "support did not shrink: {} -> {}",
                    pair[0].l0, pair[1].l0
                )));
            }
        }
        if last.case != StepCase::Halt {
            return Err(Error::ContractViolation(
                "trace does not end in a halt".into(),
            ));
        }
        if let Some(prev) = body.last() {
            if last.l0 > prev.l0 {
                return Err(Error::ContractViolation(
                    "instanton longer than its parent".into(),
                ));
            }
        }
        if let Some(bad) = self.steps.iter().find(|s| s.verdict != Verdict::Failure) {
            return Err(Error::ContractViolation(format!(
                "trace entry {:?} decodes correctly",
                bad.case
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstantonRecord {
    pub matrix_id: String,
    /// Length of the error vectors (columns of the matrix).
    pub dim: usize,
    /// ℓ0 norm of the instanton.
    pub length: usize,
    pub instanton: Vec<(usize, f64)>,
    /// Success flag per single-entry removal, in support order.
    pub leave_one_out_verdicts: Vec<bool>,
    pub tolerances: Tolerances,
    pub trace: IsaTrace,
}

impl InstantonRecord {
    pub fn instanton_vector(&self) -> Result<Vector> {
        Vector::from_sparse(self.dim, &self.instanton)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    NextVector(Vector, StepCase),
    Instanton(Vector),
}

enum Advance {
    Next {
        e: Vector,
        case: StepCase,
        decode: Option<BaspResult>,
    },
    Halt {
        e: Vector,
        reductions: Vec<Verdict>,
    },
}

fn zero_entry(v: &Vector, i: usize) -> Vector {
    let mut r = v.clone();
    r.as_mut_slice()[i] = 0.0;
    r
}

fn advance(f: &Matrix, e_prev: &Vector, decode: &BaspResult, tol: &Tolerances) -> Result<Advance> {
    let l0_prev = l0_norm(e_prev, tol.tau);
    let residual: Vec<f64> = e_prev
        .iter()
        .zip(decode.d.iter())
        .map(|(e, d)| e - d)
        .collect();
    let residual = Vector::new(residual)?.thresholded(tol.tau);
    if residual.norm_inf() == 0.0 {
        return Err(Error::ContractViolation(
            "basis pursuit reproduced the current vector; no residual to descend on".into(),
        ));
    }
    let hat = median(&residual)?.median.thresholded(tol.tau);
    let l0_hat = l0_norm(&hat, tol.tau);
    if l0_hat > l0_prev {
        return Err(Error::ContractViolation(format!(
            "median support {l0_hat} exceeds current support {l0_prev}; tolerances are inconsistent"
        )));
    }
    if l0_hat < l0_prev {
        return Ok(Advance::Next {
            e: hat,
            case: StepCase::MedianStep,
            decode: None,
        });
    }
    let support = threshold_support(&hat, tol.tau);
    let mut reductions = Vec::with_capacity(support.len());
    for &i in &support {
        let r = zero_entry(&hat, i);
        let dec = basp_decode(f, &r, tol)?;
        if dec.verdict == Verdict::Failure {
            return Ok(Advance::Next {
                e: r,
                case: StepCase::LeaveOneOutStep,
                decode: Some(dec),
            });
        }
        reductions.push(dec.verdict);
    }
    Ok(Advance::Halt { e: hat, reductions })
}

/// One search step from a vector on which basis pursuit fails.
pub fn isa_step(f: &Matrix, e_prev: &Vector, tol: &Tolerances) -> Result<StepOutcome> {
    let decode = basp_decode(f, e_prev, tol)?;
    if decode.verdict.is_success() {
        return Err(Error::ContractViolation(
            "a search step needs a vector on which basis pursuit fails".into(),
        ));
    }
    Ok(match advance(f, e_prev, &decode, tol)? {
        Advance::Next { e, case, .. } => StepOutcome::NextVector(e, case),
        Advance::Halt { e, .. } => StepOutcome::Instanton(e),
    })
}

fn trace_step(case: StepCase, e: &Vector, tol: &Tolerances, verdict: Verdict) -> TraceStep {
    TraceStep {
        case,
        l0: l0_norm(e, tol.tau),
        verdict,
        entries: e.to_sparse(),
    }
}

/// Runs the search from `e0` to a certified instanton.
pub fn isa_run(
    f: &Matrix,
    e0: &Vector,
    max_steps: usize,
    tol: &Tolerances,
) -> Result<InstantonRecord> {
    tol.validate()?;
    if e0.len() != f.cols() {
        return Err(Error::DimensionMismatch {
            expected: f.cols(),
            found: e0.len(),
        });
    }
    let init_k = l0_norm(e0, tol.tau);
    if max_steps < init_k {
        return Err(Error::ContractViolation(format!(
            "max_steps {max_steps} below initial support {init_k}"
        )));
    }
    let mut decode = basp_decode(f, e0, tol)?;
    if decode.verdict.is_success() {
        return Err(Error::InitNotFailing);
    }
    let mut current = e0.clone();
    let mut steps = vec![trace_step(StepCase::Init, &current, tol, Verdict::Failure)];
    let mut iterations = 0;
    loop {
        if iterations == max_steps {
            return Err(Error::StepBudgetExceeded(max_steps));
        }
        iterations += 1;
        match advance(f, &current, &decode, tol)? {
            Advance::Next {
                e,
                case,
                decode: known,
            } => {
                let next_decode = match known {
                    Some(d) => d,
                    None => basp_decode(f, &e, tol)?,
                };
                if next_decode.verdict.is_success() {
                    return Err(Error::ContractViolation(format!(
                        "basis pursuit recovers the {case:?} output (deviation {:e})",
                        next_decode.deviation
                    )));
                }
                steps.push(trace_step(case, &e, tol, Verdict::Failure));
                current = e;
                decode = next_decode;
            }
            Advance::Halt { e, reductions } => {
                let check = basp_decode(f, &e, tol)?;
                if check.verdict.is_success() {
                    return Err(Error::ContractViolation(format!(
                        "basis pursuit recovers the halting median (deviation {:e})",
                        check.deviation
                    )));
                }
                steps.push(trace_step(StepCase::Halt, &e, tol, Verdict::Failure));
                let trace = IsaTrace {
                    seed: None,
                    init_k,
                    steps,
                };
                trace.check_descent()?;
                return Ok(InstantonRecord {
                    matrix_id: f.content_hash(),
                    dim: f.cols(),
                    length: l0_norm(&e, tol.tau),
                    instanton: e.to_sparse(),
                    leave_one_out_verdicts: reductions.iter().map(|v| v.is_success()).collect(),
                    tolerances: *tol,
                    trace,
                });
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionCheck {
    /// Index of the entry that was zeroed.
    pub index: usize,
    pub verdict: Verdict,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub verdict: Verdict,
    pub deviation: f64,
    pub reductions: Vec<ReductionCheck>,
}

impl CertificationReport {
    /// Basis pursuit fails on the vector and succeeds on every reduction.
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Failure && self.reductions.iter().all(|r| r.verdict.is_success())
    }

    pub fn failing_reductions(&self) -> Vec<usize> {
        self.reductions
            .iter()
            .filter(|r| r.verdict == Verdict::Failure)
            .map(|r| r.index)
            .collect()
    }
}

/// Re-checks the instanton property of `e` from scratch.
pub fn verify_instanton(f: &Matrix, e: &Vector, tol: &Tolerances) -> Result<CertificationReport> {
    let support = threshold_support(e, tol.tau);
    if support.is_empty() {
        return Err(Error::ContractViolation(
            "cannot certify the zero vector".into(),
        ));
    }
    let own = basp_decode(f, e, tol)?;
    let reductions = support
        .iter()
        .map(|&i| {
            let r = basp_decode(f, &zero_entry(e, i), tol)?;
            Ok(ReductionCheck {
                index: i,
                verdict: r.verdict,
                deviation: r.deviation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CertificationReport {
        verdict: own.verdict,
        deviation: own.deviation,
        reductions,
    })
}

/// `k` standard-normal values on a uniformly random support of size `k`.
///
/// Support indices are drawn by a partial Fisher–Yates shuffle; values are
/// then drawn in increasing index order, redrawing any with magnitude below
/// [`MIN_INIT_MAGNITUDE`] so the vector has exactly `k` nonzeros.
pub fn random_init(m: usize, k: usize, seed: u64) -> Result<Vector> {
    if k == 0 || k > m {
        return Err(Error::InvalidK { k, m });
    }
    let mut stream = SeededStream::for_purpose(seed, Purpose::Init);
    let mut idx: Vec<usize> = (0..m).collect();
    for i in 0..k {
        let j = i + stream.below((m - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut support = idx[..k].to_vec();
    support.sort_unstable();
    let mut e = vec![0.0; m];
    for &i in &support {
        e[i] = loop {
            let v = stream.standard_normal();
            if v.abs() >= MIN_INIT_MAGNITUDE {
                break v;
            }
        };
    }
    Vector::new(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, null_space_sample, orthonormalize_rows};
    use proptest::prelude::*;

    fn orthonormal(rows: usize, cols: usize, seed: u64) -> Matrix {
        orthonormalize_rows(&gaussian_matrix(rows, cols, seed).unwrap()).unwrap()
    }

    #[test]
    fn median_examples() {
        let r = median(&[3.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.t, 1);
        assert_eq!(r.median.as_slice(), &[3.0, 0.0, 0.0, 0.0]);

        let r = median(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.t, 2);
        assert_eq!(r.median.as_slice(), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(r.support, vec![0, 1]);

        let r = median(&[-5.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.t, 1);
        assert_eq!(r.median.as_slice(), &[-5.0, 0.0, 0.0]);
    }

    #[test]
    fn median_of_zero_is_an_error() {
        assert!(matches!(median(&[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    proptest! {
        #[test]
        fn median_laws(v in prop::collection::vec(-10.0f64..10.0, 1..40)) {
            prop_assume!(v.iter().any(|x| *x != 0.0));
            let total: f64 = v.iter().map(|x| x.abs()).sum();
            let r = median(&v).unwrap();
            let kept: f64 = r.support.iter().map(|&i| v[i].abs()).sum();
            prop_assert!(kept >= total / 2.0);
            // Minimality: the t-1 largest magnitudes fall short of half.
            let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            let short: f64 = mags[..r.t - 1].iter().sum();
            prop_assert!(short < total / 2.0);
            for (i, x) in r.median.iter().enumerate() {
                if r.support.contains(&i) {
                    prop_assert_eq!(*x, v[i]);
                } else {
                    prop_assert_eq!(*x, 0.0);
                }
            }
        }
    }

    #[test]
    fn random_init_contract() {
        let e = random_init(64, 15, 3).unwrap();
        assert_eq!(l0_norm(&e, 1e-6), 15);
        assert_eq!(e, random_init(64, 15, 3).unwrap());
        assert_ne!(e, random_init(64, 15, 4).unwrap());
        assert!(matches!(
            random_init(5, 6, 0),
            Err(Error::InvalidK { k: 6, m: 5 })
        ));
        assert!(random_init(5, 0, 0).is_err());
    }

    #[test]
    fn run_from_decodable_start_is_rejected() {
        let f = orthonormal(15, 64, 1);
        let mut e = vec![0.0; 64];
        e[3] = 1.0;
        let e = Vector::new(e).unwrap();
        assert!(matches!(
            isa_run(&f, &e, 64, &Tolerances::default()),
            Err(Error::InitNotFailing)
        ));
    }

    #[test]
    fn step_requires_failing_input() {
        let f = orthonormal(15, 64, 1);
        let mut e = vec![0.0; 64];
        e[3] = 1.0;
        let e = Vector::new(e).unwrap();
        assert!(isa_step(&f, &e, &Tolerances::default()).is_err());
    }

    #[test]
    fn seeded_run_reaches_certified_instanton() {
        let f = orthonormal(15, 64, 2024);
        let tol = Tolerances::default();
        let e0 = random_init(64, 15, 7).unwrap();
        let rec = isa_run(&f, &e0, 15, &tol).unwrap();
        assert!(rec.trace.iterations() <= 15);
        rec.trace.check_descent().unwrap();
        assert!(rec.leave_one_out_verdicts.iter().all(|&ok| ok));
        assert_eq!(rec.leave_one_out_verdicts.len(), rec.length);
        let report = verify_instanton(&f, &rec.instanton_vector().unwrap(), &tol).unwrap();
        assert!(report.is_certified(), "{report:?}");
    }

    #[test]
    fn record_survives_json_round_trip() {
        let f = orthonormal(15, 64, 2024);
        let tol = Tolerances::default();
        let rec = isa_run(&f, &random_init(64, 15, 7).unwrap(), 15, &tol).unwrap();
        let text = serde_json::to_string(&rec).unwrap();
        let back: InstantonRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rec);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        let report =
            verify_instanton(&f, &back.instanton_vector().unwrap(), &back.tolerances).unwrap();
        assert!(report.is_certified());
        // Rerunning is bit-identical.
        let again = isa_run(&f, &random_init(64, 15, 7).unwrap(), 15, &tol).unwrap();
        assert_eq!(again, rec);
    }

    #[test]
    fn steps_strictly_shrink() {
        let f = orthonormal(15, 64, 11);
        let tol = Tolerances::default();
        let mut e = random_init(64, 15, 1).unwrap();
        for _ in 0..15 {
            match isa_step(&f, &e, &tol).unwrap() {
                StepOutcome::NextVector(next, _) => {
                    assert!(l0_norm(&next, tol.tau) < l0_norm(&e, tol.tau));
                    e = next;
                }
                StepOutcome::Instanton(i) => {
                    assert!(verify_instanton(&f, &i, &tol).unwrap().is_certified());
                    return;
                }
            }
        }
        panic!("no instanton within 15 steps");
    }

    #[test]
    fn padded_instanton_is_not_certified() {
        let f = orthonormal(15, 64, 2024);
        let tol = Tolerances::default();
        let rec = isa_run(&f, &random_init(64, 15, 7).unwrap(), 15, &tol).unwrap();
        let mut e = rec.instanton_vector().unwrap();
        let free = (0..64).find(|&i| e[i] == 0.0).unwrap();
        e.as_mut_slice()[free] = 1.0;
        let report = verify_instanton(&f, &e, &tol).unwrap();
        assert!(!report.is_certified());
        // Dropping the added entry gives back a failing vector.
        assert!(report.failing_reductions().contains(&free) || report.verdict.is_success());
    }

    #[test]
    fn median_of_null_space_sample_fails() {
        let f = orthonormal(15, 64, 8);
        let tol = Tolerances::default();
        for seed in 0..10 {
            let e = null_space_sample(&f, seed).unwrap();
            let hat = median(&e).unwrap().median;
            assert_eq!(
                basp_decode(&f, &hat, &tol).unwrap().verdict,
                Verdict::Failure
            );
        }
    }
}
