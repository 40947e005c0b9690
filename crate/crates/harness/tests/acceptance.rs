//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a subset.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use csisa::engine::{generate_matrix, run_trial, TrialOutcome};
use csisa::histogram::Histogram;
use csisa::record::load_record;
use csisa::verify::{verify_record, VerifyOptions};
use csisa_core::basp::{basp_decode, l0_norm, Tolerances, Verdict};
use csisa_core::isa::{median, random_init, verify_instanton};
use csisa_core::linalg::{matvec, null_space_sample, Matrix, Vector};
use csisa_core::lp::{solve_lp, LpOptions, LpStatus, StandardFormLp};
use csisa_core::oracle::{dual_certificate, l0_oracle, FIT_TOL};
use csisa_core::rng::SeededStream;

const SIZES: [(usize, usize, u64); 2] = [(15, 64, 1501), (40, 160, 4001)];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    generate_matrix(rows, cols, seed).expect("matrix generation")
}

/// Median of the thresholded residual never has more entries than `e`.
fn criterion_1() -> Outcome {
    let tol = Tolerances::default();
    let mut violations = 0;
    let mut trivial = 0;
    let mut trials = 0;
    for (rows, cols, seed) in SIZES {
        let f = matrix(rows, cols, seed);
        for t in 0..250u64 {
            let k = 1 + (t as usize % rows);
            let e = random_init(cols, k, 10_000 + t).unwrap();
            let d = basp_decode(&f, &e, &tol).unwrap();
            let r: Vec<f64> = e.iter().zip(d.d.iter()).map(|(a, b)| a - b).collect();
            let r = Vector::new(r).unwrap().thresholded(tol.tau);
            trials += 1;
            if r.norm_inf() == 0.0 {
                trivial += 1;
                continue;
            }
            let m = median(&r).unwrap().median.thresholded(tol.tau);
            if l0_norm(&m, tol.tau) > l0_norm(&e, tol.tau) {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{trials} trials, {violations} violations, {trivial} with zero residual"),
    )
}

/// Basis pursuit fails on the median of any null space vector.
fn criterion_2() -> Outcome {
    let tol = Tolerances::default();
    let mut violations = 0;
    let mut ties = 0;
    let mut samples = 0;
    for (rows, cols, seed) in SIZES {
        let f = matrix(rows, cols, seed);
        for s in 0..200u64 {
            let e = null_space_sample(&f, 20_000 + s).unwrap();
            samples += 1;
            if matvec(&f, &e).unwrap().norm_inf() > 1e-9 {
                violations += 1;
                continue;
            }
            let m = median(&e).unwrap().median;
            let rest = e.norm1() - m.norm1();
            if (m.norm1() - rest).abs() <= 1e-12 * e.norm1() {
                ties += 1;
                eprintln!("criterion 2: tie at {rows}x{cols} sample {s}");
            }
            if basp_decode(&f, &m, &tol).unwrap().verdict != Verdict::Failure {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{samples} samples, {violations} violations, {ties} ties"),
    )
}

struct SearchBatch {
    f: Matrix,
    records: Vec<csisa_core::isa::InstantonRecord>,
}

/// Every search from `init_k = rows` ends certified within `init_k` steps
/// with a strictly descending trace.
fn criterion_3(batches: &mut Vec<SearchBatch>) -> Outcome {
    let tol = Tolerances::default();
    let mut bad = Vec::new();
    let mut discarded = 0;
    let mut runs = 0;
    for (rows, cols, seed) in SIZES {
        let f = matrix(rows, cols, seed);
        let mut records = Vec::new();
        for t in 0..1000u64 {
            runs += 1;
            match run_trial(&f, t, rows, &tol).unwrap() {
                TrialOutcome::Instanton(r) => {
                    let e = r.instanton_vector().unwrap();
                    let certified = verify_instanton(&f, &e, &tol).unwrap().is_certified();
                    let bounded = r.trace.iterations() <= r.trace.init_k;
                    if !(certified && bounded && r.trace.check_descent().is_ok()) {
                        bad.push(format!("{rows}x{cols} seed {t}"));
                    }
                    records.push(*r);
                }
                TrialOutcome::Discarded => discarded += 1,
                TrialOutcome::Failed(msg) => bad.push(format!("{rows}x{cols} seed {t}: {msg}")),
            }
        }
        batches.push(SearchBatch { f, records });
    }
    outcome(
        bad.is_empty(),
        format!(
            "{runs} runs, {} bad {:?}, {discarded} discarded starts",
            bad.len(),
            bad.iter().take(5).collect::<Vec<_>>()
        ),
    )
}

/// Every record from criterion 3 passes the full verify command checks.
fn criterion_4(batches: &[SearchBatch]) -> Outcome {
    let opts = VerifyOptions::default();
    let mut failures = Vec::new();
    let mut total = 0;
    let mut oracle_runs = [0usize; 2];
    for batch in batches {
        for r in &batch.records {
            total += 1;
            let report = verify_record(&batch.f, r, &opts).unwrap();
            for (slot, name) in ["oracle-certificate", "oracle-l0"].iter().enumerate() {
                if report.status_of(name) == Some(csisa::verify::CheckStatus::Pass) {
                    oracle_runs[slot] += 1;
                }
            }
            if !report.passed() {
                failures.push(format!(
                    "seed {:?}: {:?}",
                    r.trace.seed,
                    report.failed_checks()
                ));
            }
        }
    }
    if total == 0 {
        return outcome(false, "no records to verify".into());
    }
    outcome(
        failures.is_empty(),
        format!(
            "{total} records, {} failed {:?}; certificate check ran on {}, l0 check on {}",
            failures.len(),
            failures.iter().take(5).collect::<Vec<_>>(),
            oracle_runs[0],
            oracle_runs[1]
        ),
    )
}

/// Basis pursuit success matches a strict dual certificate, and the ℓ0
/// oracle never does worse than the planted vector.
fn criterion_5() -> Outcome {
    let tol = Tolerances::default();
    let f = matrix(8, 20, 820);
    let mut disagreements = Vec::new();
    let mut boundary = 0;
    let mut oracle_bad = 0;
    let mut successes = 0;
    for s in 0..100u64 {
        let k = 1 + (s as usize % 3);
        let e = random_init(20, k, 30_000 + s).unwrap();
        let verdict = basp_decode(&f, &e, &tol).unwrap().verdict;
        successes += usize::from(verdict.is_success());
        match dual_certificate(&f, &e).unwrap() {
            Some(c) if c.is_boundary() => {
                boundary += 1;
                eprintln!(
                    "criterion 5: boundary certificate at instance {s} ({:.3e})",
                    c.max_off_support
                );
            }
            Some(c) if c.strict => {
                if !verdict.is_success() {
                    disagreements.push(s);
                }
            }
            _ => {
                if verdict.is_success() {
                    disagreements.push(s);
                }
            }
        }
        let y = matvec(&f, &e).unwrap();
        match l0_oracle(&f, &y, k).unwrap() {
            Some(sol) if sol.residual <= FIT_TOL && sol.k <= k => {}
            _ => oracle_bad += 1,
        }
    }
    outcome(
        disagreements.is_empty() && oracle_bad == 0,
        format!(
            "100 instances ({successes} decoded), {} disagreements {:?}, {boundary} boundary excluded, {oracle_bad} bad l0 fits",
            disagreements.len(),
            disagreements
        ),
    )
}

fn run_sample(out: &Path, workers: usize) -> Result<String, String> {
    let res = Command::new(env!("CARGO_BIN_EXE_csisa"))
        .args([
            "sample",
            "--rows",
            "120",
            "--cols",
            "512",
            "--seed",
            "2009",
            "--trials",
            "500",
            "--init-k",
            "40",
            "--base-seed",
            "0",
            "--workers",
        ])
        .arg(workers.to_string())
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&res.stdout).into_owned();
    if !res.status.success() {
        return Err(format!(
            "exit {:?}: {}",
            res.status.code(),
            String::from_utf8_lossy(&res.stderr)
        ));
    }
    Ok(stdout)
}

fn record_paths(dir: &Path) -> Vec<PathBuf> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.join("records"))
        .map(|it| it.map(|e| e.unwrap().path()).collect())
        .unwrap_or_default();
    paths.sort();
    paths
}

/// 120x512 batch: few discards, every record certified, histogram adds up,
/// no instanton shorter than 3.
fn criterion_6(out: &Path) -> Outcome {
    let start = Instant::now();
    let stdout = match run_sample(out, 1) {
        Ok(s) => s,
        Err(e) => return outcome(false, e),
    };
    let elapsed = start.elapsed();
    let mean = stdout
        .lines()
        .find(|l| l.starts_with("mean trial time"))
        .unwrap_or("mean trial time: unknown")
        .to_string();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let instantons = summary["instantons"].as_u64().unwrap();
    let discarded = summary["discarded"].as_u64().unwrap();
    let failed = summary["failed"].as_u64().unwrap();
    let histogram = Histogram::load(&out.join("histogram.csv")).unwrap();
    let reconciles = histogram.instantons() == instantons && instantons + discarded + failed == 500;
    let discard_rate = discarded as f64 / 500.0;

    let f = matrix(120, 512, 2009);
    let opts = VerifyOptions {
        replay: false,
        ..VerifyOptions::default()
    };
    let paths = record_paths(out);
    let mut uncertified = 0;
    let mut min_length = usize::MAX;
    for path in &paths {
        let r = load_record(path).unwrap();
        min_length = min_length.min(r.length);
        if !verify_record(&f, &r, &opts).unwrap().passed() {
            uncertified += 1;
        }
    }
    let passed = failed == 0
        && discard_rate < 0.2
        && uncertified == 0
        && reconciles
        && paths.len() as u64 == instantons
        && min_length >= 3
        && min_length != usize::MAX;
    outcome(
        passed,
        format!(
            "{instantons} instantons, {discarded} discarded ({:.1}%), {failed} failed, {uncertified} uncertified, \
             min length {min_length}, histogram {}; {mean}; batch took {:.0} s\n{}",
            discard_rate * 100.0,
            if reconciles { "reconciles" } else { "does NOT reconcile" },
            elapsed.as_secs_f64(),
            histogram.render().trim_end()
        ),
    )
}

/// Rerunning criterion 6 with 8 workers gives byte-identical output.
fn criterion_7(reference: &Path, out: &Path) -> Outcome {
    if !reference.join("histogram.csv").exists() {
        if let Err(e) = run_sample(reference, 1) {
            return outcome(false, e);
        }
    }
    if let Err(e) = run_sample(out, 8) {
        return outcome(false, e);
    }
    let mut differing = Vec::new();
    for name in ["histogram.csv", "summary.json"] {
        if std::fs::read(reference.join(name)).ok() != std::fs::read(out.join(name)).ok() {
            differing.push(name.to_string());
        }
    }
    let a = record_paths(reference);
    let b = record_paths(out);
    if a.iter()
        .map(|p| p.file_name())
        .ne(b.iter().map(|p| p.file_name()))
    {
        differing.push("record file set".into());
    }
    for (x, y) in a.iter().zip(&b) {
        if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
            differing.push(x.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    outcome(
        differing.is_empty(),
        format!(
            "{} records compared, {} differing {:?}",
            a.len(),
            differing.len(),
            differing.iter().take(5).collect::<Vec<_>>()
        ),
    )
}

/// Random feasible, bounded LPs with a planted feasible point.
fn criterion_8() -> Outcome {
    let opts = LpOptions::default();
    let mut violations = Vec::new();
    for s in 0..200u64 {
        let mut rng = SeededStream::new(40_000 + s);
        let m = 2 + rng.below(19) as usize;
        let n = m + 1 + rng.below(2 * m as u64) as usize;
        let a: Vec<f64> = (0..m * n).map(|_| rng.standard_normal()).collect();
        let a = Matrix::new(m, n, a).unwrap();
        let x0: Vec<f64> = (0..n)
            .map(|_| {
                if rng.below(3) == 0 {
                    0.0
                } else {
                    rng.uniform_open0() * 2.0
                }
            })
            .collect();
        let y0: Vec<f64> = (0..m).map(|_| rng.standard_normal()).collect();
        let complementary = s % 2 == 0;
        let slack: Vec<f64> = x0
            .iter()
            .map(|&x| {
                let u = rng.uniform_open0();
                if complementary && x > 0.0 {
                    0.0
                } else {
                    0.1 + u
                }
            })
            .collect();
        let aty = csisa_core::linalg::matvec_transpose(&a, &y0).unwrap();
        let c: Vec<f64> = aty.iter().zip(&slack).map(|(p, q)| p + q).collect();
        let b = matvec(&a, &x0).unwrap();
        let planted: f64 = c.iter().zip(&x0).map(|(p, q)| p * q).sum();
        let lp =
            StandardFormLp::new(Vector::new(c.clone()).unwrap(), a.clone(), b.clone()).unwrap();
        let sol = solve_lp(&lp, &opts).unwrap();
        let (Some(x), LpStatus::Optimal) = (sol.x.as_ref(), sol.status) else {
            violations.push(format!("#{s} status {:?}", sol.status));
            continue;
        };
        let ax = matvec(&a, x).unwrap();
        let feas = ax
            .iter()
            .zip(b.iter())
            .fold(0.0f64, |acc, (p, q)| acc.max((p - q).abs()));
        let neg = x.iter().fold(0.0f64, |acc, &v| acc.max(-v));
        let obj: f64 = c.iter().zip(x).map(|(p, q)| p * q).sum();
        let by: f64 = b
            .iter()
            .zip(sol.dual.as_ref().unwrap())
            .map(|(p, q)| p * q)
            .sum();
        let gap = (obj - by).abs();
        let feas_ok = feas <= opts.feas_tol * (1.0 + b.norm_inf()) && neg <= opts.feas_tol;
        let gap_ok = gap <= opts.gap_tol * (1.0 + obj.abs());
        let obj_ok = obj <= planted + opts.gap_tol * (1.0 + planted.abs());
        if !(feas_ok && gap_ok && obj_ok) {
            violations.push(format!(
                "#{s} feas {feas:.1e} neg {neg:.1e} gap {gap:.1e} obj {obj} planted {planted}"
            ));
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "200 LPs, {} violations {:?}",
            violations.len(),
            violations.iter().take(5).collect::<Vec<_>>()
        ),
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let wants = |n: u32| selected.is_empty() || selected.contains(&n);
    let scratch = tempfile::TempDir::new().unwrap();
    let reference = scratch.path().join("workers1");
    let mut batches = Vec::new();
    let mut all_passed = true;

    let mut report = |n: u32, name: &str, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = run();
        all_passed &= o.passed;
        println!(
            "criterion {n} {}: {name} ({:.1} s): {}",
            if o.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    };

    if wants(1) {
        report(1, "median never lengthens", &mut criterion_1);
    }
    if wants(2) {
        report(2, "null space medians fail", &mut criterion_2);
    }
    if wants(3) || wants(4) {
        report(3, "search terminates certified", &mut || {
            criterion_3(&mut batches)
        });
    }
    if wants(4) {
        report(4, "records pass verify", &mut || criterion_4(&batches));
    }
    if wants(5) {
        report(5, "oracle equivalence at 8x20", &mut criterion_5);
    }
    if wants(6) {
        report(6, "120x512 batch", &mut || criterion_6(&reference));
    }
    if wants(7) {
        report(7, "worker count determinism", &mut || {
            criterion_7(&reference, &scratch.path().join("workers8"))
        });
    }
    if wants(8) {
        report(8, "LP solver contract", &mut criterion_8);
    }
    if !all_passed {
        std::process::exit(1);
    }
}
