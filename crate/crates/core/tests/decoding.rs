use csisa_core::basp::{basp_decode, Tolerances, Verdict};
use csisa_core::isa::{isa_run, random_init, verify_instanton};
use csisa_core::linalg::{gaussian_matrix, matvec, orthonormalize_rows, Matrix};
use csisa_core::oracle::{dual_certificate, l0_oracle};
use csisa_core::Error;

fn orthonormal(rows: usize, cols: usize, seed: u64) -> Matrix {
    orthonormalize_rows(&gaussian_matrix(rows, cols, seed).unwrap()).unwrap()
}

#[test]
fn sparse_vectors_on_tall_enough_matrices_decode() {
    let f = orthonormal(40, 100, 5);
    let tol = Tolerances::default();
    for seed in 0..20 {
        let e = random_init(100, 3, seed).unwrap();
        assert_eq!(basp_decode(&f, &e, &tol).unwrap().verdict, Verdict::Success);
    }
}

#[test]
fn dense_starts_lead_to_certified_instantons() {
    let f = orthonormal(20, 80, 12);
    let tol = Tolerances::default();
    let mut found = 0;
    for seed in 0..10 {
        let e0 = random_init(80, 20, seed).unwrap();
        match isa_run(&f, &e0, 20, &tol) {
            Ok(record) => {
                found += 1;
                let e = record.instanton_vector().unwrap();
                assert!(verify_instanton(&f, &e, &tol).unwrap().is_certified());
                assert!(record.length <= 20);
                assert!(record.trace.iterations() <= 20);
            }
            Err(Error::InitNotFailing) => {}
            Err(other) => panic!("seed {seed}: {other}"),
        }
    }
    assert!(found > 0);
}

#[test]
fn instanton_is_not_an_l1_minimizer_but_reductions_are() {
    let f = orthonormal(10, 30, 21);
    let tol = Tolerances::default();
    let e0 = random_init(30, 10, 3).unwrap();
    let record = isa_run(&f, &e0, 10, &tol).unwrap();
    let e = record.instanton_vector().unwrap();
    if let Some(c) = dual_certificate(&f, &e).unwrap() {
        assert!(!c.strict);
    }
    for &(i, _) in &record.instanton {
        let mut r = e.clone();
        r.as_mut_slice()[i] = 0.0;
        assert!(dual_certificate(&f, &r).unwrap().is_some_and(|c| c.strict));
    }
}

#[test]
fn sparsest_fit_is_never_longer_than_the_instanton() {
    let f = orthonormal(8, 24, 4);
    let tol = Tolerances::default();
    let e0 = random_init(24, 8, 11).unwrap();
    let record = isa_run(&f, &e0, 8, &tol).unwrap();
    let e = record.instanton_vector().unwrap();
    let y = matvec(&f, &e).unwrap();
    let sol = l0_oracle(&f, &y, record.length).unwrap().unwrap();
    assert!(sol.k <= record.length);
    let fit = matvec(&f, &sol.d).unwrap();
    let miss = fit
        .iter()
        .zip(y.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(miss <= 1e-8);
}
