use csisa_core::linalg::{
    gaussian_matrix, matvec, null_space_sample, orthonormalize_rows, vector_from_text,
    vector_to_text, Matrix, Vector,
};

#[test]
fn orthonormal_rows_over_many_seeds() {
    for (rows, cols) in [(15, 64), (40, 160), (120, 512)] {
        for seed in 0..100 {
            let f = orthonormalize_rows(&gaussian_matrix(rows, cols, seed).unwrap()).unwrap();
            let dev = f.max_gram_deviation();
            assert!(dev <= 1e-12, "{rows}x{cols} seed {seed}: {dev:e}");
        }
    }
}

#[test]
fn null_space_samples_are_annihilated() {
    for (rows, cols) in [(15, 64), (120, 512)] {
        let f = orthonormalize_rows(&gaussian_matrix(rows, cols, 9).unwrap()).unwrap();
        for seed in 0..50 {
            let e = null_space_sample(&f, seed).unwrap();
            assert!(matvec(&f, &e).unwrap().norm_inf() <= 1e-9);
            assert!(e.norm2() > 1e-3);
        }
    }
}

#[test]
fn text_formats_round_trip_bit_exact() {
    let f = orthonormalize_rows(&gaussian_matrix(7, 19, 3).unwrap()).unwrap();
    let back = Matrix::from_text(&f.to_text()).unwrap();
    assert_eq!(back, f);
    assert_eq!(back.content_hash(), f.content_hash());

    let v = Vector::new(vec![1.0 / 3.0, -0.0, 1e-300, -7.25]).unwrap();
    assert_eq!(vector_from_text(&vector_to_text(&v)).unwrap(), v);
}

#[test]
fn hash_depends_on_shape_and_values() {
    let a = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let b = Matrix::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let c = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.000000000000001]).unwrap();
    assert_ne!(a.content_hash(), b.content_hash());
    assert_ne!(a.content_hash(), c.content_hash());
    assert!(a.content_hash().starts_with("sha256:"));
}

#[test]
fn generation_is_seed_deterministic() {
    let a = orthonormalize_rows(&gaussian_matrix(12, 30, 77).unwrap()).unwrap();
    let b = orthonormalize_rows(&gaussian_matrix(12, 30, 77).unwrap()).unwrap();
    let c = orthonormalize_rows(&gaussian_matrix(12, 30, 78).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
