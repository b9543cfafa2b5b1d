use c3e::entropy::{entropy_transition, gaussian_bound_entropy, histogram_entropy, Binning, MatrixSample};
use c3e::matrix_io::{read_matrix, write_binary};
use c3e::LN_2PI_E;
use proptest::prelude::*;

fn sample(rows: usize, cols: usize, values: Vec<f64>) -> MatrixSample {
    MatrixSample::new(rows, cols, values, "test").unwrap()
}

fn arb_matrix() -> impl Strategy<Value = MatrixSample> {
    (1usize..20, 1usize..20).prop_flat_map(|(r, c)| {
        prop::collection::vec(-100.0f64..100.0, r * c).prop_map(move |v| sample(r, c, v))
    })
}

#[test]
fn gaussian_bound_of_known_variance() {
    // entries ±1: population variance 1
    let m = sample(2, 2, vec![1.0, -1.0, 1.0, -1.0]);
    let h = gaussian_bound_entropy(&m).unwrap();
    assert!((h.value - 0.5 * LN_2PI_E).abs() < 1e-15);
}

#[test]
fn constant_matrix() {
    let m = sample(3, 3, vec![2.5; 9]);
    assert!(gaussian_bound_entropy(&m).is_err());
    assert_eq!(histogram_entropy(&m, Binning::Auto).unwrap().value, 0.0);
}

#[test]
fn equifrequent_bins_give_ln_k() {
    for k in [2usize, 3, 7, 16] {
        let values: Vec<f64> = (0..k * 5).map(|i| (i % k) as f64).collect();
        let m = sample(k, 5, values);
        let h = histogram_entropy(&m, Binning::Count(k)).unwrap();
        assert!((h.value - (k as f64).ln()).abs() < 1e-12, "k={k}");
        assert_eq!(h.support_size, Some(k));
    }
}

#[test]
fn transition_flags_collapse() {
    let wide = sample(4, 4, (0..16).map(f64::from).collect());
    let flat = sample(4, 4, vec![1.0; 16]);
    let t = entropy_transition(&[wide.clone(), wide, flat], Binning::Auto, 0.05).unwrap();
    assert_eq!(t.first_collapse, Some(2));
    assert!(!t.layers[1].collapsed);
}

#[test]
fn binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let values = vec![0.5, -1.25, 3.0, 1e-300, f64::MAX, -0.0];
    write_binary(&path, 2, 3, &values).unwrap();
    let m = read_matrix(&path).unwrap();
    assert_eq!(m.shape(), (2, 3));
    assert_eq!(m.values(), values.as_slice());
}

#[test]
fn text_matrices_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    std::fs::write(&path, "1 2 3\n4 5 6\n").unwrap();
    let m = read_matrix(&path).unwrap();
    assert_eq!(m.shape(), (2, 3));
    std::fs::write(&path, "1 2\n3\n").unwrap();
    assert!(read_matrix(&path).is_err());
}

proptest! {
    #[test]
    fn histogram_capped_by_entry_count(m in arb_matrix(), bins in 1usize..64) {
        let cap = (m.len() as f64).ln() + 1e-12;
        prop_assert!(histogram_entropy(&m, Binning::Auto).unwrap().value <= cap);
        prop_assert!(histogram_entropy(&m, Binning::Count(bins)).unwrap().value <= cap);
    }

    #[test]
    fn histogram_ignores_entry_order(m in arb_matrix(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut v = m.values().to_vec();
        v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (r, c) = m.shape();
        let p = sample(r, c, v);
        prop_assert_eq!(
            histogram_entropy(&m, Binning::Auto).unwrap().value,
            histogram_entropy(&p, Binning::Auto).unwrap().value
        );
    }

    #[test]
    fn gaussian_scaling_law(m in arb_matrix(), idx in 0usize..3) {
        let c = [2.0, 10.0, 0.5][idx];
        prop_assume!(gaussian_bound_entropy(&m).is_ok());
        let h = gaussian_bound_entropy(&m).unwrap().value;
        let hc = gaussian_bound_entropy(&m.scaled(c).unwrap()).unwrap().value;
        prop_assert!((hc - h - c.ln()).abs() < 1e-10);
    }
}
