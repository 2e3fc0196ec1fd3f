//! Helpers shared by the integration tests.
#![allow(dead_code)]

use fh_tabnet::data::{generate_separable_fixture, FeatureEncoding, FeatureMatrix, RawTable};
use fh_tabnet::numeric::Matrix;
use fh_tabnet::FHLabel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Euclidean projection onto the simplex by trying every support set and
/// keeping the one that satisfies the KKT conditions.
pub fn brute_force_projection(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    for bits in 1u32..(1 << n) {
        let inside = |i: usize| bits & (1 << i) != 0;
        let support: Vec<usize> = (0..n).filter(|&i| inside(i)).collect();
        let tau = (support.iter().map(|&i| z[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let kkt = (0..n).all(|i| if inside(i) { z[i] > tau } else { z[i] <= tau });
        if kkt {
            return (0..n).map(|i| if inside(i) { z[i] - tau } else { 0.0 }).collect();
        }
    }
    unreachable!("some support set always satisfies the KKT conditions")
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn seeded_matrix(seed: u64, rows: usize, cols: usize, scale: f64) -> Matrix {
    random_matrix(&mut ChaCha8Rng::seed_from_u64(seed), rows, cols, scale)
}

/// The 64-row separable fixture as an encoded feature matrix.
pub fn separable(seed: u64) -> (RawTable, FeatureMatrix, Vec<FHLabel>) {
    let (x, labels) = generate_separable_fixture(16, 8, 4, seed).unwrap();
    let table = RawTable::from_matrix(&x).unwrap().with_labels(labels.clone()).unwrap();
    let fm = FeatureEncoding::fit(&table).unwrap().transform(&table).unwrap();
    (table, fm, labels)
}

pub fn bits(m: &Matrix) -> Vec<u64> {
    m.data().iter().map(|v| v.to_bits()).collect()
}
