//! Sparsemax against a brute-force projection, and finite-difference checks of
//! every differentiable block.

use fh_tabnet::encoder::{EncoderConfig, EncoderState};
use fh_tabnet::numeric::kernels::sparsemax_row;
use fh_tabnet::numeric::{grad_check, Mode, ParamStore, Tape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{brute_force_projection, random_matrix};

#[test]
fn sparsemax_matches_brute_force_on_1000_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let z: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut p = vec![0.0; 10];
        sparsemax_row(&z, &mut p);
        let oracle = brute_force_projection(&z);
        for (a, b) in p.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-8, "worst deviation {worst}");
}

#[test]
fn projection_is_closest_point_on_simplex() {
    // A second route: no point on a fine grid of the 3-simplex is closer.
    let z = [0.3, 1.1, -0.4];
    let mut p = [0.0; 3];
    sparsemax_row(&z, &mut p);
    let dist = |q: &[f64]| q.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let best = dist(&p);
    let steps = 200;
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let q = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
            assert!(dist(&q) >= best - 1e-12);
        }
    }
}

#[test]
fn linear_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_matrix(&mut rng, 6, 4, 1.0);
    let c = random_matrix(&mut rng, 6, 3, 1.0);
    let mut store = ParamStore::new();
    let w = store.add(random_matrix(&mut rng, 4, 3, 1.0));
    let b = store.add(random_matrix(&mut rng, 1, 3, 1.0));
    let err = grad_check(&mut store, 1e-6, |tape, store| {
        let xv = tape.constant(x.clone());
        let (wv, bv) = (tape.param(store, w), tape.param(store, b));
        let y = tape.affine(xv, wv, bv)?;
        let cv = tape.constant(c.clone());
        let prod = tape.mul(y, cv)?;
        Ok(tape.sum(prod))
    })
    .unwrap();
    assert!(err < 1e-8, "linear relative error {err}");
}

#[test]
fn glu_block_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_matrix(&mut rng, 8, 5, 1.0);
    let c = random_matrix(&mut rng, 8, 3, 1.0);
    let mut store = ParamStore::new();
    let w = store.add(random_matrix(&mut rng, 5, 6, 0.8));
    let scale = store.add(random_matrix(&mut rng, 1, 6, 1.5));
    let shift = store.add(random_matrix(&mut rng, 1, 6, 0.5));
    let err = grad_check(&mut store, 1e-6, |tape, store| {
        let xv = tape.constant(x.clone());
        let wv = tape.param(store, w);
        let h = tape.matmul(xv, wv)?;
        let (s, t) = (tape.param(store, scale), tape.param(store, shift));
        let (h, _) = tape.batch_norm_train(h, s, t, 4, 1e-9)?;
        let g = tape.glu(h)?;
        let cv = tape.constant(c.clone());
        let prod = tape.mul(g, cv)?;
        Ok(tape.sum(prod))
    })
    .unwrap();
    assert!(err < 1e-6, "GLU relative error {err}");
}

#[test]
fn batch_norm_gradient_through_input() {
    // Gradient with respect to the normalized input, not only scale/shift.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = random_matrix(&mut rng, 10, 4, 1.0);
    let mut store = ParamStore::new();
    let x = store.add(random_matrix(&mut rng, 10, 4, 2.0));
    let scale = store.add(random_matrix(&mut rng, 1, 4, 1.5));
    let shift = store.add(random_matrix(&mut rng, 1, 4, 0.5));
    let err = grad_check(&mut store, 1e-6, |tape, store| {
        let xv = tape.param(store, x);
        let (s, t) = (tape.param(store, scale), tape.param(store, shift));
        let (y, _) = tape.batch_norm_train(xv, s, t, 3, 1e-9)?;
        let y2 = tape.mul(y, y)?;
        let cv = tape.constant(c.clone());
        let prod = tape.mul(y2, cv)?;
        Ok(tape.sum(prod))
    })
    .unwrap();
    assert!(err < 1e-5, "BN relative error {err}");
}

#[test]
fn sparsemax_and_entropy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c = random_matrix(&mut rng, 5, 6, 1.0);
    let mut store = ParamStore::new();
    let z = store.add(random_matrix(&mut rng, 5, 6, 1.0));
    let err = grad_check(&mut store, 1e-7, |tape, store| {
        let zv = tape.param(store, z);
        let p = tape.sparsemax(zv);
        let cv = tape.constant(c.clone());
        let prod = tape.mul(p, cv)?;
        let lin = tape.sum(prod);
        let ent = tape.mask_entropy(p, 1e-15);
        let ent = tape.scale(ent, 0.1);
        tape.add(lin, ent)
    })
    .unwrap();
    assert!(err < 1e-4, "sparsemax relative error {err}");
}

#[test]
fn weighted_cross_entropy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let logits = store.add(random_matrix(&mut rng, 7, 4, 2.0));
    let labels = [0, 1, 2, 3, 0, 1, 3];
    let weights = [0.5, 1.0, 2.0, 4.0];
    let err = grad_check(&mut store, 1e-6, |tape, store| {
        let l = tape.param(store, logits);
        tape.cross_entropy(l, &labels, Some(&weights))
    })
    .unwrap();
    assert!(err < 1e-8, "cross-entropy relative error {err}");
}

#[test]
fn full_encoder_loss_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cfg = EncoderConfig::new(2, 3, 3, 3, 5);
    cfg.virtual_batch_size = 4;
    cfg.lambda_sparse = 0.01;
    let base = EncoderState::new(cfg, 9).unwrap();
    let x = random_matrix(&mut rng, 8, 5, 1.5);
    let labels = [0, 1, 2, 0, 1, 2, 0, 1];
    let mut store = base.params().clone();
    let err = grad_check(&mut store, 1e-6, |tape, store| {
        let mut enc = base.clone();
        *enc.params_mut() = store.clone();
        let xv = tape.constant(x.clone());
        let pass = enc.forward(tape, xv, Mode::Training)?;
        enc.loss(tape, &pass, &labels, None)
    })
    .unwrap();
    assert!(err < 1e-4, "encoder relative error {err}");
}

proptest! {
    #[test]
    fn sparsemax_lands_on_simplex(z in prop::collection::vec(-50.0f64..50.0, 1..20)) {
        let mut p = vec![0.0; z.len()];
        sparsemax_row(&z, &mut p);
        let s: f64 = p.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Order preserving: a larger input never gets a smaller output.
        for i in 0..z.len() {
            for j in 0..z.len() {
                if z[i] > z[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn sparsemax_is_shift_invariant(z in prop::collection::vec(-5.0f64..5.0, 2..12), c in -100.0f64..100.0) {
        let mut p = vec![0.0; z.len()];
        let mut q = vec![0.0; z.len()];
        sparsemax_row(&z, &mut p);
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        sparsemax_row(&shifted, &mut q);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn matmul_matches_naive_triple_loop(seed in 0u64..1000, n in 1usize..7, k in 1usize..7, m in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, n, k, 3.0);
        let b = random_matrix(&mut rng, k, m, 3.0);
        let c = a.matmul(&b).unwrap();
        for i in 0..n {
            for j in 0..m {
                let naive: f64 = (0..k).map(|t| a.get(i, t) * b.get(t, j)).sum();
                prop_assert!((c.get(i, j) - naive).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn tape_gradients_agree_with_closed_form() {
    // d/dW sum(X·W) = Xᵀ·1, independent of the finite-difference route.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_matrix(&mut rng, 4, 3, 1.0);
    let mut store = ParamStore::new();
    let w = store.add(random_matrix(&mut rng, 3, 2, 1.0));
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let wv = tape.param(&store, w);
    let y = tape.matmul(xv, wv).unwrap();
    let loss = tape.sum(y);
    let grads = tape.backward(loss).unwrap();
    let g = grads.get(wv).unwrap();
    for r in 0..3 {
        let col_sum: f64 = (0..4).map(|i| x.get(i, r)).sum();
        for c in 0..2 {
            assert!((g.get(r, c) - col_sum).abs() < 1e-14);
        }
    }
}
