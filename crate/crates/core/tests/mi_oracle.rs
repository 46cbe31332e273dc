//! Density-ratio mutual-information estimator against the closed-form
//! Gaussian value: for unit-variance pairs with correlation ρ,
//! I = −½ ln(1 − ρ²).

use dibjscc_core::dib::{density_ratio_mi, discriminator_step};
use dibjscc_core::nn::{AdamConfig, AdamState, Activation, Mlp};
use dibjscc_core::rng::Rng;
use dibjscc_core::tensor::Tensor;

/// Correlated standard-normal pairs as two [n × 1] tensors.
fn gaussian_pairs(n: usize, rho: f32, rng: &mut Rng) -> (Tensor, Tensor) {
    let mut u = Tensor::zeros(&[n, 1]);
    let mut v = Tensor::zeros(&[n, 1]);
    let tail = (1.0 - rho * rho).sqrt();
    for i in 0..n {
        let a = rng.next_normal();
        let b = rng.next_normal();
        u.data_mut()[i] = a;
        v.data_mut()[i] = rho * a + tail * b;
    }
    (u, v)
}

/// Train a fresh discriminator on correlated pairs and estimate the mutual
/// information on held-out pairs. Shared by the unit test here and the
/// acceptance suite.
pub fn gaussian_mi_estimate(rho: f32, seed: u64) -> f32 {
    let n_train = 8192;
    let n_eval = 4096;
    let epochs = 60;
    let batch = 256;
    let mut rng = Rng::new(seed);
    let (u, v) = gaussian_pairs(n_train, rho, &mut rng);
    let (u_eval, v_eval) = gaussian_pairs(n_eval, rho, &mut rng);

    let mut dis = Mlp::new(&[2, 64, 64, 2], Activation::Softmax, &mut rng);
    let mut opt = AdamState::for_net(&dis);
    let adam = AdamConfig::default();
    for _ in 0..epochs {
        let perm = rng.permutation(n_train);
        for chunk in perm.chunks(batch) {
            if chunk.len() < 2 {
                continue;
            }
            let mut yu = Tensor::zeros(&[chunk.len(), 1]);
            let mut yv = Tensor::zeros(&[chunk.len(), 1]);
            for (r, &i) in chunk.iter().enumerate() {
                yu.data_mut()[r] = u.data()[i];
                yv.data_mut()[r] = v.data()[i];
            }
            discriminator_step(&mut dis, &mut opt, &adam, &yu, &yv, &mut rng).unwrap();
        }
    }
    density_ratio_mi(&u_eval, &v_eval, &dis).unwrap()
}

#[test]
fn correlated_gaussians_match_analytic_value() {
    let rho = 0.8f32;
    let analytic = -0.5 * (1.0 - rho * rho).ln(); // ≈ 0.5108 nats
    let estimate = gaussian_mi_estimate(rho, 424242);
    assert!(
        (estimate - analytic).abs() < 0.15,
        "estimate {estimate} vs analytic {analytic}"
    );
}

#[test]
fn independent_gaussians_estimate_near_zero() {
    let estimate = gaussian_mi_estimate(0.0, 98765);
    assert!(estimate.abs() < 0.05, "estimate {estimate}");
}

#[test]
fn trained_discriminator_is_blind_on_independent_data() {
    // On genuinely independent pairs a trained discriminator cannot beat
    // coin flipping at telling joint from shuffled.
    let mut rng = Rng::new(31337);
    let (u, v) = gaussian_pairs(4096, 0.0, &mut rng);
    let mut dis = Mlp::new(&[2, 64, 64, 2], Activation::Softmax, &mut rng);
    let mut opt = AdamState::for_net(&dis);
    let adam = AdamConfig::default();
    for _ in 0..20 {
        let perm = rng.permutation(4096);
        for chunk in perm.chunks(256) {
            let mut yu = Tensor::zeros(&[chunk.len(), 1]);
            let mut yv = Tensor::zeros(&[chunk.len(), 1]);
            for (r, &i) in chunk.iter().enumerate() {
                yu.data_mut()[r] = u.data()[i];
                yv.data_mut()[r] = v.data()[i];
            }
            discriminator_step(&mut dis, &mut opt, &adam, &yu, &yv, &mut rng).unwrap();
        }
    }
    // Accuracy of "joint" detection on fresh joint and shuffled pairs.
    let (u2, v2) = gaussian_pairs(4000, 0.0, &mut rng);
    let joint = dis
        .forward_pure(&dibjscc_core::tensor::hconcat(&u2, &v2).unwrap())
        .unwrap();
    let (su, sv) = dibjscc_core::dib::shuffle_pairs(&u2, &v2, &mut rng).unwrap();
    let shuffled = dis
        .forward_pure(&dibjscc_core::tensor::hconcat(&su, &sv).unwrap())
        .unwrap();
    let mut correct = 0usize;
    for r in 0..joint.rows() {
        if joint.row(r)[1] > 0.5 {
            correct += 1;
        }
        if shuffled.row(r)[1] <= 0.5 {
            correct += 1;
        }
    }
    let acc = correct as f32 / (2 * joint.rows()) as f32;
    assert!((acc - 0.5).abs() < 0.05, "accuracy {acc}");
}
