//! Gradient correctness across random architectures, plus the composite
//! pipeline ops the training loops rely on.

use dibjscc_core::fdcheck::{finite_difference_check, CheckLoss};
use dibjscc_core::nn::{Activation, Mlp};
use dibjscc_core::rng::Rng;
use dibjscc_core::tape::Tape;
use dibjscc_core::tensor::Tensor;

fn random_tensor(shape: &[usize], lo: f32, hi: f32, rng: &mut Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(lo, hi)).collect()).unwrap()
}

#[test]
fn random_mlps_pass_finite_difference_check() {
    // Architectures spanning every activation; relative error < 1e-4.
    let mut rng = Rng::new(2024);
    for trial in 0..20 {
        let depth = 2 + rng.below(2);
        let mut dims = vec![3 + rng.below(5)];
        for _ in 0..depth {
            dims.push(2 + rng.below(8));
        }
        let (out_act, loss) = match trial % 3 {
            0 => (Activation::Identity, CheckLoss::MseMean),
            1 => (Activation::Sigmoid, CheckLoss::MseMean),
            _ => (Activation::Softmax, CheckLoss::NllMean),
        };
        let out_dim = if out_act == Activation::Softmax {
            let d = dims.last_mut().unwrap();
            *d = (*d).max(2);
            *d
        } else {
            *dims.last().unwrap()
        };
        let net = Mlp::new(&dims, out_act, &mut rng);
        let batch = 2 + rng.below(3);
        let input = random_tensor(&[batch, dims[0]], -1.0, 1.0, &mut rng);
        let target = if loss == CheckLoss::NllMean {
            let labels: Vec<u8> = (0..batch).map(|_| rng.below(out_dim) as u8).collect();
            dibjscc_core::nn::onehot(&labels, out_dim)
        } else {
            random_tensor(&[batch, out_dim], -0.5, 0.5, &mut rng)
        };
        let err = finite_difference_check(&net, &input, &target, loss, 1e-3).unwrap();
        assert!(
            err < 1e-4,
            "trial {trial} dims {dims:?} act {out_act:?}: max rel err {err}"
        );
    }
}

#[test]
fn mse_of_linear_map_matches_finite_differences() {
    // loss = mse(Wx, y) on a 2×2 case.
    let mut rng = Rng::new(7);
    let net = Mlp::new(&[2, 2], Activation::Identity, &mut rng);
    let input = Tensor::from_vec(&[2, 2], vec![0.3, -0.7, 1.1, 0.4]).unwrap();
    let target = Tensor::from_vec(&[2, 2], vec![0.1, 0.2, -0.3, 0.8]).unwrap();
    let err = finite_difference_check(&net, &input, &target, CheckLoss::MseMean, 1e-3).unwrap();
    assert!(err < 1e-4, "max rel err {err}");
}

#[test]
fn two_layer_relu_net_matches_finite_differences() {
    let mut rng = Rng::new(8);
    let net = Mlp::new(&[4, 6, 3], Activation::Identity, &mut rng);
    let input = random_tensor(&[3, 4], -1.0, 1.0, &mut rng);
    let target = random_tensor(&[3, 3], -0.5, 0.5, &mut rng);
    let err = finite_difference_check(&net, &input, &target, CheckLoss::MseMean, 1e-3).unwrap();
    assert!(err < 1e-4, "max rel err {err}");
}

/// Full transmission path on the tape against central differences in f64:
/// normalize → noise → slice/concat → losses. The pipeline ops have no f64
/// mirror, so this check differences the f32 graph itself with a larger
/// step and looser tolerance.
#[test]
fn pipeline_ops_gradient_sanity() {
    let mut rng = Rng::new(9);
    let b = 3;
    let w = 6;
    let x_data = random_tensor(&[b, w], 0.5, 1.5, &mut rng);
    let noise = random_tensor(&[b, w], -0.05, 0.05, &mut rng);
    let target = random_tensor(&[b, w], 0.0, 1.0, &mut rng);

    let loss_at = |x: &Tensor| -> f32 {
        let mut tape = Tape::new();
        let x_node = tape.param(x);
        let n = tape.row_unit_power(x_node).unwrap();
        let noisy = tape.add_noise(n, &noise).unwrap();
        let left = tape.slice_cols(noisy, 0, 4).unwrap();
        let right = tape.slice_cols(noisy, 4, 2).unwrap();
        let joined = tape.concat_cols(left, right).unwrap();
        let loss = tape.mse_batch_sum(joined, &target).unwrap();
        tape.value(loss).scalar_value()
    };

    // Tape gradient.
    let mut tape = Tape::new();
    let x_node = tape.param(&x_data);
    let n = tape.row_unit_power(x_node).unwrap();
    let noisy = tape.add_noise(n, &noise).unwrap();
    let left = tape.slice_cols(noisy, 0, 4).unwrap();
    let right = tape.slice_cols(noisy, 4, 2).unwrap();
    let joined = tape.concat_cols(left, right).unwrap();
    let loss = tape.mse_batch_sum(joined, &target).unwrap();
    let grads = tape.backward(loss).unwrap();
    let g = grads.get(x_node).unwrap().clone();

    let eps = 1e-2f32;
    for i in 0..x_data.numel() {
        let mut plus = x_data.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x_data.clone();
        minus.data_mut()[i] -= eps;
        let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * eps);
        let ad = g.data()[i];
        let denom = ad.abs().max(fd.abs()).max(0.05);
        assert!(
            (ad - fd).abs() / denom < 2e-2,
            "index {i}: ad {ad} fd {fd}"
        );
    }
}

#[test]
fn entropy_and_log_ratio_gradients_match_differences() {
    // Differentiate through softmax → entropy and softmax → log-ratio.
    let mut rng = Rng::new(10);
    let logits = random_tensor(&[4, 2], -1.0, 1.0, &mut rng);

    let entropy_at = |x: &Tensor| -> f32 {
        let mut tape = Tape::new();
        let n = tape.param(x);
        let p = tape.softmax_rows(n).unwrap();
        let h = tape.entropy_sum(p).unwrap();
        tape.value(h).scalar_value()
    };
    let ratio_at = |x: &Tensor| -> f32 {
        let mut tape = Tape::new();
        let n = tape.param(x);
        let p = tape.softmax_rows(n).unwrap();
        let r = tape.log_ratio_sum(p).unwrap();
        tape.value(r).scalar_value()
    };

    for (which, f) in [(0, &entropy_at as &dyn Fn(&Tensor) -> f32), (1, &ratio_at)] {
        let mut tape = Tape::new();
        let n = tape.param(&logits);
        let p = tape.softmax_rows(n).unwrap();
        let out = if which == 0 {
            tape.entropy_sum(p).unwrap()
        } else {
            tape.log_ratio_sum(p).unwrap()
        };
        let grads = tape.backward(out).unwrap();
        let g = grads.get(n).unwrap().clone();
        let eps = 1e-2f32;
        for i in 0..logits.numel() {
            let mut plus = logits.clone();
            plus.data_mut()[i] += eps;
            let mut minus = logits.clone();
            minus.data_mut()[i] -= eps;
            let fd = (f(&plus) - f(&minus)) / (2.0 * eps);
            let ad = g.data()[i];
            let denom = ad.abs().max(fd.abs()).max(0.05);
            assert!(
                (ad - fd).abs() / denom < 2e-2,
                "term {which} index {i}: ad {ad} fd {fd}"
            );
        }
    }
}

#[test]
fn forward_and_backward_outputs_stay_finite() {
    let mut rng = Rng::new(11);
    let net = Mlp::new(&[8, 16, 8, 4], Activation::Sigmoid, &mut rng);
    for _ in 0..10 {
        let input = random_tensor(&[4, 8], -100.0, 100.0, &mut rng);
        let target = random_tensor(&[4, 4], 0.0, 1.0, &mut rng);
        let mut tape = Tape::new();
        let x = tape.constant(input);
        let taped = net.forward(&mut tape, x, true).unwrap();
        assert!(tape.value(taped.output).all_finite());
        let loss = tape.mse_batch_sum(taped.output, &target).unwrap();
        let grads = tape.backward(loss).unwrap();
        for &pid in &taped.params {
            if let Some(g) = grads.get(pid) {
                assert!(g.all_finite());
            }
        }
    }
}
