//! Acceptance gate: every headline requirement of the system, each checked
//! at its stated tolerance with one PASS/FAIL line. Run with
//! `cargo test -p dibjscc-cli --test acceptance -- --nocapture`.
//!
//! Training-dependent criteria share one desk-scale run (10000 train / 2000
//! test synthetic samples, default dimensions). Expect roughly half an hour
//! on a fast CPU.

use std::fmt::Write as _;
use std::time::Instant;

use dibjscc_cli::synth::synth_split;
use dibjscc_core::channel::{awgn, measured_snr, power_normalize, ChannelSpec};
use dibjscc_core::data::{build_colored_mnist, ColoredDataset, RawMnist, SAMPLE_WIDTH};
use dibjscc_core::dib::{self, DibConfig};
use dibjscc_core::eval::{self, BaselineConfig, BaselineMode, EvePipeline, SweepTarget};
use dibjscc_core::fdcheck::{finite_difference_check, CheckLoss};
use dibjscc_core::nn::{AdamConfig, AdamState, Activation, Mlp};
use dibjscc_core::pp::{self, PasswordSpec, PpConfig};
use dibjscc_core::rng::{Rng, Stream};
use dibjscc_core::tensor::Tensor;

const SEED: u64 = 20260808;

struct Gate {
    t0: Instant,
    failures: Vec<String>,
}

impl Gate {
    fn new() -> Gate {
        Gate {
            t0: Instant::now(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, id: &str, pass: bool, detail: &str) {
        let status = if pass { "PASS" } else { "FAIL" };
        println!(
            "[{:>7.1}s] {status} criterion {id}: {detail}",
            self.t0.elapsed().as_secs_f32()
        );
        if !pass {
            self.failures.push(format!("criterion {id}: {detail}"));
        }
    }
}

fn desk_datasets() -> (ColoredDataset, ColoredDataset) {
    let (imgs, labels) = synth_split(10_000, SEED);
    let train_raw = RawMnist::new(imgs, labels).unwrap();
    let (imgs, labels) = synth_split(2_000, SEED ^ (1 << 17));
    let test_raw = RawMnist::new(imgs, labels).unwrap();
    let train =
        build_colored_mnist(&train_raw, &mut Rng::stream(SEED, Stream::DataTrain)).unwrap();
    let test = build_colored_mnist(&test_raw, &mut Rng::stream(SEED, Stream::DataTest)).unwrap();
    (train, test)
}

fn subset(ds: &ColoredDataset, n: usize) -> ColoredDataset {
    let n = n.min(ds.len());
    ColoredDataset {
        pixels: ds.pixels[..n * SAMPLE_WIDTH].to_vec(),
        colors: ds.colors[..n].to_vec(),
        digits: ds.digits[..n].to_vec(),
    }
}

fn desk_dib_config() -> DibConfig {
    DibConfig {
        alpha: 0.005,
        alpha_warmup_epochs: 10,
        alpha_ramp_epochs: 10,
        v_d1: 6,
        v_d2: 24,
        batch_size: 128,
        snr_ab_db: 30.0,
        ..DibConfig::default()
    }
}

fn desk_pp_config() -> PpConfig {
    PpConfig {
        alpha1: 1e5,
        beta1: 1e5,
        password: PasswordSpec::new(16, 128).unwrap(),
        v_p: 26,
        settle_epochs: 12,
        batch_size: 128,
        snr_ab_db: 30.0,
        snr_ae_db: 15.0,
        ..PpConfig::default()
    }
}

/// Criterion 1: finite-difference gradient check over 20 random MLPs
/// spanning all activations, max relative error < 1e-4.
fn criterion_1(gate: &mut Gate) {
    let mut rng = Rng::new(2024);
    let mut worst = 0.0f32;
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
        if out_act == Activation::Softmax {
            let d = dims.last_mut().unwrap();
            *d = (*d).max(2);
        }
        let out_dim = *dims.last().unwrap();
        let net = Mlp::new(&dims, out_act, &mut rng);
        let batch = 2 + rng.below(3);
        let input = Tensor::from_vec(
            &[batch, dims[0]],
            (0..batch * dims[0]).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap();
        let target = if loss == CheckLoss::NllMean {
            let labels: Vec<u8> = (0..batch).map(|_| rng.below(out_dim) as u8).collect();
            dibjscc_core::nn::onehot(&labels, out_dim)
        } else {
            Tensor::from_vec(
                &[batch, out_dim],
                (0..batch * out_dim).map(|_| rng.uniform(-0.5, 0.5)).collect(),
            )
            .unwrap()
        };
        let err = finite_difference_check(&net, &input, &target, loss, 1e-3).unwrap();
        worst = worst.max(err);
    }
    gate.check(
        "1 (gradient correctness)",
        worst < 1e-4,
        &format!("max relative error {worst:.2e} over 20 random MLPs (tolerance 1e-4)"),
    );
}

/// Criterion 2: measured SNR within ±0.2 dB of the configured SNR over
/// ~1e5 unit-power transmissions, for each SNR in {-15..15} dB.
fn criterion_2(gate: &mut Gate) {
    let mut rng = Rng::new(SEED);
    let mut worst = 0.0f32;
    let mut detail = String::new();
    for &snr in &[-15.0f32, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0] {
        let rows = 1563;
        let cols = 64;
        let mut raw = Tensor::zeros(&[rows, cols]);
        rng.fill_normal(raw.data_mut(), 1.0);
        let clean = power_normalize(&raw).unwrap();
        let noisy = awgn(&clean, &ChannelSpec::new(snr), &mut rng);
        let measured = measured_snr(&clean, &noisy).unwrap();
        worst = worst.max((measured - snr).abs());
        let _ = write!(detail, "{snr}→{measured:.2} ");
    }
    gate.check(
        "2 (channel calibration)",
        worst < 0.2,
        &format!("max deviation {worst:.3} dB ({detail})"),
    );
}

/// Criterion 3: density-ratio MI estimate on 1D Gaussians.
fn criterion_3(gate: &mut Gate) {
    fn estimate(rho: f32, seed: u64) -> f32 {
        let n_train = 8192;
        let n_eval = 4096;
        let mut rng = Rng::new(seed);
        let tail = (1.0 - rho * rho).sqrt();
        let mut draw = |n: usize, rng: &mut Rng| {
            let mut u = Tensor::zeros(&[n, 1]);
            let mut v = Tensor::zeros(&[n, 1]);
            for i in 0..n {
                let a = rng.next_normal();
                u.data_mut()[i] = a;
                v.data_mut()[i] = rho * a + tail * rng.next_normal();
            }
            (u, v)
        };
        let (u, v) = draw(n_train, &mut rng);
        let (ue, ve) = draw(n_eval, &mut rng);
        let mut dis = Mlp::new(&[2, 64, 64, 2], Activation::Softmax, &mut rng);
        let mut opt = AdamState::for_net(&dis);
        let adam = AdamConfig::default();
        for _ in 0..60 {
            let perm = rng.permutation(n_train);
            for chunk in perm.chunks(256) {
                if chunk.len() < 2 {
                    continue;
                }
                let mut yu = Tensor::zeros(&[chunk.len(), 1]);
                let mut yv = Tensor::zeros(&[chunk.len(), 1]);
                for (r, &i) in chunk.iter().enumerate() {
                    yu.data_mut()[r] = u.data()[i];
                    yv.data_mut()[r] = v.data()[i];
                }
                dib::discriminator_step(&mut dis, &mut opt, &adam, &yu, &yv, &mut rng).unwrap();
            }
        }
        dib::density_ratio_mi(&ue, &ve, &dis).unwrap()
    }

    let analytic = -0.5f32 * (1.0 - 0.8 * 0.8f32).ln();
    let correlated = estimate(0.8, 424242);
    let independent = estimate(0.0, 98765);
    let pass = (correlated - analytic).abs() < 0.15 && independent.abs() < 0.05;
    gate.check(
        "3 (MI estimator oracle)",
        pass,
        &format!(
            "ρ=0.8: {correlated:.3} vs analytic {analytic:.3} (±0.15); independent: {independent:.3} (|·|<0.05)"
        ),
    );
}

#[test]
fn acceptance() {
    let mut gate = Gate::new();

    criterion_1(&mut gate);
    criterion_2(&mut gate);
    criterion_3(&mut gate);

    // ── Shared desk-scale training run ──
    let (train, test) = desk_datasets();
    println!(
        "[{:>7.1}s] desk-scale datasets ready ({} train / {} test)",
        gate.t0.elapsed().as_secs_f32(),
        train.len(),
        test.len()
    );
    let dib_cfg = desk_dib_config();
    let dib_out = dib::train_dib(&train, &test, &dib_cfg, SEED).unwrap();
    let dib_mse = dib_out.step2.last().unwrap().test_mse;
    println!(
        "[{:>7.1}s] disentangling training done (test mse {dib_mse:.5})",
        gate.t0.elapsed().as_secs_f32()
    );

    // Criterion 4: disentanglement probes at SNR_AB = 30 dB training.
    {
        let x_train = train.all_x();
        let x_test = test.all_x();
        let (yt_tr, ys_tr) = dib::encode(&dib_out.bundle, &x_train).unwrap();
        let (yt_te, ys_te) = dib::encode(&dib_out.bundle, &x_test).unwrap();
        let (_, color_on_ys) =
            eval::train_probe(&ys_tr, &train.colors, &ys_te, &test.colors, 10, SEED ^ 1).unwrap();
        let (_, color_on_yt) =
            eval::train_probe(&yt_tr, &train.colors, &yt_te, &test.colors, 10, SEED ^ 2).unwrap();
        let (_, digit_on_yt) =
            eval::train_probe(&yt_tr, &train.digits, &yt_te, &test.digits, 10, SEED ^ 3).unwrap();
        let (_, digit_on_ys) =
            eval::train_probe(&ys_tr, &train.digits, &ys_te, &test.digits, 10, SEED ^ 4).unwrap();
        let pass = color_on_ys >= 0.90 && color_on_yt <= 0.25 && digit_on_yt >= 0.80;
        gate.check(
            "4 (disentanglement)",
            pass,
            &format!(
                "color(y_s)={color_on_ys:.3} (≥0.90), color(y_t)={color_on_yt:.3} (≤0.25), digit(y_t)={digit_on_yt:.3} (≥0.80)"
            ),
        );
        // Degenerate-solution guard rides along with the shared run.
        gate.check(
            "4b (degenerate-solution guard)",
            digit_on_yt - digit_on_ys >= 0.2,
            &format!("digit(y_t)={digit_on_yt:.3} − digit(y_s)={digit_on_ys:.3} ≥ 0.2"),
        );
    }

    // ── Protection training at SNR_AE = 15 dB ──
    let pp_cfg = desk_pp_config();
    let pp_out = pp::train_pp(&train, &test, &dib_out.bundle, &pp_cfg, SEED ^ 0xAA).unwrap();
    let pb = &pp_out.bundle;
    println!(
        "[{:>7.1}s] protection training done",
        gate.t0.elapsed().as_secs_f32()
    );

    // Criterion 5: eavesdropping accuracy bounds.
    {
        let prot5 = eval::probe_leakage(pb, &train, &test, EvePipeline::Protected, 5.0, &pp_cfg.password, SEED ^ 5).unwrap();
        let prot15 = eval::probe_leakage(pb, &train, &test, EvePipeline::Protected, 15.0, &pp_cfg.password, SEED ^ 6).unwrap();
        let unprot15 = eval::probe_leakage(pb, &train, &test, EvePipeline::Unprotected, 15.0, &pp_cfg.password, SEED ^ 7).unwrap();
        let pass = prot5 <= 0.30 && prot15 <= 0.35 && unprot15 >= 0.45;
        gate.check(
            "5 (protection efficacy)",
            pass,
            &format!(
                "protected acc {prot5:.3}@5dB (≤0.30), {prot15:.3}@15dB (≤0.35); unprotected {unprot15:.3}@15dB (≥0.45)"
            ),
        );
    }

    // Criterion 6: reconstruction preservation.
    {
        let mut rng = Rng::stream(SEED ^ 8, Stream::ChannelEval);
        let pp_mse = pp::protected_mse(pb, &test, &pp_cfg.password, 30.0, &mut rng).unwrap();
        let bl_cfg = BaselineConfig {
            epochs: 10,
            batch_size: 128,
            snr_ab_db: 30.0,
            snr_ae_db: 15.0,
            m: 64,
            m_s: 16,
            alpha1: 1.0,
            adam: AdamConfig::default(),
        };
        let baseline_b = eval::run_baseline(
            BaselineMode::PrivateDiscard,
            &train,
            &test,
            Some(&dib_out.bundle),
            &bl_cfg,
            SEED ^ 9,
        )
        .unwrap();
        let ratio = pp_mse / dib_mse;
        let pass = ratio <= 1.2 && baseline_b.test_mse > pp_mse;
        gate.check(
            "6 (reconstruction preservation)",
            pass,
            &format!(
                "protected mse {pp_mse:.5} / unprotected {dib_mse:.5} = {ratio:.3} (≤1.2); baseline-B mse {:.5} > protected ({})",
                baseline_b.test_mse,
                baseline_b.test_mse > pp_mse
            ),
        );
    }

    // Criterion 7: password robustness over (Len, p_level) cells, 3 seeds,
    // at reduced scale.
    {
        let sub_train = subset(&train, 4000);
        let sub_test = subset(&test, 1000);
        let sweep_cfg = PpConfig {
            v_p: 12,
            settle_epochs: 5,
            ..desk_pp_config()
        };
        let sweep = eval::password_sweep(
            &sub_train,
            &sub_test,
            &dib_out.bundle,
            &sweep_cfg,
            &[(4, 4), (16, 128)],
            &[SEED ^ 11, SEED ^ 12, SEED ^ 13],
            0,
        )
        .unwrap();
        // Row layout: [len, p_level, unprotected, protected, public_only, guess]
        let weak = &sweep.rows[0];
        let strong = &sweep.rows[1];
        let monotone = strong[3] <= weak[3];
        let mut tracking = true;
        let mut track_detail = String::new();
        for row in &sweep.rows {
            let gap = (row[5] - row[4]).abs();
            let _ = write!(
                track_detail,
                "({}x{}: |guess−public| {:.3}) ",
                row[0] as u32, row[1] as u32, gap
            );
            if gap > 0.1 {
                tracking = false;
            }
        }
        gate.check(
            "7 (password robustness)",
            monotone && tracking,
            &format!(
                "protected acc strong(16,128)={:.3} ≤ weak(4,4)={:.3}; {track_detail}(gaps ≤0.1)",
                strong[3], weak[3]
            ),
        );
    }

    // Criterion 8: graceful PSNR degradation over test SNR_AB.
    {
        let snrs = [0.0f32, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
        let sweep = eval::snr_sweep(
            pb,
            &train,
            &test,
            &snrs,
            SweepTarget::Psnr,
            &pp_cfg.password,
            SEED ^ 14,
            0,
        )
        .unwrap();
        let psnrs: Vec<f32> = sweep.rows.iter().map(|r| r[0]).collect();
        let mut monotone = true;
        let mut no_cliff = true;
        for i in 1..psnrs.len() {
            // Higher SNR may not lose more than 0.5 dB against the next
            // lower SNR.
            if psnrs[i] < psnrs[i - 1] - 0.5 {
                monotone = false;
            }
            // No cliff: in the region above 5 dB test SNR, one 5 dB step
            // down may not drop PSNR by more than 6 dB.
            if snrs[i - 1] >= 5.0 && (psnrs[i] - psnrs[i - 1]) > 6.0 {
                no_cliff = false;
            }
        }
        gate.check(
            "8 (graceful degradation)",
            monotone && no_cliff,
            &format!("psnr per snr {snrs:?} = {psnrs:?}"),
        );
    }

    // Criterion 9: Eve-accuracy spread under test-SNR mismatch.
    {
        let snrs = [-15.0f32, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0];
        let sweep = eval::snr_sweep(
            pb,
            &train,
            &test,
            &snrs,
            SweepTarget::EveAccuracy,
            &pp_cfg.password,
            SEED ^ 15,
            0,
        )
        .unwrap();
        let accs: Vec<f32> = sweep.rows.iter().map(|r| r[0]).collect();
        let max = accs.iter().copied().fold(f32::MIN, f32::max);
        let min = accs.iter().copied().fold(f32::MAX, f32::min);
        gate.check(
            "9 (SNR_AE mismatch robustness)",
            max - min <= 0.25,
            &format!("accuracy spread {:.3} (max {max:.3} − min {min:.3}, ≤0.25)", max - min),
        );
    }

    // Criterion 10: exact formulas.
    {
        let bits = pp::password_entropy(&PasswordSpec::new(16, 256).unwrap());
        // One pixel wrong by the full 255 range among 1000 → rounded-pixel
        // mse 65.025 → 30 dB.
        let x = Tensor::zeros(&[1, 1000]);
        let mut x_hat = Tensor::zeros(&[1, 1000]);
        x_hat.data_mut()[0] = 1.0;
        let p = eval::psnr(&x, &x_hat, 8).unwrap();
        let pass = bits == 128.0 && (p - 30.0).abs() < 0.01;
        gate.check(
            "10 (exact formulas)",
            pass,
            &format!("password_entropy(16,256)={bits} bits (=128); psnr(mse 65.025)={p:.4} dB (30±0.01)"),
        );
    }

    // Criterion 11: byte-identical metrics across two full pipeline runs of
    // the actual binary.
    {
        let pass = determinism_check();
        gate.check(
            "11 (determinism)",
            pass,
            "two full pipeline runs produce byte-identical metrics CSVs",
        );
    }

    println!(
        "[{:>7.1}s] acceptance suite finished",
        gate.t0.elapsed().as_secs_f32()
    );
    assert!(
        gate.failures.is_empty(),
        "failed criteria:\n{}",
        gate.failures.join("\n")
    );
}

fn determinism_check() -> bool {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_dibjscc");
    let base = std::env::temp_dir().join(format!("dibjscc_accept_det_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();

    // Identical config text in both runs (all paths relative, resolved via
    // the working directory), so even the embedded config hashes must match.
    let config_text = "train_images = tri\ntrain_labels = trl\ntest_images = tei\ntest_labels = tel\n\
         output_dir = out\ntrain_limit = 400\ntest_limit = 120\nbatch_size = 64\n\
         v_d1 = 1\nv_d2 = 2\nalpha_warmup = 1\nalpha_ramp = 1\nalpha = 0.005\n\
         v_p = 2\npp_settle = 1\nseed = 31\n";

    let run_pipeline = |tag: &str| -> Vec<(String, Vec<u8>)> {
        let root = base.join(tag);
        std::fs::create_dir_all(&root).unwrap();
        std::fs::write(root.join("cfg.txt"), config_text).unwrap();
        for args in [
            vec!["prepare-data", "--config", "cfg.txt", "--synthetic"],
            vec!["train-dib", "--config", "cfg.txt"],
            vec!["train-pp", "--config", "cfg.txt"],
            vec!["eval", "--config", "cfg.txt"],
        ] {
            let out = Command::new(bin)
                .args(&args)
                .current_dir(&root)
                .env_remove("DIBJSCC_OUTPUT_ROOT")
                .output()
                .unwrap();
            assert!(
                out.status.success(),
                "pipeline stage {args:?} failed: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
        let metrics_dir = root.join("out/metrics");
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&metrics_dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };

    let a = run_pipeline("a");
    let b = run_pipeline("b");
    let _ = std::fs::remove_dir_all(&base);
    !a.is_empty() && a == b
}
