//! Scratch harness for sizing training schedules. Ignored by default; run
//! with `cargo test -p dibjscc-cli --test pilot -- --ignored --nocapture`.

use dibjscc_cli::synth::synth_split;
use dibjscc_core::data::{build_colored_mnist, ColoredDataset, RawMnist};
use dibjscc_core::dib::{self, DibConfig};
use dibjscc_core::eval::{self, EvePipeline};
use dibjscc_core::pp::{self, PasswordSpec, PpConfig};
use dibjscc_core::rng::{Rng, Stream};

fn datasets(n_train: usize, n_test: usize, seed: u64) -> (ColoredDataset, ColoredDataset) {
    let (imgs, labels) = synth_split(n_train, seed);
    let train_raw = RawMnist::new(imgs, labels).unwrap();
    let (imgs, labels) = synth_split(n_test, seed ^ (1 << 17));
    let test_raw = RawMnist::new(imgs, labels).unwrap();
    let train =
        build_colored_mnist(&train_raw, &mut Rng::stream(seed, Stream::DataTrain)).unwrap();
    let test = build_colored_mnist(&test_raw, &mut Rng::stream(seed, Stream::DataTest)).unwrap();
    (train, test)
}

#[test]
#[ignore]
fn pilot_dib_pp() {
    let t0 = std::time::Instant::now();
    let scale: usize = std::env::var("PILOT_SCALE")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(4000);
    let v_d1: usize = std::env::var("PILOT_VD1").ok().and_then(|v| v.parse().ok()).unwrap_or(4);
    let v_d2: usize = std::env::var("PILOT_VD2").ok().and_then(|v| v.parse().ok()).unwrap_or(8);
    let v_p: usize = std::env::var("PILOT_VP").ok().and_then(|v| v.parse().ok()).unwrap_or(6);
    let alpha: f32 = std::env::var("PILOT_ALPHA").ok().and_then(|v| v.parse().ok()).unwrap_or(1.0);
    let warmup: usize = std::env::var("PILOT_WARMUP").ok().and_then(|v| v.parse().ok()).unwrap_or(0);
    let ramp: usize = std::env::var("PILOT_RAMP").ok().and_then(|v| v.parse().ok()).unwrap_or(10);
    let seed = 11u64;

    let (train, test) = datasets(scale, scale / 5, seed);
    println!("[{:?}] datasets ready at scale {scale}", t0.elapsed());

    if std::env::var("PILOT_DIAG").is_ok() {
        let x_train = train.all_x();
        let x_test = test.all_x();
        let (_, digit_on_x) =
            eval::train_probe(&x_train, &train.digits, &x_test, &test.digits, 10, 41).unwrap();
        println!("[diag] digit probe on raw pixels: {digit_on_x:.3}");
        let mut rng = Rng::new(7);
        let fresh = dibjscc_core::model::ModelBundle::new(
            dibjscc_core::model::ModelDims { m_s: 16, m_t: 48, password_len: 16 },
            &mut rng,
        );
        let (yt_tr, _) = dib::encode(&fresh, &x_train).unwrap();
        let (yt_te, _) = dib::encode(&fresh, &x_test).unwrap();
        let (_, digit_init) =
            eval::train_probe(&yt_tr, &train.digits, &yt_te, &test.digits, 10, 42).unwrap();
        println!("[diag] digit probe on random-init y_t: {digit_init:.3}");
        let bl = eval::run_baseline(
            eval::BaselineMode::RandomDiscard,
            &train,
            &test,
            None,
            &eval::BaselineConfig {
                epochs: v_d2,
                batch_size: 128,
                snr_ab_db: 30.0,
                snr_ae_db: 15.0,
                m: 64,
                m_s: 16,
                alpha1: 1.0,
                adam: Default::default(),
            },
            51,
        )
        .unwrap();
        println!("[diag] plain jscc (discarded eval) mse: {:.4}", bl.test_mse);
    }

    let dib_cfg = DibConfig {
        alpha,
        alpha_warmup_epochs: warmup,
        alpha_ramp_epochs: ramp,
        v_d1,
        v_d2,
        ..DibConfig::default()
    };
    // Cache the trained disentangling stage per hyperparameter cell so
    // protection-stage sweeps don't retrain it.
    let cache_key = format!(
        "/tmp/dibjscc_pilot_dib_{scale}_{v_d1}_{v_d2}_{warmup}_{ramp}_{alpha}_{seed}"
    );
    let (bundle, dib_mse) = if let Ok(bytes) = std::fs::read(format!("{cache_key}.ckpt")) {
        let mse: f32 = std::fs::read_to_string(format!("{cache_key}.mse"))
            .unwrap()
            .trim()
            .parse()
            .unwrap();
        println!("[{:?}] dib loaded from cache", t0.elapsed());
        (
            dibjscc_core::model::ModelBundle::from_checkpoint(&bytes).unwrap(),
            mse,
        )
    } else {
        let outcome = dib::train_dib(&train, &test, &dib_cfg, seed).unwrap();
        println!(
            "[{:?}] dib done: step1 last {:?}, step2 last {:?}",
            t0.elapsed(),
            outcome.step1.last().unwrap().test_accuracy,
            outcome.step2.last().unwrap()
        );
        let mse = outcome.step2.last().unwrap().test_mse;
        std::fs::write(format!("{cache_key}.ckpt"), outcome.bundle.encode_checkpoint()).unwrap();
        std::fs::write(format!("{cache_key}.mse"), format!("{mse}")).unwrap();
        (outcome.bundle, mse)
    };

    // Probes on raw codewords (noiseless).
    let x_train = train.all_x();
    let x_test = test.all_x();
    let (yt_train_raw, ys_train) = dib::encode(&bundle, &x_train).unwrap();
    let (yt_test_raw, ys_test) = dib::encode(&bundle, &x_test).unwrap();
    let rms = |t: &dibjscc_core::tensor::Tensor| {
        let n = t.numel() as f64;
        (t.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / n).sqrt()
    };
    println!(
        "scales: rms(y_t)={:.4} rms(y_s)={:.4}",
        rms(&yt_train_raw),
        rms(&ys_train)
    );
    let yt_train = dibjscc_core::channel::power_normalize(&yt_train_raw).unwrap();
    let yt_test = dibjscc_core::channel::power_normalize(&yt_test_raw).unwrap();

    // Oracle predictors: how much MSE headroom does digit info buy?
    let width = dibjscc_core::data::SAMPLE_WIDTH;
    let mut color_means = vec![vec![0.0f64; width]; 10];
    let mut color_counts = vec![0usize; 10];
    let mut class_means = vec![vec![0.0f64; width]; 100];
    let mut class_counts = vec![0usize; 100];
    for i in 0..train.len() {
        let c = train.colors[i] as usize;
        let d = train.digits[i] as usize;
        color_counts[c] += 1;
        class_counts[d * 10 + c] += 1;
        for (j, &v) in train.sample(i).iter().enumerate() {
            color_means[c][j] += v as f64;
            class_means[d * 10 + c][j] += v as f64;
        }
    }
    for c in 0..10 {
        for v in color_means[c].iter_mut() {
            *v /= color_counts[c].max(1) as f64;
        }
    }
    for k in 0..100 {
        for v in class_means[k].iter_mut() {
            *v /= class_counts[k].max(1) as f64;
        }
    }
    let mut mse_color = 0.0f64;
    let mut mse_class = 0.0f64;
    for i in 0..test.len() {
        let c = test.colors[i] as usize;
        let k = test.digits[i] as usize * 10 + c;
        for (j, &v) in test.sample(i).iter().enumerate() {
            mse_color += (v as f64 - color_means[c][j]).powi(2);
            mse_class += (v as f64 - class_means[k][j]).powi(2);
        }
    }
    mse_color /= (test.len() * width) as f64;
    mse_class /= (test.len() * width) as f64;
    println!("oracle mse: color-only={mse_color:.4} digit+color={mse_class:.4}");
    let (_, ys_color) = eval::train_probe(&ys_train, &train.colors, &ys_test, &test.colors, 10, 21).unwrap();
    let (_, yt_color) = eval::train_probe(&yt_train, &train.colors, &yt_test, &test.colors, 10, 22). unwrap();
    let (_, yt_digit) = eval::train_probe(&yt_train, &train.digits, &yt_test, &test.digits, 10, 23).unwrap();
    let (_, ys_digit) = eval::train_probe(&ys_train, &train.digits, &ys_test, &test.digits, 10, 24).unwrap();
    println!(
        "[{:?}] probes: color(y_s)={ys_color:.3} color(y_t)={yt_color:.3} digit(y_t)={yt_digit:.3} digit(y_s)={ys_digit:.3}",
        t0.elapsed()
    );

    let a1: f32 = std::env::var("PILOT_A1").ok().and_then(|v| v.parse().ok()).unwrap_or(1e5);
    let b1: f32 = std::env::var("PILOT_B1").ok().and_then(|v| v.parse().ok()).unwrap_or(a1);
    let settle: usize = std::env::var("PILOT_SETTLE").ok().and_then(|v| v.parse().ok()).unwrap_or(0);
    let pp_cfg = PpConfig {
        v_p,
        settle_epochs: settle,
        alpha1: a1,
        beta1: b1,
        password: PasswordSpec::new(16, 128).unwrap(),
        snr_ae_db: 15.0,
        ..PpConfig::default()
    };
    let pp_out = pp::train_pp(&train, &test, &bundle, &pp_cfg, seed ^ 0xAA).unwrap();
    println!(
        "[{:?}] pp done: last row {:?}",
        t0.elapsed(),
        pp_out.rows.last().unwrap()
    );
    let pb = pp_out.bundle;

    for snr in [5.0f32, 15.0] {
        let prot = eval::probe_leakage(&pb, &train, &test, EvePipeline::Protected, snr, &pp_cfg.password, 31).unwrap();
        let unprot = eval::probe_leakage(&pb, &train, &test, EvePipeline::Unprotected, snr, &pp_cfg.password, 32).unwrap();
        let pub_only = eval::probe_leakage(&pb, &train, &test, EvePipeline::PublicOnly, snr, &pp_cfg.password, 33).unwrap();
        let guess = eval::probe_leakage(&pb, &train, &test, EvePipeline::GuessDecrypt, snr, &pp_cfg.password, 34).unwrap();
        println!(
            "[{:?}] snr {snr}: protected={prot:.3} unprotected={unprot:.3} public_only={pub_only:.3} guess={guess:.3}",
            t0.elapsed()
        );
    }

    let mut rng = Rng::stream(99, Stream::ChannelEval);
    let pp_mse = pp::protected_mse(&pb, &test, &pp_cfg.password, 30.0, &mut rng).unwrap();
    let pp_mse_inf = pp::protected_mse(&pb, &test, &pp_cfg.password, f32::INFINITY, &mut rng).unwrap();
    println!(
        "[{:?}] dib_mse={dib_mse:.4} pp_mse={pp_mse:.4} pp_mse_noiseless={pp_mse_inf:.4} ratio={:.3}",
        t0.elapsed(),
        pp_mse / dib_mse
    );
}
