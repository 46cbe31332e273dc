//! Metrics, probe classifiers, SNR and password sweeps, baselines, and
//! codeword export.
//!
//! Leakage is measured the same way throughout: a small fixed-budget probe
//! (input → 16 → S, 5 epochs of Adam at lr 0.001) is trained on the
//! codeword view an eavesdropper would see and its held-out accuracy is the
//! eavesdropping accuracy.

use alloc::string::String;
use alloc::vec::Vec;

use crate::channel::{awgn, power_normalize, ChannelSpec};
use crate::data::{BatchIter, ColoredDataset, COLOR_CLASSES};
use crate::model::ModelBundle;
use crate::nn::{accuracy, apply_adam, onehot, AdamConfig, AdamState, Activation, Mlp};
use crate::pp::{decrypt, encrypt, password_batch, PasswordSpec, PpConfig};
use crate::rng::{Rng, Stream};
use crate::tape::Tape;
use crate::tensor::{hconcat, slice_cols, Tensor};
use crate::{Error, Result};

/// Probe training budget, fixed so leakage numbers are comparable.
pub const PROBE_HIDDEN: usize = 16;
pub const PROBE_EPOCHS: usize = 5;

/// Peak signal-to-noise ratio of a reconstruction, computed on rounded
/// integer pixels in [0, 2ⁿ−1]. Returns +∞ when the rounded images agree
/// exactly.
pub fn psnr(x: &Tensor, x_hat: &Tensor, bits_per_pixel: u32) -> Result<f32> {
    if x.shape() != x_hat.shape() {
        return Err(Error::Shape {
            context: "psnr",
            expected: x.shape_string(),
            actual: x_hat.shape_string(),
        });
    }
    let peak = ((1u64 << bits_per_pixel) - 1) as f64;
    let mut acc = 0.0f64;
    for (&a, &b) in x.data().iter().zip(x_hat.data()) {
        let ra = libm::round(a as f64 * peak);
        let rb = libm::round(b as f64 * peak);
        let d = ra - rb;
        acc += d * d;
    }
    let mse = acc / x.numel() as f64;
    if mse == 0.0 {
        return Ok(f32::INFINITY);
    }
    Ok((10.0 * libm::log10(peak * peak / mse)) as f32)
}

/// Which codeword an eavesdropper sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvePipeline {
    /// ŷ_E: the noisy unprotected codeword.
    Unprotected,
    /// ŷ_E^p: the noisy protected codeword (fresh per-sample passwords).
    Protected,
    /// ȳ_E^{p,p₁}: protected transmission, then decryption with a wrong
    /// guessed password.
    GuessDecrypt,
    /// ŷ_t,E alone — the public subcodeword of a protected transmission.
    PublicOnly,
}

/// Build the tensor an eavesdropper observes for a whole split. Noise is
/// drawn fresh per sample.
pub fn eve_view(
    bundle: &ModelBundle,
    y_t: &Tensor,
    y_s: &Tensor,
    pipeline: EvePipeline,
    snr_ae_db: f32,
    password: &PasswordSpec,
    rng: &mut Rng,
) -> Result<Tensor> {
    let spec = ChannelSpec::new(snr_ae_db);
    let m_t = y_t.cols();
    let m_s = y_s.cols();
    match pipeline {
        EvePipeline::Unprotected => {
            let sent = crate::dib::normalize_split(y_t, y_s)?;
            Ok(awgn(&sent, &spec, rng))
        }
        EvePipeline::Protected | EvePipeline::GuessDecrypt | EvePipeline::PublicOnly => {
            let p = password_batch(rng, password, y_s.rows());
            let y_s_p = encrypt(y_s, &p, &bundle.encryptor)?;
            let sent = crate::pp::protected_transmit(y_t, &y_s_p)?;
            let recv = awgn(&sent, &spec, rng);
            match pipeline {
                EvePipeline::Protected => Ok(recv),
                EvePipeline::PublicOnly => slice_cols(&recv, 0, m_t),
                EvePipeline::GuessDecrypt => {
                    let p_guess = password_batch(rng, password, y_s.rows());
                    let yt_e = slice_cols(&recv, 0, m_t)?;
                    let ysp_e = slice_cols(&recv, m_t, m_s)?;
                    let ys_guess = decrypt(&ysp_e, &p_guess, &bundle.decryptor)?;
                    hconcat(&yt_e, &ys_guess)
                }
                EvePipeline::Unprotected => unreachable!(),
            }
        }
    }
}

/// Fraction of samples whose private label a given classifier recovers
/// from the chosen pipeline's view.
pub fn eavesdrop_accuracy(
    net: &Mlp,
    bundle: &ModelBundle,
    ds: &ColoredDataset,
    pipeline: EvePipeline,
    snr_ae_db: f32,
    password: &PasswordSpec,
    rng: &mut Rng,
) -> Result<f32> {
    if ds.is_empty() {
        return Err(Error::Degenerate("empty dataset".into()));
    }
    let x = ds.all_x();
    let (y_t, y_s) = crate::dib::encode(bundle, &x)?;
    let view = eve_view(bundle, &y_t, &y_s, pipeline, snr_ae_db, password, rng)?;
    let probs = net.forward_pure(&view)?;
    Ok(accuracy(&probs, &onehot(&ds.colors, COLOR_CLASSES)))
}

/// Train the fixed-budget probe on labeled codewords and report held-out
/// accuracy.
pub fn train_probe(
    train_inputs: &Tensor,
    train_labels: &[u8],
    test_inputs: &Tensor,
    test_labels: &[u8],
    classes: usize,
    seed: u64,
) -> Result<(Mlp, f32)> {
    let mut present = alloc::vec![false; classes];
    for &l in train_labels {
        present[l as usize] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Degenerate(
            "probe training needs at least 2 classes present".into(),
        ));
    }
    let mut rng = Rng::stream(seed, Stream::Probe);
    let mut probe = Mlp::new(
        &[train_inputs.cols(), PROBE_HIDDEN, classes],
        Activation::Softmax,
        &mut rng,
    );
    let mut opt = AdamState::for_net(&probe);
    let adam = AdamConfig::default();
    let n = train_inputs.rows();
    for _ in 0..PROBE_EPOCHS {
        let batches = BatchIter::new(n, 128, true, Some(&mut rng))?;
        for idx in batches {
            let mut xb = Tensor::zeros(&[idx.len(), train_inputs.cols()]);
            let mut lb = Vec::with_capacity(idx.len());
            for (r, &i) in idx.iter().enumerate() {
                xb.row_mut(r).copy_from_slice(train_inputs.row(i));
                lb.push(train_labels[i]);
            }
            let s = onehot(&lb, classes);
            let mut tape = Tape::new();
            let x_node = tape.constant(xb);
            let taped = probe.forward(&mut tape, x_node, true)?;
            let nll = tape.nll_sum(taped.output, &s)?;
            let loss = tape.combine(&[(nll, 1.0 / idx.len() as f32)])?;
            let grads = tape.backward(loss)?;
            apply_adam(&mut probe, &mut opt, &taped, &grads, &adam)?;
        }
    }
    let probs = probe.forward_pure(test_inputs)?;
    let acc = accuracy(&probs, &onehot(test_labels, classes));
    Ok((probe, acc))
}

/// Probe-measured eavesdropping accuracy for one pipeline: the probe trains
/// on the training split's view and is scored on the test split's view.
#[allow(clippy::too_many_arguments)]
pub fn probe_leakage(
    bundle: &ModelBundle,
    train: &ColoredDataset,
    test: &ColoredDataset,
    pipeline: EvePipeline,
    snr_ae_db: f32,
    password: &PasswordSpec,
    seed: u64,
) -> Result<f32> {
    let mut rng = Rng::stream(seed, Stream::ChannelEval);
    let x_train = train.all_x();
    let (yt_train, ys_train) = crate::dib::encode(bundle, &x_train)?;
    let view_train = eve_view(
        bundle, &yt_train, &ys_train, pipeline, snr_ae_db, password, &mut rng,
    )?;
    let x_test = test.all_x();
    let (yt_test, ys_test) = crate::dib::encode(bundle, &x_test)?;
    let view_test = eve_view(
        bundle, &yt_test, &ys_test, pipeline, snr_ae_db, password, &mut rng,
    )?;
    let (_, acc) = train_probe(
        &view_train,
        &train.colors,
        &view_test,
        &test.colors,
        COLOR_CLASSES,
        seed,
    )?;
    Ok(acc)
}

/// What an SNR sweep measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTarget {
    EveAccuracy,
    Psnr,
}

/// One sweep's results: one metric row per axis value plus the metadata
/// identifying the run that produced it.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub target: String,
    pub columns: Vec<String>,
    pub axis: Vec<f32>,
    pub rows: Vec<Vec<f32>>,
    pub seed: u64,
    pub config_hash: u64,
}

/// Evaluate a trained bundle across test SNRs without retraining it.
///
/// `Psnr` reports the protected-pipeline reconstruction (correct passwords)
/// per legitimate-link SNR. `EveAccuracy` reports the probe-measured
/// eavesdropping accuracy on the protected view per eavesdropping-link SNR
/// (a fresh fixed-budget probe per point — the measurement instrument, not
/// the system, is retrained).
pub fn snr_sweep(
    bundle: &ModelBundle,
    train: &ColoredDataset,
    test: &ColoredDataset,
    snr_list: &[f32],
    target: SweepTarget,
    password: &PasswordSpec,
    seed: u64,
    config_hash: u64,
) -> Result<SweepResult> {
    if snr_list.is_empty() {
        return Err(Error::InvalidInput("empty SNR list".into()));
    }
    let x = test.all_x();
    let (y_t, y_s) = crate::dib::encode(bundle, &x)?;
    let mut rows = Vec::with_capacity(snr_list.len());
    for (i, &snr) in snr_list.iter().enumerate() {
        let mut rng = Rng::stream(seed, Stream::Cell(i as u64));
        match target {
            SweepTarget::Psnr => {
                let p = password_batch(&mut rng, password, test.len());
                let y_s_p = encrypt(&y_s, &p, &bundle.encryptor)?;
                let sent = crate::pp::protected_transmit(&y_t, &y_s_p)?;
                let recv = awgn(&sent, &ChannelSpec::new(snr), &mut rng);
                let m_t = y_t.cols();
                let m_s = y_s.cols();
                let yt_b = slice_cols(&recv, 0, m_t)?;
                let ysp_b = slice_cols(&recv, m_t, m_s)?;
                let ys_bar = decrypt(&ysp_b, &p, &bundle.decryptor)?;
                let x_hat = bundle.decoder.forward_pure(&hconcat(&yt_b, &ys_bar)?)?;
                let mse = crate::nn::mse(&x_hat, &x)?;
                let p = psnr(&x, &x_hat, 8)?;
                rows.push(alloc::vec![p, mse]);
            }
            SweepTarget::EveAccuracy => {
                let acc = probe_leakage(
                    bundle,
                    train,
                    test,
                    EvePipeline::Protected,
                    snr,
                    password,
                    seed ^ ((i as u64 + 1) << 32),
                )?;
                rows.push(alloc::vec![acc]);
            }
        }
    }
    Ok(SweepResult {
        target: match target {
            SweepTarget::EveAccuracy => "eve_accuracy".into(),
            SweepTarget::Psnr => "psnr".into(),
        },
        columns: match target {
            SweepTarget::EveAccuracy => alloc::vec!["accuracy".into()],
            SweepTarget::Psnr => alloc::vec!["psnr_db".into(), "mse".into()],
        },
        axis: snr_list.to_vec(),
        rows,
        seed,
        config_hash,
    })
}

/// Retrain the protection stage over a grid of password spaces and measure
/// the probe accuracies of the reference and protected pipelines, averaged
/// over seeds. Row layout: [len, p_level, unprotected, protected,
/// public_only, guess].
#[allow(clippy::too_many_arguments)]
pub fn password_sweep(
    train: &ColoredDataset,
    test: &ColoredDataset,
    dib_bundle: &ModelBundle,
    base_cfg: &PpConfig,
    grid: &[(usize, u32)],
    seeds: &[u64],
    config_hash: u64,
) -> Result<SweepResult> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidInput("empty sweep grid or seed list".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (cell, &(len, p_level)) in grid.iter().enumerate() {
        let password = PasswordSpec::new(len, p_level)?;
        let mut acc = [0.0f64; 4];
        for (si, &seed) in seeds.iter().enumerate() {
            let cell_seed = seed ^ (cell as u64) << 32;
            let cfg = PpConfig {
                password,
                ..base_cfg.clone()
            };
            let outcome = crate::pp::train_pp(train, test, dib_bundle, &cfg, cell_seed)?;
            let probe_seed = cell_seed ^ 0x5eed ^ (si as u64);
            acc[0] += probe_leakage(
                &outcome.bundle,
                train,
                test,
                EvePipeline::Unprotected,
                cfg.snr_ae_db,
                &password,
                probe_seed,
            )? as f64;
            acc[1] += probe_leakage(
                &outcome.bundle,
                train,
                test,
                EvePipeline::Protected,
                cfg.snr_ae_db,
                &password,
                probe_seed,
            )? as f64;
            acc[2] += probe_leakage(
                &outcome.bundle,
                train,
                test,
                EvePipeline::PublicOnly,
                cfg.snr_ae_db,
                &password,
                probe_seed,
            )? as f64;
            acc[3] += probe_leakage(
                &outcome.bundle,
                train,
                test,
                EvePipeline::GuessDecrypt,
                cfg.snr_ae_db,
                &password,
                probe_seed,
            )? as f64;
        }
        let k = seeds.len() as f64;
        rows.push(alloc::vec![
            len as f32,
            p_level as f32,
            (acc[0] / k) as f32,
            (acc[1] / k) as f32,
            (acc[2] / k) as f32,
            (acc[3] / k) as f32,
        ]);
    }
    Ok(SweepResult {
        target: "password_grid".into(),
        columns: alloc::vec![
            "len".into(),
            "p_level".into(),
            "unprotected".into(),
            "protected".into(),
            "public_only".into(),
            "guess".into(),
        ],
        axis: (0..grid.len()).map(|i| i as f32).collect(),
        rows,
        seed: seeds[0],
        config_hash,
    })
}

/// Comparison baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    /// Plain JSCC; at test time a random private-sized subset of codeword
    /// entries is zeroed before transmission.
    RandomDiscard,
    /// Disentangled training, then y_s forced to zero and the decoder
    /// fine-tuned.
    PrivateDiscard,
    /// Joint adversarial training of encoder/decoder against an
    /// eavesdropper classifier.
    Adversarial,
}

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub snr_ab_db: f32,
    pub snr_ae_db: f32,
    pub m: usize,
    pub m_s: usize,
    /// Entropy weight for the adversarial baseline.
    pub alpha1: f32,
    pub adam: AdamConfig,
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub mode: BaselineMode,
    /// Test reconstruction MSE through the baseline's own pipeline.
    pub test_mse: f32,
    /// Probe accuracy on the private label at `snr_ae_db`.
    pub eve_accuracy: f32,
}

/// Train and evaluate one baseline.
pub fn run_baseline(
    mode: BaselineMode,
    train: &ColoredDataset,
    test: &ColoredDataset,
    dib_bundle: Option<&ModelBundle>,
    cfg: &BaselineConfig,
    seed: u64,
) -> Result<BaselineOutcome> {
    match mode {
        BaselineMode::RandomDiscard => baseline_random_discard(train, test, cfg, seed),
        BaselineMode::PrivateDiscard => {
            let bundle = dib_bundle.ok_or_else(|| {
                Error::Contract("the private-discard baseline needs a trained bundle".into())
            })?;
            baseline_private_discard(train, test, bundle, cfg, seed)
        }
        BaselineMode::Adversarial => baseline_adversarial(train, test, cfg, seed),
    }
}

fn plain_jscc(m: usize, rng: &mut Rng) -> (Mlp, Mlp) {
    let enc = Mlp::new(
        &[crate::data::SAMPLE_WIDTH, 512, 128, m],
        Activation::Identity,
        rng,
    );
    let dec = Mlp::new(
        &[m, 256, 512, crate::data::SAMPLE_WIDTH],
        Activation::Sigmoid,
        rng,
    );
    (enc, dec)
}

fn baseline_random_discard(
    train: &ColoredDataset,
    test: &ColoredDataset,
    cfg: &BaselineConfig,
    seed: u64,
) -> Result<BaselineOutcome> {
    let mut init_rng = Rng::stream(seed, Stream::Init);
    let (mut enc, mut dec) = plain_jscc(cfg.m, &mut init_rng);
    let mut shuffle_rng = Rng::stream(seed, Stream::Shuffle);
    let mut channel_rng = Rng::stream(seed, Stream::ChannelTrain);
    let spec_ab = ChannelSpec::new(cfg.snr_ab_db);
    let mut opt_enc = AdamState::for_net(&enc);
    let mut opt_dec = AdamState::for_net(&dec);
    for _ in 0..cfg.epochs {
        let batches = BatchIter::new(train.len(), cfg.batch_size, true, Some(&mut shuffle_rng))?;
        for idx in batches {
            let x = train.x_batch(&idx);
            let mut tape = Tape::new();
            let x_node = tape.constant(x.clone());
            let e = enc.forward(&mut tape, x_node, true)?;
            let sent = tape.row_unit_power(e.output)?;
            let noise = crate::channel::noise_like(tape.value(sent).shape(), &spec_ab, &mut channel_rng);
            let recv = tape.add_noise(sent, &noise)?;
            let d = dec.forward(&mut tape, recv, true)?;
            let recon = tape.mse_batch_sum(d.output, &x)?;
            let loss = tape.combine(&[(recon, 1.0 / idx.len() as f32)])?;
            let grads = tape.backward(loss)?;
            apply_adam(&mut dec, &mut opt_dec, &d, &grads, &cfg.adam)?;
            apply_adam(&mut enc, &mut opt_enc, &e, &grads, &cfg.adam)?;
        }
    }

    // Test: zero a random private-sized index subset, resampled per batch,
    // then transmit the remainder.
    let mut eval_rng = Rng::stream(seed, Stream::ChannelEval);
    let discarded_train = discard_view(&enc, train, cfg, &mut eval_rng, cfg.snr_ae_db)?;
    let discarded_test = discard_view(&enc, test, cfg, &mut eval_rng, cfg.snr_ae_db)?;
    let (_, eve_acc) = train_probe(
        &discarded_train,
        &train.colors,
        &discarded_test,
        &test.colors,
        COLOR_CLASSES,
        seed,
    )?;

    let bob_view = discard_view(&enc, test, cfg, &mut eval_rng, cfg.snr_ab_db)?;
    let x_hat = dec.forward_pure(&bob_view)?;
    let test_mse = crate::nn::mse(&x_hat, &test.all_x())?;
    Ok(BaselineOutcome {
        mode: BaselineMode::RandomDiscard,
        test_mse,
        eve_accuracy: eve_acc,
    })
}

/// Encode, zero a fresh random subset of `m_s` codeword entries per batch,
/// normalize, and add noise at the given SNR.
fn discard_view(
    enc: &Mlp,
    ds: &ColoredDataset,
    cfg: &BaselineConfig,
    rng: &mut Rng,
    snr_db: f32,
) -> Result<Tensor> {
    let spec = ChannelSpec::new(snr_db);
    let mut out = Tensor::zeros(&[ds.len(), cfg.m]);
    let mut row = 0usize;
    let batches = BatchIter::new(ds.len(), cfg.batch_size, false, None)?;
    for idx in batches {
        let x = ds.x_batch(&idx);
        let mut y = enc.forward_pure(&x)?;
        let mut cols: Vec<usize> = (0..cfg.m).collect();
        rng.shuffle(&mut cols);
        for &c in cols.iter().take(cfg.m_s) {
            for r in 0..y.rows() {
                y.row_mut(r)[c] = 0.0;
            }
        }
        let recv = awgn(&power_normalize(&y)?, &spec, rng);
        for r in 0..recv.rows() {
            out.row_mut(row).copy_from_slice(recv.row(r));
            row += 1;
        }
    }
    Ok(out)
}

fn baseline_private_discard(
    train: &ColoredDataset,
    test: &ColoredDataset,
    dib_bundle: &ModelBundle,
    cfg: &BaselineConfig,
    seed: u64,
) -> Result<BaselineOutcome> {
    let mut bundle = dib_bundle.clone();
    let mut shuffle_rng = Rng::stream(seed, Stream::Shuffle);
    let mut channel_rng = Rng::stream(seed, Stream::ChannelTrain);
    let spec_ab = ChannelSpec::new(cfg.snr_ab_db);
    let m_s = bundle.dims.m_s;

    // y_s is fixed to zero and not transmitted; only the decoder fine-tunes
    // on the noisy public half.
    let x_train = train.all_x();
    let yt_unit = power_normalize(&bundle.public_encoder.forward_pure(&x_train)?)?;
    let mut opt_dec = AdamState::for_net(&bundle.decoder);
    for _ in 0..cfg.epochs {
        let batches = BatchIter::new(train.len(), cfg.batch_size, true, Some(&mut shuffle_rng))?;
        for idx in batches {
            let x = train.x_batch(&idx);
            let mut y_t = Tensor::zeros(&[idx.len(), yt_unit.cols()]);
            for (r, &i) in idx.iter().enumerate() {
                y_t.row_mut(r).copy_from_slice(yt_unit.row(i));
            }
            let noisy_t = awgn(&y_t, &spec_ab, &mut channel_rng);
            let input = hconcat(&noisy_t, &Tensor::zeros(&[idx.len(), m_s]))?;
            let mut tape = Tape::new();
            let y_node = tape.constant(input);
            let d = bundle.decoder.forward(&mut tape, y_node, true)?;
            let recon = tape.mse_batch_sum(d.output, &x)?;
            let loss = tape.combine(&[(recon, 1.0 / idx.len() as f32)])?;
            let grads = tape.backward(loss)?;
            apply_adam(&mut bundle.decoder, &mut opt_dec, &d, &grads, &cfg.adam)?;
        }
    }

    let mut eval_rng = Rng::stream(seed, Stream::ChannelEval);
    // The private slot is not transmitted: the decoder sees exact zeros
    // there, only the public half goes through the channel.
    let zero_view = |ds: &ColoredDataset, snr: f32, rng: &mut Rng| -> Result<Tensor> {
        let x = ds.all_x();
        let y_t = bundle.public_encoder.forward_pure(&x)?;
        let noisy_t = awgn(&power_normalize(&y_t)?, &ChannelSpec::new(snr), rng);
        hconcat(&noisy_t, &Tensor::zeros(&[ds.len(), m_s]))
    };
    let eve_train = zero_view(train, cfg.snr_ae_db, &mut eval_rng)?;
    let eve_test = zero_view(test, cfg.snr_ae_db, &mut eval_rng)?;
    let (_, eve_acc) = train_probe(
        &eve_train,
        &train.colors,
        &eve_test,
        &test.colors,
        COLOR_CLASSES,
        seed,
    )?;
    let bob_view = zero_view(test, cfg.snr_ab_db, &mut eval_rng)?;
    let x_hat = bundle.decoder.forward_pure(&bob_view)?;
    let test_mse = crate::nn::mse(&x_hat, &test.all_x())?;
    Ok(BaselineOutcome {
        mode: BaselineMode::PrivateDiscard,
        test_mse,
        eve_accuracy: eve_acc,
    })
}

fn baseline_adversarial(
    train: &ColoredDataset,
    test: &ColoredDataset,
    cfg: &BaselineConfig,
    seed: u64,
) -> Result<BaselineOutcome> {
    let mut init_rng = Rng::stream(seed, Stream::Init);
    let (mut enc, mut dec) = plain_jscc(cfg.m, &mut init_rng);
    let mut eve = Mlp::new(&[cfg.m, 64, COLOR_CLASSES], Activation::Softmax, &mut init_rng);
    let mut shuffle_rng = Rng::stream(seed, Stream::Shuffle);
    let mut channel_rng = Rng::stream(seed, Stream::ChannelTrain);
    let spec_ab = ChannelSpec::new(cfg.snr_ab_db);
    let spec_ae = ChannelSpec::new(cfg.snr_ae_db);
    let mut opt_enc = AdamState::for_net(&enc);
    let mut opt_dec = AdamState::for_net(&dec);
    let mut opt_eve = AdamState::for_net(&eve);

    for _ in 0..cfg.epochs {
        let batches = BatchIter::new(train.len(), cfg.batch_size, true, Some(&mut shuffle_rng))?;
        for idx in batches {
            let b = idx.len() as f32;
            let x = train.x_batch(&idx);
            let s = train.color_batch(&idx);

            // Eve first, on detached codewords.
            let y = enc.forward_pure(&x)?;
            let sent = power_normalize(&y)?;
            let recv_e = awgn(&sent, &spec_ae, &mut channel_rng);
            {
                let mut tape = Tape::new();
                let in_node = tape.constant(recv_e);
                let taped = eve.forward(&mut tape, in_node, true)?;
                let nll = tape.nll_sum(taped.output, &s)?;
                let loss = tape.combine(&[(nll, 1.0 / b)])?;
                let grads = tape.backward(loss)?;
                apply_adam(&mut eve, &mut opt_eve, &taped, &grads, &cfg.adam)?;
            }

            // Then encoder/decoder: reconstruction plus Eve-entropy reward.
            let mut tape = Tape::new();
            let x_node = tape.constant(x.clone());
            let e = enc.forward(&mut tape, x_node, true)?;
            let sent = tape.row_unit_power(e.output)?;
            let noise_b = crate::channel::noise_like(tape.value(sent).shape(), &spec_ab, &mut channel_rng);
            let noise_e = crate::channel::noise_like(tape.value(sent).shape(), &spec_ae, &mut channel_rng);
            let recv_b = tape.add_noise(sent, &noise_b)?;
            let d = dec.forward(&mut tape, recv_b, true)?;
            let recon = tape.mse_batch_sum(d.output, &x)?;
            let recv_e = tape.add_noise(sent, &noise_e)?;
            let eve_taped = eve.forward(&mut tape, recv_e, false)?;
            let h = tape.entropy_sum(eve_taped.output)?;
            let loss = tape.combine(&[(recon, 1.0 / b), (h, -cfg.alpha1 / b)])?;
            let grads = tape.backward(loss)?;
            apply_adam(&mut dec, &mut opt_dec, &d, &grads, &cfg.adam)?;
            apply_adam(&mut enc, &mut opt_enc, &e, &grads, &cfg.adam)?;
        }
    }

    let mut eval_rng = Rng::stream(seed, Stream::ChannelEval);
    let view = |ds: &ColoredDataset, snr: f32, rng: &mut Rng| -> Result<Tensor> {
        let y = enc.forward_pure(&ds.all_x())?;
        Ok(awgn(&power_normalize(&y)?, &ChannelSpec::new(snr), rng))
    };
    let eve_train = view(train, cfg.snr_ae_db, &mut eval_rng)?;
    let eve_test = view(test, cfg.snr_ae_db, &mut eval_rng)?;
    let (_, eve_acc) = train_probe(
        &eve_train,
        &train.colors,
        &eve_test,
        &test.colors,
        COLOR_CLASSES,
        seed,
    )?;
    let bob_view = view(test, cfg.snr_ab_db, &mut eval_rng)?;
    let x_hat = dec.forward_pure(&bob_view)?;
    let test_mse = crate::nn::mse(&x_hat, &test.all_x())?;
    Ok(BaselineOutcome {
        mode: BaselineMode::Adversarial,
        test_mse,
        eve_accuracy: eve_acc,
    })
}

/// Codewords with labels, ready for CSV export (external projection tools
/// consume this).
#[derive(Debug, Clone)]
pub struct CodewordExport {
    pub y_t: Tensor,
    /// Raw y_s, or the protected y_s^p when exported with protection on.
    pub y_s: Tensor,
    pub colors: Vec<u8>,
    pub digits: Vec<u8>,
    pub protected: bool,
}

pub fn export_codewords(
    bundle: &ModelBundle,
    ds: &ColoredDataset,
    protected: bool,
    password: &PasswordSpec,
    seed: u64,
) -> Result<CodewordExport> {
    let x = ds.all_x();
    let (y_t, y_s) = crate::dib::encode(bundle, &x)?;
    let y_s = if protected {
        let mut rng = Rng::stream(seed, Stream::Password);
        let p = password_batch(&mut rng, password, ds.len());
        encrypt(&y_s, &p, &bundle.encryptor)?
    } else {
        y_s
    };
    Ok(CodewordExport {
        y_t,
        y_s,
        colors: ds.colors.clone(),
        digits: ds.digits.clone(),
        protected,
    })
}
