//! Password-based protection of the private subcodeword.
//!
//! Alice and Bob share a per-sample password. An affine encryptor mixes the
//! password into `y_s` before transmission; Bob's decryptor (independent
//! parameters, same shape) undoes the mixing with the correct password. Two
//! adversarial classifiers play Eve: one attacks the noisy protected
//! codeword directly, the other first runs the decryptor with a guessed
//! password. The protection loss maximizes the entropy of both Eves'
//! posteriors while preserving reconstruction; Eve is always updated first
//! within a batch.

use alloc::vec::Vec;

use crate::channel::{noise_like, ChannelSpec};
use crate::data::{BatchIter, ColoredDataset, COLOR_CLASSES};
use crate::model::{ModelBundle, ModelDims};
use crate::nn::{accuracy, apply_adam, AdamConfig, AdamState, Mlp};
use crate::rng::{Rng, Stream};
use crate::tape::Tape;
use crate::tensor::{hconcat, slice_cols, Tensor};
use crate::{Error, Result};

/// The shared-secret space: `len` integer entries, each in `1..=p_level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PasswordSpec {
    pub len: usize,
    pub p_level: u32,
}

impl PasswordSpec {
    pub fn new(len: usize, p_level: u32) -> Result<PasswordSpec> {
        if len < 1 {
            return Err(Error::InvalidInput("password length must be ≥ 1".into()));
        }
        if p_level < 2 {
            return Err(Error::InvalidInput("p_level must be ≥ 2".into()));
        }
        Ok(PasswordSpec { len, p_level })
    }
}

/// Integer password with entries in `[1, p_level]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Password {
    pub values: Vec<u32>,
}

/// Entries i.i.d. uniform over `{1..p_level}`.
pub fn sample_password(rng: &mut Rng, spec: &PasswordSpec) -> Password {
    Password {
        values: (0..spec.len)
            .map(|_| rng.below(spec.p_level as usize) as u32 + 1)
            .collect(),
    }
}

/// Scale integer entries into (0, 1] for the dense layers: value / p_level.
pub fn password_embed(p: &Password, spec: &PasswordSpec) -> Vec<f32> {
    p.values
        .iter()
        .map(|&v| v as f32 / spec.p_level as f32)
        .collect()
}

/// A batch of freshly sampled passwords, already embedded: `[b × len]`.
pub fn password_batch(rng: &mut Rng, spec: &PasswordSpec, b: usize) -> Tensor {
    let mut t = Tensor::zeros(&[b, spec.len]);
    for r in 0..b {
        let p = sample_password(rng, spec);
        t.row_mut(r).copy_from_slice(&password_embed(&p, spec));
    }
    t
}

/// Exact password information content in bits: Len · log2(p_level).
pub fn password_entropy(spec: &PasswordSpec) -> f64 {
    spec.len as f64 * libm::log2(spec.p_level as f64)
}

/// Protect a batch of private subcodewords: T_φ(concat[y_s, embed(p)]).
pub fn encrypt(y_s: &Tensor, p_embedded: &Tensor, encryptor: &Mlp) -> Result<Tensor> {
    encryptor.forward_pure(&hconcat(y_s, p_embedded)?)
}

/// Recover a batch of noisy protected subcodewords:
/// T_φ⁻¹(concat[ŷ_s^p, embed(p)]).
pub fn decrypt(noisy_protected: &Tensor, p_embedded: &Tensor, decryptor: &Mlp) -> Result<Tensor> {
    decryptor.forward_pure(&hconcat(noisy_protected, p_embedded)?)
}

#[derive(Debug, Clone)]
pub struct PpConfig {
    /// Weight on the entropy of Eve's direct estimate.
    pub alpha1: f32,
    /// Weight on the entropy of Eve's wrong-password estimate.
    pub beta1: f32,
    pub password: PasswordSpec,
    /// Epochs of joint protection training.
    pub v_p: usize,
    /// Trailing epochs with the entropy weights at zero. The encryptor has
    /// no incentive to undo its password mixing once the pressure stops,
    /// but the decryptor and decoder get a stationary target to converge
    /// against instead of chasing a drifting one.
    pub settle_epochs: usize,
    pub batch_size: usize,
    pub snr_ab_db: f32,
    pub snr_ae_db: f32,
    pub adam: AdamConfig,
}

impl Default for PpConfig {
    fn default() -> Self {
        PpConfig {
            alpha1: 1e5,
            beta1: 1e5,
            password: PasswordSpec {
                len: 16,
                p_level: 128,
            },
            v_p: 50,
            settle_epochs: 10,
            batch_size: 128,
            snr_ab_db: 30.0,
            snr_ae_db: 15.0,
            adam: AdamConfig::default(),
        }
    }
}

/// Per-epoch record of protection training.
#[derive(Debug, Clone, Copy)]
pub struct PpRow {
    pub epoch: usize,
    /// Mean per-image reconstruction MSE through the protected pipeline.
    pub l_b: f32,
    /// Mean protection loss (reconstruction − weighted entropies).
    pub l_t: f32,
    /// Mean eavesdropper NLL.
    pub l_e: f32,
    /// In-loop Eve accuracy on the noisy protected codeword (test split).
    pub eve_acc_protected: f32,
    /// In-loop Eve accuracy after wrong-password decryption (test split).
    pub eve_acc_guess: f32,
    /// Bob-side reconstruction MSE on the test split.
    pub test_mse: f32,
}

#[derive(Debug)]
pub struct PpOutcome {
    pub bundle: ModelBundle,
    pub rows: Vec<PpRow>,
    /// Update counters; Eve's must stay one ahead within every batch.
    pub eve_updates: u64,
    pub bob_updates: u64,
}

/// Frozen subcodewords for one split, precomputed once per training run
/// (the encoders do not move during protection training).
struct FrozenCodewords {
    y_t: Tensor,
    y_s: Tensor,
}

impl FrozenCodewords {
    fn compute(bundle: &ModelBundle, ds: &ColoredDataset) -> Result<FrozenCodewords> {
        let x = ds.all_x();
        let (y_t, y_s) = crate::dib::encode(bundle, &x)?;
        Ok(FrozenCodewords { y_t, y_s })
    }

    fn gather(&self, idx: &[usize]) -> (Tensor, Tensor) {
        let mut y_t = Tensor::zeros(&[idx.len(), self.y_t.cols()]);
        let mut y_s = Tensor::zeros(&[idx.len(), self.y_s.cols()]);
        for (r, &i) in idx.iter().enumerate() {
            y_t.row_mut(r).copy_from_slice(self.y_t.row(i));
            y_s.row_mut(r).copy_from_slice(self.y_s.row(i));
        }
        (y_t, y_s)
    }
}

/// Transmit-side layout of a protected codeword: the public half is
/// row-normalized as usual; the protected private half carries
/// password-induced scale variation the legitimate decryptor must invert,
/// so its unit-power constraint is enforced on the batch average instead
/// of per row.
pub fn protected_transmit(y_t: &Tensor, y_s_p: &Tensor) -> Result<Tensor> {
    hconcat(
        &crate::channel::power_normalize(y_t)?,
        &crate::channel::batch_power_normalize(y_s_p)?,
    )
}

/// The three batch losses of protection training (batch means), computed
/// without any parameter update. `L_B` is the reconstruction through
/// encrypt → channel → decrypt → decode; `L_T` subtracts the weighted Eve
/// entropies; `L_E` is the combined NLL of both Eve classifiers.
#[allow(clippy::too_many_arguments)]
pub fn pp_losses(
    x: &Tensor,
    s_onehot: &Tensor,
    y_t: &Tensor,
    y_s: &Tensor,
    p: &Tensor,
    p_guess: &Tensor,
    bundle: &ModelBundle,
    cfg: &PpConfig,
    rng: &mut Rng,
) -> Result<(f32, f32, f32)> {
    let spec_ab = ChannelSpec::new(cfg.snr_ab_db);
    let spec_ae = ChannelSpec::new(cfg.snr_ae_db);
    let b = x.rows() as f32;
    let m_t = y_t.cols();
    let m_s = y_s.cols();

    let y_s_p = encrypt(y_s, p, &bundle.encryptor)?;
    let sent = protected_transmit(y_t, &y_s_p)?;

    // Bob's link.
    let recv_b = crate::channel::awgn(&sent, &spec_ab, rng);
    let yt_b = slice_cols(&recv_b, 0, m_t)?;
    let ysp_b = slice_cols(&recv_b, m_t, m_s)?;
    let ys_bar = decrypt(&ysp_b, p, &bundle.decryptor)?;
    let y_bar = hconcat(&yt_b, &ys_bar)?;
    let x_hat = bundle.decoder.forward_pure(&y_bar)?;
    let l_b = batch_mse_sum(&x_hat, x) / b;

    // Eve's link (independent noise).
    let recv_e = crate::channel::awgn(&sent, &spec_ae, rng);
    let yt_e = slice_cols(&recv_e, 0, m_t)?;
    let ysp_e = slice_cols(&recv_e, m_t, m_s)?;
    let eve_direct = bundle.eve.forward_pure(&recv_e)?;
    let ys_guess = decrypt(&ysp_e, p_guess, &bundle.decryptor)?;
    let y_guess = hconcat(&yt_e, &ys_guess)?;
    let eve_guess = bundle.eve_guess.forward_pure(&y_guess)?;

    let h_direct = entropy_sum(&eve_direct) / b;
    let h_guess = entropy_sum(&eve_guess) / b;
    let l_t = l_b - cfg.alpha1 * h_direct - cfg.beta1 * h_guess;

    let l_e = (nll_sum_value(&eve_direct, s_onehot) + nll_sum_value(&eve_guess, s_onehot)) / b;
    Ok((l_b, l_t, l_e))
}

fn batch_mse_sum(pred: &Tensor, target: &Tensor) -> f32 {
    let cols = pred.cols().max(1);
    let mut acc = 0.0f64;
    for (p, t) in pred.data().iter().zip(target.data()) {
        let d = (*p - *t) as f64;
        acc += d * d;
    }
    (acc / cols as f64) as f32
}

fn entropy_sum(probs: &Tensor) -> f32 {
    let mut acc = 0.0f64;
    for &v in probs.data() {
        if v > 0.0 {
            acc -= (v as f64) * libm::log(v.max(crate::tape::PROB_FLOOR) as f64);
        }
    }
    acc as f32
}

fn nll_sum_value(probs: &Tensor, onehot: &Tensor) -> f32 {
    let mut acc = 0.0f64;
    for r in 0..probs.rows() {
        let k = onehot.row(r).iter().position(|&v| v == 1.0).unwrap_or(0);
        acc -= libm::log(probs.row(r)[k].max(crate::tape::PROB_FLOOR) as f64);
    }
    acc as f32
}

/// Joint protection training per the alternating schedule: sample data,
/// passwords, and guesses; update both Eve classifiers on their NLL; then
/// update decoder, encryptor, and decryptor on L_B + L_T. The encoders from
/// disentangling training stay frozen throughout.
///
/// The encryptor, decryptor, and both Eve nets are re-initialized to match
/// `cfg.password`; the decoder warm-starts from the incoming bundle.
pub fn train_pp(
    train: &ColoredDataset,
    test: &ColoredDataset,
    dib_bundle: &ModelBundle,
    cfg: &PpConfig,
    master_seed: u64,
) -> Result<PpOutcome> {
    if cfg.v_p == 0 {
        return Err(Error::Contract("v_p must be ≥ 1".into()));
    }
    if train.is_empty() {
        return Err(Error::Degenerate("empty training dataset".into()));
    }
    PasswordSpec::new(cfg.password.len, cfg.password.p_level)?;

    let dims = ModelDims {
        m_s: dib_bundle.dims.m_s,
        m_t: dib_bundle.dims.m_t,
        password_len: cfg.password.len,
    };
    let mut init_rng = Rng::stream(master_seed, Stream::Init);
    // Fresh protection-side nets sized for this password spec; everything
    // the disentangling stage trained is carried over.
    let fresh = ModelBundle::new(dims, &mut init_rng);
    let mut bundle = ModelBundle {
        private_encoder: dib_bundle.private_encoder.clone(),
        public_encoder: dib_bundle.public_encoder.clone(),
        decoder: dib_bundle.decoder.clone(),
        classifier: dib_bundle.classifier.clone(),
        discriminator: dib_bundle.discriminator.clone(),
        encryptor: fresh.encryptor,
        decryptor: fresh.decryptor,
        eve: fresh.eve,
        eve_guess: fresh.eve_guess,
        dims,
    };

    let mut shuffle_rng = Rng::stream(master_seed, Stream::Shuffle);
    let mut channel_rng = Rng::stream(master_seed, Stream::ChannelTrain);
    let mut password_rng = Rng::stream(master_seed, Stream::Password);
    let mut eval_rng = Rng::stream(master_seed, Stream::ChannelEval);
    let spec_ab = ChannelSpec::new(cfg.snr_ab_db);
    let spec_ae = ChannelSpec::new(cfg.snr_ae_db);

    let frozen_train = FrozenCodewords::compute(&bundle, train)?;
    let frozen_test = FrozenCodewords::compute(&bundle, test)?;
    let test_x = test.all_x();
    let test_colors = crate::nn::onehot(&test.colors, COLOR_CLASSES);

    let mut opt_dec = AdamState::for_net(&bundle.decoder);
    let mut opt_enc = AdamState::for_net(&bundle.encryptor);
    let mut opt_decr = AdamState::for_net(&bundle.decryptor);
    let mut opt_eve = AdamState::for_net(&bundle.eve);
    let mut opt_eve_guess = AdamState::for_net(&bundle.eve_guess);

    let mut eve_updates = 0u64;
    let mut bob_updates = 0u64;
    let m_t = dims.m_t;
    let m_s = dims.m_s;

    let game_epochs = cfg.v_p.saturating_sub(cfg.settle_epochs);
    let mut rows = Vec::with_capacity(cfg.v_p);
    for epoch in 0..cfg.v_p {
        let (alpha1, beta1) = if epoch < game_epochs {
            (cfg.alpha1, cfg.beta1)
        } else {
            (0.0, 0.0)
        };
        let mut lb_sum = 0.0f64;
        let mut lt_sum = 0.0f64;
        let mut le_sum = 0.0f64;
        let mut seen = 0usize;
        let batches = BatchIter::new(train.len(), cfg.batch_size, true, Some(&mut shuffle_rng))?;
        for idx in batches {
            let b = idx.len();
            let x = train.x_batch(&idx);
            let s = train.color_batch(&idx);
            let (y_t, y_s) = frozen_train.gather(&idx);
            let p = password_batch(&mut password_rng, &cfg.password, b);
            let p_guess = password_batch(&mut password_rng, &cfg.password, b);

            // ── Eve first: both classifiers on their NLL, inputs detached ──
            let yt_unit = crate::channel::power_normalize(&y_t)?;
            let y_s_p = encrypt(&y_s, &p, &bundle.encryptor)?;
            let sent = hconcat(&yt_unit, &crate::channel::batch_power_normalize(&y_s_p)?)?;
            let noise_b = noise_like(sent.shape(), &spec_ab, &mut channel_rng);
            let noise_e = noise_like(sent.shape(), &spec_ae, &mut channel_rng);
            {
                let mut recv_e = sent.clone();
                for (o, z) in recv_e.data_mut().iter_mut().zip(noise_e.data()) {
                    *o += z;
                }
                let yt_e = slice_cols(&recv_e, 0, m_t)?;
                let ysp_e = slice_cols(&recv_e, m_t, m_s)?;
                let ys_guess = decrypt(&ysp_e, &p_guess, &bundle.decryptor)?;
                let y_guess = hconcat(&yt_e, &ys_guess)?;

                let mut tape = Tape::new();
                let direct_in = tape.constant(recv_e);
                let guess_in = tape.constant(y_guess);
                let eve_t = bundle.eve.forward(&mut tape, direct_in, true)?;
                let eve_g = bundle.eve_guess.forward(&mut tape, guess_in, true)?;
                let l1 = tape.nll_sum(eve_t.output, &s)?;
                let l2 = tape.nll_sum(eve_g.output, &s)?;
                let l_e = tape.combine(&[(l1, 1.0), (l2, 1.0)])?;
                le_sum += tape.value(l_e).scalar_value() as f64;
                let grads = tape.backward(l_e)?;
                apply_adam(&mut bundle.eve, &mut opt_eve, &eve_t, &grads, &cfg.adam)?;
                apply_adam(
                    &mut bundle.eve_guess,
                    &mut opt_eve_guess,
                    &eve_g,
                    &grads,
                    &cfg.adam,
                )?;
                eve_updates += 1;
            }

            // ── Then Bob's side: decoder + encryptor + decryptor on L_B + L_T ──
            debug_assert_eq!(eve_updates, bob_updates + 1, "Eve must update first");
            {
                let mut tape = Tape::new();
                let ys_node = tape.constant(y_s.clone());
                let yt_unit_node = tape.constant(yt_unit.clone());
                let p_node = tape.constant(p.clone());
                let pg_node = tape.constant(p_guess.clone());

                let enc_in = tape.concat_cols(ys_node, p_node)?;
                let enc = bundle.encryptor.forward(&mut tape, enc_in, true)?;
                let ysp_unit = tape.batch_unit_power(enc.output)?;
                let sent_node = tape.concat_cols(yt_unit_node, ysp_unit)?;

                // Bob path: decrypt with the true password, decode.
                let recv_b = tape.add_noise(sent_node, &noise_b)?;
                let ysp_b = tape.slice_cols(recv_b, m_t, m_s)?;
                let yt_b = tape.slice_cols(recv_b, 0, m_t)?;
                let dec_in = tape.concat_cols(ysp_b, p_node)?;
                let decr = bundle.decryptor.forward(&mut tape, dec_in, true)?;
                let y_bar = tape.concat_cols(yt_b, decr.output)?;
                let dec = bundle.decoder.forward(&mut tape, y_bar, true)?;
                let recon = tape.mse_batch_sum(dec.output, &x)?;

                // Eve paths: entropy flows into the protection transforms
                // through frozen Eve parameters.
                let recv_e = tape.add_noise(sent_node, &noise_e)?;
                let eve_t = bundle.eve.forward(&mut tape, recv_e, false)?;
                let h_direct = tape.entropy_sum(eve_t.output)?;

                let ysp_e = tape.slice_cols(recv_e, m_t, m_s)?;
                let yt_e = tape.slice_cols(recv_e, 0, m_t)?;
                let guess_in = tape.concat_cols(ysp_e, pg_node)?;
                let decr_g = bundle.decryptor.forward(&mut tape, guess_in, true)?;
                let y_guess = tape.concat_cols(yt_e, decr_g.output)?;
                let eve_g = bundle.eve_guess.forward(&mut tape, y_guess, false)?;
                let h_guess = tape.entropy_sum(eve_g.output)?;

                // L_B + L_T as batch means: reconstruction counts once per loss.
                let bf = b as f32;
                let loss = tape.combine(&[
                    (recon, 2.0 / bf),
                    (h_direct, -alpha1 / bf),
                    (h_guess, -beta1 / bf),
                ])?;
                let recon_v = tape.value(recon).scalar_value() as f64;
                lb_sum += recon_v;
                lt_sum += recon_v
                    - alpha1 as f64 * tape.value(h_direct).scalar_value() as f64
                    - beta1 as f64 * tape.value(h_guess).scalar_value() as f64;

                let grads = tape.backward(loss)?;
                apply_adam(&mut bundle.decoder, &mut opt_dec, &dec, &grads, &cfg.adam)?;
                apply_adam(&mut bundle.encryptor, &mut opt_enc, &enc, &grads, &cfg.adam)?;
                // The decryptor appears twice on the tape (Bob + guess path);
                // merge its gradient contributions.
                let merged: Vec<Option<Tensor>> = decr
                    .params
                    .iter()
                    .zip(&decr_g.params)
                    .map(|(&a, &bb)| match (grads.get(a), grads.get(bb)) {
                        (Some(ga), Some(gb)) => {
                            let mut g = ga.clone();
                            for (u, v) in g.data_mut().iter_mut().zip(gb.data()) {
                                *u += v;
                            }
                            Some(g)
                        }
                        (Some(g), None) | (None, Some(g)) => Some(g.clone()),
                        (None, None) => None,
                    })
                    .collect();
                let refs: Vec<Option<&Tensor>> = merged.iter().map(|g| g.as_ref()).collect();
                opt_decr.step(&mut bundle.decryptor, &refs, &cfg.adam)?;
                bob_updates += 1;
            }
            seen += b;
        }

        let metrics = evaluate_epoch(
            &bundle,
            &frozen_test,
            &test_x,
            &test_colors,
            cfg,
            &spec_ab,
            &spec_ae,
            &mut eval_rng,
        )?;
        rows.push(PpRow {
            epoch,
            l_b: (lb_sum / seen.max(1) as f64) as f32,
            l_t: (lt_sum / seen.max(1) as f64) as f32,
            l_e: (le_sum / seen.max(1) as f64) as f32,
            eve_acc_protected: metrics.0,
            eve_acc_guess: metrics.1,
            test_mse: metrics.2,
        });
    }

    Ok(PpOutcome {
        bundle,
        rows,
        eve_updates,
        bob_updates,
    })
}

/// Test-split metrics: in-loop Eve accuracies and Bob's reconstruction MSE.
#[allow(clippy::too_many_arguments)]
fn evaluate_epoch(
    bundle: &ModelBundle,
    frozen: &FrozenCodewords,
    test_x: &Tensor,
    test_colors: &Tensor,
    cfg: &PpConfig,
    spec_ab: &ChannelSpec,
    spec_ae: &ChannelSpec,
    rng: &mut Rng,
) -> Result<(f32, f32, f32)> {
    let n = test_x.rows();
    let m_t = frozen.y_t.cols();
    let m_s = frozen.y_s.cols();
    let p = password_batch(rng, &cfg.password, n);
    let p_guess = password_batch(rng, &cfg.password, n);

    let y_s_p = encrypt(&frozen.y_s, &p, &bundle.encryptor)?;
    let sent = protected_transmit(&frozen.y_t, &y_s_p)?;

    let recv_e = crate::channel::awgn(&sent, spec_ae, rng);
    let eve_probs = bundle.eve.forward_pure(&recv_e)?;
    let acc_protected = accuracy(&eve_probs, test_colors);

    let yt_e = slice_cols(&recv_e, 0, m_t)?;
    let ysp_e = slice_cols(&recv_e, m_t, m_s)?;
    let ys_guess = decrypt(&ysp_e, &p_guess, &bundle.decryptor)?;
    let guess_probs = bundle.eve_guess.forward_pure(&hconcat(&yt_e, &ys_guess)?)?;
    let acc_guess = accuracy(&guess_probs, test_colors);

    let recv_b = crate::channel::awgn(&sent, spec_ab, rng);
    let yt_b = slice_cols(&recv_b, 0, m_t)?;
    let ysp_b = slice_cols(&recv_b, m_t, m_s)?;
    let ys_bar = decrypt(&ysp_b, &p, &bundle.decryptor)?;
    let x_hat = bundle.decoder.forward_pure(&hconcat(&yt_b, &ys_bar)?)?;
    let test_mse = crate::nn::mse(&x_hat, test_x)?;

    Ok((acc_protected, acc_guess, test_mse))
}

/// Reconstruction MSE through the full protected pipeline with correct
/// passwords, at an arbitrary test SNR.
pub fn protected_mse(
    bundle: &ModelBundle,
    ds: &ColoredDataset,
    password: &PasswordSpec,
    snr_ab_db: f32,
    rng: &mut Rng,
) -> Result<f32> {
    let x = ds.all_x();
    let (y_t, y_s) = crate::dib::encode(bundle, &x)?;
    let p = password_batch(rng, password, ds.len());
    let y_s_p = encrypt(&y_s, &p, &bundle.encryptor)?;
    let sent = protected_transmit(&y_t, &y_s_p)?;
    let recv = crate::channel::awgn(&sent, &ChannelSpec::new(snr_ab_db), rng);
    let m_t = y_t.cols();
    let m_s = y_s.cols();
    let yt_b = slice_cols(&recv, 0, m_t)?;
    let ysp_b = slice_cols(&recv, m_t, m_s)?;
    let ys_bar = decrypt(&ysp_b, &p, &bundle.decryptor)?;
    let x_hat = bundle.decoder.forward_pure(&hconcat(&yt_b, &ys_bar)?)?;
    crate::nn::mse(&x_hat, &x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn password_entries_in_range_and_uniform() {
        let spec = PasswordSpec::new(4, 2).unwrap();
        let mut rng = Rng::new(3);
        let mut ones = 0usize;
        let draws = 100_000;
        for _ in 0..draws {
            let p = sample_password(&mut rng, &spec);
            assert_eq!(p.values.len(), 4);
            assert!(p.values.iter().all(|&v| (1..=2).contains(&v)));
            ones += p.values.iter().filter(|&&v| v == 1).count();
        }
        let freq = ones as f64 / (draws * 4) as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn password_spec_validation() {
        assert!(PasswordSpec::new(0, 4).is_err());
        assert!(PasswordSpec::new(4, 1).is_err());
        assert!(PasswordSpec::new(16, 2).is_ok());
    }

    #[test]
    fn embed_examples_and_exact_unembedding() {
        let spec = PasswordSpec::new(2, 4).unwrap();
        let p = Password {
            values: vec![4, 2],
        };
        let e = password_embed(&p, &spec);
        assert_eq!(e, vec![1.0, 0.5]);

        // Embed then un-embed recovers the integers exactly.
        let spec = PasswordSpec::new(8, 128).unwrap();
        let mut rng = Rng::new(4);
        for _ in 0..100 {
            let p = sample_password(&mut rng, &spec);
            let e = password_embed(&p, &spec);
            let back: Vec<u32> = e
                .iter()
                .map(|&v| libm::roundf(v * spec.p_level as f32) as u32)
                .collect();
            assert_eq!(back, p.values);
        }
    }

    #[test]
    fn password_entropy_examples() {
        assert_eq!(
            password_entropy(&PasswordSpec::new(16, 256).unwrap()),
            128.0
        );
        assert_eq!(password_entropy(&PasswordSpec::new(1, 2).unwrap()), 1.0);
        assert_eq!(
            password_entropy(&PasswordSpec::new(16, 128).unwrap()),
            112.0
        );
    }

    #[test]
    fn encrypt_shapes_and_zero_params() {
        let dims = ModelDims {
            m_s: 4,
            m_t: 6,
            password_len: 3,
        };
        let bundle = ModelBundle::zeros(dims);
        let y_s = Tensor::from_vec(&[5, 4], vec![0.5; 20]).unwrap();
        let spec = PasswordSpec::new(3, 8).unwrap();
        let p = password_batch(&mut Rng::new(5), &spec, 5);
        let out = encrypt(&y_s, &p, &bundle.encryptor).unwrap();
        assert_eq!(out.shape(), &[5, 4]);
        // Zero-parameter encryptor: zero output regardless of password.
        assert!(out.data().iter().all(|&v| v == 0.0));

        let back = decrypt(&out, &p, &bundle.decryptor).unwrap();
        assert_eq!(back.shape(), &[5, 4]);
    }

    #[test]
    fn losses_degenerate_to_reconstruction_when_knobs_off() {
        let dims = ModelDims {
            m_s: 4,
            m_t: 6,
            password_len: 3,
        };
        let mut rng = Rng::new(6);
        let bundle = ModelBundle::new(dims, &mut rng);
        let b = 4;
        let x = {
            let data: Vec<f32> = (0..b * crate::data::SAMPLE_WIDTH)
                .map(|_| rng.uniform(0.0, 1.0))
                .collect();
            Tensor::from_vec(&[b, crate::data::SAMPLE_WIDTH], data).unwrap()
        };
        let s = crate::nn::onehot(&[0, 1, 2, 3], COLOR_CLASSES);
        let (y_t, y_s) = crate::dib::encode(&bundle, &x).unwrap();
        let spec = PasswordSpec::new(3, 8).unwrap();
        let p = password_batch(&mut rng, &spec, b);
        let pg = password_batch(&mut rng, &spec, b);
        let cfg = PpConfig {
            alpha1: 0.0,
            beta1: 0.0,
            password: spec,
            snr_ab_db: f32::INFINITY,
            snr_ae_db: f32::INFINITY,
            ..PpConfig::default()
        };
        let (l_b, l_t, _l_e) =
            pp_losses(&x, &s, &y_t, &y_s, &p, &pg, &bundle, &cfg, &mut rng).unwrap();
        assert!((l_b - l_t).abs() < 1e-6, "l_b {l_b} vs l_t {l_t}");
    }

    #[test]
    fn entropy_terms_bound_the_protection_loss() {
        // L_T ≥ L_B − (α₁ + β₁)·ln S on every batch.
        let dims = ModelDims {
            m_s: 4,
            m_t: 6,
            password_len: 3,
        };
        let mut rng = Rng::new(7);
        let bundle = ModelBundle::new(dims, &mut rng);
        let b = 6;
        let x = {
            let data: Vec<f32> = (0..b * crate::data::SAMPLE_WIDTH)
                .map(|_| rng.uniform(0.0, 1.0))
                .collect();
            Tensor::from_vec(&[b, crate::data::SAMPLE_WIDTH], data).unwrap()
        };
        let s = crate::nn::onehot(&[0, 1, 2, 3, 4, 5], COLOR_CLASSES);
        let (y_t, y_s) = crate::dib::encode(&bundle, &x).unwrap();
        let spec = PasswordSpec::new(3, 8).unwrap();
        let cfg = PpConfig {
            alpha1: 3.0,
            beta1: 2.0,
            password: spec,
            ..PpConfig::default()
        };
        for _ in 0..10 {
            let p = password_batch(&mut rng, &spec, b);
            let pg = password_batch(&mut rng, &spec, b);
            let (l_b, l_t, _) =
                pp_losses(&x, &s, &y_t, &y_s, &p, &pg, &bundle, &cfg, &mut rng).unwrap();
            let bound = l_b - (cfg.alpha1 + cfg.beta1) * (COLOR_CLASSES as f32).ln();
            assert!(l_t >= bound - 1e-3, "l_t {l_t} below bound {bound}");
        }
    }
}
