//! Disentangling training: split the codeword into a private subcodeword
//! that captures the private label and a public subcodeword that is
//! statistically independent of it.
//!
//! Training runs in two steps. Step 1 jointly trains the private encoder
//! and a classifier so `y_s` carries the private label. Step 2 freezes the
//! private encoder and alternates, per batch: decoder on reconstruction,
//! public encoder on reconstruction plus a mutual-information penalty, and
//! the discriminator that supplies the penalty's density-ratio estimate.
//! Training both encoders at once collapses everything into `y_s`, which is
//! exactly what the two-step schedule prevents.

use alloc::vec::Vec;

use crate::channel::{noise_like, ChannelSpec};
use crate::data::{BatchIter, ColoredDataset, COLOR_CLASSES};
use crate::model::ModelBundle;
use crate::nn::{accuracy, apply_adam, onehot, AdamConfig, AdamState, Mlp};
use crate::rng::{Rng, Stream};
use crate::tape::{Tape, PROB_FLOOR};
use crate::tensor::{hconcat, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct DibConfig {
    /// Weight on the mutual-information penalty in the public-encoder loss.
    pub alpha: f32,
    /// Step-2 epochs that run with the penalty off while reconstruction
    /// establishes an informative public subcodeword. Turning the
    /// adversarial term on from scratch lets it shred features faster than
    /// reconstruction can build them; once reconstruction has converged,
    /// the private information in y_t is redundant and the discriminator
    /// prunes it cheaply.
    pub alpha_warmup_epochs: usize,
    /// Epochs over which the penalty weight ramps linearly from 0 to
    /// `alpha` after the warmup. A hard switch-on hands the converged
    /// discriminator's saturated log-ratios to the encoder all at once.
    pub alpha_ramp_epochs: usize,
    /// Clamp on the per-sample log density ratio inside the training loss.
    /// The reported estimate is unclamped (probability-floored only).
    pub mi_clamp: f32,
    /// Step-1 epochs (private encoder + classifier).
    pub v_d1: usize,
    /// Step-2 epochs (public encoder, decoder, discriminator).
    pub v_d2: usize,
    pub batch_size: usize,
    /// Training SNR of the legitimate link, dB.
    pub snr_ab_db: f32,
    pub adam: AdamConfig,
    /// The discriminator runs its own optimizer; it has to track the
    /// encoder closely or its density-ratio estimate goes stale and the
    /// penalty degenerates into blunt structure destruction.
    pub dis_adam: AdamConfig,
}

impl Default for DibConfig {
    fn default() -> Self {
        DibConfig {
            alpha: 1.0,
            alpha_warmup_epochs: 25,
            alpha_ramp_epochs: 10,
            mi_clamp: 3.0,
            v_d1: 30,
            v_d2: 50,
            batch_size: 128,
            snr_ab_db: 30.0,
            adam: AdamConfig::default(),
            dis_adam: AdamConfig {
                lr: 0.003,
                ..AdamConfig::default()
            },
        }
    }
}

/// Per-epoch record of step 1.
#[derive(Debug, Clone, Copy)]
pub struct Step1Row {
    pub epoch: usize,
    /// Mean classification NLL per sample.
    pub l_c: f32,
    /// Noiseless classifier accuracy on the test split.
    pub test_accuracy: f32,
}

/// Per-epoch record of step 2.
#[derive(Debug, Clone, Copy)]
pub struct Step2Row {
    pub epoch: usize,
    /// Mean per-image reconstruction MSE over the epoch.
    pub l_b: f32,
    /// Mean combined public-encoder loss (reconstruction + α · MI estimate).
    pub l_a: f32,
    /// Mean discriminator loss.
    pub l_dis: f32,
    /// Reconstruction MSE on the test split at the training SNR.
    pub test_mse: f32,
}

#[derive(Debug)]
pub struct DibOutcome {
    pub bundle: ModelBundle,
    pub step1: Vec<Step1Row>,
    pub step2: Vec<Step2Row>,
}

/// Deterministic split of an image batch into (public, private) subcodewords.
///
/// Each encoder's output stage scales its rows to unit average power: the
/// codeword is only ever consumed as a channel input, and leaving the scale
/// free lets the public encoder outrun the discriminator by inflating its
/// magnitude instead of shedding dependence.
pub fn encode(bundle: &ModelBundle, x: &Tensor) -> Result<(Tensor, Tensor)> {
    let y_t = crate::channel::power_normalize(&bundle.public_encoder.forward_pure(x)?)?;
    let y_s = crate::channel::power_normalize(&bundle.private_encoder.forward_pure(x)?)?;
    Ok((y_t, y_s))
}

/// Transmit-side normalization for a split codeword: each subcodeword is
/// scaled to unit average power independently, so neither half can starve
/// the other of transmit power, and the concatenation still has unit
/// average power per dimension.
pub fn normalize_split(y_t: &Tensor, y_s: &Tensor) -> Result<Tensor> {
    let t = crate::channel::power_normalize(y_t)?;
    let s = crate::channel::power_normalize(y_s)?;
    hconcat(&t, &s)
}

/// Reconstruct from a (noisy) codeword.
pub fn decode(bundle: &ModelBundle, y: &Tensor) -> Result<Tensor> {
    bundle.decoder.forward_pure(y)
}

/// Variational lower bound on the private mutual information: the mean
/// log-probability the classifier assigns to the true label. Always ≤ 0;
/// −ln S for a uniform classifier.
pub fn vlb_private_mi(
    x: &Tensor,
    s_onehot: &Tensor,
    encoder: &Mlp,
    classifier: &Mlp,
) -> Result<f32> {
    let y_s = crate::channel::power_normalize(&encoder.forward_pure(x)?)?;
    let probs = classifier.forward_pure(&y_s)?;
    Ok(-crate::nn::cross_entropy_nll(&probs, s_onehot)?)
}

/// Break within-row pairing by permuting each subcodeword independently
/// along the batch axis. Row multisets are preserved.
pub fn shuffle_pairs(y_t: &Tensor, y_s: &Tensor, rng: &mut Rng) -> Result<(Tensor, Tensor)> {
    let b = y_t.rows();
    if b != y_s.rows() {
        return Err(Error::Shape {
            context: "shuffle_pairs",
            expected: alloc::format!("{b} rows"),
            actual: alloc::format!("{} rows", y_s.rows()),
        });
    }
    if b < 2 {
        return Err(Error::Degenerate(
            "need at least 2 rows to break pairing".into(),
        ));
    }
    let perm_t = rng.permutation(b);
    let perm_s = rng.permutation(b);
    let mut out_t = Tensor::zeros(&[b, y_t.cols()]);
    let mut out_s = Tensor::zeros(&[b, y_s.cols()]);
    for r in 0..b {
        out_t.row_mut(r).copy_from_slice(y_t.row(perm_t[r]));
        out_s.row_mut(r).copy_from_slice(y_s.row(perm_s[r]));
    }
    Ok((out_t, out_s))
}

/// Discriminator posterior for the "joint" class on paired rows.
fn joint_probability(dis: &Mlp, y_t: &Tensor, y_s: &Tensor) -> Result<Tensor> {
    dis.forward_pure(&hconcat(y_t, y_s)?)
}

/// Binary cross-entropy that drives the discriminator toward 1 on joint
/// pairs and 0 on shuffled pairs:
/// −E[log Dis(y_t, y_s)] − E[log(1 − Dis(ỹ_t, ỹ_s))].
pub fn discriminator_loss(
    y_t: &Tensor,
    y_s: &Tensor,
    shuf_t: &Tensor,
    shuf_s: &Tensor,
    dis: &Mlp,
) -> Result<f32> {
    let joint = joint_probability(dis, y_t, y_s)?;
    let shuffled = joint_probability(dis, shuf_t, shuf_s)?;
    let mut acc = 0.0f64;
    for r in 0..joint.rows() {
        acc -= libm::log(joint.row(r)[1].max(PROB_FLOOR) as f64);
    }
    for r in 0..shuffled.rows() {
        acc -= libm::log(shuffled.row(r)[0].max(PROB_FLOOR) as f64);
    }
    Ok((acc / joint.rows() as f64) as f32)
}

/// Density-ratio estimate of I(y_t; y_s): mean log odds of the "joint"
/// class on genuinely paired rows. Exactly 0 for a discriminator stuck
/// at 1/2.
pub fn density_ratio_mi(y_t: &Tensor, y_s: &Tensor, dis: &Mlp) -> Result<f32> {
    let joint = joint_probability(dis, y_t, y_s)?;
    let mut acc = 0.0f64;
    for r in 0..joint.rows() {
        let row = joint.row(r);
        acc += libm::log(row[1].max(PROB_FLOOR) as f64) - libm::log(row[0].max(PROB_FLOOR) as f64);
    }
    Ok((acc / joint.rows() as f64) as f32)
}

/// One discriminator update on paired vs shuffled subcodeword batches.
/// Returns the mean discriminator loss. Used by both the trainer and the
/// synthetic mutual-information oracle.
pub fn discriminator_step(
    dis: &mut Mlp,
    opt: &mut AdamState,
    adam: &AdamConfig,
    y_t: &Tensor,
    y_s: &Tensor,
    rng: &mut Rng,
) -> Result<f32> {
    let b = y_t.rows();
    let (shuf_t, shuf_s) = shuffle_pairs(y_t, y_s, rng)?;
    let mut tape = Tape::new();
    let joint_in = tape.constant(hconcat(y_t, y_s)?);
    let shuf_in = tape.constant(hconcat(&shuf_t, &shuf_s)?);
    let taped = dis.forward(&mut tape, joint_in, true)?;
    let taped_shuf = dis.forward(&mut tape, shuf_in, true)?;
    let ones = onehot(&alloc::vec![1u8; b], 2);
    let zeros = onehot(&alloc::vec![0u8; b], 2);
    let l_joint = tape.nll_sum(taped.output, &ones)?;
    let l_shuf = tape.nll_sum(taped_shuf.output, &zeros)?;
    let loss = tape.combine(&[(l_joint, 1.0), (l_shuf, 1.0)])?;
    let loss_value = tape.value(loss).scalar_value() / b as f32;
    let grads = tape.backward(loss)?;
    // The two passes share parameters; merge their gradient lists.
    let merged: Vec<Option<Tensor>> = taped
        .params
        .iter()
        .zip(&taped_shuf.params)
        .map(|(&a, &b)| match (grads.get(a), grads.get(b)) {
            (Some(ga), Some(gb)) => {
                let mut g = ga.clone();
                for (x, y) in g.data_mut().iter_mut().zip(gb.data()) {
                    *x += y;
                }
                Some(g)
            }
            (Some(g), None) | (None, Some(g)) => Some(g.clone()),
            (None, None) => None,
        })
        .collect();
    let refs: Vec<Option<&Tensor>> = merged.iter().map(|g| g.as_ref()).collect();
    opt.step(dis, &refs, adam)?;
    Ok(loss_value)
}

/// Run the full two-step disentangling schedule and return the trained
/// bundle with per-epoch metrics.
pub fn train_dib(
    train: &ColoredDataset,
    test: &ColoredDataset,
    cfg: &DibConfig,
    master_seed: u64,
) -> Result<DibOutcome> {
    if cfg.v_d1 == 0 || cfg.v_d2 == 0 {
        return Err(Error::Contract("epoch counts must be ≥ 1".into()));
    }
    if train.is_empty() {
        return Err(Error::Degenerate("empty training dataset".into()));
    }
    let dims = crate::model::ModelDims {
        m_s: 16,
        m_t: 48,
        password_len: 16,
    };
    train_dib_with_dims(train, test, cfg, master_seed, dims)
}

/// As `train_dib` but with explicit codeword dimensions.
pub fn train_dib_with_dims(
    train: &ColoredDataset,
    test: &ColoredDataset,
    cfg: &DibConfig,
    master_seed: u64,
    dims: crate::model::ModelDims,
) -> Result<DibOutcome> {
    let mut init_rng = Rng::stream(master_seed, Stream::Init);
    let mut bundle = ModelBundle::new(dims, &mut init_rng);
    let mut shuffle_rng = Rng::stream(master_seed, Stream::Shuffle);
    let mut channel_rng = Rng::stream(master_seed, Stream::ChannelTrain);
    let mut eval_rng = Rng::stream(master_seed, Stream::ChannelEval);
    let spec_ab = ChannelSpec::new(cfg.snr_ab_db);

    let test_x = test.all_x();
    let test_colors = onehot(&test.colors, COLOR_CLASSES);

    // ── Step 1: private encoder + classifier on classification NLL ──
    let mut opt_fs = AdamState::for_net(&bundle.private_encoder);
    let mut opt_cls = AdamState::for_net(&bundle.classifier);
    let mut step1 = Vec::with_capacity(cfg.v_d1);
    for epoch in 0..cfg.v_d1 {
        let mut loss_sum = 0.0f64;
        let mut seen = 0usize;
        let batches = BatchIter::new(train.len(), cfg.batch_size, true, Some(&mut shuffle_rng))?;
        for idx in batches {
            let x = train.x_batch(&idx);
            let s = train.color_batch(&idx);
            let mut tape = Tape::new();
            let x_node = tape.constant(x);
            let enc = bundle.private_encoder.forward(&mut tape, x_node, true)?;
            let ys_unit = tape.row_unit_power(enc.output)?;
            let cls = bundle.classifier.forward(&mut tape, ys_unit, true)?;
            let nll = tape.nll_sum(cls.output, &s)?;
            let loss = tape.combine(&[(nll, 1.0 / idx.len() as f32)])?;
            loss_sum += tape.value(nll).scalar_value() as f64;
            seen += idx.len();
            let grads = tape.backward(loss)?;
            apply_adam(
                &mut bundle.private_encoder,
                &mut opt_fs,
                &enc,
                &grads,
                &cfg.adam,
            )?;
            apply_adam(&mut bundle.classifier, &mut opt_cls, &cls, &grads, &cfg.adam)?;
        }
        // Noiseless test accuracy: the classifier sees f_φs(x) directly.
        let y_s =
            crate::channel::power_normalize(&bundle.private_encoder.forward_pure(&test_x)?)?;
        let probs = bundle.classifier.forward_pure(&y_s)?;
        step1.push(Step1Row {
            epoch,
            l_c: (loss_sum / seen.max(1) as f64) as f32,
            test_accuracy: accuracy(&probs, &test_colors),
        });
    }

    // ── Step 2: decoder + public encoder vs discriminator, f_φs frozen ──
    let mut opt_ft = AdamState::for_net(&bundle.public_encoder);
    let mut opt_dec = AdamState::for_net(&bundle.decoder);
    let mut opt_dis = AdamState::for_net(&bundle.discriminator);
    let mut step2 = Vec::with_capacity(cfg.v_d2);
    for epoch in 0..cfg.v_d2 {
        let alpha = if epoch < cfg.alpha_warmup_epochs {
            0.0
        } else if cfg.alpha_ramp_epochs > 0 {
            let progress =
                (epoch - cfg.alpha_warmup_epochs + 1) as f32 / cfg.alpha_ramp_epochs as f32;
            cfg.alpha * progress.min(1.0)
        } else {
            cfg.alpha
        };
        let mut recon_sum = 0.0f64;
        let mut la_sum = 0.0f64;
        let mut ldis_sum = 0.0f64;
        let mut seen = 0usize;
        let mut nbatches = 0usize;
        let batches = BatchIter::new(train.len(), cfg.batch_size, true, Some(&mut shuffle_rng))?;
        for idx in batches {
            let x = train.x_batch(&idx);
            let b = idx.len();
            let y_s =
                crate::channel::power_normalize(&bundle.private_encoder.forward_pure(&x)?)?;

            // One taped forward yields both updates' gradients: the MI term
            // never touches the decoder, so the θ_B gradient of the combined
            // loss is exactly the reconstruction gradient.
            let mut tape = Tape::new();
            let x_node = tape.constant(x.clone());
            let ys_node = tape.constant(y_s.clone());
            let enc = bundle.public_encoder.forward(&mut tape, x_node, true)?;
            let yt_unit = tape.row_unit_power(enc.output)?;
            let sent = tape.concat_cols(yt_unit, ys_node)?;
            let noise = noise_like(tape.value(sent).shape(), &spec_ab, &mut channel_rng);
            let received = tape.add_noise(sent, &noise)?;
            let dec = bundle.decoder.forward(&mut tape, received, true)?;
            let recon = tape.mse_batch_sum(dec.output, &x)?;
            let dis_in = tape.concat_cols(yt_unit, ys_node)?;
            let dis_taped = bundle.discriminator.forward(&mut tape, dis_in, false)?;
            let mi = tape.log_ratio_sum_clamped(dis_taped.output, cfg.mi_clamp)?;
            let bf = b as f32;
            let loss = tape.combine(&[(recon, 1.0 / bf), (mi, alpha / bf)])?;

            recon_sum += tape.value(recon).scalar_value() as f64;
            la_sum += tape.value(recon).scalar_value() as f64
                + alpha as f64 * tape.value(mi).scalar_value() as f64;
            seen += b;

            let grads = tape.backward(loss)?;
            apply_adam(&mut bundle.decoder, &mut opt_dec, &dec, &grads, &cfg.adam)?;
            apply_adam(
                &mut bundle.public_encoder,
                &mut opt_ft,
                &enc,
                &grads,
                &cfg.adam,
            )?;

            // Discriminator update on detached subcodewords.
            let y_t = tape.value(yt_unit).clone();
            let l_dis = discriminator_step(
                &mut bundle.discriminator,
                &mut opt_dis,
                &cfg.dis_adam,
                &y_t,
                &y_s,
                &mut shuffle_rng,
            )?;
            ldis_sum += l_dis as f64;
            nbatches += 1;
        }

        let test_mse = reconstruction_mse(&bundle, &test_x, &spec_ab, &mut eval_rng)?;
        step2.push(Step2Row {
            epoch,
            l_b: (recon_sum / seen.max(1) as f64) as f32,
            l_a: (la_sum / seen.max(1) as f64) as f32,
            l_dis: (ldis_sum / nbatches.max(1) as f64) as f32,
            test_mse,
        });
    }

    Ok(DibOutcome {
        bundle,
        step1,
        step2,
    })
}

/// Mean per-image reconstruction MSE through the unprotected pipeline.
pub fn reconstruction_mse(
    bundle: &ModelBundle,
    x: &Tensor,
    spec: &ChannelSpec,
    rng: &mut Rng,
) -> Result<f32> {
    let (y_t, y_s) = encode(bundle, x)?;
    let sent = normalize_split(&y_t, &y_s)?;
    let received = crate::channel::awgn(&sent, spec, rng);
    let x_hat = decode(bundle, &received)?;
    crate::nn::mse(&x_hat, x)
}
