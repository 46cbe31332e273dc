//! The AWGN wiretap channel: one legitimate link and one eavesdropping link,
//! both additive white Gaussian noise at configurable SNR.
//!
//! SNR is only meaningful against a power convention: transmitted codewords
//! are scaled to unit average power per dimension, and the noise variance is
//! σ² = 10^(−SNR/10). `snr_db = f32::INFINITY` is the noiseless sentinel.

use alloc::format;

use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalize {
    UnitAveragePower,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub snr_db: f32,
    pub normalize: Normalize,
}

impl ChannelSpec {
    pub fn new(snr_db: f32) -> ChannelSpec {
        ChannelSpec {
            snr_db,
            normalize: Normalize::UnitAveragePower,
        }
    }

    /// Noise variance under the unit-average-power convention;
    /// zero for the +∞ noiseless sentinel.
    pub fn noise_variance(&self) -> f32 {
        if self.snr_db.is_infinite() && self.snr_db > 0.0 {
            0.0
        } else {
            libm::powf(10.0, -self.snr_db / 10.0)
        }
    }

    pub fn noise_sigma(&self) -> f32 {
        libm::sqrtf(self.noise_variance())
    }
}

/// Scale each row of `y` so its mean squared entry is 1.
pub fn power_normalize(y: &Tensor) -> Result<Tensor> {
    let mut out = y.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let ms: f64 = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / row.len() as f64;
        if ms == 0.0 {
            return Err(Error::Degenerate(format!(
                "row {r} is all zeros, cannot normalize power"
            )));
        }
        let scale = 1.0 / libm::sqrtf(ms as f32);
        row.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}

/// Scale the whole tensor by one factor so its mean squared entry is 1.
/// Keeps relative row powers (average-power constraint over the batch).
pub fn batch_power_normalize(y: &Tensor) -> Result<Tensor> {
    let ms: f64 = y.data().iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>()
        / y.numel().max(1) as f64;
    if ms == 0.0 {
        return Err(Error::Degenerate(
            "all-zero tensor, cannot normalize power".into(),
        ));
    }
    let scale = 1.0 / libm::sqrtf(ms as f32);
    let mut out = y.clone();
    out.data_mut().iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// y + z with z ~ N(0, σ²I), σ² from the spec. The noise is resampled on
/// every call; gradients (when used on a tape) treat it as a constant.
pub fn awgn(y: &Tensor, spec: &ChannelSpec, rng: &mut Rng) -> Tensor {
    let sigma = spec.noise_sigma();
    let mut out = y.clone();
    if sigma == 0.0 {
        return out;
    }
    let mut noise = alloc::vec![0.0f32; y.numel()];
    rng.fill_normal(&mut noise, sigma);
    for (o, z) in out.data_mut().iter_mut().zip(&noise) {
        *o += z;
    }
    out
}

/// Draw a noise tensor for one transmission (for use with the tape's
/// constant-noise op).
pub fn noise_like(shape: &[usize], spec: &ChannelSpec, rng: &mut Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    let sigma = spec.noise_sigma();
    if sigma > 0.0 {
        rng.fill_normal(t.data_mut(), sigma);
    }
    t
}

/// Normalize (per the spec's policy) and add noise — the full transmit path.
pub fn transmit(y: &Tensor, spec: &ChannelSpec, rng: &mut Rng) -> Result<Tensor> {
    let sent = match spec.normalize {
        Normalize::UnitAveragePower => power_normalize(y)?,
        Normalize::None => y.clone(),
    };
    Ok(awgn(&sent, spec, rng))
}

/// 10·log10(Σ clean² / Σ (noisy−clean)²). Returns +∞ when the noise power
/// is exactly zero.
pub fn measured_snr(clean: &Tensor, noisy: &Tensor) -> Result<f32> {
    if clean.shape() != noisy.shape() {
        return Err(Error::Shape {
            context: "measured_snr",
            expected: clean.shape_string(),
            actual: noisy.shape_string(),
        });
    }
    let mut sig = 0.0f64;
    let mut noise = 0.0f64;
    for (&c, &n) in clean.data().iter().zip(noisy.data()) {
        sig += (c as f64) * (c as f64);
        let d = (n - c) as f64;
        noise += d * d;
    }
    if sig == 0.0 {
        return Err(Error::Degenerate(
            "clean signal is all zeros, SNR undefined".into(),
        ));
    }
    if noise == 0.0 {
        return Ok(f32::INFINITY);
    }
    Ok((10.0 * libm::log10(sig / noise)) as f32)
}
