//! The model bundle — every learned component of the system — and its
//! binary checkpoint format.
//!
//! Checkpoint layout: magic `DIBP`, format version u32, then per parameter:
//! name length u16, UTF-8 name, rank u8, dims as u32 each, payload as
//! little-endian 32-bit reals. Round-trips bit-exactly. All multi-byte
//! integers are little-endian.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{COLOR_CLASSES, SAMPLE_WIDTH};
use crate::nn::{Activation, DenseLayer, Mlp};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"DIBP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Codeword and password dimensions; everything else about the architecture
/// is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// Private subcodeword length.
    pub m_s: usize,
    /// Public subcodeword length.
    pub m_t: usize,
    /// Password length (entries).
    pub password_len: usize,
}

impl ModelDims {
    pub fn codeword(&self) -> usize {
        self.m_s + self.m_t
    }
}

/// Named parameter sets for every network in the system.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    /// f_φs: image → private subcodeword y_s.
    pub private_encoder: Mlp,
    /// f_φt: image → public subcodeword y_t.
    pub public_encoder: Mlp,
    /// D_θB: noisy codeword → reconstructed image in [0,1].
    pub decoder: Mlp,
    /// C_γ: y_s → private-label posterior.
    pub classifier: Mlp,
    /// Dis_ε: (y_t, y_s) → joint-vs-shuffled posterior.
    pub discriminator: Mlp,
    /// T_φ: (y_s, password) → protected subcodeword. Single affine layer.
    pub encryptor: Mlp,
    /// T_φ⁻¹: (noisy protected subcodeword, password) → recovered
    /// subcodeword. Independent parameters, same shape as the encryptor.
    pub decryptor: Mlp,
    /// D_θE: Eve's classifier on the noisy protected codeword.
    pub eve: Mlp,
    /// D̄_θ̄E: Eve's classifier on the wrong-password decryption.
    pub eve_guess: Mlp,
    pub dims: ModelDims,
}

impl ModelBundle {
    pub fn new(dims: ModelDims, rng: &mut Rng) -> ModelBundle {
        let m = dims.codeword();
        ModelBundle {
            private_encoder: Mlp::new(&[SAMPLE_WIDTH, 512, 128, dims.m_s], Activation::Identity, rng),
            public_encoder: Mlp::new(&[SAMPLE_WIDTH, 512, 128, dims.m_t], Activation::Identity, rng),
            decoder: Mlp::new(&[m, 256, 512, SAMPLE_WIDTH], Activation::Sigmoid, rng),
            classifier: Mlp::new(&[dims.m_s, 64, COLOR_CLASSES], Activation::Softmax, rng),
            discriminator: Mlp::new(&[m, 64, 64, 2], Activation::Softmax, rng),
            encryptor: single_affine(dims.m_s + dims.password_len, dims.m_s, rng),
            decryptor: single_affine(dims.m_s + dims.password_len, dims.m_s, rng),
            eve: Mlp::new(&[m, 64, 64, COLOR_CLASSES], Activation::Softmax, rng),
            eve_guess: Mlp::new(&[m, 64, 64, COLOR_CLASSES], Activation::Softmax, rng),
            dims,
        }
    }

    fn nets(&self) -> [(&'static str, &Mlp); 9] {
        [
            ("private_encoder", &self.private_encoder),
            ("public_encoder", &self.public_encoder),
            ("decoder", &self.decoder),
            ("classifier", &self.classifier),
            ("discriminator", &self.discriminator),
            ("encryptor", &self.encryptor),
            ("decryptor", &self.decryptor),
            ("eve", &self.eve),
            ("eve_guess", &self.eve_guess),
        ]
    }

    fn nets_mut(&mut self) -> [(&'static str, &mut Mlp); 9] {
        [
            ("private_encoder", &mut self.private_encoder),
            ("public_encoder", &mut self.public_encoder),
            ("decoder", &mut self.decoder),
            ("classifier", &mut self.classifier),
            ("discriminator", &mut self.discriminator),
            ("encryptor", &mut self.encryptor),
            ("decryptor", &mut self.decryptor),
            ("eve", &mut self.eve),
            ("eve_guess", &mut self.eve_guess),
        ]
    }

    /// All parameters in canonical order as (name, tensor).
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (prefix, net) in self.nets() {
            for (name, t) in net.param_names(prefix).into_iter().zip(net.param_tensors()) {
                out.push((name, t));
            }
        }
        out
    }

    /// Serialize every parameter to the checkpoint format.
    pub fn encode_checkpoint(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for (name, t) in self.named_params() {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Load parameters from checkpoint bytes into this bundle. Every
    /// parameter must be present with a matching shape.
    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> Result<()> {
        let entries = decode_checkpoint(bytes)?;
        let mut loaded = 0usize;
        for (name, tensor) in entries {
            let mut found = false;
            'outer: for (prefix, net) in self.nets_mut() {
                if !name.starts_with(prefix) {
                    continue;
                }
                let names = net.param_names(prefix);
                for (pname, param) in names.iter().zip(net.param_tensors_mut()) {
                    if *pname == name {
                        if param.shape() != tensor.shape() {
                            return Err(Error::Shape {
                                context: "load_checkpoint",
                                expected: format!("{name}: {:?}", param.shape()),
                                actual: tensor.shape_string(),
                            });
                        }
                        *param = tensor;
                        found = true;
                        loaded += 1;
                        break 'outer;
                    }
                }
            }
            if !found {
                return Err(Error::Format(format!("unknown parameter '{name}'")));
            }
        }
        let expected = self.named_params().len();
        if loaded != expected {
            return Err(Error::Format(format!(
                "checkpoint has {loaded} parameters, bundle needs {expected}"
            )));
        }
        Ok(())
    }

    /// Rebuild a bundle from a checkpoint alone; dimensions are inferred
    /// from the stored shapes.
    pub fn from_checkpoint(bytes: &[u8]) -> Result<ModelBundle> {
        let entries = decode_checkpoint(bytes)?;
        let find = |name: &str| -> Result<&[usize]> {
            entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.shape())
                .ok_or_else(|| Error::Format(format!("checkpoint missing '{name}'")))
        };
        let m_s = *find("private_encoder.l2.w")?.last().unwrap();
        let m_t = *find("public_encoder.l2.w")?.last().unwrap();
        let enc_in = find("encryptor.l0.w")?[0];
        if enc_in <= m_s {
            return Err(Error::Format(format!(
                "encryptor input width {enc_in} inconsistent with m_s {m_s}"
            )));
        }
        let dims = ModelDims {
            m_s,
            m_t,
            password_len: enc_in - m_s,
        };
        let mut bundle = ModelBundle::zeros(dims);
        bundle.load_checkpoint(bytes)?;
        Ok(bundle)
    }

    /// All-zero bundle with the right architecture (for loading into).
    pub fn zeros(dims: ModelDims) -> ModelBundle {
        let m = dims.codeword();
        let zeros_mlp = |dims_chain: &[usize], out_act: Activation| {
            let mut layers = Vec::new();
            for i in 0..dims_chain.len() - 1 {
                let act = if i == dims_chain.len() - 2 {
                    out_act
                } else {
                    Activation::Relu
                };
                layers.push(DenseLayer::zeros(dims_chain[i], dims_chain[i + 1], act));
            }
            Mlp { layers }
        };
        ModelBundle {
            private_encoder: zeros_mlp(&[SAMPLE_WIDTH, 512, 128, dims.m_s], Activation::Identity),
            public_encoder: zeros_mlp(&[SAMPLE_WIDTH, 512, 128, dims.m_t], Activation::Identity),
            decoder: zeros_mlp(&[m, 256, 512, SAMPLE_WIDTH], Activation::Sigmoid),
            classifier: zeros_mlp(&[dims.m_s, 64, COLOR_CLASSES], Activation::Softmax),
            discriminator: zeros_mlp(&[m, 64, 64, 2], Activation::Softmax),
            encryptor: zeros_mlp(
                &[dims.m_s + dims.password_len, dims.m_s],
                Activation::Identity,
            ),
            decryptor: zeros_mlp(
                &[dims.m_s + dims.password_len, dims.m_s],
                Activation::Identity,
            ),
            eve: zeros_mlp(&[m, 64, 64, COLOR_CLASSES], Activation::Softmax),
            eve_guess: zeros_mlp(&[m, 64, 64, COLOR_CLASSES], Activation::Softmax),
            dims,
        }
    }
}

fn single_affine(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Mlp {
    Mlp {
        layers: alloc::vec![DenseLayer::new(in_dim, out_dim, Activation::Identity, rng)],
    }
}

/// Parse checkpoint bytes into named tensors.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    if bytes.len() < 8 {
        return Err(Error::Format(format!(
            "checkpoint too short: {} bytes",
            bytes.len()
        )));
    }
    if bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {:02X?}, expected {:02X?}",
            &bytes[0..4],
            CHECKPOINT_MAGIC
        )));
    }
    let version = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "checkpoint format version {version} is incompatible with supported version {CHECKPOINT_VERSION}"
        )));
    }
    let mut pos = 8usize;
    let mut out = Vec::new();
    while pos < bytes.len() {
        let need = |pos: usize, n: usize| -> Result<()> {
            if pos + n > bytes.len() {
                Err(Error::Format(format!(
                    "truncated checkpoint: need {} bytes, have {}",
                    pos + n,
                    bytes.len()
                )))
            } else {
                Ok(())
            }
        };
        need(pos, 2)?;
        let name_len = u16::from_le_bytes([bytes[pos], bytes[pos + 1]]) as usize;
        pos += 2;
        need(pos, name_len)?;
        let name = core::str::from_utf8(&bytes[pos..pos + name_len])
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
            .into();
        pos += name_len;
        need(pos, 1)?;
        let rank = bytes[pos] as usize;
        pos += 1;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            need(pos, 4)?;
            shape.push(u32::from_le_bytes([
                bytes[pos],
                bytes[pos + 1],
                bytes[pos + 2],
                bytes[pos + 3],
            ]) as usize);
            pos += 4;
        }
        let numel: usize = shape.iter().product();
        need(pos, numel * 4)?;
        let mut data = Vec::with_capacity(numel);
        for i in 0..numel {
            let b = pos + i * 4;
            data.push(f32::from_le_bytes([
                bytes[b],
                bytes[b + 1],
                bytes[b + 2],
                bytes[b + 3],
            ]));
        }
        pos += numel * 4;
        out.push((name, Tensor::from_vec(&shape, data)?));
    }
    Ok(out)
}
