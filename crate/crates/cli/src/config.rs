//! Experiment configuration: a human-editable `key = value` document.
//!
//! Anything not set in the file takes its default; command-line `--set`
//! flags override file values. The canonical serialization (fixed key
//! order) is what gets hashed, so a round-trip through save/load keeps the
//! config hash stable.

use std::path::Path;

use dibjscc_core::model::ModelDims;
use dibjscc_core::nn::AdamConfig;
use dibjscc_core::pp::{PasswordSpec, PpConfig};
use dibjscc_core::dib::DibConfig;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // Dataset files (IDX format) and desk-scale limits.
    pub train_images: String,
    pub train_labels: String,
    pub test_images: String,
    pub test_labels: String,
    pub train_limit: usize,
    pub test_limit: usize,
    // Codeword split.
    pub m_s: usize,
    pub m_t: usize,
    // Disentangling stage.
    pub alpha: f32,
    pub alpha_warmup: usize,
    pub alpha_ramp: usize,
    pub v_d1: usize,
    pub v_d2: usize,
    pub batch_size: usize,
    // Protection stage.
    pub alpha1: f32,
    pub beta1: f32,
    pub p_level: u32,
    pub len: usize,
    pub v_p: usize,
    pub pp_settle: usize,
    // Channel.
    pub snr_ab_db: f32,
    pub snr_ae_db: f32,
    pub normalize: String,
    // Optimizer.
    pub lr: f32,
    pub adam_beta1: f32,
    pub adam_beta2: f32,
    // Run identity.
    pub seed: u64,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train_images: "data/train-images-idx3-ubyte".into(),
            train_labels: "data/train-labels-idx1-ubyte".into(),
            test_images: "data/t10k-images-idx3-ubyte".into(),
            test_labels: "data/t10k-labels-idx1-ubyte".into(),
            train_limit: 10_000,
            test_limit: 2_000,
            m_s: 16,
            m_t: 48,
            alpha: 1.0,
            alpha_warmup: 25,
            alpha_ramp: 10,
            v_d1: 30,
            v_d2: 50,
            batch_size: 128,
            alpha1: 1e5,
            beta1: 1e5,
            p_level: 128,
            len: 16,
            v_p: 50,
            pp_settle: 10,
            snr_ab_db: 30.0,
            snr_ae_db: 15.0,
            normalize: "unit_average_power".into(),
            lr: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            seed: 1,
            output_dir: "out".into(),
        }
    }
}

fn parse_f32(key: &str, value: &str, line: usize) -> CliResult<f32> {
    if value == "inf" {
        return Ok(f32::INFINITY);
    }
    value.parse().map_err(|_| {
        CliError::Config(format!("line {line}: '{key}' expects a number, got '{value}'"))
    })
}

fn parse_int<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> CliResult<T> {
    value.parse().map_err(|_| {
        CliError::Config(format!(
            "line {line}: '{key}' expects an integer, got '{value}'"
        ))
    })
}

impl ExperimentConfig {
    /// Parse a config document; unknown keys and malformed lines are
    /// reported with their line number. An empty document is the default
    /// config.
    pub fn parse(text: &str) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {line_no}: expected 'key = value', got '{raw}'"
                )));
            };
            cfg.set(key.trim(), value.trim(), line_no)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Apply one `key = value` assignment (used by both the parser and the
    /// command-line overrides).
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> CliResult<()> {
        match key {
            "train_images" => self.train_images = value.into(),
            "train_labels" => self.train_labels = value.into(),
            "test_images" => self.test_images = value.into(),
            "test_labels" => self.test_labels = value.into(),
            "train_limit" => self.train_limit = parse_int(key, value, line)?,
            "test_limit" => self.test_limit = parse_int(key, value, line)?,
            "m_s" => self.m_s = parse_int(key, value, line)?,
            "m_t" => self.m_t = parse_int(key, value, line)?,
            "alpha" => self.alpha = parse_f32(key, value, line)?,
            "alpha_warmup" => self.alpha_warmup = parse_int(key, value, line)?,
            "alpha_ramp" => self.alpha_ramp = parse_int(key, value, line)?,
            "v_d1" => self.v_d1 = parse_int(key, value, line)?,
            "v_d2" => self.v_d2 = parse_int(key, value, line)?,
            "batch_size" => self.batch_size = parse_int(key, value, line)?,
            "alpha1" => self.alpha1 = parse_f32(key, value, line)?,
            "beta1" => self.beta1 = parse_f32(key, value, line)?,
            "p_level" => self.p_level = parse_int(key, value, line)?,
            "len" => self.len = parse_int(key, value, line)?,
            "v_p" => self.v_p = parse_int(key, value, line)?,
            "pp_settle" => self.pp_settle = parse_int(key, value, line)?,
            "snr_ab_db" => self.snr_ab_db = parse_f32(key, value, line)?,
            "snr_ae_db" => self.snr_ae_db = parse_f32(key, value, line)?,
            "normalize" => self.normalize = value.into(),
            "lr" => self.lr = parse_f32(key, value, line)?,
            "adam_beta1" => self.adam_beta1 = parse_f32(key, value, line)?,
            "adam_beta2" => self.adam_beta2 = parse_f32(key, value, line)?,
            "seed" => self.seed = parse_int(key, value, line)?,
            "output_dir" => self.output_dir = value.into(),
            other => {
                return Err(CliError::Config(format!(
                    "line {line}: unknown key '{other}'"
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        let fail = |field: &str, why: &str| {
            Err(CliError::Config(format!("invalid '{field}': {why}")))
        };
        if self.v_d1 < 1 {
            return fail("v_d1", "epoch counts must be ≥ 1");
        }
        if self.v_d2 < 1 {
            return fail("v_d2", "epoch counts must be ≥ 1");
        }
        if self.v_p < 1 {
            return fail("v_p", "epoch counts must be ≥ 1");
        }
        if self.m_s < 1 {
            return fail("m_s", "must be ≥ 1");
        }
        if self.m_t < 1 {
            return fail("m_t", "must be ≥ 1");
        }
        if self.p_level < 2 {
            return fail("p_level", "must be ≥ 2");
        }
        if self.len < 1 {
            return fail("len", "must be ≥ 1");
        }
        if self.batch_size < 1 {
            return fail("batch_size", "must be ≥ 1");
        }
        if self.train_limit < 1 {
            return fail("train_limit", "must be ≥ 1");
        }
        if self.test_limit < 1 {
            return fail("test_limit", "must be ≥ 1");
        }
        if !(self.lr > 0.0) {
            return fail("lr", "must be positive");
        }
        if !(0.0 < self.adam_beta1 && self.adam_beta1 < 1.0) {
            return fail("adam_beta1", "must be in (0, 1)");
        }
        if !(0.0 < self.adam_beta2 && self.adam_beta2 < 1.0) {
            return fail("adam_beta2", "must be in (0, 1)");
        }
        if self.normalize != "unit_average_power" && self.normalize != "none" {
            return fail("normalize", "must be 'unit_average_power' or 'none'");
        }
        if self.alpha1 < 0.0 || self.beta1 < 0.0 {
            return fail("alpha1/beta1", "must be non-negative");
        }
        Ok(())
    }

    fn fmt_f32(v: f32) -> String {
        if v.is_infinite() {
            "inf".into()
        } else {
            format!("{v}")
        }
    }

    /// Canonical serialization: every key, fixed order.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("train_images", self.train_images.clone());
        kv("train_labels", self.train_labels.clone());
        kv("test_images", self.test_images.clone());
        kv("test_labels", self.test_labels.clone());
        kv("train_limit", self.train_limit.to_string());
        kv("test_limit", self.test_limit.to_string());
        kv("m_s", self.m_s.to_string());
        kv("m_t", self.m_t.to_string());
        kv("alpha", Self::fmt_f32(self.alpha));
        kv("alpha_warmup", self.alpha_warmup.to_string());
        kv("alpha_ramp", self.alpha_ramp.to_string());
        kv("v_d1", self.v_d1.to_string());
        kv("v_d2", self.v_d2.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("alpha1", Self::fmt_f32(self.alpha1));
        kv("beta1", Self::fmt_f32(self.beta1));
        kv("p_level", self.p_level.to_string());
        kv("len", self.len.to_string());
        kv("v_p", self.v_p.to_string());
        kv("pp_settle", self.pp_settle.to_string());
        kv("snr_ab_db", Self::fmt_f32(self.snr_ab_db));
        kv("snr_ae_db", Self::fmt_f32(self.snr_ae_db));
        kv("normalize", self.normalize.clone());
        kv("lr", Self::fmt_f32(self.lr));
        kv("adam_beta1", Self::fmt_f32(self.adam_beta1));
        kv("adam_beta2", Self::fmt_f32(self.adam_beta2));
        kv("seed", self.seed.to_string());
        kv("output_dir", self.output_dir.clone());
        s
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        crate::io::atomic_write(path, self.canonical().as_bytes())?;
        Ok(())
    }

    /// FNV-1a over the canonical serialization.
    pub fn hash(&self) -> u64 {
        fnv1a64(self.canonical().as_bytes())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: 1e-8,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            m_s: self.m_s,
            m_t: self.m_t,
            password_len: self.len,
        }
    }

    pub fn dib(&self) -> DibConfig {
        DibConfig {
            alpha: self.alpha,
            alpha_warmup_epochs: self.alpha_warmup,
            alpha_ramp_epochs: self.alpha_ramp,
            v_d1: self.v_d1,
            v_d2: self.v_d2,
            batch_size: self.batch_size,
            snr_ab_db: self.snr_ab_db,
            adam: self.adam(),
            ..DibConfig::default()
        }
    }

    pub fn pp(&self) -> CliResult<PpConfig> {
        let password = PasswordSpec::new(self.len, self.p_level)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(PpConfig {
            alpha1: self.alpha1,
            beta1: self.beta1,
            password,
            v_p: self.v_p,
            settle_epochs: self.pp_settle,
            batch_size: self.batch_size,
            snr_ab_db: self.snr_ab_db,
            snr_ae_db: self.snr_ae_db,
            adam: self.adam(),
        })
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
