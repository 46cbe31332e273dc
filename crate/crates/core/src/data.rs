//! MNIST IDX ingestion and the colored-digit dataset.
//!
//! Each grayscale digit is tinted with one of ten palette colors drawn
//! uniformly by a seeded stream; the color index is the private label, the
//! digit is kept for probe analysis. Pixels are scaled to [0,1] and
//! flattened row-major as (row, col, channel), giving 28·28·3 = 2352 reals.

use alloc::format;
use alloc::vec::Vec;

use crate::nn::onehot;
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const COLOR_CLASSES: usize = 10;
pub const SAMPLE_WIDTH: usize = IMAGE_PIXELS * 3;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Ten maximally distinguishable RGB triples; fixed so private labels are
/// reproducible across runs.
pub const COLOR_PALETTE: [[f32; 3]; COLOR_CLASSES] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [1.0, 1.0, 1.0],
    [1.0, 0.5, 0.0],
    [0.5, 0.0, 1.0],
    [0.0, 0.5, 0.5],
];

/// Parsed IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// count · rows · cols bytes, row-major per image.
    pub pixels: Vec<u8>,
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    if offset + 4 > bytes.len() {
        return Err(Error::Format(format!(
            "truncated header: need {} bytes, have {}",
            offset + 4,
            bytes.len()
        )));
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parse an IDX images file (magic 0x00000803, big-endian header).
pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "bad images magic 0x{magic:08X}, expected 0x{IDX_IMAGES_MAGIC:08X}"
        )));
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let rows = read_u32_be(bytes, 8)? as usize;
    let cols = read_u32_be(bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "images payload length mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

/// Parse an IDX labels file (magic 0x00000801).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "bad labels magic 0x{magic:08X}, expected 0x{IDX_LABELS_MAGIC:08X}"
        )));
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "labels payload length mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    Ok(bytes[8..].to_vec())
}

/// Serialize images back to IDX bytes (inverse of `parse_idx_images`).
pub fn write_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.count as u32).to_be_bytes());
    out.extend_from_slice(&(images.rows as u32).to_be_bytes());
    out.extend_from_slice(&(images.cols as u32).to_be_bytes());
    out.extend_from_slice(&images.pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Raw grayscale digits with labels, before colorization.
#[derive(Debug, Clone)]
pub struct RawMnist {
    pub images: IdxImages,
    pub labels: Vec<u8>,
}

impl RawMnist {
    pub fn new(images: IdxImages, labels: Vec<u8>) -> Result<RawMnist> {
        if images.count != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} images but {} labels",
                images.count,
                labels.len()
            )));
        }
        if images.rows != IMAGE_SIDE || images.cols != IMAGE_SIDE {
            return Err(Error::InvalidInput(format!(
                "expected {IMAGE_SIDE}x{IMAGE_SIDE} images, got {}x{}",
                images.rows, images.cols
            )));
        }
        Ok(RawMnist { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keep only the first `n` samples.
    pub fn truncate(&mut self, n: usize) {
        let n = n.min(self.len());
        self.images.count = n;
        self.images.pixels.truncate(n * IMAGE_PIXELS);
        self.labels.truncate(n);
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images.pixels[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }
}

/// Tint a grayscale image with one palette color: channel c of pixel p is
/// (gray_p / 255) · palette[color][c]. Black stays black in every channel.
pub fn colorize(
    gray: &[u8],
    color_index: usize,
    palette: &[[f32; 3]; COLOR_CLASSES],
) -> Result<Vec<f32>> {
    if color_index >= COLOR_CLASSES {
        return Err(Error::InvalidInput(format!(
            "color index {color_index} out of range 0..{COLOR_CLASSES}"
        )));
    }
    let rgb = palette[color_index];
    let mut out = Vec::with_capacity(gray.len() * 3);
    for &g in gray {
        let v = g as f32 / 255.0;
        out.push(v * rgb[0]);
        out.push(v * rgb[1]);
        out.push(v * rgb[2]);
    }
    Ok(out)
}

/// The colorized dataset, stored flat: `pixels` is `[n × 2352]` row-major.
#[derive(Debug, Clone)]
pub struct ColoredDataset {
    pub pixels: Vec<f32>,
    /// Private label: palette index per sample.
    pub colors: Vec<u8>,
    /// Kept for probe analysis only.
    pub digits: Vec<u8>,
}

impl ColoredDataset {
    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        &self.pixels[i * SAMPLE_WIDTH..(i + 1) * SAMPLE_WIDTH]
    }

    /// Gather a batch of pixel rows.
    pub fn x_batch(&self, idx: &[usize]) -> Tensor {
        let mut t = Tensor::zeros(&[idx.len(), SAMPLE_WIDTH]);
        for (r, &i) in idx.iter().enumerate() {
            t.row_mut(r).copy_from_slice(self.sample(i));
        }
        t
    }

    /// One-hot private (color) labels for a batch.
    pub fn color_batch(&self, idx: &[usize]) -> Tensor {
        let labels: Vec<u8> = idx.iter().map(|&i| self.colors[i]).collect();
        onehot(&labels, COLOR_CLASSES)
    }

    /// One-hot digit labels for a batch.
    pub fn digit_batch(&self, idx: &[usize]) -> Tensor {
        let labels: Vec<u8> = idx.iter().map(|&i| self.digits[i]).collect();
        onehot(&labels, 10)
    }

    /// The full pixel matrix as a tensor (used for whole-split evaluation).
    pub fn all_x(&self) -> Tensor {
        Tensor::from_vec(&[self.len(), SAMPLE_WIDTH], self.pixels.clone()).unwrap()
    }
}

/// Draw one uniform color index per sample. Split out from the builder so
/// distribution tests can run at full scale without materializing pixels.
pub fn assign_colors(count: usize, rng: &mut Rng) -> Vec<u8> {
    (0..count).map(|_| rng.below(COLOR_CLASSES) as u8).collect()
}

/// Colorize a raw split. The same `rng` state always yields the identical
/// dataset.
pub fn build_colored_mnist(raw: &RawMnist, rng: &mut Rng) -> Result<ColoredDataset> {
    let colors = assign_colors(raw.len(), rng);
    let mut pixels = Vec::with_capacity(raw.len() * SAMPLE_WIDTH);
    for (i, &color) in colors.iter().enumerate() {
        pixels.extend_from_slice(&colorize(raw.image(i), color as usize, &COLOR_PALETTE)?);
    }
    Ok(ColoredDataset {
        pixels,
        colors,
        digits: raw.labels.clone(),
    })
}

/// Mini-batch index iterator: one seeded permutation per construction when
/// shuffling, original order otherwise. The trailing partial batch is kept.
pub struct BatchIter {
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl BatchIter {
    pub fn new(
        n: usize,
        batch_size: usize,
        shuffle: bool,
        rng: Option<&mut Rng>,
    ) -> Result<BatchIter> {
        if n == 0 {
            return Err(Error::Degenerate("empty dataset".into()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be ≥ 1".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        if shuffle {
            let rng = rng.ok_or_else(|| {
                Error::Contract("shuffled iteration needs an rng".into())
            })?;
            rng.shuffle(&mut order);
        }
        Ok(BatchIter {
            order,
            batch_size,
            cursor: 0,
        })
    }
}

impl Iterator for BatchIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        Some(batch)
    }
}
