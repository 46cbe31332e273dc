//! Procedural stand-in for the handwritten-digit files.
//!
//! Real IDX files are not bundled with the repository, so `prepare-data
//! --synthetic` fabricates a class-structured dataset with the same shape:
//! ten distinct glyph classes (fixed blob patterns per class) with
//! per-sample jitter in position and stroke intensity. The files go through
//! the same IDX writer/parser as real data.

use dibjscc_core::data::{IdxImages, IMAGE_PIXELS, IMAGE_SIDE};
use dibjscc_core::rng::Rng;

const BLOBS_PER_CLASS: usize = 6;

struct Glyph {
    // (row, col, sigma, amplitude) per blob.
    blobs: [(f32, f32, f32, f32); BLOBS_PER_CLASS],
}

fn class_glyph(class: u8) -> Glyph {
    // Fixed per-class geometry; the seed ties the glyph to the class alone.
    let mut rng = Rng::new(0x517_E_C0DE ^ (class as u64) * 0x9E37);
    let mut blobs = [(0.0f32, 0.0f32, 0.0f32, 0.0f32); BLOBS_PER_CLASS];
    for b in blobs.iter_mut() {
        *b = (
            rng.uniform(5.0, 23.0),
            rng.uniform(5.0, 23.0),
            rng.uniform(1.4, 2.6),
            rng.uniform(0.9, 1.4),
        );
    }
    Glyph { blobs }
}

fn render(glyph: &Glyph, dr: f32, dc: f32, gain: f32, rng: &mut Rng) -> Vec<u8> {
    // Per-sample deformation of every blob keeps the within-class manifold
    // wide enough that reconstruction stays a genuine learning problem.
    let mut jitter = [(0.0f32, 0.0f32); BLOBS_PER_CLASS];
    for j in jitter.iter_mut() {
        *j = (rng.uniform(0.85, 1.15), rng.uniform(0.9, 1.1));
    }
    let mut out = Vec::with_capacity(IMAGE_PIXELS);
    for r in 0..IMAGE_SIDE {
        for c in 0..IMAGE_SIDE {
            let mut v = 0.0f32;
            for (&(br, bc, sigma, amp), &(amp_j, sig_j)) in glyph.blobs.iter().zip(&jitter) {
                let dy = r as f32 - (br + dr);
                let dx = c as f32 - (bc + dc);
                let s = sigma * sig_j;
                v += amp * amp_j * (-(dy * dy + dx * dx) / (2.0 * s * s)).exp();
            }
            v = (v * gain).min(1.0);
            // Strong speckle: an irreducible per-pixel noise floor that no
            // codeword can explain away.
            v += rng.uniform(0.0, 0.25);
            out.push((v.min(1.0) * 255.0).round() as u8);
        }
    }
    out
}

/// Generate one split: `count` images with uniformly random class labels.
pub fn synth_split(count: usize, seed: u64) -> (IdxImages, Vec<u8>) {
    let mut rng = Rng::new(seed);
    let glyphs: Vec<Glyph> = (0..10).map(|c| class_glyph(c as u8)).collect();
    let mut pixels = Vec::with_capacity(count * IMAGE_PIXELS);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let class = rng.below(10) as u8;
        let dr = rng.uniform(-3.0, 3.0);
        let dc = rng.uniform(-3.0, 3.0);
        let gain = rng.uniform(0.75, 1.0);
        pixels.extend(render(&glyphs[class as usize], dr, dc, gain, &mut rng));
        labels.push(class);
    }
    (
        IdxImages {
            count,
            rows: IMAGE_SIDE,
            cols: IMAGE_SIDE,
            pixels,
        },
        labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_deterministic() {
        let (a_img, a_lab) = synth_split(50, 9);
        let (b_img, b_lab) = synth_split(50, 9);
        assert_eq!(a_img.pixels, b_img.pixels);
        assert_eq!(a_lab, b_lab);
    }

    #[test]
    fn classes_are_visually_distinct() {
        // Mean pixel distance between class templates should dwarf the
        // within-class jitter.
        let (img, lab) = synth_split(400, 3);
        let mut sums = vec![vec![0.0f64; IMAGE_PIXELS]; 10];
        let mut counts = vec![0usize; 10];
        for i in 0..img.count {
            let c = lab[i] as usize;
            counts[c] += 1;
            for (s, &p) in sums[c]
                .iter_mut()
                .zip(&img.pixels[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS])
            {
                *s += p as f64;
            }
        }
        for c in 0..10 {
            assert!(counts[c] > 0, "class {c} absent from 400 draws");
            for s in sums[c].iter_mut() {
                *s /= counts[c] as f64;
            }
        }
        let mut min_dist = f64::MAX;
        for a in 0..10 {
            for b in a + 1..10 {
                let d: f64 = sums[a]
                    .iter()
                    .zip(&sums[b])
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                min_dist = min_dist.min(d);
            }
        }
        assert!(min_dist > 300.0, "templates too close: {min_dist}");
    }
}
