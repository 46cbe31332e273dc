//! Seeded pseudo-randomness: xoshiro256++ streams with SplitMix64 seeding.
//!
//! Every stochastic component (weight init, channel noise, batch shuffling,
//! color assignment, passwords) owns its own stream derived from the master
//! seed, so any component can be reproduced in isolation and full runs are
//! bit-reproducible across platforms.

use alloc::vec::Vec;

/// Stream tags for deriving per-component generators from a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    DataTrain,
    DataTest,
    Init,
    Shuffle,
    ChannelTrain,
    ChannelEval,
    Password,
    Probe,
    Baseline,
    /// Sweep cells derive as `base ⊕ cell index`.
    Cell(u64),
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::DataTrain => 1,
            Stream::DataTest => 2,
            Stream::Init => 3,
            Stream::Shuffle => 4,
            Stream::ChannelTrain => 5,
            Stream::ChannelEval => 6,
            Stream::Password => 7,
            Stream::Probe => 8,
            Stream::Baseline => 9,
            Stream::Cell(i) => 0x100 ^ i,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// xoshiro256++ generator.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Rng {
        let mut sm = seed;
        // SplitMix64 expansion guards against the all-zero state.
        Rng {
            s: [
                splitmix64(&mut sm),
                splitmix64(&mut sm),
                splitmix64(&mut sm),
                splitmix64(&mut sm),
            ],
        }
    }

    /// Derive the generator for one named component of a run.
    pub fn stream(master_seed: u64, stream: Stream) -> Rng {
        let mut sm = master_seed;
        let base = splitmix64(&mut sm);
        let mut sm2 = stream.tag().wrapping_mul(0x9E3779B97F4A7C15);
        Rng::new(base ^ splitmix64(&mut sm2))
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = (self.s[0].wrapping_add(self.s[3]))
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, 1).
    pub fn next_f32(&mut self) -> f32 {
        self.next_f64() as f32
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f32, hi: f32) -> f32 {
        lo + (hi - lo) * self.next_f32()
    }

    /// Uniform integer in [0, n). n must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (((self.next_u64() as u128) * (n as u128)) >> 64) as usize
    }

    /// One pair of independent standard normals (Box-Muller).
    fn normal_pair(&mut self) -> (f64, f64) {
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        (r * libm::cos(theta), r * libm::sin(theta))
    }

    /// Single standard normal draw.
    pub fn next_normal(&mut self) -> f32 {
        self.normal_pair().0 as f32
    }

    /// Fill a slice with N(0, sigma²) draws.
    pub fn fill_normal(&mut self, out: &mut [f32], sigma: f32) {
        let mut i = 0;
        while i + 1 < out.len() {
            let (z0, z1) = self.normal_pair();
            out[i] = z0 as f32 * sigma;
            out[i + 1] = z1 as f32 * sigma;
            i += 2;
        }
        if i < out.len() {
            out[i] = self.next_normal() * sigma;
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// A random permutation of 0..n.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}
