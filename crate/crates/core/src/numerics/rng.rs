use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RealVector;
use crate::error::{EbmError, Result};

const TWO_PI: f64 = std::f64::consts::TAU;
const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Counter-based random stream.
///
/// The stream is identified by `(seed, stream_id)`; the counter is the number
/// of 64-bit words consumed so far. Because ChaCha is a counter-mode cipher,
/// cloning a stream replays exactly the same draws, which is what common
/// random numbers across finite-difference evaluations rely on.
///
/// Consumption per draw is fixed:
/// - uniform / uniform index / Rademacher entry: 1 word
/// - a standard normal pair (Box-Muller): 2 words, so a normal vector of
///   dimension `d` consumes `2 * ceil(d / 2)` words
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    core: ChaCha8Rng,
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(seed);
        core.set_stream(stream_id);
        Self { seed, stream_id, core }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 64-bit words drawn so far.
    pub fn counter(&self) -> u64 {
        (self.core.get_word_pos() / 2) as u64
    }

    /// Derives an independent child stream. The child id is a hash of
    /// `(stream_id, child)`, so distinct child indices give distinct streams
    /// and the parent is left untouched.
    pub fn split(&self, child: u64) -> Self {
        let id = mix64(mix64(self.stream_id ^ 0x5851_f42d_4c95_7f2d) ^ mix64(child));
        Self::with_stream(self.seed, id)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.core.next_u64()
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * INV_2_53
    }

    /// Uniform on (0, 1].
    fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * INV_2_53
    }

    /// Uniform integer in `0..n` (multiply-shift, one word).
    pub fn index(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// One Box-Muller pair.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let r = (-2.0 * self.uniform_open0().ln()).sqrt();
        let t = TWO_PI * self.uniform();
        let (s, c) = t.sin_cos();
        (r * c, r * s)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.normal_pair().0
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_exact_mut(2);
        for pair in &mut chunks {
            let (a, b) = self.normal_pair();
            pair[0] = a;
            pair[1] = b;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.normal_pair().0;
        }
    }

    pub fn fill_rademacher(&mut self, out: &mut [f64]) {
        for v in out {
            *v = if self.next_u64() >> 63 == 0 { 1.0 } else { -1.0 };
        }
    }
}

impl PartialEq for RngStream {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.stream_id == other.stream_id
            && self.core.get_word_pos() == other.core.get_word_pos()
    }
}

/// `d` i.i.d. standard normal draws.
pub fn gaussian_vector(rng: &mut RngStream, d: usize) -> Result<RealVector> {
    if d == 0 {
        return Err(EbmError::InvalidDimension("gaussian_vector needs d >= 1".into()));
    }
    let mut v = vec![0.0; d];
    rng.fill_normal(&mut v);
    Ok(RealVector::from_raw(v))
}

/// `d` i.i.d. Rademacher (+1/-1) entries.
pub fn rademacher_vector(rng: &mut RngStream, d: usize) -> Result<RealVector> {
    if d == 0 {
        return Err(EbmError::InvalidDimension("rademacher_vector needs d >= 1".into()));
    }
    let mut v = vec![0.0; d];
    rng.fill_rademacher(&mut v);
    Ok(RealVector::from_raw(v))
}
