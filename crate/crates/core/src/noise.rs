//! Counter-based noise keyed by `(seed, step, machine)`.
//!
//! Every stochastic gradient draw in a run is a pure function of its key, so
//! the order in which machines (or replications) are simulated never changes
//! the result. The `step` component is the sequential gradient slot on a
//! machine: `r * K + k` for local and minibatch patterns, `r` for
//! thumb-twiddling, `t` for serial runs.
//!
//! Two-point noise is served from packed words: the sign for step `t` is bit
//! `t % 64` of the word hashed from `(seed, t / 64, machine)`. Larger finite
//! supports use one hash per key and Lemire's multiply-shift reduction.
//! Continuous noise gets a SplitMix64 stream seeded from the key hash.

use rand::RngCore;

/// Bumped whenever the key to noise mapping changes.
pub const NOISE_SCHEMA_VERSION: u32 = 1;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const TAG_BITS: u64 = 0x5bd1_e995_0000_0001;
const TAG_OUTCOME: u64 = 0x5bd1_e995_0000_0002;
const TAG_STREAM: u64 = 0x5bd1_e995_0000_0003;
const TAG_CHILD: u64 = 0x5bd1_e995_0000_0004;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn hash4(seed: u64, a: u64, b: u64, tag: u64) -> u64 {
    let mut h = mix64(seed.wrapping_add(GOLDEN) ^ tag);
    h = mix64(h ^ a.wrapping_mul(GOLDEN));
    mix64(h.wrapping_add(b) ^ (b << 32))
}

/// Seed of replication `index` under `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    hash4(master, index, 0, TAG_CHILD)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseKey {
    pub step: u64,
    pub machine: u64,
}

impl NoiseKey {
    pub fn new(step: u64, machine: u64) -> Self {
        Self { step, machine }
    }
}

/// Shape of a problem's gradient-noise distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseSupport {
    /// `n` equiprobable outcomes, indexed `0..n`.
    Finite(u64),
    Continuous,
}

/// One noise realization handed to a problem's stochastic gradient.
#[derive(Debug, Clone, Copy)]
pub enum NoiseDraw {
    Outcome(u64),
    Stream(KeyedStream),
}

/// SplitMix64 stream; cheap to construct from a key.
#[derive(Debug, Clone, Copy)]
pub struct KeyedStream {
    state: u64,
}

impl KeyedStream {
    pub fn from_seed(state: u64) -> Self {
        Self { state }
    }

    /// Uniform integer in `0..n` by multiply-shift.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }
}

impl RngCore for KeyedStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Where simulated runs get their noise from.
pub trait NoiseSource: Sync {
    fn draw(&self, key: NoiseKey, support: NoiseSupport) -> NoiseDraw;
}

/// The production noise source: a pure function of `(seed, key)`.
#[derive(Debug, Clone, Copy)]
pub struct KeyedNoise {
    pub seed: u64,
}

impl KeyedNoise {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Packed sign word covering steps `64 * word ..= 64 * word + 63`.
    #[inline]
    pub fn sign_word(&self, word: u64, machine: u64) -> u64 {
        hash4(self.seed, word, machine, TAG_BITS)
    }

    #[inline]
    pub fn bit(&self, key: NoiseKey) -> u64 {
        (self.sign_word(key.step >> 6, key.machine) >> (key.step & 63)) & 1
    }

    pub fn outcome(&self, key: NoiseKey, n: u64) -> u64 {
        match n {
            0 | 1 => 0,
            2 => self.bit(key),
            _ => {
                let h = hash4(self.seed, key.step, key.machine, TAG_OUTCOME);
                ((h as u128 * n as u128) >> 64) as u64
            }
        }
    }

    pub fn stream(&self, key: NoiseKey) -> KeyedStream {
        KeyedStream::from_seed(hash4(self.seed, key.step, key.machine, TAG_STREAM))
    }
}

impl NoiseSource for KeyedNoise {
    fn draw(&self, key: NoiseKey, support: NoiseSupport) -> NoiseDraw {
        match support {
            NoiseSupport::Finite(n) => NoiseDraw::Outcome(self.outcome(key, n)),
            NoiseSupport::Continuous => NoiseDraw::Stream(self.stream(key)),
        }
    }
}

/// Noise read from an explicit table; used by the enumeration oracle.
///
/// Outcome for key `(step, machine)` lives at `step * machines + machine`.
#[derive(Debug, Clone)]
pub struct ScriptedNoise {
    pub machines: u64,
    pub outcomes: Vec<u64>,
}

impl NoiseSource for ScriptedNoise {
    fn draw(&self, key: NoiseKey, support: NoiseSupport) -> NoiseDraw {
        debug_assert!(matches!(support, NoiseSupport::Finite(_)));
        let idx = (key.step * self.machines + key.machine) as usize;
        NoiseDraw::Outcome(self.outcomes[idx])
    }
}
