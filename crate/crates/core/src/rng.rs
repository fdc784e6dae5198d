//! Deterministic random streams.
//!
//! Every random quantity in the simulator is addressed, not drawn from ambient
//! state: a stream is identified by a key derived from (global seed, purpose
//! tag, indices…), and each draw within a stream has an integer index. Streams
//! are ChaCha8 in counter mode, so draw `i` of stream `k` is the same value
//! whether the surrounding work runs serially, in parallel, or out of order.
//! Normal deviates use the inverse CDF — exactly one u64 per draw — which is
//! what keeps indexed access well-defined.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::ContinuousCDF;
use statrs::distribution::Normal;

/// Purpose tags keep unrelated draw families on disjoint streams even when the
/// numeric indices collide. Values are arbitrary but frozen: changing one
/// changes every simulated population.
pub mod purpose {
    /// Unit-capacitor draws for a chip's P-side array.
    pub const CHIP_ARRAY_P: u64 = 0x11;
    /// Unit-capacitor draws for a chip's N-side array.
    pub const CHIP_ARRAY_N: u64 = 0x12;
    /// Offset-bank series-unit mismatch draw.
    pub const CHIP_COF_UNIT: u64 = 0x13;
    /// Comparator noise consumed by signature extraction.
    pub const NOISE_EXTRACT: u64 = 0x21;
    /// Comparator noise consumed by ADC conversions.
    pub const NOISE_ADC: u64 = 0x22;
    /// Rough-edge synthesis for capacitance samples.
    pub const LER_EDGES: u64 = 0x31;
}

/// 256-bit stream key. Derivation walks a splitmix64 chain over the path
/// words; the avalanche constants are the usual Stafford mix13 set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    words: [u64; 4],
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

impl StreamKey {
    /// Key for a path of words rooted at the global seed.
    pub fn derive(global_seed: u64, path: &[u64]) -> Self {
        let mut state = mix64(global_seed ^ GOLDEN);
        for &w in path {
            state = mix64(state.wrapping_add(GOLDEN) ^ mix64(w));
        }
        let mut words = [0u64; 4];
        let mut s = state;
        for w in &mut words {
            s = s.wrapping_add(GOLDEN);
            *w = mix64(s);
        }
        StreamKey { words }
    }

    /// Sub-key: the parent key with one more path word absorbed.
    pub fn child(&self, tag: u64) -> Self {
        let mut state = self.words[0];
        for &w in &self.words[1..] {
            state = mix64(state ^ w.wrapping_add(GOLDEN));
        }
        state = mix64(state.wrapping_add(GOLDEN) ^ mix64(tag));
        let mut words = [0u64; 4];
        let mut s = state;
        for w in &mut words {
            s = s.wrapping_add(GOLDEN);
            *w = mix64(s);
        }
        StreamKey { words }
    }

    fn seed_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (i, w) in self.words.iter().enumerate() {
            out[i * 8..(i + 1) * 8].copy_from_slice(&w.to_le_bytes());
        }
        out
    }
}

/// A keyed stream with random access by draw index.
pub struct Stream {
    rng: ChaCha8Rng,
    norm: Normal,
}

impl Stream {
    pub fn new(key: StreamKey) -> Self {
        Stream {
            rng: ChaCha8Rng::from_seed(key.seed_bytes()),
            norm: Normal::new(0.0, 1.0).expect("unit normal"),
        }
    }

    /// Raw draw `index` of this stream. Each u64 occupies two 32-bit words of
    /// the ChaCha keystream, hence the ×2.
    pub fn u64_at(&mut self, index: u64) -> u64 {
        self.rng.set_word_pos(index as u128 * 2);
        self.rng.next_u64()
    }

    /// Uniform in the open interval (0, 1): 53 mantissa bits, half-ulp offset
    /// so 0 and 1 are unreachable.
    pub fn unit_at(&mut self, index: u64) -> f64 {
        ((self.u64_at(index) >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal via inverse CDF; consumes exactly draw `index`.
    pub fn normal_at(&mut self, index: u64) -> f64 {
        let u = self.unit_at(index);
        self.norm.inverse_cdf(u)
    }
}

/// Sequential view over a stream: `next_*` hands out draws 0, 1, 2, …
/// Use where the draw count is data-dependent (truncated redraws) and the
/// contract is "same key ⇒ same sequence" rather than per-draw addressing.
pub struct SeqStream {
    stream: Stream,
    cursor: u64,
}

impl SeqStream {
    pub fn new(key: StreamKey) -> Self {
        SeqStream {
            stream: Stream::new(key),
            cursor: 0,
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        let v = self.stream.normal_at(self.cursor);
        self.cursor += 1;
        v
    }

    pub fn next_unit(&mut self) -> f64 {
        let v = self.stream.unit_at(self.cursor);
        self.cursor += 1;
        v
    }

    /// Draws consumed so far.
    pub fn position(&self) -> u64 {
        self.cursor
    }
}
