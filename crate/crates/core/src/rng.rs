//! Deterministic random number generation.
//!
//! Every consumer derives its own ChaCha12 stream from a master seed plus a
//! list of context words (purpose tag, repetition index, grid indices), so
//! generation is reproducible bit for bit regardless of execution order.
//! Gaussian variates use the Box-Muller transform on that stream.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// SplitMix64 output function; used only to expand seeds.
fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    *state = *state ^ (z ^ (z >> 31));
}

/// Derives a 32-byte ChaCha seed from a master seed and context words.
pub fn derive_seed(master: u64, words: &[u64]) -> [u8; 32] {
    let mut state = master ^ 0x6A09_E667_F3BC_C908;
    for &w in words {
        state ^= w.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        splitmix64(&mut state);
    }
    let mut out = [0u8; 32];
    let mut s = state;
    for chunk in out.chunks_mut(8) {
        splitmix64(&mut s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    out
}

/// Derives a single u64 (for cell seeds and log columns) from context words.
pub fn derive_u64(master: u64, words: &[u64]) -> u64 {
    let seed = derive_seed(master, words);
    u64::from_le_bytes(seed[..8].try_into().expect("seed has 32 bytes"))
}

/// ChaCha12-backed stream of uniforms and standard normals.
pub struct GaussianStream {
    rng: ChaCha12Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self { rng: ChaCha12Rng::from_seed(seed), spare: None }
    }

    pub fn from_key(master: u64, words: &[u64]) -> Self {
        Self::from_seed(derive_seed(master, words))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform01(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `(0, 1]`, safe as a logarithm argument.
    fn uniform01_open_low(&mut self) -> f64 {
        1.0 - self.uniform01()
    }

    /// Standard normal via Box-Muller on the ChaCha stream.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform01_open_low();
        let u2 = self.uniform01();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.standard_normal();
        }
    }

    /// Unbiased uniform index in `0..bound` by rejection.
    pub fn uniform_index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "uniform_index bound must be positive");
        let bound = bound as u64;
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.rng.next_u64();
            if x < zone {
                return (x % bound) as usize;
            }
        }
    }

    /// Sample of `k` distinct indices from `0..n`, in draw order.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} from {n}");
        // Partial Fisher-Yates over a lazily materialized identity permutation.
        let mut swapped = std::collections::HashMap::new();
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let j = i + self.uniform_index(n - i);
            let vi = *swapped.get(&i).unwrap_or(&i);
            let vj = *swapped.get(&j).unwrap_or(&j);
            out.push(vj);
            swapped.insert(j, vi);
        }
        out
    }
}
