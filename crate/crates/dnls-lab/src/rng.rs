//! Counter-based random streams.
//!
//! Every random quantity in this crate is addressed by `(seed, stream, slot)`:
//! `stream` is typically a sample index and `slot` a frequency. Each slot owns
//! a fixed window of the ChaCha keystream, so draws are pure functions of the
//! address and independent of evaluation order or thread count.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Words (u32) of keystream reserved per slot: two u64 draws.
const WORDS_PER_SLOT: u128 = 4;

/// One addressable ChaCha stream.
pub struct CounterRng {
    rng: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        // Fixed domain tag so a plain-zero seed still yields a scrambled key.
        key[8..16].copy_from_slice(&0x9e37_79b9_7f4a_7c15u64.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        CounterRng { rng }
    }

    fn two_u64(&mut self, slot: u64) -> (u64, u64) {
        self.rng.set_word_pos(WORDS_PER_SLOT * slot as u128);
        (self.rng.next_u64(), self.rng.next_u64())
    }

    /// Uniform in (0, 1); 53-bit mantissa, offset so 0 is excluded.
    fn uniform_pair(&mut self, slot: u64) -> (f64, f64) {
        let (a, b) = self.two_u64(slot);
        let scale = 1.0 / (1u64 << 53) as f64;
        (
            ((a >> 11) as f64 + 0.5) * scale,
            ((b >> 11) as f64 + 0.5) * scale,
        )
    }

    /// Standard complex Gaussian: Re, Im independent N(0, 1/2), E|g|^2 = 1.
    pub fn complex_gaussian(&mut self, slot: u64) -> Complex64 {
        let (u1, u2) = self.uniform_pair(slot);
        let r = (-u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        Complex64::new(r * phi.cos(), r * phi.sin())
    }

    /// Exp(1) draw equal to |complex_gaussian(slot)|^2 for the same slot.
    pub fn exponential(&mut self, slot: u64) -> f64 {
        let (u1, _) = self.uniform_pair(slot);
        -u1.ln()
    }
}

/// Slot index for a signed frequency (zig-zag), so g_n does not depend on the
/// cutoff used when sampling a field.
pub fn freq_slot(n: i64) -> u64 {
    if n >= 0 {
        2 * n as u64
    } else {
        (-2 * n - 1) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn addressing_is_order_independent() {
        let mut a = CounterRng::new(7, 3);
        let g5 = a.complex_gaussian(5);
        let g2 = a.complex_gaussian(2);
        let mut b = CounterRng::new(7, 3);
        assert_eq!(b.complex_gaussian(2), g2);
        assert_eq!(b.complex_gaussian(5), g5);
    }

    #[test]
    fn exponential_matches_gaussian_modulus() {
        let mut a = CounterRng::new(1, 0);
        let g = a.complex_gaussian(9);
        let e = a.exponential(9);
        assert!((g.norm_sqr() - e).abs() < 1e-12);
    }

    #[test]
    fn streams_differ() {
        let mut a = CounterRng::new(1, 0);
        let mut b = CounterRng::new(1, 1);
        assert_ne!(a.complex_gaussian(0), b.complex_gaussian(0));
    }

    #[test]
    fn gaussian_moments() {
        // crude sanity at n = 200_000: E|g|^2 = 1, E|g|^4 = 2
        let n = 200_000u64;
        let (mut s2, mut s4) = (0.0, 0.0);
        for i in 0..n {
            let g = CounterRng::new(42, i).complex_gaussian(0);
            let m = g.norm_sqr();
            s2 += m;
            s4 += m * m;
        }
        let (m2, m4) = (s2 / n as f64, s4 / n as f64);
        assert!((m2 - 1.0).abs() < 0.01, "E|g|^2 = {m2}");
        assert!((m4 - 2.0).abs() < 0.05, "E|g|^4 = {m4}");
    }
}
