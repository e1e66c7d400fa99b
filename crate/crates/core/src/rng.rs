//! Seeded, platform-independent random number generation.
//!
//! The generator is xoshiro256++ with its 256-bit state expanded from the
//! 64-bit seed by splitmix64, exactly as the xoshiro authors recommend. Both
//! algorithms are pure integer arithmetic, so identical seeds produce
//! bit-identical streams on every platform. The algorithm is pinned by
//! [`RngAlgorithm`]; there is deliberately no way to swap it at runtime.

use crate::scalar::Scalar;
use crate::tensor::Tensor2;

/// Identifier of the fixed generator backing [`SeededRng`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngAlgorithm {
    /// xoshiro256++ 1.0, seeded via splitmix64.
    Xoshiro256PlusPlus,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic RNG with a documented, fixed algorithm.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    state: [u64; 4],
    /// Cached second output of the Box-Muller transform.
    spare_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let state = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Self { seed, state, spare_normal: None }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> RngAlgorithm {
        RngAlgorithm::Xoshiro256PlusPlus
    }

    /// Child generator for a named substream.
    ///
    /// The parts are absorbed into a fresh splitmix64 chain together with the
    /// base seed, so (seed, parts) fully determines the child stream and
    /// distinct parts give decorrelated streams.
    pub fn derive(seed: u64, parts: &[u64]) -> Self {
        let mut sm = seed;
        let mut mixed = splitmix64(&mut sm);
        for &p in parts {
            sm ^= p.wrapping_mul(0xa24baed4963ee407);
            mixed ^= splitmix64(&mut sm);
        }
        Self::new(mixed)
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal draw via the Box-Muller transform.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u in (0, 1] so the log is finite.
        let u = 1.0 - self.next_f64();
        let v = self.next_f64();
        let r = (-2.0 * u.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * v;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.next_normal()
    }

    /// Uniform integer in `[0, n)` by rejection, bias-free.
    pub fn next_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_index requires n > 0");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }

    pub fn uniform_vec(&mut self, len: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..len).map(|_| self.uniform(lo, hi)).collect()
    }

    /// Tensor filled with uniform draws in row-major order.
    pub fn uniform_tensor<T: Scalar>(
        &mut self,
        rows: usize,
        cols: usize,
        lo: f64,
        hi: f64,
    ) -> Tensor2<T> {
        let data = (0..rows * cols)
            .map(|_| T::from_f64(self.uniform(lo, hi)))
            .collect();
        Tensor2::new(rows, cols, data).expect("length matches by construction")
    }
}
