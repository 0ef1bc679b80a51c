//! Counter-based random streams.
//!
//! Every variate is a pure function of `(seed, stream, substream, counter)`.
//! Monte Carlo sample `k` of summand `i` reads stream `k`, substream `i`, so
//! the partitioning of samples across workers never changes a single bit.
//! The mixer is the SplitMix64 finalizer (Vigna); it is not cryptographic.

use serde::{Deserialize, Serialize};

use crate::linalg::{HermitianMatrix, RectMatrix, C64};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Seed for every random stream in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

impl std::fmt::Display for RngSeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[inline]
pub fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed counter generator. Draw `j` is `splitmix64(key + j·φ)`.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: RngSeed, stream: u64, substream: u64) -> Self {
        let inner = splitmix64(substream ^ 0x5851_F42D_4C95_7F2D);
        let mid = splitmix64(stream ^ inner);
        let key = splitmix64(seed.0 ^ mid.rotate_left(17));
        CounterRng { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = splitmix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_NEG_53
    }

    /// Uniform on `(0, 1]`; never returns zero.
    #[inline]
    pub fn uniform_open_closed(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_NEG_53
    }

    /// Rademacher sign, ±1 with equal probability.
    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Bernoulli(p) as 0/1.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> f64 {
        if self.uniform_open_closed() <= p {
            1.0
        } else {
            0.0
        }
    }

    /// Standard normal by Box–Muller; consumes two draws and discards the sine branch.
    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform_open_closed();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Integer uniform on `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.index(hi - lo + 1)
    }
}

/// Matrix with iid real standard normal entries.
pub fn gaussian_real_matrix(rng: &mut CounterRng, rows: usize, cols: usize) -> RectMatrix {
    let mut m = RectMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m.set(r, c, C64::new(rng.gaussian(), 0.0));
        }
    }
    m
}

/// Matrix with iid complex normal entries, `E|z|² = 1`.
pub fn gaussian_complex_matrix(rng: &mut CounterRng, rows: usize, cols: usize) -> RectMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = RectMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m.set(r, c, C64::new(rng.gaussian() * scale, rng.gaussian() * scale));
        }
    }
    m
}

/// `(G + G*)/2` for complex Gaussian `G`.
pub fn random_hermitian(rng: &mut CounterRng, d: usize) -> HermitianMatrix {
    HermitianMatrix::symmetrized(gaussian_complex_matrix(rng, d, d))
}

/// Real symmetric `(G + Gᵀ)/2` for real Gaussian `G`.
pub fn random_real_symmetric(rng: &mut CounterRng, d: usize) -> HermitianMatrix {
    HermitianMatrix::symmetrized(gaussian_real_matrix(rng, d, d))
}

/// `B B* / k` for a complex Gaussian `d × k` factor with random `k ∈ 1..=d`,
/// so low-rank PSD matrices show up too.
pub fn random_psd(rng: &mut CounterRng, d: usize) -> HermitianMatrix {
    let k = rng.range_inclusive(1, d);
    let b = gaussian_complex_matrix(rng, d, k);
    let bb = b.matmul_unchecked(&b.adjoint());
    HermitianMatrix::symmetrized(bb.scaled(1.0 / k as f64))
}

/// Uniform random unit vector in `C^d`.
pub fn random_unit_vector(rng: &mut CounterRng, d: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..d)
            .map(|_| C64::new(rng.gaussian(), rng.gaussian()))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_pure_functions_of_their_key() {
        let mut a = CounterRng::new(RngSeed(7), 3, 11);
        let mut b = CounterRng::new(RngSeed(7), 3, 11);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn neighbouring_streams_differ() {
        let first: Vec<u64> = (0..4)
            .map(|s| CounterRng::new(RngSeed(1), s, 0).next_u64())
            .collect();
        for i in 0..first.len() {
            for j in (i + 1)..first.len() {
                assert_ne!(first[i], first[j]);
            }
        }
        assert_ne!(
            CounterRng::new(RngSeed(1), 0, 1).next_u64(),
            CounterRng::new(RngSeed(1), 1, 0).next_u64()
        );
    }

    #[test]
    fn uniform_ranges() {
        let mut r = CounterRng::new(RngSeed(42), 0, 0);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            let v = r.uniform_open_closed();
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn gaussian_moments() {
        let mut r = CounterRng::new(RngSeed(5), 0, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.gaussian()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // 5 standard errors
        assert!(mean.abs() < 5.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn sign_is_balanced() {
        let mut r = CounterRng::new(RngSeed(9), 0, 0);
        let n = 100_000;
        let plus = (0..n).filter(|_| r.sign() > 0.0).count() as f64;
        let sd = (n as f64 * 0.25).sqrt();
        assert!((plus - n as f64 / 2.0).abs() < 4.0 * sd);
    }
}
