//! Gray-mapped QPSK.
//!
//! Bit pair `(b0, b1)` maps to `((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`, so each
//! bit rides on its own quadrature and the slicer is two sign tests.

use num_complex::Complex64;
use rand::Rng;

pub const BITS_PER_SYMBOL: usize = 2;

pub fn qpsk_map(bits: &[u8]) -> Vec<Complex64> {
    assert!(bits.len() % 2 == 0, "QPSK needs an even bit count");
    let a = std::f64::consts::FRAC_1_SQRT_2;
    bits.chunks_exact(2)
        .map(|b| Complex64::new(a * (1.0 - 2.0 * b[0] as f64), a * (1.0 - 2.0 * b[1] as f64)))
        .collect()
}

/// Hard decisions; ties on an axis go to bit 0.
pub fn qpsk_slice(sym: &[Complex64]) -> Vec<u8> {
    sym.iter()
        .flat_map(|s| [(s.re < 0.0) as u8, (s.im < 0.0) as u8])
        .collect()
}

pub fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

pub fn bit_errors(a: &[u8], b: &[u8]) -> u64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}
