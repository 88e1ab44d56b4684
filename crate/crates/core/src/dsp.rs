//! Small numeric helpers: unitary FFTs, chirps, norms.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unitary DFT (`1/sqrt(len)` scaling) applied to every contiguous `len` chunk.
///
/// Forward kernel is `exp(-j 2 pi k n / len)`.
pub fn block_dft(data: &mut [Complex64], len: usize, inverse: bool) {
    assert!(len > 0 && data.len() % len == 0, "block length must divide the data");
    if len == 1 {
        return;
    }
    let fft = plan(len, inverse);
    fft.process(data);
    let scale = 1.0 / (len as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

pub fn dft(data: &[Complex64]) -> Vec<Complex64> {
    let mut v = data.to_vec();
    block_dft(&mut v, data.len(), false);
    v
}

pub fn idft(data: &[Complex64]) -> Vec<Complex64> {
    let mut v = data.to_vec();
    block_dft(&mut v, data.len(), true);
    v
}

/// `exp(j 2 pi x)` with the argument reduced modulo one first.
#[inline]
pub fn cis_turns(x: f64) -> Complex64 {
    let r = x - x.floor();
    Complex64::from_polar(1.0, 2.0 * PI * r)
}

/// Chirp diagonal entry `exp(-j 2 pi c p^2)`.
#[inline]
pub fn chirp(c: f64, p: usize) -> Complex64 {
    let p = p as f64;
    cis_turns(-c * p * p)
}

pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub fn norm(x: &[Complex64]) -> f64 {
    energy(x).sqrt()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dft_of_impulse_is_flat() {
        let mut x = vec![Complex64::new(0.0, 0.0); 4];
        x[0] = Complex64::new(1.0, 0.0);
        let y = dft(&x);
        for v in y {
            assert!((v - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn dft_sign_convention() {
        let n = 8;
        let x: Vec<_> = (0..n).map(|i| Complex64::new(i as f64, (i * i) as f64)).collect();
        let y = dft(&x);
        for (k, yk) in y.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, xi) in x.iter().enumerate() {
                acc += xi * Complex64::from_polar(1.0, -2.0 * PI * (k * i) as f64 / n as f64);
            }
            acc /= (n as f64).sqrt();
            assert!((acc - yk).norm() < 1e-12);
        }
    }

    #[test]
    fn cis_turns_reduces() {
        assert!((cis_turns(1e6 + 0.25) - Complex64::new(0.0, 1.0)).norm() < 1e-9);
    }
}
