//! Windowed-sinc fractional delay.
//!
//! The filter has 63 taps and a Blackman window of half-width 32 centered on
//! the fractional point. Its bulk group delay of 31 samples is compensated by
//! centering the taps on `round(delay)`, so a tap at offset `k` realizes the
//! shift `round(delay) + k` with weight `sinc(k - frac) w(k - frac)` where
//! `frac = delay - round(delay)`. Integer delays collapse to a single unit tap.

use std::f64::consts::PI;

use crate::dsp::sinc;

pub const FRAC_TAPS: usize = 63;
const HALF: i64 = (FRAC_TAPS as i64 - 1) / 2;

fn blackman(x: f64) -> f64 {
    let w = (HALF + 1) as f64;
    if x.abs() >= w {
        return 0.0;
    }
    0.42 + 0.5 * (PI * x / w).cos() + 0.08 * (2.0 * PI * x / w).cos()
}

/// Integer sample shifts and weights realizing `delay`.
pub fn fractional_taps(delay: f64) -> Vec<(i64, f64)> {
    let center = delay.round();
    let frac = delay - center;
    let c = center as i64;
    if frac == 0.0 {
        return vec![(c, 1.0)];
    }
    let mut taps: Vec<(i64, f64)> = (-HALF..=HALF)
        .map(|k| {
            let x = k as f64 - frac;
            (c + k, sinc(x) * blackman(x))
        })
        .collect();
    // unit DC gain
    let dc: f64 = taps.iter().map(|t| t.1).sum();
    for t in &mut taps {
        t.1 /= dc;
    }
    taps
}
