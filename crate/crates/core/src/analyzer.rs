//! How a channel looks in each domain.
//!
//! The analyzer turns the representation claims about waveform domains into
//! numbers: how many taps a row of the effective channel has, what a
//! fractional path does to a pilot impulse, how the tap phase evolves and
//! which resolution each domain offers.
//!
//! A "pulse" is the received response to a unit pilot impulse, placed at the
//! center of the grid, under a single-path channel.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{frame_operator, LtvChannel, Path, FRAC_TAPS};
use crate::dsp::{dft, idft};
use crate::error::{Error, Result};
use crate::frame::{doppler_bin_width, doppler_resolution_ratio, Domain, ValidatedConfig};
use crate::linalg::{max_abs, CMatrix, ONE, ZERO};
use crate::transforms::{from_domain, to_domain};

/// Integer part of the probe path delay in [`pulse_response`]: half the
/// fractional-delay filter, so the interpolation kernel stays causal.
pub const PROBE_DELAY: usize = FRAC_TAPS / 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    /// Entries above threshold in each row.
    pub counts: Vec<usize>,
    /// `1 - mean(count) / n`.
    pub sparsity: f64,
}

/// Counts entries with `|H| > rel_threshold * max|H|` per row.
pub fn tap_sparsity(h: &CMatrix, rel_threshold: f64) -> SparsityReport {
    let thr = rel_threshold * max_abs(h);
    let counts: Vec<usize> = (0..h.nrows())
        .map(|i| (0..h.ncols()).filter(|&j| h[(i, j)].norm() > thr).count())
        .collect();
    let mean = counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64;
    SparsityReport {
        sparsity: 1.0 - mean / h.ncols().max(1) as f64,
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProfile {
    pub domain: Domain,
    /// Received complex response (magnitudes are what gets plotted).
    pub response: Vec<Complex64>,
    pub magnitudes: Vec<f64>,
    /// Grid index of the transmitted pilot.
    pub pilot: usize,
    /// Peak position with sub-bin precision.
    pub peak: f64,
    /// Width of the main lobe at -3 dB, in bins.
    pub mainlobe_width: f64,
    /// Distance between the two strongest local maxima, if there are two.
    pub lobe_spacing: Option<usize>,
}

/// Center of the grid of domain `d`.
fn center_index(cfg: &ValidatedConfig, d: Domain) -> usize {
    let (m, n) = (cfg.m(), cfg.n());
    match d {
        Domain::DelayDoppler => n / 2 + n * (m / 2),
        _ => m / 2 + m * (n / 2),
    }
}

/// Response of domain `d` to a centered unit pilot under one unit-gain path
/// at `PROBE_DELAY + frac_delay` samples and `frac_doppler` bins.
///
/// The probe needs a prefix of at least `FRAC_TAPS` samples for the
/// response to be free of inter-frame leakage.
pub fn pulse_response(cfg: &ValidatedConfig, d: Domain, frac_delay: f64, frac_doppler: f64) -> Result<PulseProfile> {
    if frac_delay.abs() >= 1.0 || frac_doppler.abs() >= 1.0 {
        return Err(Error::Precondition(format!(
            "fractional parts must be below one bin, got ({frac_delay}, {frac_doppler})"
        )));
    }
    pulse_response_at(cfg, d, Path::new(ONE, PROBE_DELAY as f64 + frac_delay, frac_doppler))
}

/// [`pulse_response`] for an arbitrary single path.
pub fn pulse_response_at(cfg: &ValidatedConfig, d: Domain, path: Path) -> Result<PulseProfile> {
    let ch = LtvChannel::new(vec![path], cfg)?;
    let pilot = center_index(cfg, d);
    let mut e = vec![ZERO; cfg.grid_len()];
    e[pilot] = ONE;
    let t = from_domain(&e, d, cfg)?;
    let response = to_domain(&frame_operator(&ch, cfg)?.apply(&t), d, cfg)?;
    Ok(profile_from(d, response, pilot))
}

fn profile_from(domain: Domain, response: Vec<Complex64>, pilot: usize) -> PulseProfile {
    let magnitudes: Vec<f64> = response.iter().map(|v| v.norm()).collect();
    let n = magnitudes.len();
    let (imax, &vmax) = magnitudes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let at = |i: i64| magnitudes[i.rem_euclid(n as i64) as usize];
    let peak = imax as f64 + peak_offset(at(imax as i64 - 1), vmax, at(imax as i64 + 1), n);

    // -3 dB crossings, linearly interpolated
    let half = vmax / std::f64::consts::SQRT_2;
    let mut width = 0.0;
    for dir in [-1i64, 1] {
        let mut k = 0i64;
        while k < n as i64 / 2 && at(imax as i64 + dir * (k + 1)) >= half {
            k += 1;
        }
        let (inner, outer) = (at(imax as i64 + dir * k), at(imax as i64 + dir * (k + 1)));
        let frac = if inner > outer { (inner - half) / (inner - outer) } else { 0.0 };
        width += k as f64 + frac.clamp(0.0, 1.0);
    }

    // strongest two local maxima, cyclically
    let floor = 1e-9 * vmax;
    let mut peaks: Vec<(usize, f64)> = (0..n)
        .filter(|&i| {
            let v = magnitudes[i];
            v > floor && v >= at(i as i64 - 1) && v > at(i as i64 + 1)
        })
        .map(|i| (i, magnitudes[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    let lobe_spacing = (peaks.len() >= 2).then(|| {
        let dist = peaks[0].0.abs_diff(peaks[1].0);
        dist.min(n - dist)
    });
    PulseProfile {
        domain,
        response,
        magnitudes,
        pilot,
        peak,
        mainlobe_width: width,
        lobe_spacing,
    }
}

/// Sub-bin offset of a peak from its neighbor magnitudes.
///
/// Uses the ratio of the larger neighbor to the peak, inverted through the
/// Dirichlet kernel of length `n`. This is exact for a single off-grid tone
/// and much tighter than a parabola on magnitudes, which is biased by up to
/// a fifth of a bin on that lobe shape.
fn peak_offset(left: f64, center: f64, right: f64, n: usize) -> f64 {
    if n < 3 || center <= 0.0 {
        return 0.0;
    }
    let (r, sign) = if right >= left { (right / center, 1.0) } else { (left / center, -1.0) };
    let a = std::f64::consts::PI / n as f64;
    let delta = (r * a.sin()).atan2(1.0 + r * a.cos()) / a;
    sign * delta.clamp(0.0, 0.5)
}

/// Energy outside the strongest bin relative to the strongest bin's energy.
pub fn sidelobe_ratio(p: &PulseProfile) -> f64 {
    let e: Vec<f64> = p.magnitudes.iter().map(|m| m * m).collect();
    let max = e.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    (e.iter().sum::<f64>() - max) / max
}

/// Delays `x` (length `n`) by `s` samples with a DFT phase ramp.
fn fractional_shift(x: &[Complex64], s: f64) -> Vec<Complex64> {
    let n = x.len();
    let mut f = dft(x);
    for (k, v) in f.iter_mut().enumerate() {
        // symmetric frequencies keep the shift band-limited
        let kk = if 2 * k > n { k as f64 - n as f64 } else { k as f64 };
        *v *= Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * kk * s / n as f64);
    }
    idft(&f)
}

fn unit_energy(v: &[f64]) -> Vec<f64> {
    let e = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if e == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|x| x / e).collect()
}

/// The block (length `M`) of the grid holding the pilot.
fn pilot_block(p: &PulseProfile, m: usize) -> std::ops::Range<usize> {
    let b = p.pilot / m;
    b * m..(b + 1) * m
}

/// Outcome of the shift-invariance shape test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeMatch {
    /// Sub-bin shift that best aligns the on-grid pulse with the profile.
    pub shift: f64,
    /// Max abs difference of unit-energy magnitude profiles after alignment.
    pub deviation: f64,
}

/// Compares `frac` with the on-grid pulse `grid` shifted by the best
/// sub-bin amount (coarse scan, then golden-section refinement).
///
/// Profiles are compared on the pilot's symbol block of length `m`.
pub fn shape_match(grid: &PulseProfile, frac: &PulseProfile, m: usize) -> ShapeMatch {
    let range = pilot_block(grid, m);
    let base = &grid.response[range.clone()];
    let target = unit_energy(&frac.magnitudes[range]);
    let cost = |s: f64| -> f64 {
        let shifted: Vec<f64> = fractional_shift(base, s).iter().map(|v| v.norm()).collect();
        unit_energy(&shifted)
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let steps = 80;
    let (mut best, mut best_cost) = (0.0, f64::INFINITY);
    for i in 0..=steps {
        let s = -1.0 + 2.0 * i as f64 / steps as f64;
        let c = cost(s);
        if c < best_cost {
            best = s;
            best_cost = c;
        }
    }
    let h = 2.0 / steps as f64;
    let (mut a, mut b) = (best - h, best + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while b - a > 1e-12 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = cost(x2);
        }
    }
    let s = 0.5 * (a + b);
    let c = cost(s);
    if c < best_cost {
        ShapeMatch { shift: s, deviation: c }
    } else {
        ShapeMatch {
            shift: best,
            deviation: best_cost,
        }
    }
}

/// Outcome of the lattice-lobe shape test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeMatch {
    /// Spacing of integer delays in the affine domain, `round(2 N c1)`.
    pub lattice: usize,
    /// Distance between the two strongest bins.
    pub top_two_spacing: usize,
    /// Energy on the lattice through the strongest bin over total energy.
    pub lattice_fraction: f64,
}

impl LatticeMatch {
    pub fn passes(&self) -> bool {
        self.top_two_spacing == self.lattice && self.lattice_fraction > 1.0 - 1e-6
    }
}

/// Checks whether a pulse is made of lobes on the integer-delay lattice of
/// the affine domain.
pub fn lattice_match(p: &PulseProfile, cfg: &ValidatedConfig) -> LatticeMatch {
    let m = cfg.m();
    let range = pilot_block(p, m);
    let mags = &p.magnitudes[range];
    let lattice = (2.0 * m as f64 * cfg.c1()).round().max(1.0) as usize;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]));
    let (i0, i1) = (order[0], order[1]);
    let dist = i0.abs_diff(i1);
    let total: f64 = mags.iter().map(|v| v * v).sum();
    // lattice points reachable within the fractional filter's support
    let reach = FRAC_TAPS.min(m / (2 * lattice)) as i64;
    let mut on_lattice = vec![false; m];
    for k in -reach..=reach {
        on_lattice[(i0 as i64 + k * lattice as i64).rem_euclid(m as i64) as usize] = true;
    }
    let on: f64 = (0..m).filter(|&i| on_lattice[i]).map(|i| mags[i] * mags[i]).sum();
    LatticeMatch {
        lattice,
        top_two_spacing: dist.min(m - dist),
        lattice_fraction: if total > 0.0 { on / total } else { 0.0 },
    }
}

/// Least-squares fit of the dominant-tap phase trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    /// Rad per bin.
    pub linear: f64,
    /// Rad per bin squared.
    pub quadratic: f64,
    /// RMS residual of the linear + quadratic fit (rad).
    pub residual: f64,
    /// RMS residual of a linear-only fit (rad); zero for an affine trajectory.
    pub linear_residual: f64,
    pub points: usize,
}

/// Fits `a + b x + c x^2` to the unwrapped phase of the dominant tap of
/// each row of `h`.
///
/// The trajectory follows the grid's fast axis: all rows for 1-D domains,
/// and for the delay-Doppler grid the delay axis of the Doppler row whose
/// dominant input sits at Doppler zero (so the phase is not disturbed by the
/// Doppler wrap). Returns `MultiPath` when any row has more than one
/// significant tap.
pub fn phase_variation(h: &CMatrix, d: Domain, cfg: &ValidatedConfig) -> Result<PhaseFit> {
    let rep = tap_sparsity(h, 1e-6);
    if let Some(&worst) = rep.counts.iter().max() {
        if worst > 1 {
            return Err(Error::MultiPath(worst));
        }
    }
    let dominant = |i: usize| -> (usize, Complex64) {
        (0..h.ncols())
            .map(|j| (j, h[(i, j)]))
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .expect("non-empty row")
    };
    let rows: Vec<usize> = if d == Domain::DelayDoppler {
        let (m, n) = (cfg.m(), cfg.n());
        let k = (0..n).find(|&k| dominant(k).0 % n == 0).unwrap_or(0);
        (0..m).map(|l| k + n * l).collect()
    } else {
        (0..h.nrows()).collect()
    };
    let mut phase = Vec::with_capacity(rows.len());
    let mut prev = 0.0;
    let mut acc = 0.0;
    for (t, &i) in rows.iter().enumerate() {
        let a = dominant(i).1.arg();
        if t == 0 {
            acc = a;
        } else {
            let mut step = a - prev;
            step -= std::f64::consts::TAU * (step / std::f64::consts::TAU).round();
            acc += step;
        }
        prev = a;
        phase.push(acc);
    }
    let xs: Vec<f64> = (0..phase.len()).map(|x| x as f64).collect();
    let quad = polyfit(&xs, &phase, 2);
    let lin = polyfit(&xs, &phase, 1);
    Ok(PhaseFit {
        linear: quad.0[1],
        quadratic: quad.0[2],
        residual: quad.1,
        linear_residual: lin.1,
        points: phase.len(),
    })
}

/// Least-squares polynomial fit; returns coefficients (ascending) and RMS
/// residual.
fn polyfit(x: &[f64], y: &[f64], degree: usize) -> (Vec<f64>, f64) {
    let k = degree + 1;
    if x.len() < k {
        let mut c = vec![0.0; k];
        c[0] = y.first().copied().unwrap_or(0.0);
        return (c, 0.0);
    }
    // center and scale x for conditioning
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let scale = x.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max).max(1.0);
    let u: Vec<f64> = x.iter().map(|v| (v - mean) / scale).collect();
    let a = nalgebra::DMatrix::from_fn(x.len(), k, |i, j| u[i].powi(j as i32));
    let b = nalgebra::DVector::from_column_slice(y);
    let sol = a.clone().svd(true, true).solve(&b, 1e-14).expect("svd solve");
    let resid = (&a * &sol - &b).norm() / n.sqrt();
    // back to powers of x
    let mut coef = vec![0.0; k];
    for (j, cj) in sol.iter().enumerate() {
        // c_j ((x - mean) / scale)^j expanded binomially
        for (p, slot) in coef.iter_mut().enumerate().take(j + 1) {
            let binom = (1..=p).fold(1.0, |acc, t| acc * (j + 1 - t) as f64 / t as f64);
            *slot += cj / scale.powi(j as i32) * binom * (-mean).powi((j - p) as i32);
        }
    }
    (coef, resid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    /// `1 / (M delta_f)`.
    pub delay_res_s: f64,
    /// Doppler resolution per domain (Hz).
    pub doppler_res_hz: Vec<(Domain, f64)>,
    /// Delay-Doppler over frequency-domain Doppler resolution, i.e. `N`.
    pub ratio: usize,
}

pub fn resolution_report(cfg: &ValidatedConfig) -> ResolutionReport {
    let mut doppler_res_hz = Vec::new();
    for d in [Domain::Frequency, Domain::DelayDoppler, Domain::Affine, Domain::Fresnel] {
        if let Ok(v) = doppler_bin_width(cfg, d) {
            doppler_res_hz.push((d, v));
        }
    }
    ResolutionReport {
        delay_res_s: 1.0 / (cfg.m() as f64 * cfg.delta_f()),
        doppler_res_hz,
        ratio: doppler_resolution_ratio(cfg),
    }
}

/// Affine-domain tap offsets `2 M c1 l - alpha` of on-grid paths (Doppler
/// converted to chirp-symbol bins), before and after reduction modulo `M`.
pub fn affine_tap_locations(paths: &[Path], cfg: &ValidatedConfig) -> Vec<(f64, i64)> {
    let m = cfg.m() as f64;
    let step = 2.0 * m * cfg.c1();
    paths
        .iter()
        .map(|p| {
            let alpha = p.doppler / cfg.n() as f64;
            let loc = step * p.delay - alpha;
            (loc, (loc.round() as i64).rem_euclid(cfg.m() as i64))
        })
        .collect()
}

/// Delay-axis wrap diagnostic for the affine domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasReport {
    /// Span of affine offsets occupied by the paths.
    pub span: f64,
    /// True when the span exceeds the chirp length, so offsets wrap.
    pub wraps: bool,
    /// Pairs of path indices whose offsets coincide modulo `M`.
    pub collisions: Vec<(usize, usize)>,
}

/// Detects when the paths' affine offsets wrap around the chirp length and
/// alias onto each other. Only a diagnostic: nothing is compensated.
pub fn delay_wrap_diagnostic(paths: &[Path], cfg: &ValidatedConfig) -> Result<AliasReport> {
    if !cfg.has_affine() {
        return Err(Error::DomainMismatch {
            expected: "AFDM or OCDM configuration".into(),
            got: cfg.waveform().to_string(),
        });
    }
    let locs = affine_tap_locations(paths, cfg);
    let lo = locs.iter().map(|l| l.0).fold(f64::INFINITY, f64::min);
    let hi = locs.iter().map(|l| l.0).fold(f64::NEG_INFINITY, f64::max);
    let span = if locs.is_empty() { 0.0 } else { hi - lo };
    let mut collisions = Vec::new();
    for i in 0..locs.len() {
        for j in 0..i {
            if locs[i].1 == locs[j].1 {
                collisions.push((j, i));
            }
        }
    }
    Ok(AliasReport {
        span,
        wraps: span >= cfg.m() as f64,
        collisions,
    })
}

/// `bin<TAB>magnitude<TAB>phase` rows for plotting.
pub fn profile_table(p: &PulseProfile) -> String {
    let mut s = String::from("bin\tmagnitude\tphase\n");
    for (i, v) in p.response.iter().enumerate() {
        let _ = writeln!(s, "{i}\t{:.12e}\t{:.12e}", v.norm(), v.arg());
    }
    s
}

/// `row<TAB>col<TAB>magnitude<TAB>phase` for entries above `rel_threshold`.
pub fn matrix_table(h: &CMatrix, rel_threshold: f64) -> String {
    let thr = rel_threshold * max_abs(h);
    let mut s = String::from("row\tcol\tmagnitude\tphase\n");
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            let v = h[(i, j)];
            if v.norm() > thr {
                let _ = writeln!(s, "{i}\t{j}\t{:.12e}\t{:.12e}", v.norm(), v.arg());
            }
        }
    }
    s
}
