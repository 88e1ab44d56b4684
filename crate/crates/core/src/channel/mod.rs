//! Linear time-variant multipath channel.
//!
//! A path `(h, l, kappa)` contributes `h exp(j 2 pi kappa n / (M N)) x(n - l)`
//! to output sample `n`, where `n` counts transmitted samples from the start
//! of the frame (prefixes included), `l` may be fractional (see
//! [`fractional`]) and `kappa` is in delay-Doppler bins. Samples outside the
//! frame are taken cyclically for CP-type frames and as zeros for zero-padded
//! frames.

pub mod fractional;
pub mod profiles;

use std::collections::BTreeMap;
use std::ops::Range;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::cis_turns;
use crate::error::{Error, Result};
use crate::frame::{Domain, ValidatedConfig};
use crate::linalg::{conjugate_by, CMatrix, SparseRows, ONE, ZERO};
use crate::transforms::{to_domain, PrefixMap};

pub use fractional::{fractional_taps, FRAC_TAPS};
pub use profiles::{PowerDelayProfile, ProfileName};

/// Largest dense oracle the crate will build.
pub const ORACLE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: Complex64,
    /// Delay in samples (fractional allowed).
    pub delay: f64,
    /// Doppler in delay-Doppler bins (fractional allowed).
    pub doppler: f64,
}

impl Path {
    pub fn new(gain: Complex64, delay: f64, doppler: f64) -> Self {
        Self {
            gain,
            delay,
            doppler,
        }
    }

    pub fn is_integer(&self) -> bool {
        self.delay.fract() == 0.0 && self.doppler.fract() == 0.0
    }
}

/// Path set active on output samples `start..end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub paths: Vec<Path>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtvChannel {
    /// Transmitted frame length including prefixes.
    pub frame_len: usize,
    /// `M * N`, the Doppler phase normalization.
    pub grid_len: usize,
    /// Cyclic (CP-type) or zero extension outside the frame.
    pub cyclic: bool,
    pub segments: Vec<Segment>,
    /// Nominal maximum Doppler of the generating profile, if any.
    pub doppler_max_hz: Option<f64>,
}

impl LtvChannel {
    /// Stationary channel over the whole frame of `cfg`.
    pub fn new(paths: Vec<Path>, cfg: &ValidatedConfig) -> Result<Self> {
        let ch = Self {
            frame_len: cfg.frame_len(),
            grid_len: cfg.grid_len(),
            cyclic: cfg.prefix().is_cyclic(),
            segments: vec![Segment {
                start: 0,
                end: cfg.frame_len(),
                paths,
            }],
            doppler_max_hz: None,
        };
        ch.check()?;
        Ok(ch)
    }

    pub fn identity(cfg: &ValidatedConfig) -> Self {
        Self::new(vec![Path::new(ONE, 0.0, 0.0)], cfg).expect("identity channel is valid")
    }

    pub fn check(&self) -> Result<()> {
        let mut next = 0;
        for s in &self.segments {
            if s.start != next || s.end <= s.start {
                return Err(Error::BadChannel(format!(
                    "segments must tile the frame, got {}..{} after {next}",
                    s.start, s.end
                )));
            }
            next = s.end;
            for p in &s.paths {
                if !(p.delay >= 0.0 && p.delay < self.frame_len as f64) {
                    return Err(Error::BadChannel(format!("delay {} outside frame", p.delay)));
                }
                if !(p.gain.re.is_finite() && p.gain.im.is_finite() && p.doppler.is_finite()) {
                    return Err(Error::BadChannel("non-finite path parameter".into()));
                }
            }
        }
        if next != self.frame_len {
            return Err(Error::BadChannel(format!(
                "segments cover {next} of {} samples",
                self.frame_len
            )));
        }
        Ok(())
    }

    pub fn is_stationary(&self) -> bool {
        self.segments.len() == 1
    }

    /// Paths of the first segment (the whole channel when stationary).
    pub fn paths(&self) -> &[Path] {
        &self.segments[0].paths
    }

    pub fn all_paths(&self) -> impl Iterator<Item = &Path> {
        self.segments.iter().flat_map(|s| s.paths.iter())
    }

    pub fn is_integer(&self) -> bool {
        self.all_paths().all(Path::is_integer)
    }

    pub fn total_power(&self) -> f64 {
        self.paths().iter().map(|p| p.gain.norm_sqr()).sum()
    }
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DopplerSpectrum {
    /// Doppler uniform in `[-f_max, f_max]`.
    #[default]
    Uniform,
    /// `f_max cos(theta)` with uniform angle of arrival (Jakes/Clarke).
    Jakes,
}

/// Which path set to instantiate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ProfileSpec {
    /// Tabulated power-delay profile with Rayleigh taps.
    Named { name: ProfileName },
    /// Explicit path list.
    Custom { paths: Vec<Path> },
    /// `paths` equal-power Rayleigh paths with delays in `[0, max_delay]`
    /// samples and Dopplers in `[-max_doppler, max_doppler]` bins.
    RandomSparse {
        paths: usize,
        max_delay: f64,
        max_doppler: f64,
        #[serde(default)]
        integer: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProfileOptions {
    #[serde(default)]
    pub spectrum: DopplerSpectrum,
    /// Round delays and Dopplers to the sampling grid.
    #[serde(default)]
    pub integer_grid: bool,
}

fn complex_gaussian(rng: &mut impl Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Instantiates a channel for `cfg` with default options.
pub fn make_profile(
    spec: &ProfileSpec,
    cfg: &ValidatedConfig,
    doppler_max_hz: f64,
    seed: u64,
) -> Result<LtvChannel> {
    make_profile_with(spec, cfg, doppler_max_hz, seed, ProfileOptions::default())
}

pub fn make_profile_with(
    spec: &ProfileSpec,
    cfg: &ValidatedConfig,
    doppler_max_hz: f64,
    seed: u64,
    opts: ProfileOptions,
) -> Result<LtvChannel> {
    if !(doppler_max_hz >= 0.0 && doppler_max_hz.is_finite()) {
        return Err(Error::BadChannel(format!("doppler_max = {doppler_max_hz}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bin_hz = cfg.delta_f() / cfg.n() as f64;
    let draw_doppler = |rng: &mut ChaCha8Rng| -> f64 {
        if doppler_max_hz == 0.0 {
            return 0.0;
        }
        let f = match opts.spectrum {
            DopplerSpectrum::Uniform => rng.random_range(-doppler_max_hz..=doppler_max_hz),
            DopplerSpectrum::Jakes => {
                doppler_max_hz * (rng.random_range(0.0..std::f64::consts::TAU)).cos()
            }
        };
        f / bin_hz
    };
    let mut paths = match spec {
        ProfileSpec::Named { name } => {
            let pdp = PowerDelayProfile::load(*name);
            let fs = cfg.sample_rate();
            pdp.delays_s
                .iter()
                .zip(&pdp.powers)
                .map(|(d, p)| {
                    let gain = complex_gaussian(&mut rng, *p);
                    let doppler = draw_doppler(&mut rng);
                    Path::new(gain, d * fs, doppler)
                })
                .collect::<Vec<_>>()
        }
        ProfileSpec::Custom { paths } => paths.clone(),
        ProfileSpec::RandomSparse {
            paths,
            max_delay,
            max_doppler,
            integer,
        } => {
            if *paths == 0 {
                return Err(Error::BadChannel("random profile needs at least one path".into()));
            }
            let p = 1.0 / *paths as f64;
            (0..*paths)
                .map(|_| {
                    let gain = complex_gaussian(&mut rng, p);
                    let (d, k) = draw_point(&mut rng, *max_delay, *max_doppler, *integer);
                    Path::new(gain, d, k)
                })
                .collect()
        }
    };
    if opts.integer_grid {
        for p in &mut paths {
            p.delay = p.delay.round();
            p.doppler = p.doppler.round();
        }
    }
    let mut ch = LtvChannel::new(paths, cfg)?;
    if matches!(spec, ProfileSpec::Named { .. }) {
        ch.doppler_max_hz = Some(doppler_max_hz);
    }
    Ok(ch)
}

fn draw_point(rng: &mut ChaCha8Rng, max_delay: f64, max_doppler: f64, integer: bool) -> (f64, f64) {
    if integer {
        let d = rng.random_range(0..=max_delay.floor() as i64) as f64;
        let k = max_doppler.floor() as i64;
        (d, rng.random_range(-k..=k) as f64)
    } else {
        let d = if max_delay > 0.0 {
            rng.random_range(0.0..=max_delay)
        } else {
            0.0
        };
        let k = if max_doppler > 0.0 {
            rng.random_range(-max_doppler..=max_doppler)
        } else {
            0.0
        };
        (d, k)
    }
}

/// Splits a stationary channel into `n_segments` equal spans; every span
/// replaces `round(churn * P)` paths with fresh draws and is rescaled to the
/// base total power.
pub fn make_birth_death(base: &LtvChannel, n_segments: usize, churn: f64, seed: u64) -> Result<LtvChannel> {
    if !(0.0..=1.0).contains(&churn) {
        return Err(Error::Precondition(format!("churn {churn} outside [0, 1]")));
    }
    if n_segments == 0 || n_segments > base.frame_len {
        return Err(Error::Precondition(format!("cannot split {} samples into {n_segments} segments", base.frame_len)));
    }
    if churn == 0.0 || n_segments == 1 {
        return Ok(base.clone());
    }
    let paths = base.paths();
    let integer = paths.iter().all(Path::is_integer);
    let max_delay = paths.iter().map(|p| p.delay).fold(0.0, f64::max);
    let max_doppler = paths.iter().map(|p| p.doppler.abs()).fold(0.0, f64::max);
    let base_power: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
    let mean_power = base_power / paths.len().max(1) as f64;
    let replace = (churn * paths.len() as f64).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = base.frame_len / n_segments;
    let mut segments = Vec::with_capacity(n_segments);
    for s in 0..n_segments {
        let start = s * span;
        let end = if s + 1 == n_segments { base.frame_len } else { start + span };
        let mut set = paths.to_vec();
        let mut idx: Vec<usize> = (0..set.len()).collect();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(replace) {
            let gain = complex_gaussian(&mut rng, mean_power);
            let (d, k) = draw_point(&mut rng, max_delay, max_doppler, integer);
            set[i] = Path::new(gain, d, k);
        }
        let power: f64 = set.iter().map(|p| p.gain.norm_sqr()).sum();
        if power > 0.0 {
            let g = (base_power / power).sqrt();
            for p in &mut set {
                p.gain *= g;
            }
        }
        segments.push(Segment { start, end, paths: set });
    }
    let ch = LtvChannel {
        segments,
        ..base.clone()
    };
    ch.check()?;
    Ok(ch)
}

// ---------------------------------------------------------------------------
// Application
// ---------------------------------------------------------------------------

/// Taps of one segment grouped by Doppler: `(doppler, [(shift, weight)])`.
fn grouped_taps(paths: &[Path]) -> Vec<(f64, Vec<(i64, Complex64)>)> {
    let mut groups: BTreeMap<u64, (f64, BTreeMap<i64, Complex64>)> = BTreeMap::new();
    for p in paths {
        let entry = groups
            .entry(p.doppler.to_bits())
            .or_insert_with(|| (p.doppler, BTreeMap::new()));
        for (shift, w) in fractional_taps(p.delay) {
            *entry.1.entry(shift).or_insert(ZERO) += p.gain * w;
        }
    }
    groups
        .into_values()
        .map(|(k, taps)| (k, taps.into_iter().collect()))
        .collect()
}

fn source_index(idx: i64, len: usize, cyclic: bool) -> Option<usize> {
    if (0..len as i64).contains(&idx) {
        Some(idx as usize)
    } else if cyclic {
        Some(idx.rem_euclid(len as i64) as usize)
    } else {
        None
    }
}

/// Noise variance giving `snr_db` against the mean power of `x`.
pub fn noise_variance(x: &[Complex64], snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY || x.is_empty() {
        return 0.0;
    }
    let p = crate::dsp::energy(x) / x.len() as f64;
    p / 10f64.powf(snr_db / 10.0)
}

/// Noiseless channel output.
pub fn apply_noiseless(x: &[Complex64], ch: &LtvChannel) -> Result<Vec<Complex64>> {
    if x.len() != ch.frame_len {
        return Err(Error::LengthMismatch {
            expected: ch.frame_len,
            got: x.len(),
        });
    }
    let len = x.len();
    let norm = ch.grid_len as f64;
    let mut y = vec![ZERO; len];
    for seg in &ch.segments {
        for (kappa, taps) in grouped_taps(&seg.paths) {
            for n in seg.start..seg.end {
                let mut acc = ZERO;
                for (shift, w) in &taps {
                    if let Some(i) = source_index(n as i64 - shift, len, ch.cyclic) {
                        acc += w * x[i];
                    }
                }
                y[n] += if kappa == 0.0 { acc } else { acc * cis_turns(kappa * n as f64 / norm) };
            }
        }
    }
    Ok(y)
}

/// Channel output plus complex white Gaussian noise at `snr_db` (per-sample
/// SNR against the mean input power); `f64::INFINITY` disables noise.
pub fn apply_channel(x: &[Complex64], ch: &LtvChannel, snr_db: f64, seed: u64) -> Result<Vec<Complex64>> {
    let mut y = apply_noiseless(x, ch)?;
    let var = noise_variance(x, snr_db);
    if var > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut y {
            *v += complex_gaussian(&mut rng, var);
        }
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// Matrices
// ---------------------------------------------------------------------------

/// Per-row generator for the path model's `frame_len x frame_len` operator.
pub(crate) struct RowSource {
    len: usize,
    cyclic: bool,
    norm: f64,
    /// `(start, end, [(gain, doppler, taps)])` per segment.
    segs: Vec<(usize, usize, Vec<(Complex64, f64, Vec<(i64, f64)>)>)>,
}

impl RowSource {
    pub(crate) fn new(ch: &LtvChannel) -> Self {
        let segs = ch
            .segments
            .iter()
            .map(|s| {
                let paths = s
                    .paths
                    .iter()
                    .map(|p| (p.gain, p.doppler, fractional_taps(p.delay)))
                    .collect();
                (s.start, s.end, paths)
            })
            .collect();
        Self {
            len: ch.frame_len,
            cyclic: ch.cyclic,
            norm: ch.grid_len as f64,
            segs,
        }
    }

    /// Appends row `n` scaled by `scale` to `out` (unsorted, may repeat columns).
    pub(crate) fn row(&self, n: usize, scale: Complex64, out: &mut Vec<(usize, Complex64)>) {
        let seg = self
            .segs
            .iter()
            .find(|s| s.0 <= n && n < s.1)
            .expect("segments tile the frame");
        for (gain, doppler, taps) in &seg.2 {
            let ph = scale * gain * cis_turns(doppler * n as f64 / self.norm);
            for (shift, w) in taps {
                if let Some(i) = source_index(n as i64 - shift, self.len, self.cyclic) {
                    out.push((i, ph * w));
                }
            }
        }
    }
}

/// Row-sparse `frame_len x frame_len` operator of the path model.
pub fn channel_rows(ch: &LtvChannel) -> SparseRows {
    let src = RowSource::new(ch);
    let rows = (0..ch.frame_len)
        .map(|n| {
            let mut r = Vec::new();
            src.row(n, ONE, &mut r);
            r
        })
        .collect();
    SparseRows::from_unsorted(ch.frame_len, rows)
}

/// Rows `range` of `R_cp H A_cp`, with `h_row(frame_row, scale, out)`
/// producing the rows of `H`.
pub(crate) fn payload_rows(
    map: &PrefixMap,
    range: Range<usize>,
    h_row: impl Fn(usize, Complex64, &mut Vec<(usize, Complex64)>),
) -> SparseRows {
    let mut frame_row = Vec::new();
    let rows = range
        .map(|i| {
            frame_row.clear();
            for &(r, w) in &map.extract[i] {
                h_row(r, w, &mut frame_row);
            }
            frame_row
                .iter()
                .filter_map(|&(t, v)| map.insert[t].map(|(j, w)| (j, v * w)))
                .collect()
        })
        .collect();
    SparseRows::from_unsorted(map.payload_len, rows)
}

fn check_frame(ch: &LtvChannel, cfg: &ValidatedConfig) -> Result<()> {
    if ch.frame_len != cfg.frame_len() || ch.grid_len != cfg.grid_len() {
        return Err(Error::LengthMismatch {
            expected: cfg.frame_len(),
            got: ch.frame_len,
        });
    }
    Ok(())
}

/// Rows `range` of the payload operator [`frame_operator`].
pub fn frame_operator_rows(ch: &LtvChannel, cfg: &ValidatedConfig, range: Range<usize>) -> Result<SparseRows> {
    check_frame(ch, cfg)?;
    let map = PrefixMap::new(cfg.prefix(), cfg)?;
    let src = RowSource::new(ch);
    Ok(payload_rows(&map, range, |r, w, out| src.row(r, w, out)))
}

/// Payload-to-payload time operator `R_cp H A_cp` (`M N x M N`, row-sparse).
pub fn frame_operator(ch: &LtvChannel, cfg: &ValidatedConfig) -> Result<SparseRows> {
    frame_operator_rows(ch, cfg, 0..cfg.grid_len())
}

/// Dense time-domain channel matrix built from unit impulses.
pub fn channel_matrix(ch: &LtvChannel, cfg: &ValidatedConfig) -> Result<CMatrix> {
    let len = cfg.frame_len();
    if len > ORACLE_LIMIT {
        return Err(Error::TooLarge {
            dim: len,
            limit: ORACLE_LIMIT,
        });
    }
    let mut h = CMatrix::zeros(len, len);
    let mut e = vec![ZERO; len];
    for j in 0..len {
        e[j] = ONE;
        let col = apply_noiseless(&e, ch)?;
        e[j] = ZERO;
        for (i, v) in col.into_iter().enumerate() {
            h[(i, j)] = v;
        }
    }
    Ok(h)
}

/// Dense effective channel `T_d R_cp H A_cp T_d^H` from a time operator.
pub fn effective_from_operator(op: &SparseRows, cfg: &ValidatedConfig, d: Domain) -> Result<CMatrix> {
    let n = cfg.grid_len();
    if n > ORACLE_LIMIT {
        return Err(Error::TooLarge {
            dim: n,
            limit: ORACLE_LIMIT,
        });
    }
    // fail early on undefined domains
    to_domain(&vec![ZERO; n], d, cfg)?;
    let g = op.to_dense();
    Ok(conjugate_by(&g, |v| to_domain(v, d, cfg).expect("domain checked")))
}

/// The matrix equalizers consume in domain `d`.
pub fn effective_channel(ch: &LtvChannel, cfg: &ValidatedConfig, d: Domain) -> Result<CMatrix> {
    let n = cfg.grid_len();
    if n > ORACLE_LIMIT {
        return Err(Error::TooLarge {
            dim: n,
            limit: ORACLE_LIMIT,
        });
    }
    effective_from_operator(&frame_operator(ch, cfg)?, cfg, d)
}

/// Delay spread (s) times two-sided Doppler spread (Hz); above one is overspread.
pub fn spread_factor(ch: &LtvChannel, cfg: &ValidatedConfig) -> f64 {
    let mut dmin = f64::INFINITY;
    let mut dmax = f64::NEG_INFINITY;
    let mut kmin = f64::INFINITY;
    let mut kmax = f64::NEG_INFINITY;
    for p in ch.all_paths() {
        dmin = dmin.min(p.delay);
        dmax = dmax.max(p.delay);
        kmin = kmin.min(p.doppler);
        kmax = kmax.max(p.doppler);
    }
    if !dmin.is_finite() {
        return 0.0;
    }
    let delay_spread = (dmax - dmin) * cfg.sample_period();
    let doppler_spread = match ch.doppler_max_hz {
        Some(f) => 2.0 * f,
        None => (kmax - kmin) * cfg.delta_f() / cfg.n() as f64,
    };
    delay_spread * doppler_spread
}
