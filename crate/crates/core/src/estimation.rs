//! Pilot frames and channel estimation.
//!
//! Three pilot layouts are supported:
//!
//! * [`PilotKind::BlockFrequency`]: one whole symbol carries a known
//!   unit-modulus sequence on its subcarriers (every `spacing`-th bin), the
//!   other symbols carry data. Estimation is least squares per bin.
//! * [`PilotKind::EmbeddedDD`]: a single boosted impulse on the OTFS
//!   delay-Doppler grid inside a zero guard. Each bin of the observation
//!   window above threshold becomes an integer `(delay, Doppler)` path.
//! * [`PilotKind::EmbeddedAffine`]: the same idea on the one-dimensional AFDM
//!   grid, where a path `(l, alpha)` lands at offset `2 N c1 l - alpha` from
//!   the pilot and carries a chirp phase that has to be undone.
//!
//! The guard geometry is the classical one: if paths span delays
//! `[-d_neg, d_pos]` and Dopplers `[-k, k]`, the observation window has that
//! size around the pilot, and data is kept out of a zone twice as large so
//! that no data symbol leaks into the window.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, frame_operator_rows, LtvChannel, Path, RowSource};
use crate::dsp::{cis_turns, dft, idft};
use crate::error::{Error, Result};
use crate::frame::{Domain, PrefixScheme, ValidatedConfig, Waveform};
use crate::linalg::{conjugate_by, CMatrix, SparseRows, ZERO};
use crate::transforms::{build_kernel, domain_plan, to_domain, DomainSymbols, PrefixMap};

/// Received `|P[k]|` below this is treated as no pilot.
pub const ZERO_PILOT: f64 = 1e-12;
/// NMSE values are reported no lower than this.
pub const NMSE_FLOOR_DB: f64 = -200.0;
/// Detection floor relative to the pilot amplitude, active when noise is zero.
const NOISELESS_FLOOR: f64 = 1e-8;
/// Rows per chunk when streaming sparse operators.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PilotKind {
    BlockFrequency,
    EmbeddedDD,
    EmbeddedAffine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Interpolation {
    /// Straight lines between pilot bins.
    Linear,
    /// Band-limited: pilot bins to a short impulse response and back.
    #[default]
    Dft,
}

fn default_boost() -> f64 {
    10.0
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotScheme {
    pub kind: PilotKind,
    /// Pilot power over the mean data power (unit for QPSK).
    #[serde(default = "default_boost")]
    pub boost_db: f64,
    /// Largest path delay the guard must absorb (delay bins).
    #[serde(default)]
    pub delay_guard: usize,
    /// Precursor allowance: smallest (negative) delay, as a magnitude.
    #[serde(default)]
    pub delay_guard_neg: usize,
    /// Largest |Doppler| the guard must absorb (Doppler or affine bins).
    #[serde(default)]
    pub doppler_guard: usize,
    /// Pilot position: `(delay, Doppler)` for DD, `(index, _)` for affine,
    /// `(symbol, _)` for block pilots. Centered when absent.
    #[serde(default)]
    pub anchor: Option<(usize, usize)>,
    /// Block pilots occupy every `spacing`-th subcarrier.
    #[serde(default = "one")]
    pub spacing: usize,
    #[serde(default)]
    pub interpolation: Interpolation,
    /// Seed of the block pilot sequence.
    #[serde(default)]
    pub seed: u64,
}

impl PilotScheme {
    pub fn block(boost_db: f64) -> Self {
        Self {
            kind: PilotKind::BlockFrequency,
            boost_db,
            delay_guard: 0,
            delay_guard_neg: 0,
            doppler_guard: 0,
            anchor: None,
            spacing: 1,
            interpolation: Interpolation::Dft,
            seed: 0,
        }
    }

    pub fn embedded_dd(delay_guard: usize, doppler_guard: usize) -> Self {
        Self {
            kind: PilotKind::EmbeddedDD,
            delay_guard,
            doppler_guard,
            ..Self::block(default_boost())
        }
    }

    pub fn embedded_affine(delay_guard: usize, doppler_guard: usize) -> Self {
        Self {
            kind: PilotKind::EmbeddedAffine,
            ..Self::embedded_dd(delay_guard, doppler_guard)
        }
    }

    pub fn amplitude(&self) -> f64 {
        10f64.powf(self.boost_db / 20.0)
    }
}

/// Everything the receiver needs to know about the pilot layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotMeta {
    pub scheme: PilotScheme,
    /// Domain in which pilot positions are expressed.
    pub domain: Domain,
    /// `(index, value)` of every transmitted pilot in `domain`.
    pub pilots: Vec<(usize, Complex64)>,
    /// Multiplexing-domain indices carrying data, in fill order.
    pub data_indices: Vec<usize>,
    /// Indices (in `domain`) scanned for path responses.
    pub window: Vec<usize>,
    pub m: usize,
    pub n: usize,
    pub prefix: PrefixScheme,
    pub c1: f64,
    pub c2: f64,
}

impl PilotMeta {
    fn expect(&self, kind: PilotKind) -> Result<()> {
        if self.scheme.kind != kind {
            return Err(Error::NoPilotMeta(format!(
                "estimator needs {kind:?} metadata, got {:?}",
                self.scheme.kind
            )));
        }
        Ok(())
    }
}

/// One on-grid path reported by an estimator. Delays are signed so that
/// precursor taps of band-limited paths can be represented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedPath {
    pub gain: Complex64,
    pub delay: i64,
    /// Doppler in delay-Doppler bins.
    pub doppler: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form")]
pub enum EstimateForm {
    /// Per-subcarrier response, applied to every symbol of the frame.
    Bins { response: Vec<Complex64> },
    Paths { paths: Vec<EstimatedPath> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEstimate {
    pub domain: Domain,
    /// Magnitude threshold used for detection (0 for LS estimates).
    pub threshold: f64,
    pub form: EstimateForm,
}

impl PathEstimate {
    pub fn paths(&self) -> Option<&[EstimatedPath]> {
        match &self.form {
            EstimateForm::Paths { paths } => Some(paths),
            EstimateForm::Bins { .. } => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Pilot frames
// ---------------------------------------------------------------------------

/// Unit-modulus pseudo-random sequence on every `spacing`-th of `m` bins.
pub fn block_sequence(m: usize, spacing: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|k| {
            let ph: f64 = rng.random();
            if k % spacing == 0 {
                cis_turns(ph)
            } else {
                ZERO
            }
        })
        .collect()
}

/// Lays out pilot and data in the waveform's multiplexing domain.
pub fn build_pilot_frame(
    scheme: &PilotScheme,
    data: &[Complex64],
    cfg: &ValidatedConfig,
) -> Result<(DomainSymbols, PilotMeta)> {
    let mux = cfg.waveform().multiplexing_domain();
    let mut meta = PilotMeta {
        scheme: scheme.clone(),
        domain: mux,
        pilots: Vec::new(),
        data_indices: Vec::new(),
        window: Vec::new(),
        m: cfg.m(),
        n: cfg.n(),
        prefix: cfg.prefix(),
        c1: cfg.c1(),
        c2: cfg.c2(),
    };
    let mut frame = vec![ZERO; cfg.grid_len()];
    match scheme.kind {
        PilotKind::BlockFrequency => block_layout(scheme, cfg, &mut meta, &mut frame)?,
        PilotKind::EmbeddedDD => dd_layout(scheme, cfg, &mut meta, &mut frame)?,
        PilotKind::EmbeddedAffine => affine_layout(scheme, cfg, &mut meta, &mut frame)?,
    }
    if data.len() > meta.data_indices.len() {
        return Err(Error::DataOverflow {
            needed: data.len(),
            available: meta.data_indices.len(),
        });
    }
    for (&i, &v) in meta.data_indices.iter().zip(data) {
        frame[i] = v;
    }
    Ok((DomainSymbols::new(frame, mux), meta))
}

fn block_layout(
    scheme: &PilotScheme,
    cfg: &ValidatedConfig,
    meta: &mut PilotMeta,
    frame: &mut [Complex64],
) -> Result<()> {
    let (m, n) = (cfg.m(), cfg.n());
    if cfg.waveform() == Waveform::Otfs && n > 1 {
        return Err(Error::UnsupportedCombo(
            "block frequency pilots need a symbol-local kernel; OTFS spreads over the frame".into(),
        ));
    }
    if scheme.spacing == 0 || m % scheme.spacing != 0 {
        return Err(Error::BadGrid(format!("pilot spacing {} must divide M = {m}", scheme.spacing)));
    }
    let sym = scheme.anchor.map_or(0, |a| a.0);
    if sym >= n {
        return Err(Error::BadGrid(format!("pilot symbol {sym} outside N = {n}")));
    }
    let amp = scheme.amplitude();
    let seq = block_sequence(m, scheme.spacing, scheme.seed);
    let mut freq = vec![ZERO; cfg.grid_len()];
    for (k, p) in seq.iter().enumerate() {
        if p.norm() > 0.0 {
            let idx = k + m * sym;
            freq[idx] = p * amp;
            meta.pilots.push((idx, p * amp));
        }
    }
    meta.domain = Domain::Frequency;
    // the kernel is symbol-local here, so this only touches symbol `sym`
    let time = domain_plan(Domain::Frequency, cfg).synthesize(&freq);
    let pilot_mux = build_kernel(cfg).analyze(&time);
    frame.copy_from_slice(&pilot_mux);
    meta.data_indices = (0..cfg.grid_len()).filter(|i| i / m != sym).collect();
    Ok(())
}

fn dd_layout(
    scheme: &PilotScheme,
    cfg: &ValidatedConfig,
    meta: &mut PilotMeta,
    frame: &mut [Complex64],
) -> Result<()> {
    if cfg.waveform() != Waveform::Otfs {
        return Err(Error::UnsupportedCombo(format!(
            "embedded delay-Doppler pilots need OTFS, got {}",
            cfg.waveform()
        )));
    }
    let (m, n) = (cfg.m(), cfg.n());
    let (dn, dp, kg) = (scheme.delay_guard_neg, scheme.delay_guard, scheme.doppler_guard);
    let (lp, kp) = scheme.anchor.unwrap_or((m / 2, n / 2));
    let span = dn + dp;
    if lp < span || lp + span >= m || kp >= n {
        return Err(Error::BadGrid(format!(
            "pilot at delay {lp} with guard span {span} does not fit M = {m}"
        )));
    }
    let dop_offsets = |w: usize| -> Vec<usize> {
        if 2 * w + 1 >= n {
            (0..n).collect()
        } else {
            (0..=2 * w).map(|o| (kp + n + o - w) % n).collect()
        }
    };
    let idx = |l: usize, k: usize| k + n * l;
    let window_k = dop_offsets(kg);
    for l in lp - dn..=lp + dp {
        for &k in &window_k {
            meta.window.push(idx(l, k));
        }
    }
    let zone_k = dop_offsets(2 * kg);
    let mut zone = vec![false; cfg.grid_len()];
    for l in lp - span..=lp + span {
        for &k in &zone_k {
            zone[idx(l, k)] = true;
        }
    }
    let p = Complex64::new(scheme.amplitude(), 0.0);
    frame[idx(lp, kp)] = p;
    meta.pilots.push((idx(lp, kp), p));
    meta.data_indices = (0..cfg.grid_len()).filter(|&i| !zone[i]).collect();
    Ok(())
}

/// Range of affine offsets `2 N c1 l - alpha` spanned by the guard.
fn affine_offsets(scheme: &PilotScheme, len: usize, c1: f64) -> (i64, i64) {
    let step = 2.0 * len as f64 * c1;
    let lo = -(step * scheme.delay_guard_neg as f64).ceil() as i64 - scheme.doppler_guard as i64;
    let hi = (step * scheme.delay_guard as f64).ceil() as i64 + scheme.doppler_guard as i64;
    (lo, hi)
}

fn affine_layout(
    scheme: &PilotScheme,
    cfg: &ValidatedConfig,
    meta: &mut PilotMeta,
    frame: &mut [Complex64],
) -> Result<()> {
    if !cfg.waveform().is_chirp() {
        return Err(Error::UnsupportedCombo(format!(
            "embedded affine pilots need AFDM or OCDM, got {}",
            cfg.waveform()
        )));
    }
    if cfg.n() != 1 {
        return Err(Error::UnsupportedCombo(
            "embedded affine pilots are implemented for single-chirp frames (N = 1)".into(),
        ));
    }
    let len = cfg.m();
    let (lo, hi) = affine_offsets(scheme, len, cfg.c1());
    let width = hi - lo;
    let qp = scheme.anchor.map_or(len / 2, |a| a.0) as i64;
    if qp - width < 0 || qp + width >= len as i64 {
        return Err(Error::BadGrid(format!(
            "affine pilot at {qp} with guard {width} does not fit N = {len}"
        )));
    }
    // a path at offset `loc` moves the pilot from q_p to q_p - loc
    meta.window = (qp - hi..=qp - lo).map(|p| p as usize).collect();
    let p = Complex64::new(scheme.amplitude(), 0.0);
    frame[qp as usize] = p;
    meta.pilots.push((qp as usize, p));
    meta.domain = cfg.waveform().multiplexing_domain();
    meta.data_indices = (0..len as i64).filter(|q| (q - qp).abs() > width).map(|q| q as usize).collect();
    Ok(())
}

/// Received symbols re-expressed in the pilot domain.
pub fn pilot_observation(rx: &DomainSymbols, meta: &PilotMeta, cfg: &ValidatedConfig) -> Result<Vec<Complex64>> {
    let mux = cfg.waveform().multiplexing_domain();
    if rx.domain != mux {
        return Err(Error::DomainMismatch {
            expected: mux.to_string(),
            got: rx.domain.to_string(),
        });
    }
    if meta.domain == mux {
        return Ok(rx.data.clone());
    }
    let time = build_kernel(cfg).synthesize(&rx.data);
    to_domain(&time, meta.domain, cfg)
}

/// Pilot values as seen at the receiver (equal to the transmitted ones over
/// an ideal channel).
pub fn extract_pilots(rx: &DomainSymbols, meta: &PilotMeta, cfg: &ValidatedConfig) -> Result<Vec<Complex64>> {
    let obs = pilot_observation(rx, meta, cfg)?;
    Ok(meta.pilots.iter().map(|(i, _)| obs[*i]).collect())
}

/// The pilot part of the transmitted multiplexing-domain frame.
pub fn pilot_only_frame(meta: &PilotMeta, cfg: &ValidatedConfig) -> Result<DomainSymbols> {
    let mux = cfg.waveform().multiplexing_domain();
    let mut v = vec![ZERO; cfg.grid_len()];
    for &(i, p) in &meta.pilots {
        v[i] = p;
    }
    if meta.domain == mux {
        return Ok(DomainSymbols::new(v, mux));
    }
    let time = domain_plan(meta.domain, cfg).synthesize(&v);
    Ok(DomainSymbols::new(build_kernel(cfg).analyze(&time), mux))
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// Least-squares per-bin estimate `Y[k] / P[k]` on the pilot bins
/// `0, spacing, 2 spacing, ...`, interpolated across the others.
pub fn estimate_frequency_ls(
    rx_pilot: &[Complex64],
    known: &[Complex64],
    spacing: usize,
    interp: Interpolation,
) -> Result<PathEstimate> {
    if rx_pilot.len() != known.len() {
        return Err(Error::LengthMismatch {
            expected: known.len(),
            got: rx_pilot.len(),
        });
    }
    let m = known.len();
    if spacing == 0 || m % spacing != 0 {
        return Err(Error::BadGrid(format!("pilot spacing {spacing} must divide {m}")));
    }
    let bins: Vec<usize> = (0..m).step_by(spacing).collect();
    if let Some(&k) = bins.iter().find(|&&k| known[k].norm() < ZERO_PILOT) {
        return Err(Error::ZeroPilot(k));
    }
    let ls: Vec<Complex64> = bins.iter().map(|&k| rx_pilot[k] / known[k]).collect();
    let response = match interp {
        _ if spacing == 1 => ls,
        Interpolation::Dft => dft_interpolate(&ls, spacing, m),
        Interpolation::Linear => linear_interpolate(&ls, &bins, m),
    };
    Ok(PathEstimate {
        domain: Domain::Frequency,
        threshold: 0.0,
        form: EstimateForm::Bins { response },
    })
}

fn linear_interpolate(vals: &[Complex64], bins: &[usize], m: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; m];
    let np = bins.len();
    for k in 0..m {
        // bracketing pilots, cyclically
        let j = bins.partition_point(|&b| b <= k);
        let (a, b) = if j == 0 { (np - 1, 0) } else { (j - 1, j % np) };
        let ka = bins[a] as f64;
        let mut kb = bins[b] as f64;
        let mut kk = k as f64;
        if kb <= ka {
            kb += m as f64;
        }
        if kk < ka {
            kk += m as f64;
        }
        let t = if kb > ka { (kk - ka) / (kb - ka) } else { 0.0 };
        out[k] = vals[a] * (1.0 - t) + vals[b] * t;
    }
    out
}

/// Band-limited interpolation: the `m / spacing` pilot values define an
/// impulse response of that length (the last quarter read as precursors),
/// which is evaluated on all `m` bins.
fn dft_interpolate(vals: &[Complex64], spacing: usize, m: usize) -> Vec<Complex64> {
    debug_assert_eq!(vals.len() * spacing, m);
    let q = vals.len();
    let scale = 1.0 / (q as f64).sqrt();
    let mut padded = vec![ZERO; m];
    for (t, g) in idft(vals).into_iter().enumerate() {
        let d = if t < q - q / 4 { t as i64 } else { t as i64 - q as i64 };
        padded[d.rem_euclid(m as i64) as usize] += g * scale;
    }
    let sq = (m as f64).sqrt();
    dft(&padded).into_iter().map(|v| v * sq).collect()
}

/// Block-pilot estimate from a demodulated multiplexing-domain frame.
pub fn estimate_block_frequency(rx: &DomainSymbols, meta: &PilotMeta, cfg: &ValidatedConfig) -> Result<PathEstimate> {
    meta.expect(PilotKind::BlockFrequency)?;
    let obs = pilot_observation(rx, meta, cfg)?;
    let m = meta.m;
    let sym = meta.pilots.first().map_or(0, |p| p.0 / m);
    let mut known = vec![ZERO; m];
    for &(i, p) in &meta.pilots {
        known[i - sym * m] = p;
    }
    estimate_frequency_ls(&obs[sym * m..(sym + 1) * m], &known, meta.scheme.spacing, meta.scheme.interpolation)
}

fn detection_threshold(threshold_sigmas: f64, noise_var: f64, pilot: f64) -> f64 {
    // per-component standard deviation, so P(false alarm) = exp(-t^2 / 2)
    (threshold_sigmas * (noise_var / 2.0).sqrt()).max(NOISELESS_FLOOR * pilot)
}

/// Embedded-pilot estimate on the OTFS delay-Doppler grid.
///
/// `noise_var` is the per-bin noise variance (equal to the per-sample time
/// variance since every transform is unitary).
pub fn estimate_dd_embedded(
    rx: &DomainSymbols,
    meta: &PilotMeta,
    threshold_sigmas: f64,
    noise_var: f64,
) -> Result<PathEstimate> {
    meta.expect(PilotKind::EmbeddedDD)?;
    if rx.domain != Domain::DelayDoppler {
        return Err(Error::DomainMismatch {
            expected: Domain::DelayDoppler.to_string(),
            got: rx.domain.to_string(),
        });
    }
    let (m, n) = (meta.m, meta.n);
    let (pidx, pilot) = meta.pilots[0];
    let (lp, kp) = ((pidx / n) as i64, (pidx % n) as i64);
    let cp = match meta.prefix {
        PrefixScheme::ReducedCP(len) => len as f64,
        other => {
            return Err(Error::UnsupportedCombo(format!(
                "delay-Doppler estimation assumes a reduced CP, got {other:?}"
            )))
        }
    };
    let thr = detection_threshold(threshold_sigmas, noise_var, pilot.norm());
    let mn = (m * n) as f64;
    let mut paths = Vec::new();
    for &i in &meta.window {
        let y = rx.data[i];
        if y.norm() <= thr {
            continue;
        }
        let (l_rx, k_rx) = ((i / n) as i64, (i % n) as i64);
        let delay = l_rx - lp;
        // Doppler offset folded into [-N/2, N/2)
        let mut kappa = (k_rx - kp).rem_euclid(n as i64);
        if kappa >= (n as i64 + 1) / 2 {
            kappa -= n as i64;
        }
        let phase = cis_turns(kappa as f64 * (l_rx as f64 + cp) / mn);
        paths.push(EstimatedPath {
            gain: y / (pilot * phase),
            delay,
            doppler: kappa as f64,
        });
    }
    Ok(PathEstimate {
        domain: Domain::DelayDoppler,
        threshold: thr,
        form: EstimateForm::Paths { paths },
    })
}

/// `(l, alpha)` pairs inside the guard that land on affine offset `loc`.
fn affine_candidates(scheme: &PilotScheme, len: usize, c1: f64, loc: i64) -> Vec<(i64, i64)> {
    let step = 2.0 * len as f64 * c1;
    let mut out = Vec::new();
    let kg = scheme.doppler_guard as i64;
    for l in -(scheme.delay_guard_neg as i64)..=scheme.delay_guard as i64 {
        let shift = step * l as f64;
        if (shift - shift.round()).abs() > 1e-9 {
            continue;
        }
        let alpha = shift.round() as i64 - loc;
        if alpha.abs() <= kg {
            out.push((l, alpha));
        }
    }
    out
}

/// Embedded-pilot estimate on the affine grid of a single-chirp AFDM frame.
pub fn estimate_affine(
    rx: &DomainSymbols,
    meta: &PilotMeta,
    threshold_sigmas: f64,
    noise_var: f64,
) -> Result<PathEstimate> {
    meta.expect(PilotKind::EmbeddedAffine)?;
    if rx.domain != meta.domain {
        return Err(Error::DomainMismatch {
            expected: meta.domain.to_string(),
            got: rx.domain.to_string(),
        });
    }
    let len = meta.m;
    let lf = len as f64;
    let (c1, c2) = (meta.c1, meta.c2);
    let cp = meta.prefix.len() as f64;
    let (qp, pilot) = meta.pilots[0];
    let thr = detection_threshold(threshold_sigmas, noise_var, pilot.norm());
    let mut paths = Vec::new();
    for &p in &meta.window {
        let y = rx.data[p];
        if y.norm() <= thr {
            continue;
        }
        let loc = qp as i64 - p as i64;
        let cands = affine_candidates(&meta.scheme, len, c1, loc);
        let (l, alpha) = match cands.as_slice() {
            [one] => *one,
            [] => continue,
            _ => {
                return Err(Error::AmbiguousTap {
                    offset: loc,
                    candidates: cands.len(),
                })
            }
        };
        let (q, pf, l_f, a_f) = (qp as f64, p as f64, l as f64, alpha as f64);
        let turns = a_f * cp / lf + c2 * (q * q - pf * pf) + c1 * l_f * l_f - q * l_f / lf;
        paths.push(EstimatedPath {
            gain: y / (pilot * cis_turns(turns)),
            delay: l,
            doppler: a_f,
        });
    }
    Ok(PathEstimate {
        domain: meta.domain,
        threshold: thr,
        form: EstimateForm::Paths { paths },
    })
}

// ---------------------------------------------------------------------------
// Synthesis and NMSE
// ---------------------------------------------------------------------------

/// Path-list estimate as a channel on the frame of `cfg`. Negative delays
/// wrap around the frame, matching how the channel treats precursor taps.
pub fn estimate_to_channel(paths: &[EstimatedPath], cfg: &ValidatedConfig) -> Result<LtvChannel> {
    let len = cfg.frame_len() as i64;
    let mapped = paths
        .iter()
        .map(|p| {
            if p.delay.abs() >= len {
                return Err(Error::BadChannel(format!("estimated delay {} outside frame", p.delay)));
            }
            Ok(Path::new(p.gain, p.delay.rem_euclid(len) as f64, p.doppler))
        })
        .collect::<Result<Vec<_>>>()?;
    LtvChannel::new(mapped, cfg)
}

/// Rows `range` of the payload time operator implied by an estimate.
pub fn estimate_rows(est: &PathEstimate, cfg: &ValidatedConfig, range: std::ops::Range<usize>) -> Result<SparseRows> {
    match &est.form {
        EstimateForm::Paths { paths } => frame_operator_rows(&estimate_to_channel(paths, cfg)?, cfg, range),
        EstimateForm::Bins { response } => {
            let m = cfg.m();
            if response.len() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    got: response.len(),
                });
            }
            // per-symbol circulant with first column idft(H) / sqrt(M)
            let col = circulant_column(response);
            let rows = range
                .map(|i| {
                    let (b, r) = (i / m, i % m);
                    (0..m).map(|c| (b * m + c, col[(r + m - c) % m])).collect()
                })
                .collect();
            Ok(SparseRows::from_unsorted(cfg.grid_len(), rows))
        }
    }
}

/// Dense effective channel of an estimate in domain `d`.
pub fn synthesize(est: &PathEstimate, cfg: &ValidatedConfig, d: Domain) -> Result<CMatrix> {
    let n = cfg.grid_len();
    if n > channel::ORACLE_LIMIT {
        return Err(Error::TooLarge {
            dim: n,
            limit: channel::ORACLE_LIMIT,
        });
    }
    channel::effective_from_operator(&estimate_rows(est, cfg, 0..n)?, cfg, d)
}

fn to_db(err: f64, reference: f64) -> f64 {
    if err == 0.0 {
        return NMSE_FLOOR_DB;
    }
    if reference == 0.0 {
        return f64::INFINITY;
    }
    (10.0 * (err / reference).log10()).max(NMSE_FLOOR_DB)
}

/// `10 log10(||H_d - H^_d||_F^2 / ||H_d||_F^2)`, floored at -200 dB.
///
/// Every domain transform is unitary, so the Frobenius distance is the same
/// in every domain; it is evaluated on the sparse time-domain operators in
/// row chunks, which keeps frame-scale grids cheap. `d` is still checked
/// for being defined on `cfg`.
pub fn nmse(est: &PathEstimate, truth: &LtvChannel, cfg: &ValidatedConfig, d: Domain) -> Result<f64> {
    to_domain(&vec![ZERO; cfg.grid_len()], d, cfg)?;
    let n = cfg.grid_len();
    let map = PrefixMap::new(cfg.prefix(), cfg)?;
    let src = RowSource::new(truth);
    let circulant = match &est.form {
        EstimateForm::Bins { response } if response.len() == cfg.m() => Some(circulant_column(response)),
        _ => None,
    };
    let (mut err, mut reference) = (0.0, 0.0);
    let mut start = 0;
    while start < n {
        let range = start..(start + CHUNK).min(n);
        let g = channel::payload_rows(&map, range.clone(), |r, w, out| src.row(r, w, out));
        err += match &circulant {
            Some(col) => circulant_diff_sq(&g, range.start, col),
            None => g.diff_frobenius_sq(&estimate_rows(est, cfg, range.clone())?),
        };
        reference += g.frobenius_sq();
        start = range.end;
    }
    Ok(to_db(err, reference))
}

/// First column of the per-symbol circulant of a frequency response.
fn circulant_column(response: &[Complex64]) -> Vec<Complex64> {
    let s = 1.0 / (response.len() as f64).sqrt();
    idft(response).into_iter().map(|v| v * s).collect()
}

/// `||G - C||_F^2` over the rows of `g` starting at grid row `first`, where
/// `C` is block-diagonal circulant with first column `col`. Walks each dense
/// circulant row once instead of materializing it.
fn circulant_diff_sq(g: &SparseRows, first: usize, col: &[Complex64]) -> f64 {
    let m = col.len();
    let mut covered = vec![false; m];
    let mut err = 0.0;
    for (k, row) in g.rows.iter().enumerate() {
        let (b, r) = ((first + k) / m, (first + k) % m);
        for &(j, v) in row {
            if j / m == b {
                let c = j % m;
                err += (v - col[(r + m - c) % m]).norm_sqr();
                covered[c] = true;
            } else {
                err += v.norm_sqr();
            }
        }
        for (c, hit) in covered.iter_mut().enumerate() {
            if !std::mem::take(hit) {
                err += col[(r + m - c) % m].norm_sqr();
            }
        }
    }
    err
}

/// [`nmse`] computed on dense matrices in domain `d` (oracle scale only).
pub fn nmse_dense(est: &PathEstimate, truth: &LtvChannel, cfg: &ValidatedConfig, d: Domain) -> Result<f64> {
    let h = channel::effective_channel(truth, cfg, d)?;
    let hh = synthesize(est, cfg, d)?;
    Ok(to_db(crate::linalg::frobenius_sq(&(&h - &hh)), crate::linalg::frobenius_sq(&h)))
}

/// NMSE between two dense matrices, same floor.
pub fn nmse_matrix(truth: &CMatrix, est: &CMatrix) -> f64 {
    to_db(crate::linalg::frobenius_sq(&(truth - est)), crate::linalg::frobenius_sq(truth))
}

/// Frequency-domain estimate moved to another domain as a dense matrix:
/// `U diag(H) U^H` per symbol.
pub fn bins_effective(response: &[Complex64], cfg: &ValidatedConfig, d: Domain) -> Result<CMatrix> {
    let n = cfg.grid_len();
    if n > channel::ORACLE_LIMIT {
        return Err(Error::TooLarge {
            dim: n,
            limit: channel::ORACLE_LIMIT,
        });
    }
    let m = cfg.m();
    let mut diag = CMatrix::zeros(n, n);
    for i in 0..n {
        diag[(i, i)] = response[i % m];
    }
    if d == Domain::Frequency {
        return Ok(diag);
    }
    let time = conjugate_by(&diag, |v| domain_plan(Domain::Frequency, cfg).synthesize(v));
    Ok(conjugate_by(&time, |v| to_domain(v, d, cfg).expect("domain checked by caller")))
}

#[cfg(test)]
mod tests;
