//! Frame configuration and numerology.
//!
//! A [`FrameConfig`] is the caller-facing description of a waveform frame; it
//! becomes a [`ValidatedConfig`] once all invariants are checked. Everything
//! downstream (kernels, channels, estimators) takes the validated form.
//!
//! Grid layout conventions used across the crate:
//!
//! * time payload and frequency grids: `m + M * n` (sample/subcarrier `m` of
//!   symbol `n`);
//! * affine/Fresnel grids: `p + M * n` (chirp index `p` of chirp symbol `n`);
//! * delay-Doppler grid: `k + N * l` (Doppler bin `k` of delay bin `l`), i.e.
//!   delay-major, so that the OTFS row-column interleaver is a real stage.
//!
//! Doppler is always expressed in delay-Doppler bins: a path with normalized
//! Doppler `kappa` has physical shift `kappa * delta_f / N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Waveform {
    #[serde(rename = "OFDM")]
    Ofdm,
    #[serde(rename = "DFT_S_OFDM")]
    DftSOfdm,
    #[serde(rename = "OTFS")]
    Otfs,
    #[serde(rename = "AFDM")]
    Afdm,
    #[serde(rename = "OCDM")]
    Ocdm,
}

impl Waveform {
    pub fn is_chirp(self) -> bool {
        matches!(self, Waveform::Afdm | Waveform::Ocdm)
    }

    /// Domain in which the waveform carries its data symbols.
    pub fn multiplexing_domain(self) -> Domain {
        match self {
            Waveform::Ofdm | Waveform::DftSOfdm => Domain::Frequency,
            Waveform::Otfs => Domain::DelayDoppler,
            Waveform::Afdm => Domain::Affine,
            Waveform::Ocdm => Domain::Fresnel,
        }
    }
}

impl std::fmt::Display for Waveform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Waveform::Ofdm => "OFDM",
            Waveform::DftSOfdm => "DFT-s-OFDM",
            Waveform::Otfs => "OTFS",
            Waveform::Afdm => "AFDM",
            Waveform::Ocdm => "OCDM",
        };
        f.write_str(s)
    }
}

/// Guard scheme; `len` is in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "len")]
pub enum PrefixScheme {
    /// Cyclic prefix in front of every M-sample block.
    FullCP(usize),
    /// One cyclic prefix for the whole frame.
    ReducedCP(usize),
    /// Zeros appended after every M-sample block.
    ZeroPad(usize),
    /// Chirp-periodic prefix in front of every chirp symbol.
    ChirpPeriodic(usize),
}

impl PrefixScheme {
    pub fn len(self) -> usize {
        match self {
            PrefixScheme::FullCP(l)
            | PrefixScheme::ReducedCP(l)
            | PrefixScheme::ZeroPad(l)
            | PrefixScheme::ChirpPeriodic(l) => l,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    /// Whether samples outside the frame continue cyclically (as opposed to zeros).
    pub fn is_cyclic(self) -> bool {
        !matches!(self, PrefixScheme::ZeroPad(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Permutation {
    None,
    RowColumn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Time,
    Frequency,
    DelayDoppler,
    Affine,
    Fresnel,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub waveform: Waveform,
    /// Subcarriers per symbol (delay bins for OTFS, chirp length for AFDM/OCDM).
    pub m: usize,
    /// Symbols per frame (Doppler bins for OTFS).
    pub n: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    pub prefix: PrefixScheme,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub c2: f64,
    #[serde(default)]
    pub dft_s_subband: Option<usize>,
    #[serde(default)]
    pub permutation: Option<Permutation>,
}

impl FrameConfig {
    pub fn new(waveform: Waveform, m: usize, n: usize, delta_f: f64, prefix: PrefixScheme) -> Self {
        Self {
            waveform,
            m,
            n,
            delta_f,
            prefix,
            c1: 0.0,
            c2: 0.0,
            dft_s_subband: None,
            permutation: None,
        }
    }

    pub fn with_chirp(mut self, c1: f64, c2: f64) -> Self {
        self.c1 = c1;
        self.c2 = c2;
        self
    }

    pub fn with_subband(mut self, a: usize) -> Self {
        self.dft_s_subband = Some(a);
        self
    }

    pub fn validate(&self) -> Result<ValidatedConfig> {
        validate_config(self)
    }
}

/// Immutable configuration with derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedConfig {
    raw: FrameConfig,
    c1: f64,
    c2: f64,
    subband: usize,
    permutation: Permutation,
    frame_len: usize,
}

impl ValidatedConfig {
    pub fn raw(&self) -> &FrameConfig {
        &self.raw
    }
    pub fn waveform(&self) -> Waveform {
        self.raw.waveform
    }
    pub fn m(&self) -> usize {
        self.raw.m
    }
    pub fn n(&self) -> usize {
        self.raw.n
    }
    /// Number of complex symbols carried by one frame (`M * N`).
    pub fn grid_len(&self) -> usize {
        self.raw.m * self.raw.n
    }
    pub fn delta_f(&self) -> f64 {
        self.raw.delta_f
    }
    pub fn prefix(&self) -> PrefixScheme {
        self.raw.prefix
    }
    /// Effective chirp tilt (forced to the Fresnel slope for OCDM).
    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }
    /// DFT-s-OFDM spread width `a` (equals `M` for the other waveforms).
    pub fn subband(&self) -> usize {
        self.subband
    }
    pub fn permutation(&self) -> Permutation {
        self.permutation
    }
    /// Transmitted frame length in samples, prefixes included.
    pub fn frame_len(&self) -> usize {
        self.frame_len
    }
    pub fn sample_rate(&self) -> f64 {
        self.raw.m as f64 * self.raw.delta_f
    }
    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate()
    }
    /// Whether the frame is a sequence of independently prefixed M-blocks.
    pub fn per_symbol_blocks(&self) -> bool {
        !matches!(self.raw.prefix, PrefixScheme::ReducedCP(_))
    }
    /// Fresnel slope `1 / (2 M)` used by OCDM.
    pub fn fresnel_slope(&self) -> f64 {
        0.5 / self.raw.m as f64
    }
    /// Whether affine-domain conversion is defined for this configuration.
    pub fn has_affine(&self) -> bool {
        self.raw.waveform.is_chirp()
    }
}

/// Validates a configuration and derives frame length and chirp parameters.
pub fn validate_config(cfg: &FrameConfig) -> Result<ValidatedConfig> {
    let (m, n) = (cfg.m, cfg.n);
    if m == 0 || n == 0 {
        return Err(Error::BadGrid(format!("M and N must be >= 1, got M={m}, N={n}")));
    }
    if !(cfg.delta_f.is_finite() && cfg.delta_f > 0.0) {
        return Err(Error::BadGrid(format!("delta_f must be positive, got {}", cfg.delta_f)));
    }
    let len = cfg.prefix.len();
    if len >= m {
        return Err(Error::PrefixTooLong { len, m });
    }
    if matches!(cfg.prefix, PrefixScheme::ChirpPeriodic(_)) && !cfg.waveform.is_chirp() {
        return Err(Error::UnsupportedCombo(format!(
            "chirp-periodic prefix requires AFDM or OCDM, not {}",
            cfg.waveform
        )));
    }
    if !(cfg.c1.is_finite() && cfg.c2.is_finite()) {
        return Err(Error::BadChirpParams("c1 and c2 must be finite".into()));
    }
    let (c1, c2) = match cfg.waveform {
        Waveform::Afdm => {
            if cfg.c1 < 0.0 {
                return Err(Error::BadChirpParams(format!("c1 = {} is negative", cfg.c1)));
            }
            (cfg.c1, cfg.c2)
        }
        Waveform::Ocdm => {
            let s = 0.5 / m as f64;
            (s, s)
        }
        _ => (0.0, 0.0),
    };

    let subband = match (cfg.waveform, cfg.dft_s_subband) {
        (Waveform::DftSOfdm, Some(a)) => {
            if a == 0 || a > m || m % a != 0 {
                return Err(Error::UnsupportedCombo(format!(
                    "DFT-s-OFDM sub-band {a} must divide M = {m}"
                )));
            }
            a
        }
        (Waveform::DftSOfdm, None) => m,
        _ => m,
    };

    let permutation = match (cfg.waveform, cfg.permutation) {
        (Waveform::Otfs, None | Some(Permutation::RowColumn)) => Permutation::RowColumn,
        (Waveform::Otfs, Some(Permutation::None)) => {
            return Err(Error::UnsupportedCombo(
                "OTFS requires the row-column interleaver".into(),
            ))
        }
        (_, None | Some(Permutation::None)) => Permutation::None,
        (w, Some(Permutation::RowColumn)) => {
            return Err(Error::UnsupportedCombo(format!(
                "row-column interleaver is only defined for OTFS, not {w}"
            )))
        }
    };

    let frame_len = match cfg.prefix {
        PrefixScheme::ReducedCP(l) => m * n + l,
        PrefixScheme::FullCP(l) | PrefixScheme::ZeroPad(l) | PrefixScheme::ChirpPeriodic(l) => {
            n * (m + l)
        }
    };

    Ok(ValidatedConfig {
        raw: cfg.clone(),
        c1,
        c2,
        subband,
        permutation,
        frame_len,
    })
}

/// Smallest chirp tilt that keeps integer delay-Doppler paths apart in the
/// affine domain: `c1 = (2 alpha_max + 1) / (2 num_chirps)`.
pub fn default_c1(alpha_max: usize, num_chirps: usize) -> Result<f64> {
    let needed = 2 * alpha_max + 1;
    if num_chirps < needed {
        return Err(Error::TooMuchDoppler {
            alpha_max,
            num_chirps,
            needed,
        });
    }
    Ok(needed as f64 / (2.0 * num_chirps as f64))
}

/// Doppler resolution of a domain in Hz.
pub fn doppler_bin_width(cfg: &ValidatedConfig, d: Domain) -> Result<f64> {
    match d {
        Domain::Frequency | Domain::Affine | Domain::Fresnel => Ok(cfg.delta_f()),
        Domain::DelayDoppler => Ok(cfg.delta_f() / cfg.n() as f64),
        Domain::Time => Err(Error::DomainMismatch {
            expected: "Frequency, DelayDoppler or Affine".into(),
            got: d.to_string(),
        }),
    }
}

/// Ratio of frequency-domain to delay-Doppler Doppler resolution; always `N`.
pub fn doppler_resolution_ratio(cfg: &ValidatedConfig) -> usize {
    cfg.n()
}
