//! Prefix insertion and removal.
//!
//! Both directions are expressed as sparse maps so that the channel module can
//! compose them with the path model without re-deriving the geometry.

use num_complex::Complex64;

use crate::dsp::cis_turns;
use crate::error::{Error, Result};
use crate::frame::{PrefixScheme, ValidatedConfig};

/// Where each transmitted sample comes from and how each payload sample is
/// recovered.
#[derive(Debug, Clone)]
pub struct PrefixMap {
    pub scheme: PrefixScheme,
    pub payload_len: usize,
    pub frame_len: usize,
    /// `insert[t] = Some((payload index, weight))`, `None` for zero padding.
    pub insert: Vec<Option<(usize, Complex64)>>,
    /// `extract[i]` lists `(frame index, weight)` summed into payload sample `i`.
    pub extract: Vec<Vec<(usize, Complex64)>>,
}

fn check_scheme(scheme: PrefixScheme, cfg: &ValidatedConfig) -> Result<()> {
    if scheme.len() >= cfg.m() {
        return Err(Error::SchemeMismatch(format!(
            "prefix length {} must be below M = {}",
            scheme.len(),
            cfg.m()
        )));
    }
    if matches!(scheme, PrefixScheme::ChirpPeriodic(_)) && !cfg.waveform().is_chirp() {
        return Err(Error::SchemeMismatch(format!(
            "chirp-periodic prefix is undefined for {}",
            cfg.waveform()
        )));
    }
    Ok(())
}

impl PrefixMap {
    pub fn new(scheme: PrefixScheme, cfg: &ValidatedConfig) -> Result<Self> {
        check_scheme(scheme, cfg)?;
        let (m, n) = (cfg.m(), cfg.n());
        let payload_len = m * n;
        let one = Complex64::new(1.0, 0.0);
        let len = scheme.len();
        let mut insert = Vec::new();
        let mut extract = vec![Vec::new(); payload_len];
        match scheme {
            PrefixScheme::ReducedCP(_) => {
                for j in 0..len {
                    insert.push(Some((payload_len - len + j, one)));
                }
                for i in 0..payload_len {
                    insert.push(Some((i, one)));
                    extract[i].push((len + i, one));
                }
            }
            PrefixScheme::FullCP(_) | PrefixScheme::ChirpPeriodic(_) => {
                let c1 = if matches!(scheme, PrefixScheme::ChirpPeriodic(_)) {
                    cfg.c1()
                } else {
                    0.0
                };
                let mf = m as f64;
                for b in 0..n {
                    let base = b * m;
                    let fbase = b * (m + len);
                    for j in 0..len {
                        // x[-len + j] = x[M - len + j] exp(-j2pi c1 (M^2 + 2M(j - len)))
                        let turns = -c1 * (mf * mf + 2.0 * mf * (j as f64 - len as f64));
                        insert.push(Some((base + m - len + j, cis_turns(turns))));
                    }
                    for i in 0..m {
                        insert.push(Some((base + i, one)));
                        extract[base + i].push((fbase + len + i, one));
                    }
                }
            }
            PrefixScheme::ZeroPad(_) => {
                for b in 0..n {
                    let base = b * m;
                    let fbase = b * (m + len);
                    for i in 0..m {
                        insert.push(Some((base + i, one)));
                        extract[base + i].push((fbase + i, one));
                    }
                    // overlap-add of the tail turns linear convolution into circular
                    for j in 0..len {
                        insert.push(None);
                        extract[base + j].push((fbase + m + j, one));
                    }
                }
            }
        }
        let frame_len = insert.len();
        Ok(Self {
            scheme,
            payload_len,
            frame_len,
            insert,
            extract,
        })
    }

    pub fn add(&self, payload: &[Complex64]) -> Result<Vec<Complex64>> {
        if payload.len() != self.payload_len {
            return Err(Error::LengthMismatch {
                expected: self.payload_len,
                got: payload.len(),
            });
        }
        Ok(self
            .insert
            .iter()
            .map(|s| match s {
                Some((i, w)) => payload[*i] * w,
                None => Complex64::new(0.0, 0.0),
            })
            .collect())
    }

    pub fn remove(&self, frame: &[Complex64]) -> Result<Vec<Complex64>> {
        if frame.len() != self.frame_len {
            return Err(Error::LengthMismatch {
                expected: self.frame_len,
                got: frame.len(),
            });
        }
        Ok(self
            .extract
            .iter()
            .map(|taps| taps.iter().map(|(t, w)| frame[*t] * w).sum())
            .collect())
    }
}

/// Inserts `scheme` prefixes into a prefix-free payload of `M * N` samples.
pub fn add_prefix(
    payload: &[Complex64],
    scheme: PrefixScheme,
    cfg: &ValidatedConfig,
) -> Result<Vec<Complex64>> {
    PrefixMap::new(scheme, cfg)?.add(payload)
}

/// Strips `scheme` prefixes (overlap-adding zero-pad tails).
pub fn remove_prefix(
    frame: &[Complex64],
    scheme: PrefixScheme,
    cfg: &ValidatedConfig,
) -> Result<Vec<Complex64>> {
    PrefixMap::new(scheme, cfg)?.remove(frame)
}
