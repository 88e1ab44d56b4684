//! Scenario files: versioned TOML describing one study.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{DopplerSpectrum, ProfileSpec};
use crate::equalization::EqMethod;
use crate::error::{Error, Result};
use crate::estimation::{PilotKind, PilotScheme};
use crate::frame::{Domain, FrameConfig, ValidatedConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Ber,
    Nmse,
    BirthDeath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    /// Gray-mapped QPSK.
    #[default]
    Qpsk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthDeathSpec {
    pub segments: usize,
    pub churn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub profile: ProfileSpec,
    #[serde(default)]
    pub doppler_max_hz: f64,
    /// Keep fractional delays and Dopplers; `false` rounds them to the grid.
    #[serde(default = "yes")]
    pub fractional: bool,
    #[serde(default)]
    pub spectrum: DopplerSpectrum,
    #[serde(default)]
    pub birth_death: Option<BirthDeathSpec>,
}

fn yes() -> bool {
    true
}

fn three() -> f64 {
    3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualizerSpec {
    pub domain: Domain,
    pub method: EqMethod,
    /// Half-bandwidth for `MmseBanded`; also used for its flop report.
    #[serde(default)]
    pub band: Option<usize>,
}

/// One transceiver chain evaluated on the scenario's channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub label: String,
    pub frame: FrameConfig,
    /// Absent means perfect channel knowledge.
    #[serde(default)]
    pub pilot: Option<PilotScheme>,
    #[serde(default)]
    pub ce_domain: Option<Domain>,
    pub equalizer: EqualizerSpec,
    #[serde(default = "three")]
    pub threshold_sigmas: f64,
}

impl SystemSpec {
    pub fn config(&self) -> Result<ValidatedConfig> {
        self.frame.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    pub kind: StudyKind,
    #[serde(default)]
    pub modulation: Modulation,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub channel: ChannelSpec,
    pub systems: Vec<SystemSpec>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

/// The domain an estimator for `kind` works in.
pub fn pilot_domain(kind: PilotKind) -> Domain {
    match kind {
        PilotKind::BlockFrequency => Domain::Frequency,
        PilotKind::EmbeddedDD => Domain::DelayDoppler,
        PilotKind::EmbeddedAffine => Domain::Affine,
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Scenario(m) => bad(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| bad(e.to_string()))
    }

    /// Structural checks that need no simulation.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(bad(format!("schema {} (this build reads {SCHEMA_VERSION})", self.schema)));
        }
        if self.trials == 0 {
            return Err(bad("trials must be positive"));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|v| v.is_nan()) {
            return Err(bad("snr_db must be a non-empty list of numbers"));
        }
        if self.systems.is_empty() {
            return Err(bad("at least one system is required"));
        }
        for sys in &self.systems {
            let cfg = sys.config()?;
            match (&sys.pilot, sys.ce_domain) {
                (Some(p), Some(d)) if d != pilot_domain(p.kind) => {
                    return Err(bad(format!(
                        "{}: {:?} pilots are estimated in {}, not {d}",
                        sys.label,
                        p.kind,
                        pilot_domain(p.kind)
                    )));
                }
                (None, Some(_)) => return Err(bad(format!("{}: ce_domain without a pilot", sys.label))),
                _ => {}
            }
            if self.kind != StudyKind::Ber && sys.pilot.is_none() {
                return Err(bad(format!("{}: NMSE studies need a pilot", sys.label)));
            }
            if sys.equalizer.domain == Domain::Affine && !cfg.has_affine() {
                return Err(bad(format!("{}: affine equalization needs a chirp waveform", sys.label)));
            }
            if !(sys.threshold_sigmas >= 0.0) {
                return Err(bad(format!("{}: threshold_sigmas must be non-negative", sys.label)));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 over the canonical JSON encoding of every field.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
