//! Result records and their tabular export.

use std::path::Path as FsPath;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::{hex, StudyKind};
use crate::equalization::FlopReport;
use crate::error::{Error, Result};
use crate::frame::Waveform;

/// JSON has no infinities, so SNR values are written as numbers or "inf".
mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad SNR {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub ber: Option<f64>,
    pub bit_errors: Option<u64>,
    /// Bits counted; `trials * bits per frame` exactly.
    pub bits: u64,
    pub nmse_db: Option<f64>,
    pub trials: usize,
    /// Standard error of `ber` (BER sweeps) or of `nmse_db` in dB (NMSE sweeps),
    /// from the spread of per-trial values.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResult {
    pub label: String,
    pub waveform: Waveform,
    pub grid_len: usize,
    pub rows: Vec<SnrRow>,
    pub flops: FlopReport,
    /// Least-squares slope of `log10(BER)` per dB over the top 10 dB.
    pub ber_slope: Option<f64>,
    /// `NMSE(40 dB) - NMSE(20 dB)` for birth-death studies.
    pub floor_delta_db: Option<f64>,
}

impl SystemResult {
    pub fn row_at(&self, snr_db: f64) -> Option<&SnrRow> {
        self.rows.iter().find(|r| r.snr_db == snr_db)
    }

    pub fn nmse_at(&self, snr_db: f64) -> Option<f64> {
        self.row_at(snr_db).and_then(|r| r.nmse_db)
    }
}

/// Run metadata that legitimately differs between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub wall_clock_s: f64,
    pub workers: usize,
}

impl RunInfo {
    pub fn now(wall_clock_s: f64, workers: usize) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self {
            timestamp,
            wall_clock_s,
            workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: String,
    pub scenario_hash: String,
    pub kind: StudyKind,
    pub tool_version: String,
    pub systems: Vec<SystemResult>,
    pub run_info: RunInfo,
}

pub const CSV_COLUMNS: [&str; 9] = [
    "system",
    "snr_db",
    "ber",
    "nmse_db",
    "flops",
    "reduction_db",
    "trials",
    "stderr",
    "bits",
];

impl ExperimentResult {
    pub fn system(&self, label: &str) -> Option<&SystemResult> {
        self.systems.iter().find(|s| s.label == label)
    }

    /// JSON of everything except [`RunInfo`]; identical for identical runs.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("result serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("run_info");
        }
        v.to_string()
    }

    pub fn digest(&self) -> String {
        hex(&Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Scenario(format!("result record: {e}")))
    }

    pub fn write(&self, path: impl AsRef<FsPath>) -> Result<()> {
        write_file(path.as_ref(), &self.to_json())
    }

    pub fn read(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_json(&text)
    }

    /// One line per (system, SNR) with the columns of [`CSV_COLUMNS`].
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Scenario(format!("csv: {e}"));
        w.write_record(CSV_COLUMNS).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for sys in &self.systems {
            for r in &sys.rows {
                w.write_record([
                    sys.label.clone(),
                    r.snr_db.to_string(),
                    opt(r.ber),
                    opt(r.nmse_db),
                    sys.flops.flops.to_string(),
                    sys.flops.reduction_db.to_string(),
                    r.trials.to_string(),
                    r.stderr.to_string(),
                    r.bits.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Scenario(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Fixed-width summary for terminals.
    pub fn summary_table(&self) -> String {
        let mut s = format!(
            "{:<14} {:>8} {:>12} {:>10} {:>8} {:>12}\n",
            "system", "snr_db", "ber", "nmse_db", "trials", "stderr"
        );
        for sys in &self.systems {
            for r in &sys.rows {
                let ber = r.ber.map_or("-".to_string(), |v| format!("{v:.4e}"));
                let nmse = r.nmse_db.map_or("-".to_string(), |v| format!("{v:.2}"));
                s.push_str(&format!(
                    "{:<14} {:>8} {:>12} {:>10} {:>8} {:>12.3e}\n",
                    sys.label, r.snr_db, ber, nmse, r.trials, r.stderr
                ));
            }
            s.push_str(&format!(
                "{:<14} flops {:.3e} ({:?}, reduction {:.1} dB)",
                sys.label, sys.flops.flops, sys.flops.method, sys.flops.reduction_db
            ));
            if let Some(k) = sys.ber_slope {
                s.push_str(&format!(", BER slope {k:.3} dec/dB"));
            }
            if let Some(d) = sys.floor_delta_db {
                s.push_str(&format!(", NMSE(40)-NMSE(20) {d:.2} dB"));
            }
            s.push('\n');
        }
        s
    }
}

fn io_err(path: &FsPath, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub(crate) fn write_file(path: &FsPath, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Least-squares slope of `log10(BER)` against SNR over the points within
/// `span_db` of the highest finite SNR. Points with zero BER carry no slope
/// information and are skipped; fewer than two usable points give `None`.
pub fn ber_slope(rows: &[SnrRow], span_db: f64) -> Option<f64> {
    let top = rows.iter().map(|r| r.snr_db).filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.snr_db.is_finite() && r.snr_db >= top - span_db)
        .filter_map(|r| r.ber.filter(|&b| b > 0.0).map(|b| (r.snr_db, b.log10())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

/// Uncoded Gray QPSK over AWGN at symbol SNR `snr_db`:
/// `Q(sqrt(2 Eb/N0))` with `Eb/N0 = SNR / 2`.
pub fn awgn_qpsk_ber(snr_db: f64) -> f64 {
    let ebn0 = 10f64.powf(snr_db / 10.0) / 2.0;
    0.5 * libm::erfc(ebn0.sqrt())
}
