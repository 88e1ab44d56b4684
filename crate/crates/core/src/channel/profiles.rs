//! Power-delay profiles shipped with the crate.
//!
//! Tables live in `data/*.tsv` as `delay_ns power_dB` rows; see the header of
//! each file for its source.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EVA: &str = include_str!("../../data/eva.tsv");
const TDL_URBAN: &str = include_str!("../../data/tdl_urban.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileName {
    TdlUrban,
    #[serde(rename = "EVA")]
    Eva,
}

impl std::str::FromStr for ProfileName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tdlurban" | "tdl_urban" | "tdl-urban" => Ok(ProfileName::TdlUrban),
            "eva" => Ok(ProfileName::Eva),
            other => Err(Error::UnknownProfile(other.to_string())),
        }
    }
}

/// Tap delays (seconds) and linear powers normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    pub delays_s: Vec<f64>,
    pub powers: Vec<f64>,
}

impl PowerDelayProfile {
    pub fn load(name: ProfileName) -> Self {
        let text = match name {
            ProfileName::Eva => EVA,
            ProfileName::TdlUrban => TDL_URBAN,
        };
        parse_table(text).expect("shipped profile tables are well formed")
    }

    pub fn max_delay_s(&self) -> f64 {
        self.delays_s.iter().copied().fold(0.0, f64::max)
    }
}

/// Parses `delay_ns power_dB` rows; `#` starts a comment.
pub fn parse_table(text: &str) -> Result<PowerDelayProfile> {
    let mut delays_s = Vec::new();
    let mut powers = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::BadChannel(format!("profile line {}: `{line}`", i + 1)))
        };
        let d = parse(it.next())?;
        let p = parse(it.next())?;
        if d < 0.0 {
            return Err(Error::BadChannel(format!("negative delay on line {}", i + 1)));
        }
        delays_s.push(d * 1e-9);
        powers.push(10f64.powf(p / 10.0));
    }
    if powers.is_empty() {
        return Err(Error::BadChannel("empty profile".into()));
    }
    let total: f64 = powers.iter().sum();
    for p in &mut powers {
        *p /= total;
    }
    Ok(PowerDelayProfile { delays_s, powers })
}
