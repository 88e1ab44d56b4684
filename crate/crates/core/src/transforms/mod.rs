//! Unified DFT pre/post-processing kernel and cross-domain conversion.
//!
//! Every waveform is the block IDFT of OFDM wrapped by unitary pre-spread,
//! permutation and post-diagonal stages (see [`KernelPlan`]). Domains are
//! related by `T_target * T_source^H`, with `T_d` the analysis operator that
//! takes the prefix-free time payload into domain `d`.

mod kernel;
mod prefix;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use kernel::{build_kernel, domain_plan, KernelPlan, Stage};
pub use prefix::{add_prefix, remove_prefix, PrefixMap};

use crate::error::{Error, Result};
use crate::frame::{Domain, ValidatedConfig, Waveform};

/// Complex symbols tagged with the domain they live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSymbols {
    pub data: Vec<Complex64>,
    pub domain: Domain,
}

impl DomainSymbols {
    pub fn new(data: Vec<Complex64>, domain: Domain) -> Self {
        Self { data, domain }
    }

    pub fn zeros(len: usize, domain: Domain) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); len], domain)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn energy(&self) -> f64 {
        crate::dsp::energy(&self.data)
    }

    fn expect_domain(&self, d: Domain) -> Result<()> {
        if self.domain != d {
            return Err(Error::DomainMismatch {
                expected: d.to_string(),
                got: self.domain.to_string(),
            });
        }
        Ok(())
    }
}

fn accepts_domain(cfg: &ValidatedConfig, d: Domain) -> bool {
    let mux = cfg.waveform().multiplexing_domain();
    // OCDM is AFDM at the Fresnel slope, so both tags describe the same grid.
    d == mux || (cfg.waveform() == Waveform::Ocdm && d == Domain::Affine)
}

/// Maps symbols in the waveform's multiplexing domain to a prefixed time frame.
pub fn modulate(sym: &DomainSymbols, cfg: &ValidatedConfig) -> Result<DomainSymbols> {
    if !accepts_domain(cfg, sym.domain) {
        return Err(Error::DomainMismatch {
            expected: cfg.waveform().multiplexing_domain().to_string(),
            got: sym.domain.to_string(),
        });
    }
    if sym.len() != cfg.grid_len() {
        return Err(Error::LengthMismatch {
            expected: cfg.grid_len(),
            got: sym.len(),
        });
    }
    let payload = build_kernel(cfg).synthesize(&sym.data);
    let frame = add_prefix(&payload, cfg.prefix(), cfg)?;
    Ok(DomainSymbols::new(frame, Domain::Time))
}

/// Removes prefixes and applies the adjoint kernel; inverse of [`modulate`].
pub fn demodulate(t: &DomainSymbols, cfg: &ValidatedConfig) -> Result<DomainSymbols> {
    t.expect_domain(Domain::Time)?;
    if t.len() != cfg.frame_len() {
        return Err(Error::LengthMismatch {
            expected: cfg.frame_len(),
            got: t.len(),
        });
    }
    let payload = remove_prefix(&t.data, cfg.prefix(), cfg)?;
    let data = build_kernel(cfg).analyze(&payload);
    Ok(DomainSymbols::new(
        data,
        cfg.waveform().multiplexing_domain(),
    ))
}

fn check_domain_defined(d: Domain, cfg: &ValidatedConfig) -> Result<()> {
    if d == Domain::Affine && !cfg.has_affine() {
        return Err(Error::DomainMismatch {
            expected: "AFDM or OCDM configuration for the affine domain".into(),
            got: cfg.waveform().to_string(),
        });
    }
    Ok(())
}

/// Analysis operator `T_d`: prefix-free time payload to domain `d`.
pub fn to_domain(time: &[Complex64], d: Domain, cfg: &ValidatedConfig) -> Result<Vec<Complex64>> {
    check_domain_defined(d, cfg)?;
    if time.len() != cfg.grid_len() {
        return Err(Error::LengthMismatch {
            expected: cfg.grid_len(),
            got: time.len(),
        });
    }
    Ok(domain_plan(d, cfg).analyze(time))
}

/// Synthesis operator `T_d^H`: domain `d` to prefix-free time payload.
pub fn from_domain(sym: &[Complex64], d: Domain, cfg: &ValidatedConfig) -> Result<Vec<Complex64>> {
    check_domain_defined(d, cfg)?;
    if sym.len() != cfg.grid_len() {
        return Err(Error::LengthMismatch {
            expected: cfg.grid_len(),
            got: sym.len(),
        });
    }
    Ok(domain_plan(d, cfg).synthesize(sym))
}

/// Re-expresses symbols in another domain: `T_target * T_source^H`.
pub fn convert_domain(
    sym: &DomainSymbols,
    target: Domain,
    cfg: &ValidatedConfig,
) -> Result<DomainSymbols> {
    if sym.domain == target {
        check_domain_defined(target, cfg)?;
        return Ok(sym.clone());
    }
    let time = from_domain(&sym.data, sym.domain, cfg)?;
    let data = to_domain(&time, target, cfg)?;
    Ok(DomainSymbols::new(data, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::max_abs_diff;
    use crate::frame::{FrameConfig, PrefixScheme};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn ofdm_plan_is_plain_idft() {
        let cfg = FrameConfig::new(Waveform::Ofdm, 8, 2, 1e3, PrefixScheme::FullCP(2))
            .validate()
            .unwrap();
        let plan = build_kernel(&cfg);
        assert!(plan.pre_spread.is_empty());
        assert!(plan.permutation.is_none());
        assert!(plan.post.is_empty());
        assert_eq!(plan.core, Stage::dft(8, true));
    }

    #[test]
    fn ofdm_impulse_is_flat() {
        let cfg = FrameConfig::new(Waveform::Ofdm, 16, 1, 1e3, PrefixScheme::FullCP(0))
            .validate()
            .unwrap();
        let mut s = DomainSymbols::zeros(16, Domain::Frequency);
        s.data[0] = c(1.0);
        let t = modulate(&s, &cfg).unwrap();
        for v in &t.data {
            assert!((v - c(0.25)).norm() < 1e-15);
        }
    }

    #[test]
    fn modulate_rejects_wrong_domain() {
        let cfg = FrameConfig::new(Waveform::Otfs, 4, 2, 1e3, PrefixScheme::ReducedCP(1))
            .validate()
            .unwrap();
        let s = DomainSymbols::zeros(8, Domain::Frequency);
        assert!(matches!(modulate(&s, &cfg), Err(Error::DomainMismatch { .. })));
    }

    #[test]
    fn demodulate_checks_length() {
        let cfg = FrameConfig::new(Waveform::Otfs, 4, 2, 1e3, PrefixScheme::ReducedCP(1))
            .validate()
            .unwrap();
        let t = DomainSymbols::zeros(8, Domain::Time);
        assert!(matches!(demodulate(&t, &cfg), Err(Error::LengthMismatch { expected: 9, got: 8 })));
        let z = demodulate(&DomainSymbols::zeros(9, Domain::Time), &cfg).unwrap();
        assert!(z.data.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn time_to_frequency_unitary_convention() {
        let cfg = FrameConfig::new(Waveform::Ofdm, 4, 1, 1e3, PrefixScheme::FullCP(0))
            .validate()
            .unwrap();
        let t = DomainSymbols::new(vec![c(1.0), c(0.0), c(0.0), c(0.0)], Domain::Time);
        let f = convert_domain(&t, Domain::Frequency, &cfg).unwrap();
        assert!(max_abs_diff(&f.data, &[c(0.5); 4]) < 1e-15);
    }

    #[test]
    fn affine_needs_chirp_config() {
        let cfg = FrameConfig::new(Waveform::Ofdm, 4, 1, 1e3, PrefixScheme::FullCP(0))
            .validate()
            .unwrap();
        let t = DomainSymbols::zeros(4, Domain::Time);
        assert!(matches!(
            convert_domain(&t, Domain::Affine, &cfg),
            Err(Error::DomainMismatch { .. })
        ));
        // the Fresnel domain has a fixed slope and is always available
        assert!(convert_domain(&t, Domain::Fresnel, &cfg).is_ok());
    }

    #[test]
    fn plans_print_stage_lists() {
        let cfg = FrameConfig::new(Waveform::Otfs, 4, 2, 1e3, PrefixScheme::ReducedCP(1))
            .validate()
            .unwrap();
        let s = build_kernel(&cfg).to_string();
        assert!(s.contains("P[4x2]"), "{s}");
        assert!(s.contains("IDFT2"), "{s}");
    }
}
