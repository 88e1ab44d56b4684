//! Waveform-processing lab built around one DFT kernel.
//!
//! OFDM, DFT-s-OFDM, OTFS, AFDM and OCDM are all generated by the same block
//! IDFT with different unitary pre/post stages ([`transforms`]). Channels are
//! simulated as linear time-variant path sums with fractional delay and
//! Doppler ([`channel`]); estimation and equalization can run in different
//! domains ([`estimation`], [`equalization`]); [`analyzer`] quantifies how a
//! channel looks in each domain and [`experiments`] drives Monte-Carlo sweeps.

pub mod analyzer;
pub mod channel;
pub mod dsp;
pub mod equalization;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod frame;
pub mod linalg;
pub mod modulation;
pub mod transforms;

pub use error::{Error, Result};
pub use frame::{default_c1, doppler_bin_width, validate_config, Domain, FrameConfig, PrefixScheme, ValidatedConfig, Waveform};
pub use transforms::{convert_domain, demodulate, modulate, DomainSymbols};
