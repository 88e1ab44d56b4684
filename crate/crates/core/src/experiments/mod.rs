//! Scenario-driven Monte-Carlo sweeps.
//!
//! A [`Scenario`] fixes the channel model, the SNR grid, the trial count and
//! one or more transceiver chains ("systems"). Every trial draws its channel,
//! data and noise from seeds derived from the scenario seed, so a run is a
//! pure function of the scenario file regardless of how many worker threads
//! execute it.
//!
//! Seeds are split with SplitMix64: `derive_seed(base, &[stream, a, b])`
//! folds each word into the state and finalizes, so streams for different
//! `(stream, trial, snr)` tuples are decorrelated.

mod oracle;
mod results;
mod runner;
mod scenario;

pub use oracle::{oracle_suite, OracleCheck};
pub use results::{
    awgn_qpsk_ber, ber_slope, ExperimentResult, RunInfo, SnrRow, SystemResult, CSV_COLUMNS,
};
pub use runner::{
    draw_channel, run_ber_sweep, run_ber_sweep_with, run_birth_death_study, run_birth_death_study_with, run_nmse_sweep,
    run_nmse_sweep_with, run_scenario, run_scenario_with, RunOptions, WORKERS_ENV,
};
pub use scenario::{
    pilot_domain, BirthDeathSpec, ChannelSpec, EqualizerSpec, Modulation, Scenario, StudyKind, SystemSpec,
    SCHEMA_VERSION,
};

/// Independent seed streams.
pub mod stream {
    pub const CHANNEL: u64 = 1;
    pub const DATA: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const CHURN: u64 = 4;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of words.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(base), |acc, &w| splitmix(acc ^ splitmix(w)))
}
