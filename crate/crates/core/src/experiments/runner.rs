//! Sweep execution: trials in parallel, aggregation in trial order.

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::results::{ber_slope, ExperimentResult, RunInfo, SnrRow, SystemResult};
use super::scenario::{ChannelSpec, Scenario, StudyKind, SystemSpec};
use super::{derive_seed, stream};
use crate::channel::{
    apply_channel, effective_channel, fractional_taps, make_birth_death, make_profile_with, noise_variance,
    LtvChannel, ProfileOptions,
};
use crate::dsp::cis_turns;
use crate::equalization::{
    equalize_mmse, equalize_mmse_banded, equalize_mmse_spectral, equalize_one_tap, flop_report, required_band,
    EqMethod,
};
use crate::error::{Error, Result};
use crate::estimation::{
    build_pilot_frame, estimate_affine, estimate_block_frequency, estimate_dd_embedded, nmse, synthesize,
    EstimateForm, PathEstimate, PilotKind, PilotMeta, NMSE_FLOOR_DB,
};
use crate::frame::{Domain, PrefixScheme, ValidatedConfig, Waveform};
use crate::linalg::{CMatrix, ZERO};
use crate::modulation::{bit_errors, qpsk_map, qpsk_slice, random_bits, BITS_PER_SYMBOL};
use crate::transforms::{convert_domain, demodulate, modulate, DomainSymbols};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "WAVELAB_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; `None` reads [`WORKERS_ENV`], falling back to rayon's
    /// default.
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn workers(n: usize) -> Self {
        Self { workers: Some(n) }
    }

    fn resolve(&self) -> Result<usize> {
        if let Some(n) = self.workers {
            return Ok(n);
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Precondition(format!("{WORKERS_ENV}={v:?} is not a thread count"))),
            Err(_) => Ok(0),
        }
    }
}

/// Per-system state shared by all trials.
struct Prepared<'a> {
    spec: &'a SystemSpec,
    cfg: ValidatedConfig,
    meta: Option<PilotMeta>,
    data_indices: Vec<usize>,
    mux: Domain,
}

fn prepare(spec: &SystemSpec) -> Result<Prepared<'_>> {
    let cfg = spec.config()?;
    let mux = cfg.waveform().multiplexing_domain();
    let (meta, data_indices) = match &spec.pilot {
        Some(p) => {
            let (_, meta) = build_pilot_frame(p, &[], &cfg)?;
            let idx = meta.data_indices.clone();
            (Some(meta), idx)
        }
        None => (None, (0..cfg.grid_len()).collect()),
    };
    let eq = spec.equalizer;
    let same_grid = eq.domain == mux || (cfg.waveform() == Waveform::Ocdm && eq.domain == Domain::Affine);
    if eq.method == EqMethod::MmseSpectral && !same_grid {
        return Err(Error::Scenario(format!(
            "{}: spectral MMSE runs in the multiplexing domain ({mux})",
            spec.label
        )));
    }
    Ok(Prepared {
        spec,
        cfg,
        meta,
        data_indices,
        mux,
    })
}

/// Channel of `trial`, exactly as the sweeps draw it.
pub fn draw_channel(spec: &ChannelSpec, cfg: &ValidatedConfig, base: u64, trial: u64) -> Result<LtvChannel> {
    let opts = ProfileOptions {
        spectrum: spec.spectrum,
        integer_grid: !spec.fractional,
    };
    let ch = make_profile_with(
        &spec.profile,
        cfg,
        spec.doppler_max_hz,
        derive_seed(base, &[stream::CHANNEL, trial]),
        opts,
    )?;
    match spec.birth_death {
        Some(bd) => make_birth_death(&ch, bd.segments, bd.churn, derive_seed(base, &[stream::CHURN, trial])),
        None => Ok(ch),
    }
}

/// Channel knowledge handed to the equalizer.
enum Csi {
    Estimate(PathEstimate),
    /// Exact effective channel in the equalization domain.
    Exact(CMatrix),
}

/// Frequency response of a static channel under a per-symbol cyclic prefix,
/// if that is what the channel is.
fn static_response(ch: &LtvChannel, cfg: &ValidatedConfig) -> Option<Vec<Complex64>> {
    let cp = match cfg.prefix() {
        PrefixScheme::FullCP(cp) => cp,
        _ => return None,
    };
    if !ch.is_stationary() || ch.paths().iter().any(|p| p.doppler != 0.0) {
        return None;
    }
    let m = cfg.m();
    let mut h = vec![ZERO; m];
    for p in ch.paths() {
        for (d, w) in fractional_taps(p.delay) {
            if d < 0 || d as usize > cp {
                return None;
            }
            for (k, v) in h.iter_mut().enumerate() {
                *v += p.gain * w * cis_turns(-((k as i64 * d) as f64) / m as f64);
            }
        }
    }
    Some(h)
}

fn perfect_csi(ch: &LtvChannel, p: &Prepared) -> Result<Csi> {
    if let Some(response) = static_response(ch, &p.cfg) {
        return Ok(Csi::Estimate(PathEstimate {
            domain: Domain::Frequency,
            threshold: 0.0,
            form: EstimateForm::Bins { response },
        }));
    }
    Ok(Csi::Exact(effective_channel(ch, &p.cfg, p.spec.equalizer.domain)?))
}

fn estimate(rx: &DomainSymbols, meta: &PilotMeta, p: &Prepared, noise_var: f64) -> Result<PathEstimate> {
    let thr = p.spec.threshold_sigmas;
    match meta.scheme.kind {
        PilotKind::BlockFrequency => estimate_block_frequency(rx, meta, &p.cfg),
        PilotKind::EmbeddedDD => estimate_dd_embedded(rx, meta, thr, noise_var),
        PilotKind::EmbeddedAffine => estimate_affine(rx, meta, thr, noise_var),
    }
}

fn dense(csi: &Csi, p: &Prepared) -> Result<CMatrix> {
    match csi {
        Csi::Estimate(est) => synthesize(est, &p.cfg, p.spec.equalizer.domain),
        Csi::Exact(h) => Ok(h.clone()),
    }
}

/// Equalizes the whole grid and returns it in the multiplexing domain.
fn equalize(rx: &DomainSymbols, csi: &Csi, p: &Prepared, noise_var: f64) -> Result<Vec<Complex64>> {
    let eq = p.spec.equalizer;
    let bins = match csi {
        Csi::Estimate(PathEstimate {
            form: EstimateForm::Bins { response },
            ..
        }) => Some(response.as_slice()),
        _ => None,
    };
    if eq.method == EqMethod::MmseSpectral {
        let response = bins.ok_or_else(|| {
            Error::Scenario(format!("{}: spectral MMSE needs a per-subcarrier estimate", p.spec.label))
        })?;
        return equalize_mmse_spectral(&rx.data, response, noise_var, &p.cfg);
    }
    let y = convert_domain(rx, eq.domain, &p.cfg)?;
    let s = match (eq.method, bins) {
        (EqMethod::OneTap, Some(response)) if eq.domain == Domain::Frequency => {
            equalize_one_tap(&y.data, response, noise_var)
        }
        (EqMethod::OneTap, _) => {
            let h = dense(csi, p)?;
            let diag: Vec<Complex64> = (0..h.nrows()).map(|i| h[(i, i)]).collect();
            equalize_one_tap(&y.data, &diag, noise_var)
        }
        (EqMethod::Mmse, _) => equalize_mmse(&y.data, &dense(csi, p)?, noise_var)?,
        (EqMethod::MmseBanded, _) => {
            let h = dense(csi, p)?;
            let b = eq.band.unwrap_or_else(|| required_band(&h, 1e-6));
            equalize_mmse_banded(&y.data, &h, noise_var, b)?.symbols
        }
        (EqMethod::MmseSpectral, _) => unreachable!("handled above"),
    };
    Ok(convert_domain(&DomainSymbols::new(s, eq.domain), p.mux, &p.cfg)?.data)
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialOutcome {
    errors: u64,
    bits: u64,
    /// Linear NMSE of the estimate, when there is one.
    nmse: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Measure {
    Ber,
    Nmse,
}

fn run_trial(s: &Scenario, p: &Prepared, snr: f64, trial: u64, measure: Measure) -> Result<TrialOutcome> {
    let ch = draw_channel(&s.channel, &p.cfg, s.seed, trial)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s.seed, &[stream::DATA, trial]));
    let bits = random_bits(&mut rng, BITS_PER_SYMBOL * p.data_indices.len());
    let symbols = qpsk_map(&bits);
    let grid = match &p.spec.pilot {
        Some(scheme) => build_pilot_frame(scheme, &symbols, &p.cfg)?.0,
        None => DomainSymbols::new(symbols, p.mux),
    };
    let tx = modulate(&grid, &p.cfg)?;
    let noise_var = noise_variance(&tx.data, snr);
    let noise_seed = derive_seed(s.seed, &[stream::NOISE, snr.to_bits(), trial]);
    let rx_time = apply_channel(&tx.data, &ch, snr, noise_seed)?;
    let rx = demodulate(&DomainSymbols::new(rx_time, Domain::Time), &p.cfg)?;

    let est = match &p.meta {
        Some(meta) => Some(estimate(&rx, meta, p, noise_var)?),
        None => None,
    };
    if measure == Measure::Nmse {
        let nmse_lin = match (&est, p.spec.ce_domain) {
            (Some(e), d) => Some(10f64.powf(nmse(e, &ch, &p.cfg, d.unwrap_or(e.domain))? / 10.0)),
            (None, _) => None,
        };
        return Ok(TrialOutcome {
            errors: 0,
            bits: 0,
            nmse: nmse_lin,
        });
    }
    let csi = match est {
        Some(e) => Csi::Estimate(e),
        None => perfect_csi(&ch, p)?,
    };
    let eq = equalize(&rx, &csi, p, noise_var)?;
    let picked: Vec<Complex64> = p.data_indices.iter().map(|&i| eq[i]).collect();
    let decided = qpsk_slice(&picked);
    Ok(TrialOutcome {
        errors: bit_errors(&bits, &decided),
        bits: bits.len() as u64,
        nmse: None,
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn nmse_db(lin: f64) -> f64 {
    if lin <= 0.0 {
        NMSE_FLOOR_DB
    } else {
        (10.0 * lin.log10()).max(NMSE_FLOOR_DB)
    }
}

fn aggregate(snr: f64, out: &[TrialOutcome], measure: Measure) -> SnrRow {
    let trials = out.len();
    let root = (trials as f64).sqrt();
    let bits: u64 = out.iter().map(|o| o.bits).sum();
    let errors: u64 = out.iter().map(|o| o.errors).sum();
    let nmse_vals: Vec<f64> = out.iter().filter_map(|o| o.nmse).collect();
    let (nmse_mean, nmse_sd) = if nmse_vals.is_empty() { (f64::NAN, 0.0) } else { mean_sd(&nmse_vals) };
    let nmse_field = (!nmse_vals.is_empty()).then(|| nmse_db(nmse_mean));
    let nmse_se_db = if nmse_mean > 0.0 {
        10.0 / std::f64::consts::LN_10 * nmse_sd / root / nmse_mean
    } else {
        0.0
    };
    match measure {
        Measure::Ber => {
            let ber = if bits > 0 { errors as f64 / bits as f64 } else { 0.0 };
            let ratios: Vec<f64> = out
                .iter()
                .map(|o| if o.bits > 0 { o.errors as f64 / o.bits as f64 } else { 0.0 })
                .collect();
            let stderr = if trials > 1 {
                mean_sd(&ratios).1 / root
            } else {
                (ber * (1.0 - ber) / bits.max(1) as f64).sqrt()
            };
            SnrRow {
                snr_db: snr,
                ber: Some(ber),
                bit_errors: Some(errors),
                bits,
                nmse_db: nmse_field,
                trials,
                stderr,
            }
        }
        Measure::Nmse => SnrRow {
            snr_db: snr,
            ber: None,
            bit_errors: None,
            bits: 0,
            nmse_db: nmse_field,
            trials,
            stderr: nmse_se_db,
        },
    }
}

fn sweep(s: &Scenario, opts: &RunOptions, measure: Measure) -> Result<ExperimentResult> {
    s.validate()?;
    let start = Instant::now();
    let workers = opts.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    let mut snrs = s.snr_db.clone();
    snrs.sort_by(f64::total_cmp);
    let mut systems = Vec::with_capacity(s.systems.len());
    for spec in &s.systems {
        let p = prepare(spec)?;
        let mut rows = Vec::with_capacity(snrs.len());
        for &snr in &snrs {
            let out: Vec<TrialOutcome> = pool.install(|| {
                (0..s.trials as u64)
                    .into_par_iter()
                    .map(|t| run_trial(s, &p, snr, t, measure))
                    .collect::<Result<Vec<_>>>()
            })?;
            rows.push(aggregate(snr, &out, measure));
        }
        let eq = spec.equalizer;
        let slope = if measure == Measure::Ber { ber_slope(&rows, 10.0) } else { None };
        systems.push(SystemResult {
            label: spec.label.clone(),
            waveform: p.cfg.waveform(),
            grid_len: p.cfg.grid_len(),
            flops: flop_report(eq.method, p.cfg.grid_len(), eq.band),
            ber_slope: slope,
            floor_delta_db: None,
            rows,
        });
    }
    Ok(ExperimentResult {
        scenario: s.name.clone(),
        scenario_hash: s.hash(),
        kind: s.kind,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        systems,
        run_info: RunInfo::now(start.elapsed().as_secs_f64(), pool.current_num_threads()),
    })
}

/// Raw-BER sweep: estimate, convert, equalize and slice every frame.
pub fn run_ber_sweep(s: &Scenario) -> Result<ExperimentResult> {
    run_ber_sweep_with(s, &RunOptions::default())
}

pub fn run_ber_sweep_with(s: &Scenario, opts: &RunOptions) -> Result<ExperimentResult> {
    sweep(s, opts, Measure::Ber)
}

/// NMSE sweep of each system's estimator against the true channel, with the
/// flop report of its paired equalizer.
pub fn run_nmse_sweep(s: &Scenario) -> Result<ExperimentResult> {
    run_nmse_sweep_with(s, &RunOptions::default())
}

pub fn run_nmse_sweep_with(s: &Scenario, opts: &RunOptions) -> Result<ExperimentResult> {
    sweep(s, opts, Measure::Nmse)
}

/// NMSE sweep over a segmented channel; records the 20 to 40 dB change.
pub fn run_birth_death_study(s: &Scenario) -> Result<ExperimentResult> {
    run_birth_death_study_with(s, &RunOptions::default())
}

pub fn run_birth_death_study_with(s: &Scenario, opts: &RunOptions) -> Result<ExperimentResult> {
    match s.channel.birth_death {
        Some(bd) if bd.segments >= 2 && bd.churn > 0.0 => {}
        Some(bd) => {
            return Err(Error::Precondition(format!(
                "birth-death study needs at least 2 segments and positive churn, got {} and {}",
                bd.segments, bd.churn
            )))
        }
        None => return Err(Error::Precondition("birth-death study without a birth_death channel".into())),
    }
    let mut res = sweep(s, opts, Measure::Nmse)?;
    for sys in &mut res.systems {
        sys.floor_delta_db = sys.nmse_at(40.0).zip(sys.nmse_at(20.0)).map(|(hi, lo)| hi - lo);
    }
    Ok(res)
}

/// Dispatches on the scenario kind.
pub fn run_scenario(s: &Scenario) -> Result<ExperimentResult> {
    run_scenario_with(s, &RunOptions::default())
}

pub fn run_scenario_with(s: &Scenario, opts: &RunOptions) -> Result<ExperimentResult> {
    match s.kind {
        StudyKind::Ber => run_ber_sweep_with(s, opts),
        StudyKind::Nmse => run_nmse_sweep_with(s, opts),
        StudyKind::BirthDeath => run_birth_death_study_with(s, opts),
    }
}
