//! Brute-force equivalence checks at small scale.
//!
//! Every fast path is compared against a matrix written down directly from
//! its defining formula.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_noiseless, channel_matrix, LtvChannel, Path};
use crate::dsp::{cis_turns, energy, max_abs_diff};
use crate::error::Result;
use crate::frame::{default_c1, Domain, FrameConfig, PrefixScheme, ValidatedConfig, Waveform};
use crate::linalg::{CMatrix, ZERO};
use crate::transforms::{build_kernel, demodulate, modulate, DomainSymbols};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub max_err: f64,
    pub tol: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn new(name: String, max_err: f64, tol: f64) -> Self {
        Self {
            name,
            max_err,
            tol,
            passed: max_err <= tol,
        }
    }
}

/// The configurations swept by the transform checks.
pub(crate) fn transform_configs() -> Result<Vec<ValidatedConfig>> {
    let mut out = Vec::new();
    for (m, n) in [(8, 4), (16, 2), (64, 1)] {
        let cp = m / 4;
        out.push(FrameConfig::new(Waveform::Ofdm, m, n, 15e3, PrefixScheme::FullCP(cp)).validate()?);
        out.push(
            FrameConfig::new(Waveform::DftSOfdm, m, n, 15e3, PrefixScheme::FullCP(cp))
                .with_subband(m / 2)
                .validate()?,
        );
        out.push(FrameConfig::new(Waveform::Otfs, m, n, 15e3, PrefixScheme::ReducedCP(cp)).validate()?);
        out.push(
            FrameConfig::new(Waveform::Afdm, m, n, 15e3, PrefixScheme::ChirpPeriodic(cp))
                .with_chirp(default_c1(1, m)?, 0.0123)
                .validate()?,
        );
        out.push(FrameConfig::new(Waveform::Ocdm, m, n, 15e3, PrefixScheme::ChirpPeriodic(cp)).validate()?);
    }
    Ok(out)
}

/// Synthesis matrix of `cfg` from its closed form: entry `(t, i)` is the
/// time sample `t` produced by a unit symbol at grid index `i`.
pub(crate) fn explicit_synthesis(cfg: &ValidatedConfig) -> CMatrix {
    let (m, n) = (cfg.m(), cfg.n());
    let len = m * n;
    let (mf, nf) = (m as f64, n as f64);
    let mut x = CMatrix::zeros(len, len);
    match cfg.waveform() {
        Waveform::Ofdm => {
            for b in 0..n {
                for t in 0..m {
                    for k in 0..m {
                        x[(t + m * b, k + m * b)] = cis_turns((t * k) as f64 / mf) / mf.sqrt();
                    }
                }
            }
        }
        Waveform::DftSOfdm => {
            // localized mapping: block j of `a` symbols is DFT-spread onto
            // subcarriers j*a .. (j+1)*a
            let a = cfg.subband();
            for b in 0..n {
                for t in 0..m {
                    for i in 0..m {
                        let (blk, q) = (i / a, i % a);
                        let mut v = ZERO;
                        for r in 0..a {
                            let k = blk * a + r;
                            v += cis_turns((t * k) as f64 / mf) * cis_turns(-((r * q) as f64) / a as f64);
                        }
                        x[(t + m * b, i + m * b)] = v / (mf * a as f64).sqrt();
                    }
                }
            }
        }
        Waveform::Otfs => {
            // x[t + M s] = N^-1/2 sum_k X[k + N t] exp(j 2 pi s k / N)
            for s in 0..n {
                for t in 0..m {
                    for k in 0..n {
                        x[(t + m * s, k + n * t)] = cis_turns((s * k) as f64 / nf) / nf.sqrt();
                    }
                }
            }
        }
        Waveform::Afdm | Waveform::Ocdm => {
            let (c1, c2) = if cfg.waveform() == Waveform::Ocdm {
                (cfg.fresnel_slope(), cfg.fresnel_slope())
            } else {
                (cfg.c1(), cfg.c2())
            };
            for b in 0..n {
                for t in 0..m {
                    for p in 0..m {
                        let (tf, pf) = (t as f64, p as f64);
                        let turns = c1 * tf * tf + c2 * pf * pf + tf * pf / mf;
                        x[(t + m * b, p + m * b)] = cis_turns(turns) / mf.sqrt();
                    }
                }
            }
        }
    }
    x
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn mat_vec(h: &CMatrix, x: &[Complex64]) -> Vec<Complex64> {
    (0..h.nrows()).map(|i| (0..h.ncols()).map(|j| h[(i, j)] * x[j]).sum()).collect()
}

/// Kernel vs closed form, round trip and unitarity for every waveform.
pub(crate) fn transform_checks() -> Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    for cfg in transform_configs()? {
        let tag = format!("{}/{}x{}", cfg.waveform(), cfg.m(), cfg.n());
        let kernel = build_kernel(&cfg);
        let reference = explicit_synthesis(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ cfg.grid_len() as u64);
        let (mut kernel_err, mut trip_err, mut unit_err) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..100 {
            let s = random_vec(&mut rng, cfg.grid_len());
            let fast = kernel.synthesize(&s);
            kernel_err = kernel_err.max(max_abs_diff(&fast, &mat_vec(&reference, &s)));
            unit_err = unit_err.max((energy(&fast) - energy(&s)).abs() / energy(&s));
            let sym = DomainSymbols::new(s.clone(), cfg.waveform().multiplexing_domain());
            let back = demodulate(&modulate(&sym, &cfg)?, &cfg)?;
            trip_err = trip_err.max(max_abs_diff(&back.data, &s));
        }
        out.push(OracleCheck::new(format!("kernel vs closed form {tag}"), kernel_err, 1e-9));
        out.push(OracleCheck::new(format!("round trip {tag}"), trip_err, 1e-10));
        out.push(OracleCheck::new(format!("unitarity {tag}"), unit_err, 1e-10));
    }
    Ok(out)
}

/// A random channel with fractional delays and Dopplers for `cfg`.
pub(crate) fn random_channel(cfg: &ValidatedConfig, seed: u64) -> Result<LtvChannel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = rng.random_range(1..=4);
    let max_delay = (cfg.frame_len() as f64 / 4.0).min(6.0);
    let ps = (0..paths)
        .map(|_| {
            let g = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let mut d: f64 = rng.random_range(0.0..max_delay);
            let mut k: f64 = rng.random_range(-1.5..1.5);
            if rng.random_bool(0.3) {
                d = d.round();
                k = k.round();
            }
            Path::new(g, d, k)
        })
        .collect();
    LtvChannel::new(ps, cfg)
}

/// `apply_channel` against the explicit channel matrix on seeded channels.
pub(crate) fn channel_checks(count: usize) -> Result<Vec<OracleCheck>> {
    let shapes = [
        (Waveform::Ofdm, 8, 4, PrefixScheme::FullCP(2)),
        (Waveform::Otfs, 16, 8, PrefixScheme::ReducedCP(4)),
        (Waveform::Afdm, 32, 1, PrefixScheme::ChirpPeriodic(6)),
        (Waveform::Ofdm, 16, 2, PrefixScheme::ZeroPad(4)),
    ];
    let mut worst = 0.0f64;
    for i in 0..count {
        let (w, m, n, prefix) = shapes[i % shapes.len()];
        let mut fc = FrameConfig::new(w, m, n, 15e3, prefix);
        if w == Waveform::Afdm {
            fc = fc.with_chirp(default_c1(2, m)?, 0.0);
        }
        let cfg = fc.validate()?;
        let ch = random_channel(&cfg, 1000 + i as u64)?;
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + i as u64);
        let x = random_vec(&mut rng, cfg.frame_len());
        let fast = apply_noiseless(&x, &ch)?;
        let slow = mat_vec(&channel_matrix(&ch, &cfg)?, &x);
        worst = worst.max(max_abs_diff(&fast, &slow));
    }
    Ok(vec![OracleCheck::new(
        format!("apply_channel vs channel matrix ({count} channels)"),
        worst,
        1e-9,
    )])
}

/// Full brute-force suite: transform kernels, round trips, unitarity and
/// channel application.
pub fn oracle_suite() -> Result<Vec<OracleCheck>> {
    let mut out = transform_checks()?;
    out.extend(channel_checks(50)?);
    // the identity channel leaves every domain untouched
    let cfg = FrameConfig::new(Waveform::Otfs, 8, 4, 15e3, PrefixScheme::ReducedCP(2)).validate()?;
    let h = crate::channel::effective_channel(&LtvChannel::identity(&cfg), &cfg, Domain::DelayDoppler)?;
    let err = (0..h.nrows())
        .flat_map(|i| (0..h.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| (h[(i, j)] - if i == j { Complex64::new(1.0, 0.0) } else { ZERO }).norm())
        .fold(0.0, f64::max);
    out.push(OracleCheck::new("identity channel is identity in DD".into(), err, 1e-12));
    Ok(out)
}
