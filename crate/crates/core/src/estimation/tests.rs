use super::*;
use crate::channel::{apply_channel, effective_channel, make_profile, ProfileSpec};
use crate::frame::{default_c1, FrameConfig};
use crate::transforms::{demodulate, modulate};
use rand_distr::{Distribution, StandardNormal};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn otfs(m: usize, n: usize, cp: usize) -> ValidatedConfig {
    FrameConfig::new(Waveform::Otfs, m, n, 15e3, PrefixScheme::ReducedCP(cp)).validate().unwrap()
}

fn afdm(m: usize, alpha: usize, c2: f64, cp: usize) -> ValidatedConfig {
    FrameConfig::new(Waveform::Afdm, m, 1, 15e3, PrefixScheme::ChirpPeriodic(cp))
        .with_chirp(default_c1(alpha, m).unwrap(), c2)
        .validate()
        .unwrap()
}

fn qpsk_data(len: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = crate::modulation::random_bits(&mut rng, 2 * len);
    crate::modulation::qpsk_map(&bits)
}

/// Modulate, pass through `ch` and demodulate.
fn link(frame: &DomainSymbols, ch: &LtvChannel, cfg: &ValidatedConfig, snr: f64, seed: u64) -> DomainSymbols {
    let t = modulate(frame, cfg).unwrap();
    let y = apply_channel(&t.data, ch, snr, seed).unwrap();
    demodulate(&DomainSymbols::new(y, Domain::Time), cfg).unwrap()
}

fn three_paths() -> Vec<Path> {
    vec![
        Path::new(c(0.7, 0.1), 0.0, 0.0),
        Path::new(c(0.0, 0.5), 1.0, 1.0),
        Path::new(c(-0.4, 0.3), 3.0, -1.0),
    ]
}

#[test]
fn block_pilot_is_unit_modulus() {
    let seq = block_sequence(8, 1, 3);
    assert!(seq.iter().all(|p| (p.norm() - 1.0).abs() < 1e-15));
    let sub = block_sequence(8, 2, 3);
    assert!(sub.iter().skip(1).step_by(2).all(|p| p.norm() == 0.0));
}

#[test]
fn dd_guard_geometry() {
    let cfg = otfs(8, 4, 2);
    let (_, meta) = build_pilot_frame(&PilotScheme::embedded_dd(2, 1), &[], &cfg).unwrap();
    // delays 2..=6 (5) times all 4 Dopplers are kept free
    assert_eq!(meta.data_indices.len(), 32 - 20);
    assert_eq!(meta.window.len(), 3 * 3);
}

#[test]
fn pilot_only_energy() {
    let cfg = otfs(16, 8, 4);
    let scheme = PilotScheme::embedded_dd(3, 1);
    let (frame, meta) = build_pilot_frame(&scheme, &[], &cfg).unwrap();
    assert!((frame.energy() - scheme.amplitude().powi(2)).abs() < 1e-12);
    let t = modulate(&frame, &cfg).unwrap();
    let payload = crate::transforms::remove_prefix(&t.data, cfg.prefix(), &cfg).unwrap();
    assert!((crate::dsp::energy(&payload) - scheme.amplitude().powi(2)).abs() < 1e-10);
    assert_eq!(pilot_only_frame(&meta, &cfg).unwrap(), frame);
}

#[test]
fn data_overflow() {
    let cfg = otfs(8, 4, 2);
    let data = vec![ONE_C; 13];
    assert!(matches!(
        build_pilot_frame(&PilotScheme::embedded_dd(2, 1), &data, &cfg),
        Err(Error::DataOverflow { needed: 13, available: 12 })
    ));
}

const ONE_C: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[test]
fn pilots_survive_an_ideal_link() {
    let cases = [
        (
            FrameConfig::new(Waveform::Ofdm, 16, 3, 15e3, PrefixScheme::FullCP(2)).validate().unwrap(),
            PilotScheme::block(3.0),
        ),
        (
            FrameConfig::new(Waveform::Afdm, 16, 3, 15e3, PrefixScheme::ChirpPeriodic(2))
                .with_chirp(1.0 / 32.0, 0.013)
                .validate()
                .unwrap(),
            PilotScheme::block(0.0),
        ),
        (otfs(16, 8, 4), PilotScheme::embedded_dd(3, 1)),
        (afdm(32, 1, 0.01, 4), PilotScheme::embedded_affine(3, 1)),
    ];
    for (cfg, scheme) in cases {
        let n_data = build_pilot_frame(&scheme, &[], &cfg).unwrap().1.data_indices.len();
        let (frame, meta) = build_pilot_frame(&scheme, &qpsk_data(n_data, 1), &cfg).unwrap();
        let ch = LtvChannel::identity(&cfg);
        let rx = link(&frame, &ch, &cfg, f64::INFINITY, 0);
        let got = extract_pilots(&rx, &meta, &cfg).unwrap();
        for (g, (_, p)) in got.iter().zip(&meta.pilots) {
            assert!((g - p).norm() < 1e-10, "{:?}", cfg.waveform());
        }
    }
}

#[test]
fn frequency_ls_is_exact_without_noise() {
    let cfg = FrameConfig::new(Waveform::Ofdm, 32, 4, 15e3, PrefixScheme::FullCP(6)).validate().unwrap();
    let ch = LtvChannel::new(vec![Path::new(c(0.8, 0.2), 0.0, 0.0), Path::new(c(0.3, -0.5), 5.0, 0.0)], &cfg).unwrap();
    let (frame, meta) = build_pilot_frame(&PilotScheme::block(0.0), &qpsk_data(96, 2), &cfg).unwrap();
    let rx = link(&frame, &ch, &cfg, f64::INFINITY, 0);
    let est = estimate_block_frequency(&rx, &meta, &cfg).unwrap();
    let h = effective_channel(&ch, &cfg, Domain::Frequency).unwrap();
    let EstimateForm::Bins { response } = &est.form else { panic!() };
    for k in 0..32 {
        assert!((response[k] - h[(k, k)]).norm() < 1e-10);
    }
    assert!(nmse(&est, &ch, &cfg, Domain::Frequency).unwrap() <= -180.0);
}

#[test]
fn even_bin_interpolation() {
    let m = 64;
    let (h0, h1) = (c(0.9, 0.1), c(0.3, 0.4));
    for delay in 1..=4 {
        let truth: Vec<Complex64> = (0..m)
            .map(|k| h0 + h1 * cis_turns(-((k * delay) as f64) / m as f64))
            .collect();
        let known = block_sequence(m, 2, 9);
        let rx: Vec<Complex64> = truth.iter().zip(&known).map(|(h, p)| h * p).collect();
        let est = estimate_frequency_ls(&rx, &known, 2, Interpolation::Dft).unwrap();
        let EstimateForm::Bins { response } = est.form else { panic!() };
        let err = crate::dsp::max_abs_diff(&response, &truth);
        assert!(err < 1e-3, "delay {delay}: {err}");
        // straight lines cannot follow the rotating phasor this closely
        let lin = estimate_frequency_ls(&rx, &known, 2, Interpolation::Linear).unwrap();
        let EstimateForm::Bins { response } = lin.form else { panic!() };
        assert!(crate::dsp::max_abs_diff(&response, &truth) > 1e-3);
    }
}

#[test]
fn zero_reception_and_zero_pilot() {
    let known = block_sequence(16, 1, 0);
    let est = estimate_frequency_ls(&[ZERO; 16], &known, 1, Interpolation::Dft).unwrap();
    let EstimateForm::Bins { response } = est.form else { panic!() };
    assert!(response.iter().all(|v| v.norm() == 0.0));
    let mut bad = known.clone();
    bad[4] = ZERO;
    assert!(matches!(
        estimate_frequency_ls(&[ZERO; 16], &bad, 1, Interpolation::Dft),
        Err(Error::ZeroPilot(4))
    ));
}

#[test]
fn dd_recovers_integer_paths() {
    let cfg = otfs(16, 8, 4);
    let ch = LtvChannel::new(three_paths(), &cfg).unwrap();
    let scheme = PilotScheme::embedded_dd(3, 1);
    let n_data = build_pilot_frame(&scheme, &[], &cfg).unwrap().1.data_indices.len();
    let (frame, meta) = build_pilot_frame(&scheme, &qpsk_data(n_data, 4), &cfg).unwrap();
    let rx = link(&frame, &ch, &cfg, f64::INFINITY, 0);
    let est = estimate_dd_embedded(&rx, &meta, 3.0, 0.0).unwrap();
    let paths = est.paths().unwrap();
    assert_eq!(paths.len(), 3);
    for p in three_paths() {
        let e = paths
            .iter()
            .find(|e| e.delay as f64 == p.delay && e.doppler == p.doppler)
            .expect("path detected");
        assert!((e.gain - p.gain).norm() < 1e-9);
    }
    assert_eq!(nmse(&est, &ch, &cfg, Domain::DelayDoppler).unwrap(), NMSE_FLOOR_DB);
    assert_eq!(nmse_dense(&est, &ch, &cfg, Domain::DelayDoppler).unwrap(), NMSE_FLOOR_DB);
}

#[test]
fn dd_false_alarms_follow_the_gaussian_tail() {
    let cfg = otfs(16, 8, 4);
    let (_, meta) = build_pilot_frame(&PilotScheme::embedded_dd(3, 1), &[], &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let var = 0.5;
    let s = (var / 2.0f64).sqrt();
    let trials = 10_000;
    let mut hits = 0usize;
    for _ in 0..trials {
        let data = (0..cfg.grid_len())
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                c(re * s, im * s)
            })
            .collect();
        let rx = DomainSymbols::new(data, Domain::DelayDoppler);
        hits += estimate_dd_embedded(&rx, &meta, 3.0, var).unwrap().paths().unwrap().len();
    }
    let bins = (trials * meta.window.len()) as f64;
    let p = (-4.5f64).exp();
    let rate = hits as f64 / bins;
    let se = (p * (1.0 - p) / bins).sqrt();
    assert!((rate - p).abs() < 4.0 * se, "rate {rate} vs {p}");
}

#[test]
fn dd_fractional_doppler_leaks() {
    let cfg = otfs(16, 8, 4);
    let ch = LtvChannel::new(vec![Path::new(ONE_C, 1.0, 0.5)], &cfg).unwrap();
    let scheme = PilotScheme::embedded_dd(3, 2);
    let (frame, meta) = build_pilot_frame(&scheme, &[], &cfg).unwrap();
    let rx = link(&frame, &ch, &cfg, f64::INFINITY, 0);
    let est = estimate_dd_embedded(&rx, &meta, 3.0, 0.0).unwrap();
    let dops: std::collections::BTreeSet<i64> = est.paths().unwrap().iter().map(|p| p.doppler as i64).collect();
    assert!(dops.len() >= 2);
    let e = nmse(&est, &ch, &cfg, Domain::DelayDoppler).unwrap();
    assert!(e > -100.0 && e < 0.0, "{e}");
}

#[test]
fn affine_recovers_integer_paths() {
    let cfg = afdm(32, 1, 0.0123, 4);
    let ch = LtvChannel::new(three_paths(), &cfg).unwrap();
    let scheme = PilotScheme::embedded_affine(3, 1);
    let n_data = build_pilot_frame(&scheme, &[], &cfg).unwrap().1.data_indices.len();
    let (frame, meta) = build_pilot_frame(&scheme, &qpsk_data(n_data, 5), &cfg).unwrap();
    let rx = link(&frame, &ch, &cfg, f64::INFINITY, 0);
    let est = estimate_affine(&rx, &meta, 3.0, 0.0).unwrap();
    let paths = est.paths().unwrap();
    assert_eq!(paths.len(), 3);
    for p in three_paths() {
        let e = paths
            .iter()
            .find(|e| e.delay as f64 == p.delay && e.doppler == p.doppler)
            .expect("path detected");
        assert!((e.gain - p.gain).norm() < 1e-9, "{e:?} vs {p:?}");
    }
    assert!(nmse(&est, &ch, &cfg, Domain::Affine).unwrap() <= -180.0);
    assert!(nmse_dense(&est, &ch, &cfg, Domain::Affine).unwrap() <= -180.0);
}

#[test]
fn affine_coupled_fractional_breaks_path_count() {
    let cfg = afdm(64, 1, 0.0, 8);
    let truth = vec![Path::new(ONE_C, 1.5, 0.5), Path::new(c(0.0, 0.6), 3.0, 0.0)];
    let ch = LtvChannel::new(truth.clone(), &cfg).unwrap();
    let mut scheme = PilotScheme::embedded_affine(5, 1);
    scheme.delay_guard_neg = 1;
    let (frame, meta) = build_pilot_frame(&scheme, &[], &cfg).unwrap();
    let rx = link(&frame, &ch, &cfg, f64::INFINITY, 0);
    let est = estimate_affine(&rx, &meta, 3.0, 1e-4).unwrap();
    assert_ne!(est.paths().unwrap().len(), truth.len());
}

#[test]
fn affine_without_tilt_is_ambiguous() {
    let cfg = FrameConfig::new(Waveform::Afdm, 32, 1, 15e3, PrefixScheme::ChirpPeriodic(4))
        .with_chirp(0.0, 0.0)
        .validate()
        .unwrap();
    let ch = LtvChannel::new(vec![Path::new(ONE_C, 0.0, 0.0), Path::new(c(0.5, 0.0), 2.0, 0.0)], &cfg).unwrap();
    let (frame, meta) = build_pilot_frame(&PilotScheme::embedded_affine(3, 1), &[], &cfg).unwrap();
    let rx = link(&frame, &ch, &cfg, f64::INFINITY, 0);
    assert!(matches!(estimate_affine(&rx, &meta, 3.0, 0.0), Err(Error::AmbiguousTap { .. })));
}

#[test]
fn wrong_metadata_is_rejected() {
    let cfg = otfs(16, 8, 4);
    let (frame, meta) = build_pilot_frame(&PilotScheme::embedded_dd(3, 1), &[], &cfg).unwrap();
    assert!(matches!(estimate_affine(&frame, &meta, 3.0, 0.0), Err(Error::NoPilotMeta(_))));
}

#[test]
fn nmse_reference_points() {
    let cfg = otfs(16, 8, 4);
    let ch = LtvChannel::new(three_paths(), &cfg).unwrap();
    let exact: Vec<EstimatedPath> = three_paths()
        .iter()
        .map(|p| EstimatedPath {
            gain: p.gain,
            delay: p.delay as i64,
            doppler: p.doppler,
        })
        .collect();
    let mk = |paths: Vec<EstimatedPath>| PathEstimate {
        domain: Domain::DelayDoppler,
        threshold: 0.0,
        form: EstimateForm::Paths { paths },
    };
    assert_eq!(nmse(&mk(exact.clone()), &ch, &cfg, Domain::DelayDoppler).unwrap(), -200.0);
    assert!(nmse(&mk(vec![]), &ch, &cfg, Domain::DelayDoppler).unwrap().abs() < 1e-12);
    let scaled = exact.iter().map(|p| EstimatedPath { gain: p.gain * 1.1, ..*p }).collect();
    let e = nmse(&mk(scaled), &ch, &cfg, Domain::DelayDoppler).unwrap();
    assert!((e + 20.0).abs() < 1e-9, "{e}");
}

#[test]
fn sparse_and_dense_nmse_agree() {
    let cfg = FrameConfig::new(Waveform::Ofdm, 16, 4, 15e3, PrefixScheme::FullCP(4)).validate().unwrap();
    let spec = ProfileSpec::RandomSparse {
        paths: 3,
        max_delay: 3.0,
        max_doppler: 1.0,
        integer: false,
    };
    let ch = make_profile(&spec, &cfg, 0.0, 8).unwrap();
    let bins = PathEstimate {
        domain: Domain::Frequency,
        threshold: 0.0,
        form: EstimateForm::Bins {
            response: (0..16).map(|k| c(1.0, 0.1 * k as f64)).collect(),
        },
    };
    let paths = PathEstimate {
        domain: Domain::Time,
        threshold: 0.0,
        form: EstimateForm::Paths {
            paths: vec![EstimatedPath {
                gain: c(0.5, 0.5),
                delay: -1,
                doppler: 0.5,
            }],
        },
    };
    for est in [bins, paths] {
        for d in [Domain::Time, Domain::Frequency, Domain::DelayDoppler] {
            let a = nmse(&est, &ch, &cfg, d).unwrap();
            let b = nmse_dense(&est, &ch, &cfg, d).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn bins_effective_matches_synthesis() {
    let cfg = FrameConfig::new(Waveform::Afdm, 8, 2, 15e3, PrefixScheme::ChirpPeriodic(2))
        .with_chirp(1.0 / 16.0, 0.02)
        .validate()
        .unwrap();
    let response: Vec<Complex64> = (0..8).map(|k| c(1.0 + 0.1 * k as f64, -0.2)).collect();
    let est = PathEstimate {
        domain: Domain::Frequency,
        threshold: 0.0,
        form: EstimateForm::Bins { response: response.clone() },
    };
    let a = bins_effective(&response, &cfg, Domain::Affine).unwrap();
    let b = synthesize(&est, &cfg, Domain::Affine).unwrap();
    assert!((a - b).norm() < 1e-10);
}

#[test]
fn estimates_are_deterministic_and_serializable() {
    let cfg = otfs(16, 8, 4);
    let ch = make_profile(
        &ProfileSpec::RandomSparse {
            paths: 3,
            max_delay: 3.0,
            max_doppler: 1.0,
            integer: false,
        },
        &cfg,
        0.0,
        3,
    )
    .unwrap();
    let (frame, meta) = build_pilot_frame(&PilotScheme::embedded_dd(3, 1), &[], &cfg).unwrap();
    let run = || {
        let rx = link(&frame, &ch, &cfg, 15.0, 42);
        estimate_dd_embedded(&rx, &meta, 3.0, 0.03).unwrap()
    };
    let a = serde_json::to_string(&run()).unwrap();
    assert_eq!(a, serde_json::to_string(&run()).unwrap());
    let back: PathEstimate = serde_json::from_str(&a).unwrap();
    assert_eq!(back, run());
}
