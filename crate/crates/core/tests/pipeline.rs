use std::path::PathBuf;

use num_complex::Complex64;
use proptest::prelude::*;
use wavelab::channel::{apply_noiseless, LtvChannel, Path};
use wavelab::experiments::{run_ber_sweep, ExperimentResult, Scenario};
use wavelab::{convert_domain, default_c1, demodulate, modulate, Domain, DomainSymbols, FrameConfig, PrefixScheme, ValidatedConfig, Waveform};

fn shipped(file: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", file].iter().collect()
}

fn config(w: Waveform, m: usize, n: usize) -> ValidatedConfig {
    let cp = m / 4;
    let fc = match w {
        Waveform::Otfs => FrameConfig::new(w, m, n, 15e3, PrefixScheme::ReducedCP(cp)),
        Waveform::Afdm => FrameConfig::new(w, m, n, 15e3, PrefixScheme::ChirpPeriodic(cp))
            .with_chirp(default_c1(1, m).unwrap(), 0.01),
        Waveform::Ocdm => FrameConfig::new(w, m, n, 15e3, PrefixScheme::ChirpPeriodic(cp)),
        Waveform::DftSOfdm => FrameConfig::new(w, m, n, 15e3, PrefixScheme::FullCP(cp)).with_subband(m / 4),
        Waveform::Ofdm => FrameConfig::new(w, m, n, 15e3, PrefixScheme::FullCP(cp)),
    };
    fc.validate().unwrap()
}

fn waveform() -> impl Strategy<Value = Waveform> {
    prop_oneof![
        Just(Waveform::Ofdm),
        Just(Waveform::DftSOfdm),
        Just(Waveform::Otfs),
        Just(Waveform::Afdm),
        Just(Waveform::Ocdm),
    ]
}

fn symbols(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)), len)
}

fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn modulation_round_trips_and_keeps_energy(w in waveform(), shape in 0usize..3, s in symbols(32)) {
        // every shape has 32 grid bins
        let (m, n) = [(8, 4), (16, 2), (32, 1)][shape];
        let cfg = config(w, m, n);
        let grid = DomainSymbols::new(s.clone(), w.multiplexing_domain());
        let tx = modulate(&grid, &cfg).unwrap();
        let back = demodulate(&tx, &cfg).unwrap();
        let err = back.data.iter().zip(&s).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10);
        // the prefix only adds copies, so the payload energy is preserved
        prop_assert!(energy(&tx.data) >= energy(&s) * (1.0 - 1e-12));
    }

    #[test]
    fn domain_conversion_is_unitary(w in waveform(), s in symbols(32)) {
        let cfg = config(w, 8, 4);
        let x = DomainSymbols::new(s.clone(), Domain::Time);
        for d in [Domain::Frequency, Domain::DelayDoppler, Domain::Affine] {
            if d == Domain::Affine && !cfg.has_affine() {
                continue;
            }
            let y = convert_domain(&x, d, &cfg).unwrap();
            prop_assert!((energy(&y.data) - energy(&s)).abs() < 1e-9 * energy(&s).max(1.0));
            let z = convert_domain(&y, Domain::Time, &cfg).unwrap();
            let err = z.data.iter().zip(&s).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-10);
        }
    }

    #[test]
    fn channel_is_linear(a in symbols(40), b in symbols(40), k in -1.5f64..1.5, d in 0.0f64..3.0) {
        let cfg = FrameConfig::new(Waveform::Ofdm, 16, 2, 15e3, PrefixScheme::FullCP(4)).validate().unwrap();
        let ch = LtvChannel::new(vec![Path::new(Complex64::new(0.6, -0.2), d, k)], &cfg).unwrap();
        let sum: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y * 2.0).collect();
        let (ya, yb, ys) = (
            apply_noiseless(&a, &ch).unwrap(),
            apply_noiseless(&b, &ch).unwrap(),
            apply_noiseless(&sum, &ch).unwrap(),
        );
        let err = ys.iter().zip(ya.iter().zip(&yb)).map(|(s, (x, y))| (s - x - y * 2.0).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10);
    }
}

#[test]
fn shipped_scenarios_parse_and_round_trip() {
    for file in ["fig4_static.scn", "fig5_eva.scn", "birth_death.scn"] {
        let s = Scenario::load(shipped(file)).unwrap();
        s.validate().unwrap();
        let again = Scenario::from_toml(&s.to_toml().unwrap()).unwrap();
        assert_eq!(again.hash(), s.hash(), "{file}");
        for sys in &s.systems {
            sys.config().unwrap();
        }
    }
}

#[test]
fn result_record_survives_the_file_system() {
    let mut s = Scenario::load(shipped("fig4_static.scn")).unwrap();
    s.trials = 2;
    s.snr_db = vec![f64::INFINITY, 10.0];
    let r = run_ber_sweep(&s).unwrap();
    for sys in &r.systems {
        // rows come back sorted by SNR
        assert_eq!(sys.rows[0].snr_db, 10.0);
        // pilot symbol 0 carries no data: 13 of 14 symbols, 2 bits per bin
        for row in &sys.rows {
            assert_eq!(row.bits, 2 * 13 * 1024 * 2);
            assert!(row.ber.unwrap() <= 0.5);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/static.json");
    r.write(&path).unwrap();
    let back = ExperimentResult::read(&path).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.digest(), r.digest());
}
