use envdiag::calibrate::{config_digest, TableMeta, ThresholdEntry, ThresholdTable};
use envdiag::classify::{decide, ClassifyConfig, Gate, Verdict};
use envdiag::envspec::{analytic_signal, bandpass, envelope, EnvelopeSpectrum, SpectrumConfig};
use envdiag::faultfreq::{estimate_fault_frequency, estimate_signal, EstimatorConfig};
use envdiag::sigmodel::{simulate_signal, FrequencyDistribution, PulseParams, Signal, SignalModel};
use envdiag::stats::{
    chi_squared_variance_test, kde, linspace, mse, normal_cdf, trapezoid, uniform_cdf,
};
use proptest::prelude::*;

const FS: f64 = 10_000.0;

fn small_table() -> ThresholdTable {
    let spectrum = SpectrumConfig::default();
    let estimator = EstimatorConfig::new(30.0);
    let rows = [(1.0, 2.0, 5.0), (2.0, 0.5, 20.0), (3.0, 0.01, 80.0)];
    ThresholdTable {
        meta: TableMeta {
            fs: FS,
            f_simul: 30.0,
            n: 100,
            seed: 0,
            config_digest: config_digest(&spectrum, &estimator),
            pulse: PulseParams::default(),
            spectrum,
            estimator,
        },
        entries: rows
            .iter()
            .map(|&(aci, threshold, mean_snr)| ThresholdEntry {
                aci,
                seg_len_s: 1.0,
                threshold,
                mean_f_hat: 30.0,
                mean_snr,
                n_signals: 100,
                n_failed: 0,
                seed: 0,
            })
            .collect(),
    }
}

fn synthetic_spectrum(amps: &[f64]) -> EnvelopeSpectrum {
    EnvelopeSpectrum::new(amps.to_vec(), 0.25).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimate_ignores_spectrum_scale(
        amps in prop::collection::vec(0.01f64..1.0, 500),
        scale in 1e-3f64..1e3,
    ) {
        let spec = synthetic_spectrum(&amps);
        let cfg = EstimatorConfig::new(30.0);
        let a = estimate_fault_frequency(&spec, &cfg).unwrap();
        let b = estimate_fault_frequency(&spec.scaled(scale), &cfg).unwrap();
        prop_assert_eq!(a.f_hat, b.f_hat);
        prop_assert!(close(a.snr, b.snr, 1e-9));
    }

    #[test]
    fn bandpass_is_linear(
        x in prop::collection::vec(-1.0f64..1.0, 256..1024),
        a in -5.0f64..5.0,
        b in -5.0f64..5.0,
    ) {
        let y: Vec<f64> = x.iter().rev().cloned().collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let f = |v: &[f64]| bandpass(&Signal::new(v.to_vec(), FS).unwrap(), 1000.0, 3000.0).unwrap().into_samples();
        let (fx, fy, fc) = (f(&x), f(&y), f(&combo));
        let scale = fc.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..fc.len() {
            prop_assert!((fc[i] - (a * fx[i] + b * fy[i])).abs() <= 1e-12 * scale * 10.0);
        }
    }

    #[test]
    fn analytic_signal_is_linear_and_keeps_real_part(
        x in prop::collection::vec(-1.0f64..1.0, 64..512),
        a in -5.0f64..5.0,
    ) {
        let z = analytic_signal(&x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
        let zs = analytic_signal(&scaled).unwrap();
        let m = x.len() as f64;
        for i in 0..x.len() {
            prop_assert!((z[i].re - x[i]).abs() <= 1e-12 * m);
            prop_assert!((zs[i] - z[i] * a).norm() <= 1e-12 * m * (1.0 + a.abs()));
        }
    }

    #[test]
    fn envelope_squared_is_signal_plus_quadrature(x in prop::collection::vec(-1.0f64..1.0, 64..512)) {
        let z = analytic_signal(&x).unwrap();
        let env = envelope(&x).unwrap();
        for i in 0..x.len() {
            let sum = x[i] * x[i] + z[i].im * z[i].im;
            prop_assert!((env[i] * env[i] - sum).abs() <= 1e-9 * (1.0 + sum));
            prop_assert!(env[i] >= 0.0);
        }
    }

    #[test]
    fn variance_test_is_scale_invariant(
        var in 0.0f64..10.0,
        sigma0 in 0.01f64..10.0,
        n in 2usize..500,
        scale in 1e-3f64..1e3,
    ) {
        let a = chi_squared_variance_test(var, sigma0, n, 0.05).unwrap();
        let b = chi_squared_variance_test(var * scale, sigma0 * scale, n, 0.05).unwrap();
        prop_assert_eq!(a.decision, b.decision);
        prop_assert!(close(a.statistic, b.statistic, 1e-9) || a.statistic == 0.0);
    }

    #[test]
    fn mse_is_zero_on_itself_and_symmetric(
        a in prop::collection::vec(-100.0f64..100.0, 1..50),
        shift in -3.0f64..3.0,
    ) {
        prop_assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + shift).collect();
        prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        prop_assert!(mse(&a, &b).unwrap() >= 0.0);
    }

    #[test]
    fn kde_is_a_density(samples in prop::collection::vec(25.0f64..35.0, 5..200)) {
        prop_assume!(samples.iter().any(|s| (s - samples[0]).abs() > 1e-6));
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pad = 6.0 * (hi - lo + 1.0);
        let grid = linspace(lo - pad, hi + pad, 4000);
        let curve = kde(&samples, &grid).unwrap();
        prop_assert!(curve.density.iter().all(|d| *d >= 0.0));
        let area = trapezoid(&curve.grid, &curve.density);
        prop_assert!((area - 1.0).abs() < 1e-3, "area {}", area);
    }

    #[test]
    fn normal_cdf_is_monotone(mu in -10.0f64..10.0, sigma in 0.01f64..5.0, a in -20.0f64..20.0, d in 0.0f64..5.0) {
        let p = normal_cdf(a, mu, sigma).unwrap();
        let q = normal_cdf(a + d, mu, sigma).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(q >= p);
    }

    #[test]
    fn uniform_cdf_endpoints(a in -10.0f64..10.0, w in 0.01f64..5.0, t in 0.0f64..1.0) {
        let b = a + w;
        prop_assert_eq!(uniform_cdf(a, a, b).unwrap(), 0.0);
        prop_assert_eq!(uniform_cdf(b, a, b).unwrap(), 1.0);
        prop_assert_eq!(uniform_cdf(a - 1.0, a, b).unwrap(), 0.0);
        prop_assert_eq!(uniform_cdf(b + 1.0, a, b).unwrap(), 1.0);
        prop_assert!((uniform_cdf(a + t * w, a, b).unwrap() - t).abs() < 1e-9);
    }

    #[test]
    fn decide_chain_is_consistent(
        est in prop::collection::vec(28.0f64..32.0, 2..60),
        snr in 1.0f64..100.0,
    ) {
        let table = small_table();
        let cfg = ClassifyConfig::from_table(&table, 30.0, 1.0, None);
        let snrs = vec![snr; est.len()];
        let r = decide(&est, &snrs, 0, &table, &cfg).unwrap();
        let again = decide(&est, &snrs, 0, &table, &cfg).unwrap();
        prop_assert_eq!(&r, &again);
        prop_assert_eq!(r.test.is_some(), r.gate == Gate::AboveThreshold);
        if r.verdict == Verdict::Constant {
            prop_assert!(r.shape.is_none());
        }
        if r.gate == Gate::BelowThreshold {
            prop_assert_eq!(r.verdict, Verdict::Constant);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulation_is_seed_deterministic(seed in any::<u64>(), aci in 0.5f64..3.0) {
        let model = SignalModel::new(
            0.5,
            FS,
            FrequencyDistribution::Uniform { a: 29.0, b: 31.0 },
            PulseParams::with_aci(aci),
        );
        let a = simulate_signal(&model, seed).unwrap();
        let b = simulate_signal(&model, seed).unwrap();
        prop_assert_eq!(a.f_true.to_bits(), b.f_true.to_bits());
        prop_assert!(a.signal.samples().iter().zip(b.signal.samples()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn estimate_ignores_signal_amplitude(seed in any::<u64>(), gain in 0.01f64..100.0) {
        let model = SignalModel::new(1.0, FS, FrequencyDistribution::Constant { f: 30.0 }, PulseParams::with_aci(2.0));
        let sim = simulate_signal(&model, seed).unwrap();
        let spec = SpectrumConfig::default().with_band(1250.0, 3750.0);
        let est = EstimatorConfig::new(30.0);
        let a = estimate_signal(&sim.signal, &spec, &est).unwrap();
        let b = estimate_signal(&sim.signal.scaled(gain), &spec, &est).unwrap();
        prop_assert_eq!(a.f_hat, b.f_hat);
        prop_assert!(close(a.snr, b.snr, 1e-6));
    }
}
