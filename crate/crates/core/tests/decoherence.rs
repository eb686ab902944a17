mod common;

use common::integrate;
use quads_core::decoherence::{
    accumulated_phase, decoherence_factor, empirical_dephasing_check, phase_variance,
    pure_dephasing_check, shot_noise_phase_variance, success_upper_bound, train_phase,
    DecoherenceReport, DephasingParams,
};
use quads_core::noise::{realize, sample_train, Estimate, NoiseParams, Polarization};
use quads_core::Seed;
use rayon::prelude::*;

#[test]
fn phase_matches_quadrature_of_the_field() {
    for k in 0..20 {
        let params = NoiseParams::new(0.05, 0.04, 0.7, Polarization::X).unwrap();
        let r = realize(&params, 25.0, Seed(k)).unwrap();
        let closed = accumulated_phase(&r, 1.3, 2).unwrap();
        let quad = -1.3 * 2.0 * integrate(&|t| r.evaluate(t).unwrap()[0], 0.0, 25.0, 1e-13);
        assert!(
            (closed - quad).abs() < 1e-10,
            "seed {k}: {closed} vs {quad}"
        );
    }
}

#[test]
fn phase_is_linear_in_coupling_and_delta_sigma() {
    let params = NoiseParams::new(0.05, 0.04, 1.0, Polarization::Y).unwrap();
    let r = realize(&params, 30.0, Seed(4)).unwrap();
    let base = accumulated_phase(&r, 1.0, 1).unwrap();
    assert_eq!(accumulated_phase(&r, 2.5, 1).unwrap(), 2.5 * base);
    assert_eq!(accumulated_phase(&r, 1.0, -4).unwrap(), -4.0 * base);
    let three = realize(
        &NoiseParams {
            polarization: Polarization::Three,
            ..params
        },
        30.0,
        Seed(4),
    )
    .unwrap();
    assert!(accumulated_phase(&three, 1.0, 1).is_err());
}

#[test]
fn raw_phase_variance_matches_formula() {
    // n̄τ = 1 and T >> τ, where the shot-noise variance reduces to 4τTσ².
    let (tau, t, sigma2) = (0.1, 50.0, 0.04);
    let params = NoiseParams::from_rate(1.0 / tau, sigma2, tau, Polarization::X).unwrap();
    let phases: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|k| {
            train_phase(
                &sample_train(&params, t, Seed(77).derive("var", k)).unwrap(),
                1.0,
                1,
            )
        })
        .collect();
    let mean = phases.iter().sum::<f64>() / phases.len() as f64;
    let sq: Vec<f64> = phases.iter().map(|g| (g - mean).powi(2)).collect();
    let est = Estimate::from_samples(&sq);
    let formula = phase_variance(&DephasingParams {
        coupling: 1.0,
        pulse_half_width: tau,
        effective_time: t,
        amp_variance: sigma2,
        delta_sigma: 1,
    })
    .unwrap();
    assert!(est.z_score(formula).abs() < 3.0, "{est:?} vs {formula}");
    let exact = shot_noise_phase_variance(&params, t, 1.0, 1).unwrap();
    assert!((exact - formula).abs() / formula < 2e-3);
}

#[test]
fn bound_is_monotone() {
    let mut prev_t = f64::INFINITY;
    for k in 0..20 {
        let mut last = f64::INFINITY;
        for j in 0..20 {
            let p = DephasingParams {
                coupling: 1.0,
                pulse_half_width: 1.0,
                effective_time: k as f64,
                amp_variance: 0.01 * j as f64,
                delta_sigma: 1,
            };
            let b = success_upper_bound(&p).unwrap();
            assert!(b <= last && b > 0.0 && b <= 1.0);
            last = b;
        }
        let b = success_upper_bound(&DephasingParams {
            coupling: 1.0,
            pulse_half_width: 1.0,
            effective_time: k as f64,
            amp_variance: 0.04,
            delta_sigma: 1,
        })
        .unwrap();
        assert!(b <= prev_t);
        prev_t = b;
    }
    let zero = DephasingParams {
        coupling: 1.0,
        pulse_half_width: 1.0,
        effective_time: 10.0,
        amp_variance: 0.0,
        delta_sigma: 1,
    };
    assert_eq!(success_upper_bound(&zero).unwrap(), 1.0);
    assert!(success_upper_bound(&DephasingParams {
        delta_sigma: 2,
        ..zero
    })
    .is_err());
    assert_eq!(decoherence_factor(0.0).unwrap(), 1.0);
}

#[test]
fn weak_amplitudes_leave_coherence_intact() {
    let params = NoiseParams::from_rate(1.0, 1e-12, 0.5, Polarization::X).unwrap();
    let c = empirical_dephasing_check(&params, 40.0, 1.0, 1, 2000, Seed(3)).unwrap();
    assert!((c.measured().re - 1.0).abs() < 1e-9 && c.measured().im.abs() < 1e-5);
}

#[test]
fn imaginary_part_vanishes_on_average() {
    let params = NoiseParams::from_rate(0.2, 0.04, 0.5, Polarization::X).unwrap();
    let c = empirical_dephasing_check(&params, 200.0, 1.0, 1, 20_000, Seed(5)).unwrap();
    assert!(c.z_imag.abs() < 3.0, "{c:?}");
    let thin = NoiseParams::from_rate(0.05, 0.04, 0.5, Polarization::X).unwrap();
    assert!(empirical_dephasing_check(&thin, 200.0, 1.0, 1, 100, Seed(5)).is_err());
}

#[test]
fn pure_dephasing_single_qubit() {
    // Small kicks keep the non-Gaussian correction far below the error bar.
    let params = NoiseParams::from_rate(1.6, 0.0025, 0.5, Polarization::X).unwrap();
    let c = pure_dephasing_check(&params, 100.0, 1.0, 4000, Seed(6)).unwrap();
    assert!(c.max_population_drift < 1e-12, "{c:?}");
    assert!(c.z_score.abs() < 3.0, "{c:?}");
    assert!(c.ratio_im.z_score(0.0).abs() < 3.0, "{c:?}");
}

#[test]
fn report_contains_factor() {
    let r = DecoherenceReport::new(
        "x",
        DephasingParams {
            coupling: 1.0,
            pulse_half_width: 1.0,
            effective_time: 6.6,
            amp_variance: 0.04,
            delta_sigma: 1,
        },
    )
    .unwrap();
    let json = serde_json::to_string(&r).unwrap();
    assert!((r.decoherence_factor - 0.590).abs() < 1e-3);
    assert!(json.contains("\"decoherence_factor\":0.589"));
}
