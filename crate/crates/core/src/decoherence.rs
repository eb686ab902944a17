//! Weak-noise dephasing estimates.
//!
//! For noise along one axis, a pointer state with total spin `σ = Σ σ_i`
//! picks up the stochastic phase `-γ σ ∫ x(t) dt`. Pairs of pointer states
//! differing by `Δσ` lose coherence by the noise average of `exp(-iΓ)`,
//! `Γ = -γ Δσ ∫ x`, which is `exp(-Var Γ / 2)` when `Γ` is Gaussian.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::engine::{evolve_from, HamiltonianSpec, StateVector, StepControl};
use crate::error::{contract, Result};
use crate::noise::{
    mean_rate, sample_train, Axis, AxisTrain, Estimate, NoiseParams, NoiseRealization,
    Polarization, PulseTrain,
};
use crate::seed::Seed;

/// Minimum expected pulse count `n̄ T` for the Gaussian phase picture.
pub const MIN_PULSES: f64 = 20.0;

/// Fraction of a run during which noise along `polarization` fails to
/// commute with the Hamiltonian.
pub fn noncommuting_fraction(polarization: Polarization) -> f64 {
    match polarization {
        Polarization::X => 0.3,
        Polarization::Y => 1.0,
        Polarization::Z => 0.7,
        Polarization::Three => 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingParams {
    pub coupling: f64,
    pub pulse_half_width: f64,
    pub effective_time: f64,
    pub amp_variance: f64,
    pub delta_sigma: i32,
}

impl DephasingParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pulse_half_width", self.pulse_half_width),
            ("effective_time", self.effective_time),
            ("amp_variance", self.amp_variance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return contract(format!("{name} must be >= 0, got {v}"));
            }
        }
        if !self.coupling.is_finite() {
            return contract("coupling must be finite");
        }
        Ok(())
    }

    /// `T_eff = fraction(polarization) * total_time`.
    pub fn for_polarization(
        polarization: Polarization,
        total_time: f64,
        coupling: f64,
        pulse_half_width: f64,
        amp_variance: f64,
    ) -> Self {
        DephasingParams {
            coupling,
            pulse_half_width,
            effective_time: noncommuting_fraction(polarization) * total_time,
            amp_variance,
            delta_sigma: 1,
        }
    }
}

/// `-γ Δσ ∫₀ᵀ x(t) dt` for a raw train.
pub fn train_phase(train: &PulseTrain, coupling: f64, delta_sigma: i32) -> f64 {
    -coupling * f64::from(delta_sigma) * train.integral()
}

/// Accumulated phase `Γ` of a single-axis realization.
pub fn accumulated_phase(
    realization: &NoiseRealization,
    coupling: f64,
    delta_sigma: i32,
) -> Result<f64> {
    match realization.trains.as_slice() {
        [only] => Ok(only.scale * train_phase(&only.train, coupling, delta_sigma)),
        _ => contract(format!(
            "accumulated_phase needs a single-axis realization, got {} axes",
            realization.trains.len()
        )),
    }
}

/// `4 τ T_eff Δσ² γ² σ_a²`.
pub fn phase_variance(p: &DephasingParams) -> Result<f64> {
    p.validate()?;
    let ds = f64::from(p.delta_sigma);
    Ok(4.0
        * p.pulse_half_width
        * p.effective_time
        * ds
        * ds
        * p.coupling
        * p.coupling
        * p.amp_variance)
}

/// `exp(-phase_var / 2)`.
pub fn decoherence_factor(phase_var: f64) -> Result<f64> {
    if !(phase_var >= 0.0) {
        return contract(format!("phase variance must be >= 0, got {phase_var}"));
    }
    Ok((-0.5 * phase_var).exp())
}

/// Upper bound on the noise-averaged success probability; needs `Δσ = 1`.
pub fn success_upper_bound(p: &DephasingParams) -> Result<f64> {
    if p.delta_sigma != 1 {
        return contract(format!(
            "the success bound is defined for delta_sigma = 1, got {}",
            p.delta_sigma
        ));
    }
    decoherence_factor(phase_variance(p)?)
}

/// `∫₀ᵀ w(c)² dc` with `w(c)` the length of `[c - τ, c + τ] ∩ [0, T]`.
pub fn clipped_width_square_integral(tau: f64, duration: f64) -> f64 {
    let w = |c: f64| (c + tau).min(duration) - (c - tau).max(0.0);
    let mut knots = [0.0, tau.min(duration), (duration - tau).max(0.0), duration];
    knots.sort_by(f64::total_cmp);
    // w is linear between knots, so Simpson's rule is exact on each piece.
    knots
        .windows(2)
        .map(|k| {
            (k[1] - k[0]) / 6.0
                * (w(k[0]).powi(2) + 4.0 * w(0.5 * (k[0] + k[1])).powi(2) + w(k[1]).powi(2))
        })
        .sum()
}

/// Exact variance of `Γ` for raw shot noise on `[0, T]`:
/// `γ² Δσ² n̄ σ² ∫ w²`.
pub fn shot_noise_phase_variance(
    params: &NoiseParams,
    duration: f64,
    coupling: f64,
    delta_sigma: i32,
) -> Result<f64> {
    let rate = mean_rate(params)?;
    let ds = f64::from(delta_sigma);
    Ok(coupling
        * coupling
        * ds
        * ds
        * rate
        * params.amp_variance
        * clipped_width_square_integral(params.pulse_half_width, duration))
}

/// Exact `E[exp(-iΓ)]` for raw shot noise (compound-Poisson characteristic
/// functional): `exp(n̄ ∫ (exp(-k w²) - 1) dc)` with `k = γ² Δσ² σ² / 2`.
pub fn shot_noise_coherence(
    params: &NoiseParams,
    duration: f64,
    coupling: f64,
    delta_sigma: i32,
) -> Result<f64> {
    let rate = mean_rate(params)?;
    let tau = params.pulse_half_width;
    if duration < 2.0 * tau {
        return contract("shot_noise_coherence needs duration >= 2 tau");
    }
    let ds = f64::from(delta_sigma);
    let k = 0.5 * coupling * coupling * ds * ds * params.amp_variance;
    let interior = (duration - 2.0 * tau) * (-k * 4.0 * tau * tau).exp_m1();
    // Each boundary layer: ∫_τ^{2τ} (exp(-k u²) - 1) du.
    let gauss = if k > 0.0 {
        0.5 * (std::f64::consts::PI / k).sqrt() * (erf(2.0 * tau * k.sqrt()) - erf(tau * k.sqrt()))
    } else {
        tau
    };
    Ok((rate * (interior + 2.0 * (gauss - tau))).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingCheck {
    pub realizations: usize,
    pub measured_re: Estimate,
    pub measured_im: Estimate,
    /// Sample variance of `Γ`.
    pub phase_variance_sample: f64,
    /// `exp(-Var Γ / 2)` with the exact shot-noise variance.
    pub predicted: f64,
    /// `exp(-phase_variance / 2)` with `T_eff = T`, `σ_a² = σ²`.
    pub predicted_formula: f64,
    /// Non-Gaussian exact average, for diagnosing the Gaussian gap.
    pub exact: f64,
    pub z_score: f64,
    pub z_imag: f64,
}

impl DephasingCheck {
    pub fn measured(&self) -> Complex64 {
        Complex64::new(self.measured_re.mean, self.measured_im.mean)
    }
}

fn require_gaussian_regime(params: &NoiseParams, duration: f64) -> Result<()> {
    let pulses = mean_rate(params)? * duration;
    if pulses < MIN_PULSES {
        return contract(format!(
            "n̄T = {pulses} is below the Gaussian threshold {MIN_PULSES}"
        ));
    }
    Ok(())
}

/// Averages `exp(-iΓ)` over independent raw (un-normalized) trains and
/// compares it with `exp(-Var Γ / 2)`.
pub fn empirical_dephasing_check(
    params: &NoiseParams,
    duration: f64,
    coupling: f64,
    delta_sigma: i32,
    realizations: usize,
    seed: Seed,
) -> Result<DephasingCheck> {
    require_gaussian_regime(params, duration)?;
    if realizations < 2 {
        return contract("need at least two realizations");
    }
    let phases: Vec<f64> = (0..realizations)
        .into_par_iter()
        .map(|k| {
            sample_train(params, duration, seed.derive("dephasing", k as u64))
                .map(|t| train_phase(&t, coupling, delta_sigma))
        })
        .collect::<Result<_>>()?;
    let re: Vec<f64> = phases.iter().map(|g| g.cos()).collect();
    // exp(-iΓ) has imaginary part -sin Γ.
    let im: Vec<f64> = phases.iter().map(|g| -g.sin()).collect();
    let measured_re = Estimate::from_samples(&re);
    let measured_im = Estimate::from_samples(&im);
    let var = Estimate::from_samples(&phases).std_err.powi(2) * realizations as f64;
    let predicted = decoherence_factor(shot_noise_phase_variance(
        params,
        duration,
        coupling,
        delta_sigma,
    )?)?;
    let formula = decoherence_factor(phase_variance(&DephasingParams {
        coupling,
        pulse_half_width: params.pulse_half_width,
        effective_time: duration,
        amp_variance: params.amp_variance,
        delta_sigma,
    })?)?;
    Ok(DephasingCheck {
        realizations,
        measured_re,
        measured_im,
        phase_variance_sample: var,
        predicted,
        predicted_formula: formula,
        exact: shot_noise_coherence(params, duration, coupling, delta_sigma)?,
        z_score: measured_re.z_score(predicted),
        z_imag: measured_im.z_score(0.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureDephasingCheck {
    pub realizations: usize,
    /// Largest deviation of a pointer population from its initial value.
    pub max_population_drift: f64,
    /// Averaged `ρ_{+-}(T) / ρ_{+-}(0)`.
    pub ratio_re: Estimate,
    pub ratio_im: Estimate,
    pub predicted: f64,
    pub z_score: f64,
}

/// One qubit under x-noise alone, started in `|0⟩ = (|+⟩ + |-⟩)/√2`.
///
/// The pointer states `|±⟩` differ by `Δσ = 2`. Each raw realization is run
/// through the full integrator.
pub fn pure_dephasing_check(
    params: &NoiseParams,
    duration: f64,
    coupling: f64,
    realizations: usize,
    seed: Seed,
) -> Result<PureDephasingCheck> {
    require_gaussian_regime(params, duration)?;
    if params.polarization != Polarization::X {
        return contract("pure dephasing harness is built for x noise only");
    }
    if realizations < 2 {
        return contract("need at least two realizations");
    }
    let spec = HamiltonianSpec::from_parts(1, vec![0], vec![0, 0], coupling, duration)?;
    let control = StepControl::default();
    let h = std::f64::consts::FRAC_1_SQRT_2;

    let outcomes: Vec<(f64, Complex64)> = (0..realizations)
        .into_par_iter()
        .map(|k| {
            let sub = seed.derive("pure-dephasing", k as u64);
            let train = sample_train(params, duration, sub)?;
            let noise = NoiseRealization {
                params: *params,
                duration,
                trains: vec![AxisTrain {
                    axis: Axis::X,
                    scale: 1.0,
                    train,
                }],
                seed: sub,
                resamples: 0,
            };
            let (psi, _) = evolve_from(&spec, Some(&noise), &control, StateVector::basis(1, 0)?)?;
            let a = psi.amplitudes();
            let plus = (a[0] + a[1]) * h;
            let minus = (a[0] - a[1]) * h;
            let drift = (plus.norm_sqr() - 0.5)
                .abs()
                .max((minus.norm_sqr() - 0.5).abs());
            Ok((drift, plus * minus.conj() / 0.5))
        })
        .collect::<Result<_>>()?;

    let re: Vec<f64> = outcomes.iter().map(|o| o.1.re).collect();
    let im: Vec<f64> = outcomes.iter().map(|o| o.1.im).collect();
    let ratio_re = Estimate::from_samples(&re);
    let predicted = decoherence_factor(shot_noise_phase_variance(params, duration, coupling, 2)?)?;
    Ok(PureDephasingCheck {
        realizations,
        max_population_drift: outcomes.iter().map(|o| o.0).fold(0.0, f64::max),
        ratio_re,
        ratio_im: Estimate::from_samples(&im),
        predicted,
        z_score: ratio_re.z_score(predicted),
    })
}

/// Inputs and derived quantities for one dephasing scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceReport {
    pub label: String,
    pub params: DephasingParams,
    pub phase_variance: f64,
    pub decoherence_factor: f64,
    pub success_upper_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<DephasingCheck>,
}

impl DecoherenceReport {
    pub fn new(label: &str, params: DephasingParams) -> Result<Self> {
        let v = phase_variance(&params)?;
        Ok(DecoherenceReport {
            label: label.to_string(),
            params,
            phase_variance: v,
            decoherence_factor: decoherence_factor(v)?,
            success_upper_bound: (params.delta_sigma == 1)
                .then(|| success_upper_bound(&params))
                .transpose()?,
            empirical: None,
        })
    }
}
