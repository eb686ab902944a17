//! Time stepping for `i dψ/dt = ℋ(t) ψ`.
//!
//! The noise field is piecewise constant, so the time axis is split at its
//! breakpoints. Inside a segment `ℋ` is affine in `t` and the fourth-order
//! commutator-free Magnus step collapses to two half-step exponentials of
//! `ℋ` sampled at `t_mid - h/3` and `t_mid + h/3`.

use serde::{Deserialize, Serialize};

use super::chebyshev::{propagate, Workspace};
use super::hamiltonian::HamiltonianSpec;
use super::state::{initial_ground_state, StateVector};
use crate::error::{contract, Error, Result};
use crate::noise::NoiseRealization;

/// Largest tolerated deviation of the final norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Longest Magnus step; segments are cut into equal sub-steps no longer
    /// than this.
    pub max_step: f64,
    /// Truncation threshold for the Chebyshev series.
    pub cheb_tol: f64,
    /// Step budget for one evolution.
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            max_step: 0.25,
            cheb_tol: 1e-13,
            max_steps: 50_000_000,
        }
    }
}

impl StepControl {
    /// Same control with the base step halved.
    pub fn halved(self) -> Self {
        StepControl {
            max_step: 0.5 * self.max_step,
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return contract(format!("max_step must be > 0, got {}", self.max_step));
        }
        if !(self.cheb_tol > 0.0 && self.cheb_tol < 1.0) {
            return contract(format!(
                "cheb_tol must lie in (0, 1), got {}",
                self.cheb_tol
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolveStats {
    pub segments: usize,
    pub steps: usize,
    pub matvecs: usize,
    pub norm_drift: f64,
}

/// Evolves the driver ground state from `0` to `spec.total_time()`.
pub fn evolve(
    spec: &HamiltonianSpec,
    noise: Option<&NoiseRealization>,
    control: &StepControl,
) -> Result<(StateVector, EvolveStats)> {
    let psi = initial_ground_state(spec.n_bits())?;
    evolve_from(spec, noise, control, psi)
}

/// Evolves an arbitrary initial state.
pub fn evolve_from(
    spec: &HamiltonianSpec,
    noise: Option<&NoiseRealization>,
    control: &StepControl,
    initial: StateVector,
) -> Result<(StateVector, EvolveStats)> {
    control.validate()?;
    if initial.n_bits() != spec.n_bits() {
        return contract("initial state and Hamiltonian differ in qubit count");
    }
    let total = spec.total_time();
    let mut stats = EvolveStats::default();
    if total == 0.0 {
        return Ok((initial, stats));
    }
    let breaks = match noise {
        Some(r) => {
            if (r.duration - total).abs() > 1e-9 * total.max(1.0) {
                return contract(format!(
                    "noise duration {} differs from run time {total}",
                    r.duration
                ));
            }
            r.breakpoints()
        }
        None => vec![0.0, total],
    };

    let start_norm = initial.norm();
    let mut psi = initial.into_amplitudes();
    let mut ws = Workspace::new(psi.len());
    let offset = 1.0 / 3.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1].min(total));
        if b <= a {
            continue;
        }
        stats.segments += 1;
        let field = noise.map_or([0.0; 3], |r| r.field(0.5 * (a + b)));
        let n = ((b - a) / control.max_step).ceil().max(1.0) as usize;
        if stats.steps + n > control.max_steps {
            return Err(Error::Integration(format!(
                "step budget {} exhausted at t = {a}",
                control.max_steps
            )));
        }
        let h = (b - a) / n as f64;
        for k in 0..n {
            let mid = a + (k as f64 + 0.5) * h;
            for t in [mid - offset * h, mid + offset * h] {
                stats.matvecs += propagate(
                    spec,
                    t / total,
                    field,
                    0.5 * h,
                    control.cheb_tol,
                    &mut psi,
                    &mut ws,
                );
            }
        }
        stats.steps += n;
    }

    let out = StateVector::from_amplitudes(spec.n_bits(), psi)?;
    stats.norm_drift = (out.norm() - start_norm).abs();
    if !(stats.norm_drift <= NORM_TOLERANCE) {
        return Err(Error::Integration(format!(
            "norm drift {:.3e} exceeds {NORM_TOLERANCE:e}",
            stats.norm_drift
        )));
    }
    Ok((out, stats))
}
