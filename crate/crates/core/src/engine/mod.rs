//! State vectors, the time-dependent Hamiltonian and its integrator.

mod chebyshev;
mod evolve;
mod hamiltonian;
mod spectrum;
mod state;

/// Largest register the engine will allocate (`2^26` amplitudes, 1 GiB).
pub const MAX_STATE_BITS: usize = 26;

pub use chebyshev::bessel_j_series;
pub use evolve::{evolve, evolve_from, EvolveStats, StepControl, NORM_TOLERANCE};
pub use hamiltonian::{apply_hamiltonian, build_spec, DriverConvention, HamiltonianSpec};
pub use spectrum::{lowest_two, spectral_report, EigenConfig, GapReport, LowestPair};
pub use state::{initial_ground_state, StateVector};
