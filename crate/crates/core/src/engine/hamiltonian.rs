//! Matrix-free `H(s) = (1 - s) H_i + s H_p - γ Σ_i σ_i · N`.
//!
//! `H_p` is diagonal with the violation counts `h(z)`. The driver is a sum of
//! single-qubit x-fields whose strength on qubit `i` is its clause degree
//! `d_i`. Pauli conventions: `σ_z|0⟩ = |0⟩`, `σ_y|0⟩ = i|1⟩`,
//! `σ_y|1⟩ = -i|0⟩`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::StateVector;
use crate::ec3::Ec3Instance;
use crate::error::{contract, Error, Result};

/// Normalization of the driver Hamiltonian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverConvention {
    /// `H_i = Σ d_i (1 - σ_x^i) / 2`: ground energy 0, single-flip gap `d_i`.
    #[default]
    Shifted,
    /// `H_i = -Σ d_i σ_x^i`.
    Pauli,
}

impl DriverConvention {
    /// `(c0, cx)` such that the qubit-`i` driver term is `d_i (c0 + cx σ_x)`.
    fn coefficients(self) -> (f64, f64) {
        match self {
            DriverConvention::Shifted => (0.5, -0.5),
            DriverConvention::Pauli => (0.0, -1.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    n_bits: usize,
    x_field: Vec<u32>,
    diag_h: Arc<[u16]>,
    coupling: f64,
    total_time: f64,
    driver: DriverConvention,
}

impl HamiltonianSpec {
    /// Assembles a spec from explicit parts; `diag_h` has `2^n_bits` entries.
    pub fn from_parts(
        n_bits: usize,
        x_field: Vec<u32>,
        diag_h: Vec<u16>,
        coupling: f64,
        total_time: f64,
    ) -> Result<Self> {
        if n_bits == 0 || n_bits > super::MAX_STATE_BITS {
            return Err(Error::Capability(format!(
                "{n_bits} qubits outside 1..={}",
                super::MAX_STATE_BITS
            )));
        }
        if x_field.len() != n_bits {
            return contract("x_field length differs from n_bits");
        }
        if diag_h.len() != 1usize << n_bits {
            return contract("diag_h must have 2^n_bits entries");
        }
        if !coupling.is_finite() {
            return contract("coupling must be finite");
        }
        if !(total_time >= 0.0 && total_time.is_finite()) {
            return contract(format!("total time must be >= 0, got {total_time}"));
        }
        Ok(HamiltonianSpec {
            n_bits,
            x_field,
            diag_h: diag_h.into(),
            coupling,
            total_time,
            driver: DriverConvention::default(),
        })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_bits
    }

    pub fn x_field(&self) -> &[u32] {
        &self.x_field
    }

    pub fn diag_h(&self) -> &[u16] {
        &self.diag_h
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn driver(&self) -> DriverConvention {
        self.driver
    }

    pub fn with_driver(mut self, driver: DriverConvention) -> Self {
        self.driver = driver;
        self
    }

    /// Same Hamiltonian over a different run time; the diagonal is shared.
    pub fn with_total_time(&self, total_time: f64) -> Result<Self> {
        if !(total_time >= 0.0 && total_time.is_finite()) {
            return contract(format!("total time must be >= 0, got {total_time}"));
        }
        Ok(HamiltonianSpec {
            total_time,
            ..self.clone()
        })
    }

    fn h_range(&self) -> (f64, f64) {
        let (lo, hi) = self
            .diag_h
            .iter()
            .fold((u16::MAX, 0u16), |(lo, hi), &h| (lo.min(h), hi.max(h)));
        (f64::from(lo), f64::from(hi))
    }

    /// Rigorous bounds on the spectrum of `H(s)` with constant field `field`.
    ///
    /// The single-qubit part is a sum of commuting 2x2 terms with known
    /// eigenvalues; Weyl's inequality adds the diagonal range of `s H_p`.
    pub fn spectral_bounds(&self, s: f64, field: [f64; 3]) -> (f64, f64) {
        let (c0, cx) = self.driver.coefficients();
        let g = self.coupling;
        let (mut lo, mut hi) = (0.0, 0.0);
        for &d in &self.x_field {
            let d = f64::from(d);
            let center = (1.0 - s) * d * c0;
            let bx = (1.0 - s) * d * cx - g * field[0];
            let radius = (bx * bx + (g * field[1]).powi(2) + (g * field[2]).powi(2)).sqrt();
            lo += center - radius;
            hi += center + radius;
        }
        let (hmin, hmax) = self.h_range();
        (lo + s * hmin, hi + s * hmax)
    }

    /// `out = H(s) input` for a constant noise field.
    pub(crate) fn apply_into(
        &self,
        s: f64,
        field: [f64; 3],
        input: &[Complex64],
        out: &mut [Complex64],
    ) {
        let (c0, cx) = self.driver.coefficients();
        let g = self.coupling;
        let n = self.n_bits;
        let offset: f64 = self
            .x_field
            .iter()
            .map(|&d| (1.0 - s) * f64::from(d) * c0)
            .sum();
        let z = g * field[2];
        for (k, (o, &x)) in out.iter_mut().zip(input).enumerate() {
            let ones = f64::from(k.count_ones());
            *o = x * (offset + s * f64::from(self.diag_h[k]) - z * (n as f64 - 2.0 * ones));
        }

        // Qubit i couples the lower and upper halves of each 2^(i+1) block:
        // ⟨k|M_i|k ^ 2^i⟩ = re + i·im when bit i of k is clear, re - i·im
        // when it is set.
        let im = g * field[1];
        for (i, &d) in self.x_field.iter().enumerate() {
            let re = (1.0 - s) * f64::from(d) * cx - g * field[0];
            let half = 1usize << i;
            let blocks = out
                .chunks_exact_mut(2 * half)
                .zip(input.chunks_exact(2 * half));
            if im == 0.0 {
                for (ob, ib) in blocks {
                    let (o_lo, o_hi) = ob.split_at_mut(half);
                    let (i_lo, i_hi) = ib.split_at(half);
                    for (o, &x) in o_lo.iter_mut().zip(i_hi) {
                        *o += x * re;
                    }
                    for (o, &x) in o_hi.iter_mut().zip(i_lo) {
                        *o += x * re;
                    }
                }
            } else {
                let (c_lo, c_hi) = (Complex64::new(re, im), Complex64::new(re, -im));
                for (ob, ib) in blocks {
                    let (o_lo, o_hi) = ob.split_at_mut(half);
                    let (i_lo, i_hi) = ib.split_at(half);
                    for (o, &x) in o_lo.iter_mut().zip(i_hi) {
                        *o += c_lo * x;
                    }
                    for (o, &x) in o_hi.iter_mut().zip(i_lo) {
                        *o += c_hi * x;
                    }
                }
            }
        }
    }

    /// Real symmetric noiseless `H(s)`: `out = H(s) input`.
    pub(crate) fn apply_real(&self, s: f64, input: &[f64], out: &mut [f64]) {
        let (c0, cx) = self.driver.coefficients();
        let offset: f64 = self
            .x_field
            .iter()
            .map(|&d| (1.0 - s) * f64::from(d) * c0)
            .sum();
        let flips: Vec<f64> = self
            .x_field
            .iter()
            .map(|&d| (1.0 - s) * f64::from(d) * cx)
            .collect();
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = (offset + s * f64::from(self.diag_h[k])) * input[k];
            for (i, &f) in flips.iter().enumerate() {
                acc += f * input[k ^ (1 << i)];
            }
            *o = acc;
        }
    }

    /// `out = H_p input`.
    pub(crate) fn apply_problem_real(&self, input: &[f64], out: &mut [f64]) {
        for ((o, &x), &h) in out.iter_mut().zip(input).zip(self.diag_h.iter()) {
            *o = f64::from(h) * x;
        }
    }
}

/// Builds `d_i` and the `h(z)` table for an instance.
pub fn build_spec(
    instance: &Ec3Instance,
    coupling: f64,
    total_time: f64,
) -> Result<HamiltonianSpec> {
    let n = instance.n_bits();
    if n > super::MAX_STATE_BITS {
        return Err(Error::Capability(format!(
            "a 2^{n} violation table exceeds the {}-qubit budget",
            super::MAX_STATE_BITS
        )));
    }
    let diag: Vec<u16> = (0u64..1 << n)
        .map(|z| instance.violations_at(z) as u16)
        .collect();
    HamiltonianSpec::from_parts(n, instance.bit_degrees(), diag, coupling, total_time)
}

/// `[(1 - s) H_i + s H_p - γ Σ σ_i · N] |state⟩`.
pub fn apply_hamiltonian(
    spec: &HamiltonianSpec,
    s: f64,
    field: [f64; 3],
    state: &StateVector,
) -> Result<StateVector> {
    if state.n_bits() != spec.n_bits {
        return contract("state and Hamiltonian differ in qubit count");
    }
    let mut out = vec![Complex64::new(0.0, 0.0); spec.dim()];
    spec.apply_into(s, field, state.amplitudes(), &mut out);
    StateVector::from_amplitudes(spec.n_bits, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ec3::{Clause, Ec3Instance};
    use crate::engine::initial_ground_state;

    fn inst(n: usize, cl: &[[usize; 3]]) -> Ec3Instance {
        Ec3Instance::new(
            n,
            cl.iter()
                .map(|&[a, b, c]| Clause::new(a, b, c).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn degrees_examples() {
        let s = build_spec(&inst(3, &[[1, 2, 3]]), 1.0, 1.0).unwrap();
        assert_eq!(s.x_field(), &[1, 1, 1]);
        let s = build_spec(&inst(4, &[[1, 2, 3], [1, 2, 4]]), 1.0, 1.0).unwrap();
        assert_eq!(s.x_field(), &[2, 2, 1, 1]);
    }

    #[test]
    fn driver_annihilates_uniform_state() {
        let spec = build_spec(&inst(4, &[[1, 2, 3], [2, 3, 4]]), 1.0, 1.0).unwrap();
        let psi = initial_ground_state(4).unwrap();
        let out = apply_hamiltonian(&spec, 0.0, [0.0; 3], &psi).unwrap();
        assert!(out.norm() < 1e-15);
    }

    #[test]
    fn problem_hamiltonian_is_diagonal() {
        let i = inst(4, &[[1, 2, 3], [2, 3, 4]]);
        let spec = build_spec(&i, 1.0, 1.0).unwrap();
        for k in 0..16u64 {
            let z = crate::ec3::Bitstring::new(k, 4).unwrap();
            let h = i.violation_count(&z).unwrap() as f64;
            let psi = StateVector::basis(4, k).unwrap();
            let out = apply_hamiltonian(&spec, 1.0, [0.0; 3], &psi).unwrap();
            for (j, a) in out.amplitudes().iter().enumerate() {
                let expect = if j as u64 == k { h } else { 0.0 };
                assert!((a - Complex64::new(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn sigma_y_convention() {
        // Single qubit, no driver, y-field 1, γ = 1: H = -σ_y.
        let spec = HamiltonianSpec::from_parts(1, vec![0], vec![0, 0], 1.0, 1.0).unwrap();
        let zero = StateVector::basis(1, 0).unwrap();
        let out = apply_hamiltonian(&spec, 0.5, [0.0, 1.0, 0.0], &zero).unwrap();
        // -σ_y|0⟩ = -i|1⟩
        assert!((out.amplitudes()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(out.amplitudes()[0].norm() < 1e-15);
        let one = StateVector::basis(1, 1).unwrap();
        let out = apply_hamiltonian(&spec, 0.5, [0.0, 1.0, 0.0], &one).unwrap();
        // -σ_y|1⟩ = i|0⟩
        assert!((out.amplitudes()[0] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn bounds_contain_shifted_driver_spectrum() {
        let spec = build_spec(&inst(4, &[[1, 2, 3], [1, 2, 4]]), 1.0, 1.0).unwrap();
        let (lo, hi) = spec.spectral_bounds(0.0, [0.0; 3]);
        assert!(lo.abs() < 1e-15);
        assert!((hi - 6.0).abs() < 1e-15);
    }
}
