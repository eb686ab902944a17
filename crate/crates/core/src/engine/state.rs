use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{contract, Error, Result};

/// Pure state on `n_bits` qubits; index `k` is the basis string with `z_1`
/// in the least-significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_bits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(n_bits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1usize << n_bits {
            return contract(format!(
                "{} amplitudes for {n_bits} qubits",
                amplitudes.len()
            ));
        }
        Ok(StateVector { n_bits, amplitudes })
    }

    /// `|k⟩`.
    pub fn basis(n_bits: usize, index: u64) -> Result<Self> {
        let dim = 1usize << n_bits;
        if index as usize >= dim {
            return contract(format!(
                "basis index {index} out of range for {n_bits} qubits"
            ));
        }
        let mut a = vec![Complex64::new(0.0, 0.0); dim];
        a[index as usize] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            n_bits,
            amplitudes: a,
        })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn probability(&self, index: u64) -> f64 {
        self.amplitudes
            .get(index as usize)
            .map_or(0.0, |a| a.norm_sqr())
    }

    /// Binary dump: `n_bits` as little-endian `u32`, then `2^n_bits`
    /// `(re, im)` pairs of little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n_bits as u32).to_le_bytes())?;
        for a in &self.amplitudes {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let n_bits = u32::from_le_bytes(word) as usize;
        if n_bits > 30 {
            return Err(Error::Parse(format!("implausible qubit count {n_bits}")));
        }
        let mut amps = Vec::with_capacity(1 << n_bits);
        let mut buf = [0u8; 8];
        for _ in 0..1usize << n_bits {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            r.read_exact(&mut buf)?;
            amps.push(Complex64::new(re, f64::from_le_bytes(buf)));
        }
        Self::from_amplitudes(n_bits, amps)
    }
}

/// Ground state of the driver: every amplitude `2^{-N/2}`.
pub fn initial_ground_state(n_bits: usize) -> Result<StateVector> {
    if n_bits == 0 {
        return contract("need at least one qubit");
    }
    if n_bits > super::MAX_STATE_BITS {
        return Err(Error::Capability(format!(
            "2^{n_bits} amplitudes exceed the {}-qubit budget",
            super::MAX_STATE_BITS
        )));
    }
    let dim = 1usize << n_bits;
    let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
    StateVector::from_amplitudes(n_bits, vec![amp; dim])
}
