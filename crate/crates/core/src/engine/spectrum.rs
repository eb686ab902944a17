//! Two lowest eigenpairs of the noiseless `H(s)`.
//!
//! Without noise `H(s)` is real symmetric. Small registers are diagonalized
//! densely; larger ones use Lanczos with full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hamiltonian::HamiltonianSpec;
use crate::error::{contract, Error, Result};
use crate::seed::Seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    /// Residual tolerance, relative to `max(1, |θ|)`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Registers up to this size are diagonalized densely.
    pub dense_max_bits: usize,
    pub max_bits: usize,
    pub seed: Seed,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig {
            tol: 1e-10,
            max_iterations: 600,
            dense_max_bits: 8,
            max_bits: 12,
            seed: Seed(0x5eed),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowestPair {
    pub energies: [f64; 2],
    pub vectors: [Vec<f64>; 2],
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub s: Vec<f64>,
    pub ground: Vec<f64>,
    pub excited: Vec<f64>,
    pub min_gap: f64,
    pub min_gap_s: f64,
    /// `max_k |⟨E_1|(H_p - H_i)|E_g⟩|`.
    pub epsilon: f64,
    /// `epsilon / min_gap^2`.
    pub adiabatic_time: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    // Two passes keep the basis orthogonal to working precision.
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn dense_lowest(spec: &HamiltonianSpec, s: f64) -> LowestPair {
    let dim = spec.dim();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    let mut col = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        spec.apply_real(s, &e, &mut col);
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vec_of = |k: usize| {
        eig.eigenvectors
            .column(order[k])
            .iter()
            .copied()
            .collect::<Vec<_>>()
    };
    LowestPair {
        energies: [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]],
        vectors: [vec_of(0), vec_of(1)],
        iterations: 0,
        residual: 0.0,
    }
}

fn lanczos_lowest(spec: &HamiltonianSpec, s: f64, cfg: &EigenConfig) -> Result<LowestPair> {
    let dim = spec.dim();
    let mut rng = cfg.seed.rng();
    let mut random_unit = |basis: &[Vec<f64>]| {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, basis);
        normalize(&mut v);
        v
    };
    let max_iter = cfg.max_iterations.min(dim);
    let mut basis: Vec<Vec<f64>> = vec![random_unit(&[])];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let mut last_residual = f64::INFINITY;

    loop {
        let k = basis.len() - 1;
        spec.apply_real(s, &basis[k], &mut w);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        orthogonalize(&mut w, &basis);
        let b = dot(&w, &w).sqrt();
        let m = alpha.len();

        if m >= 2 && (m.is_multiple_of(4) || m == max_iter || b < 1e-12) {
            let mut t = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
            let res: Vec<f64> = order[..2]
                .iter()
                .map(|&j| {
                    let theta = eig.eigenvalues[j];
                    (b * eig.eigenvectors[(m - 1, j)]).abs() / theta.abs().max(1.0)
                })
                .collect();
            last_residual = res[0].max(res[1]);
            if last_residual <= cfg.tol || m == dim {
                let ritz = |j: usize| {
                    let mut v = vec![0.0; dim];
                    for (i, q) in basis.iter().enumerate() {
                        let c = eig.eigenvectors[(i, j)];
                        v.iter_mut().zip(q).for_each(|(x, y)| *x += c * y);
                    }
                    normalize(&mut v);
                    v
                };
                return Ok(LowestPair {
                    energies: [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]],
                    vectors: [ritz(order[0]), ritz(order[1])],
                    iterations: m,
                    residual: last_residual,
                });
            }
        }
        if m >= max_iter {
            break;
        }
        if b < 1e-12 {
            // Invariant subspace: continue in a fresh orthogonal direction.
            beta.push(0.0);
            let v = random_unit(&basis);
            basis.push(v);
        } else {
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
    }
    Err(Error::Eigensolver {
        iterations: alpha.len(),
        residual: last_residual,
        s,
    })
}

/// Two lowest eigenpairs of the noiseless `H(s)`.
pub fn lowest_two(spec: &HamiltonianSpec, s: f64, cfg: &EigenConfig) -> Result<LowestPair> {
    if !(0.0..=1.0).contains(&s) {
        return contract(format!("s = {s} outside [0, 1]"));
    }
    if spec.n_bits() > cfg.max_bits {
        return Err(Error::Capability(format!(
            "{} qubits exceed the eigensolver budget of {}",
            spec.n_bits(),
            cfg.max_bits
        )));
    }
    if spec.n_bits() <= cfg.dense_max_bits {
        Ok(dense_lowest(spec, s))
    } else {
        lanczos_lowest(spec, s, cfg)
    }
}

/// Gap profile on `n_samples` uniform points of `s ∈ [0, 1]`.
pub fn spectral_report(
    spec: &HamiltonianSpec,
    n_samples: usize,
    cfg: &EigenConfig,
) -> Result<GapReport> {
    if n_samples < 2 {
        return contract("need at least two schedule samples");
    }
    let dim = spec.dim();
    let mut report = GapReport {
        s: Vec::with_capacity(n_samples),
        ground: Vec::with_capacity(n_samples),
        excited: Vec::with_capacity(n_samples),
        min_gap: f64::INFINITY,
        min_gap_s: 0.0,
        epsilon: 0.0,
        adiabatic_time: 0.0,
    };
    let mut hp = vec![0.0; dim];
    let mut hi = vec![0.0; dim];
    for k in 0..n_samples {
        let s = k as f64 / (n_samples - 1) as f64;
        let pair = lowest_two(spec, s, cfg)?;
        let [eg, e1] = pair.energies;
        let gap = e1 - eg;
        if gap < report.min_gap {
            report.min_gap = gap;
            report.min_gap_s = s;
        }
        spec.apply_problem_real(&pair.vectors[0], &mut hp);
        spec.apply_real(0.0, &pair.vectors[0], &mut hi);
        let m: f64 = pair.vectors[1]
            .iter()
            .zip(hp.iter().zip(&hi))
            .map(|(v, (p, i))| v * (p - i))
            .sum();
        report.epsilon = report.epsilon.max(m.abs());
        report.s.push(s);
        report.ground.push(eg);
        report.excited.push(e1);
    }
    report.adiabatic_time = report.epsilon / (report.min_gap * report.min_gap);
    Ok(report)
}
