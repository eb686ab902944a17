//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Violation count of bit-vector `z` (bit `i - 1` of `z` is `z_i`) by direct
/// clause-by-clause counting.
pub fn brute_violations(clauses: &[[usize; 3]], z: u64) -> usize {
    clauses
        .iter()
        .filter(|cl| cl.iter().map(|&b| (z >> (b - 1)) & 1).sum::<u64>() != 1)
        .count()
}

pub fn brute_degrees(n: usize, clauses: &[[usize; 3]]) -> Vec<u32> {
    (1..=n)
        .map(|i| clauses.iter().filter(|cl| cl.contains(&i)).count() as u32)
        .collect()
}

pub fn pauli(which: char) -> CMat {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match which {
        'i' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        'x' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        // Column 0 is σ_y|0⟩ = i|1⟩.
        'y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("unknown pauli {which}"),
    }
}

/// `σ` acting on qubit `q` (1-based, qubit 1 = least-significant bit).
pub fn on_qubit(n: usize, q: usize, op: &CMat) -> CMat {
    let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for j in (1..=n).rev() {
        let f = if j == q { op.clone() } else { pauli('i') };
        m = m.kronecker(&f);
    }
    m
}

/// Dense `(1-s) Σ d_i (1 - σ_x)/2 + s diag(h) - γ Σ σ·N`.
pub fn dense_hamiltonian(
    n: usize,
    clauses: &[[usize; 3]],
    gamma: f64,
    s: f64,
    field: [f64; 3],
) -> CMat {
    let dim = 1usize << n;
    let d = brute_degrees(n, clauses);
    let mut h = CMat::zeros(dim, dim);
    let id = CMat::identity(dim, dim);
    for q in 1..=n {
        let x = on_qubit(n, q, &pauli('x'));
        h += (&id - &x) * c(0.5 * (1.0 - s) * f64::from(d[q - 1]), 0.0);
        h -= x * c(gamma * field[0], 0.0);
        h -= on_qubit(n, q, &pauli('y')) * c(gamma * field[1], 0.0);
        h -= on_qubit(n, q, &pauli('z')) * c(gamma * field[2], 0.0);
    }
    for z in 0..dim {
        h[(z, z)] += c(s * brute_violations(clauses, z as u64) as f64, 0.0);
    }
    h
}

fn exp_minus_i(h: &CMat, dt: f64) -> CMat {
    (h * c(0.0, -dt)).exp()
}

/// Exponential-midpoint propagation over `[a, b]` with `steps` steps.
#[allow(clippy::too_many_arguments)]
fn midpoint(
    n: usize,
    clauses: &[[usize; 3]],
    gamma: f64,
    total: f64,
    (a, b): (f64, f64),
    field: [f64; 3],
    steps: usize,
    psi: &CVec,
) -> CVec {
    let dt = (b - a) / steps as f64;
    let mut out = psi.clone();
    for k in 0..steps {
        let t = a + (k as f64 + 0.5) * dt;
        let h = dense_hamiltonian(n, clauses, gamma, t / total, field);
        out = exp_minus_i(&h, dt) * out;
    }
    out
}

/// Reference evolution from the uniform state through constant-field
/// segments `(a, b, field)`: exponential midpoint at two resolutions,
/// Richardson-combined per segment.
pub fn dense_evolve(
    n: usize,
    clauses: &[[usize; 3]],
    gamma: f64,
    total: f64,
    segments: &[(f64, f64, [f64; 3])],
    steps_per_unit: f64,
) -> CVec {
    let dim = 1usize << n;
    let mut psi = CVec::from_element(dim, c((dim as f64).sqrt().recip(), 0.0));
    for &(a, b, field) in segments {
        let steps = ((b - a) * steps_per_unit).ceil().max(2.0) as usize;
        let coarse = midpoint(n, clauses, gamma, total, (a, b), field, steps, &psi);
        let fine = midpoint(n, clauses, gamma, total, (a, b), field, 2 * steps, &psi);
        psi = (fine * c(4.0, 0.0) - coarse) * c(1.0 / 3.0, 0.0);
    }
    psi
}

/// `1 - |⟨a|b⟩|^2` for normalized inputs.
pub fn infidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ov: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    1.0 - ov.norm_sqr()
}

/// Adaptive Simpson quadrature with a fixed local tolerance, so that
/// isolated discontinuities are resolved down to the depth limit. The first
/// ten levels are always refined so narrow features cannot hide between
/// the initial samples.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || (depth <= 50 && delta.abs() <= 15.0 * tol) {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, tol, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 60)
}
