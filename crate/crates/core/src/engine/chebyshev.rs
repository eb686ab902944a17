//! Chebyshev expansion of `exp(-i h H)` for constant `H`.

use num_complex::Complex64;

use super::hamiltonian::HamiltonianSpec;

/// `J_0(x), J_1(x), ...` truncated after the terms drop below `tol`.
///
/// Miller's backward recurrence, normalized with `J_0 + 2 Σ J_2k = 1`.
pub fn bessel_j_series(x: f64, tol: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "bessel argument {x}");
    if x == 0.0 {
        return vec![1.0];
    }
    let kmax = (x + 12.0 * x.cbrt() + 15.0).ceil() as usize;
    let start = kmax + 20;
    let mut j = vec![0.0f64; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in &mut j[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    j.truncate(kmax + 1);
    for v in &mut j {
        *v /= norm;
    }
    let floor = 1e-3 * tol;
    while j.len() > 1 && (j.len() as f64 - 1.0) > x && j.last().is_some_and(|v| v.abs() < floor) {
        j.pop();
    }
    j
}

pub(crate) struct Workspace {
    prev: Vec<Complex64>,
    cur: Vec<Complex64>,
    next: Vec<Complex64>,
    acc: Vec<Complex64>,
}

impl Workspace {
    pub(crate) fn new(dim: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Workspace {
            prev: vec![z; dim],
            cur: vec![z; dim],
            next: vec![z; dim],
            acc: vec![z; dim],
        }
    }
}

/// `psi <- exp(-i h H(s, field)) psi`; returns the number of matrix-vector
/// products used.
pub(crate) fn propagate(
    spec: &HamiltonianSpec,
    s: f64,
    field: [f64; 3],
    h: f64,
    tol: f64,
    psi: &mut [Complex64],
    ws: &mut Workspace,
) -> usize {
    let (lo, hi) = spec.spectral_bounds(s, field);
    let center = 0.5 * (hi + lo);
    let radius = 0.5 * (hi - lo);
    let phase = Complex64::from_polar(1.0, -h * center);
    if radius * h < 1e-300 {
        psi.iter_mut().for_each(|a| *a *= phase);
        return 0;
    }
    let coef = bessel_j_series(h * radius, tol);
    let inv_r = radius.recip();
    // (-i)^k cycles through 1, -i, -1, i.
    let rot = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];

    let Workspace {
        prev,
        cur,
        next,
        acc,
    } = ws;
    prev.copy_from_slice(psi);
    for (a, &p) in acc.iter_mut().zip(prev.iter()) {
        *a = p * coef[0];
    }
    if coef.len() > 1 {
        spec.apply_into(s, field, prev, cur);
        for (c, &p) in cur.iter_mut().zip(prev.iter()) {
            *c = (*c - p * center) * inv_r;
        }
        let w = rot[1] * (2.0 * coef[1]);
        for (a, &c) in acc.iter_mut().zip(cur.iter()) {
            *a += w * c;
        }
    }
    for (k, &jk) in coef.iter().enumerate().skip(2) {
        spec.apply_into(s, field, cur, next);
        let w = rot[k % 4] * (2.0 * jk);
        for ((n, &c), (&p, a)) in next
            .iter_mut()
            .zip(cur.iter())
            .zip(prev.iter().zip(acc.iter_mut()))
        {
            *n = (*n - c * center) * (2.0 * inv_r) - p;
            *a += w * *n;
        }
        std::mem::swap(prev, cur);
        std::mem::swap(cur, next);
    }
    for (p, &a) in psi.iter_mut().zip(acc.iter()) {
        *p = a * phase;
    }
    coef.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference_values() {
        // Abramowitz & Stegun table 9.1.
        let j = bessel_j_series(1.0, 1e-16);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((j[2] - 0.114_903_484_931_900_5).abs() < 1e-15);
        let j = bessel_j_series(10.0, 1e-16);
        assert!((j[0] + 0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((j[1] - 0.043_472_746_168_861_44).abs() < 1e-14);
        assert!((j[10] - 0.207_486_106_633_358_9).abs() < 1e-14);
    }

    #[test]
    fn bessel_large_argument_normalization() {
        let x = 400.0;
        let j = bessel_j_series(x, 1e-14);
        let s = j[0] * j[0] + 2.0 * j.iter().skip(1).map(|v| v * v).sum::<f64>();
        assert!((s - 1.0).abs() < 1e-12, "{s}");
        assert!(j.len() > 400);
    }
}
