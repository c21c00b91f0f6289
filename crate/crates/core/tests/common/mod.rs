//! Independent oracles shared by the integration tests. Nothing here calls
//! the eigen-solver or integrator under test.
#![allow(dead_code)]

use nlqd_core::linalg::{identity, ComplexMatrix, C64};

pub fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), c(0.0)])
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

/// `exp(−i θ n̂·σ) = cos θ I − i sin θ n̂·σ` for a unit vector `n̂`.
pub fn pauli_rotation(n: [f64; 3], theta: f64) -> ComplexMatrix {
    let ns = sigma_x().scale(n[0]) + sigma_y().scale(n[1]) + sigma_z().scale(n[2]);
    identity(2).scale(theta.cos()) - ns.map(|z| z * C64::new(0.0, theta.sin()))
}

/// `exp(−iHt)` by Taylor series with scaling and squaring.
pub fn expm_minus_i(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let a = h.map(|z| z * C64::new(0.0, -t));
    let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = a.unscale(2f64.powi(squarings as i32));
    let n = h.nrows();
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=30 {
        term = &term * &a / c(k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn conjugate(u: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    u * rho * u.adjoint()
}

/// Partial trace by explicit index sums, independent of the library routine.
pub fn brute_partial_trace(w: &ComplexMatrix, dh: usize, dk: usize, keep_h: bool) -> ComplexMatrix {
    if keep_h {
        ComplexMatrix::from_fn(dh, dh, |i, j| (0..dk).map(|k| w[(i * dk + k, j * dk + k)]).sum())
    } else {
        ComplexMatrix::from_fn(dk, dk, |i, j| (0..dh).map(|h| w[(h * dk + i, h * dk + j)]).sum())
    }
}

/// Eigenvalues of a Hermitian 2×2 in closed form, ascending.
pub fn eig2(m: &ComplexMatrix) -> [f64; 2] {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)].norm();
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    [mid - rad, mid + rad]
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace_re(m: &ComplexMatrix) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}
