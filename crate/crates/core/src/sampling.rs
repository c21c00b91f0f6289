//! Random matrices and states for audits, sweeps, and tests.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{hermitian_part, partial_trace, ComplexMatrix, Subsystem, C64};
use crate::state::DensityMatrix;

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Hilbert–Schmidt-uniform full-rank density matrix.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    random_density_rank(rng, dim, dim)
}

/// Density matrix of rank `rank` (almost surely).
pub fn random_density_rank<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> DensityMatrix {
    assert!(rank >= 1 && rank <= dim);
    let g = ginibre(rng, dim, rank);
    DensityMatrix::normalized(&g * g.adjoint()).expect("Gram matrices are valid states")
}

pub fn random_ket<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<C64> {
    let g = ginibre(rng, dim, 1);
    let n = g.norm();
    g.iter().map(|z| z / n).collect()
}

pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    random_density_rank(rng, dim, 1)
}

/// `(G + G†)/2` with Ginibre `G`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    hermitian_part(&ginibre(rng, dim, dim))
}

/// Haar-distributed unitary via QR with the phase correction on `R`'s diagonal.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let qr = ginibre(rng, dim, dim).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Orthogonal projector of the given rank onto a random subspace.
pub fn random_projector<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> ComplexMatrix {
    let u = random_unitary(rng, dim);
    let cols = u.columns(0, rank);
    &cols * cols.adjoint()
}

/// Mixed bipartite state: a random pure state on `H ⊗ K ⊗ E` with `E` traced out.
/// `env_dim = 1` gives a pure (generically entangled) state.
pub fn random_bipartite<R: Rng + ?Sized>(rng: &mut R, dh: usize, dk: usize, env_dim: usize) -> DensityMatrix {
    let n = dh * dk;
    let psi = random_ket(rng, n * env_dim);
    let full = ComplexMatrix::from_fn(n * env_dim, n * env_dim, |i, j| psi[i] * psi[j].conj());
    let reduced = partial_trace(&full, (n, env_dim), Subsystem::K).expect("dims agree by construction");
    DensityMatrix::normalized(reduced).expect("partial traces of states are states")
}
