//! Dense complex-matrix primitives.
//!
//! Everything here works on plain [`ComplexMatrix`] values. The flattened
//! index of a bipartite space `H ⊗ K` is `i_H * d_K + i_K`, i.e. the `H`
//! factor is the slow index; [`tensor_product`] and [`partial_trace`] both
//! follow that convention.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Largest tolerated anti-Hermitian residue for inputs to [`herm_eig`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues in `[CLIP_FLOOR, 0)` are treated as zero; anything lower is an error.
pub const CLIP_FLOOR: f64 = -1e-10;
/// Default relative threshold for [`support_projector`].
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-10;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Elementwise max modulus, `‖M‖_max`.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `‖M − M†‖_max`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M†) / 2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Real part of `Tr[A B]` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b + b * a
}

/// Real diagonal matrix from a slice.
pub fn diag(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { C64::new(0.0, 0.0) })
}

/// Projector `|v⟩⟨v|` onto a (not necessarily normalized) vector, normalized first.
pub fn ket_projector(v: &[C64]) -> ComplexMatrix {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let n = v.len();
    ComplexMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj() / (norm * norm))
}

pub(crate) fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(Error::validation(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())))
    }
}

/// Relative size below which an eigenvalue is treated as a roundoff zero by
/// [`SpectralDecomposition::power`].
pub const POWER_ZERO_REL: f64 = 1e-14;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Columns are orthonormal eigenvectors, in the same order as `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            scaled.column_mut(j).scale_mut(w);
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|x| x)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("empty spectrum")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Eigenvalues with roundoff negatives clipped to zero. Fails when any
    /// eigenvalue lies below [`CLIP_FLOOR`].
    pub fn clipped(&self) -> Result<Vec<f64>> {
        if let Some(&lo) = self.eigenvalues.first() {
            if lo < CLIP_FLOOR {
                return Err(Error::NegativeEigenvalue(lo));
            }
        }
        Ok(self.eigenvalues.iter().map(|&l| l.max(0.0)).collect())
    }

    /// `V diag(max(λ, 0)^s) V†` for `s > 0`. Eigenvalues within roundoff of
    /// zero (below [`POWER_ZERO_REL`] times the largest) count as zero, since
    /// small exponents would otherwise amplify them.
    pub fn power(&self, s: f64) -> Result<ComplexMatrix> {
        if !(s > 0.0) {
            return Err(Error::validation(format!("matrix power exponent must be positive, got {s}")));
        }
        self.clipped()?;
        let cut = POWER_ZERO_REL * self.max_eigenvalue().max(0.0);
        Ok(self.map(|l| if l > cut { l.powf(s) } else { 0.0 }))
    }

    /// Projector onto eigenvectors with `λ > rel_tol · λ_max`.
    pub fn support_projector(&self, rel_tol: f64) -> Result<ComplexMatrix> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::validation(format!("support tolerance must lie in (0, 1), got {rel_tol}")));
        }
        let top = self.max_eigenvalue();
        if !(top > 0.0) {
            return Err(Error::validation("support projector of a matrix with no positive eigenvalue"));
        }
        let cut = rel_tol * top;
        Ok(self.map(|l| if l > cut { 1.0 } else { 0.0 }))
    }
}

/// Hermitian eigen-decomposition with ascending eigenvalues.
pub fn herm_eig(a: &ComplexMatrix) -> Result<SpectralDecomposition> {
    ensure_square(a)?;
    let defect = hermiticity_defect(a);
    if defect > HERMITIAN_TOL {
        return Err(Error::validation(format!("matrix is not Hermitian (defect {defect:.3e})")));
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let n = order.len();
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// Fractional power of a positive-semidefinite Hermitian matrix (trace unconstrained).
pub fn psd_power(a: &ComplexMatrix, s: f64) -> Result<ComplexMatrix> {
    herm_eig(a)?.power(s)
}

/// Kronecker product `A ⊗ B` with `A` as the major index.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Which factor of `H ⊗ K` a partial trace removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    H,
    K,
}

/// Partial trace over one factor of `H ⊗ K`.
pub fn partial_trace(w: &ComplexMatrix, dims: (usize, usize), over: Subsystem) -> Result<ComplexMatrix> {
    let (dh, dk) = dims;
    let n = ensure_square(w)?;
    if dh == 0 || dk == 0 || dh * dk != n {
        return Err(Error::DimensionMismatch { expected: dh * dk, found: n });
    }
    Ok(match over {
        Subsystem::K => ComplexMatrix::from_fn(dh, dh, |i, j| (0..dk).map(|k| w[(i * dk + k, j * dk + k)]).sum()),
        Subsystem::H => ComplexMatrix::from_fn(dk, dk, |k, l| (0..dh).map(|i| w[(i * dk + k, i * dk + l)]).sum()),
    })
}

/// Support projector of a Hermitian PSD matrix of any trace.
pub fn support_projector_of(a: &ComplexMatrix, rel_tol: f64) -> Result<ComplexMatrix> {
    herm_eig(a)?.support_projector(rel_tol)
}
