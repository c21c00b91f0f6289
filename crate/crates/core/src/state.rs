//! Validated states: density matrices, their square-root factors, and the
//! scalar diagnostics computed from them.

use crate::error::{Error, Result};
use crate::linalg::{
    self, hermitian_part, hermiticity_defect, herm_eig, max_abs_diff, partial_trace, trace, ComplexMatrix,
    SpectralDecomposition, Subsystem, C64, CLIP_FLOOR,
};

/// Hermitian, positive-semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-12;

    /// Validates and stores `(M + M†)/2`.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        linalg::ensure_square(&matrix)?;
        let defect = hermiticity_defect(&matrix);
        if defect > Self::HERMITIAN_TOL {
            return Err(Error::validation(format!("density matrix is not Hermitian (defect {defect:.3e})")));
        }
        let matrix = hermitian_part(&matrix);
        let tr = trace(&matrix).re;
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::validation(format!("density matrix has trace {tr}, expected 1")));
        }
        let lo = herm_eig(&matrix)?.min_eigenvalue();
        if lo < CLIP_FLOOR {
            return Err(Error::validation(format!("density matrix has negative eigenvalue {lo:.3e}")));
        }
        Ok(Self { matrix })
    }

    /// Divides by the trace, then validates.
    pub fn normalized(matrix: ComplexMatrix) -> Result<Self> {
        linalg::ensure_square(&matrix)?;
        let tr = trace(&matrix).re;
        if !(tr > 0.0) {
            return Err(Error::validation("cannot normalize a matrix with non-positive trace"));
        }
        Self::new(matrix.unscale(tr))
    }

    /// `γγ†` taken as is. Positivity holds by construction; the trace is
    /// whatever the factor's norm is.
    pub(crate) fn from_factor(gamma: &ComplexMatrix) -> Self {
        Self { matrix: hermitian_part(&(gamma * gamma.adjoint())) }
    }

    pub(crate) fn from_hermitian_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix: hermitian_part(&matrix) }
    }

    /// `|ψ⟩⟨ψ|` for a vector normalized on the way in.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        if psi.iter().all(|z| z.norm() == 0.0) {
            return Err(Error::validation("zero state vector"));
        }
        Self::new(linalg::ket_projector(psi))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: linalg::identity(dim).unscale(dim as f64) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn spectrum(&self) -> SpectralDecomposition {
        herm_eig(&self.matrix).expect("density matrices are Hermitian by construction")
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }
}

/// Square-root factor `γ` of a density matrix, `ρ = γγ†`, with unit
/// Hilbert–Schmidt norm. Defined up to `γ → γU` for unitary `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateOperator {
    matrix: ComplexMatrix,
}

impl StateOperator {
    pub const NORM_TOL: f64 = 1e-10;

    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        linalg::ensure_square(&matrix)?;
        let n2 = hs_norm_sqr(&matrix);
        if (n2 - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::validation(format!("state operator has squared norm {n2}, expected 1")));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn norm_sqr(&self) -> f64 {
        hs_norm_sqr(&self.matrix)
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_factor(&self.matrix)
    }

    /// `γU`. Fails unless `U` is unitary to 1e-10.
    pub fn regauge(&self, u: &ComplexMatrix) -> Result<Self> {
        let n = self.dim();
        if u.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, found: u.nrows() });
        }
        let defect = max_abs_diff(&(u * u.adjoint()), &linalg::identity(n));
        if defect > 1e-10 {
            return Err(Error::validation(format!("gauge matrix is not unitary (defect {defect:.3e})")));
        }
        Ok(Self { matrix: &self.matrix * u })
    }
}

/// `Tr[γ†γ]`.
pub fn hs_norm_sqr(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `V diag(max(λ,0)^s) V†`.
pub fn matrix_power(rho: &DensityMatrix, s: f64) -> Result<ComplexMatrix> {
    rho.spectrum().power(s)
}

/// Canonical Hermitian positive square root as the state operator.
pub fn sqrt_factor(rho: &DensityMatrix) -> StateOperator {
    let gamma = rho.spectrum().map(|l| l.max(0.0).sqrt());
    StateOperator { matrix: gamma }
}

pub fn support_projector(rho: &DensityMatrix, rel_tol: f64) -> Result<ComplexMatrix> {
    rho.spectrum().support_projector(rel_tol)
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    linalg::trace_product(rho.matrix(), rho.matrix()).re
}

/// `−Σ λ ln λ` over positive eigenvalues.
pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    eigenvalues.iter().filter(|&&l| l > 0.0).map(|&l| -l * l.ln()).sum()
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&rho.spectrum().eigenvalues)
}

/// Entropy of any Hermitian PSD matrix (reduced states, blocks).
pub fn entropy_of(m: &ComplexMatrix) -> Result<f64> {
    let eig = herm_eig(m)?.clipped()?;
    Ok(entropy_of_spectrum(&eig))
}

/// `S(ρ_H) + S(ρ_K) − S(ρ_HK)`.
pub fn mutual_information(rho_hk: &DensityMatrix, dims: (usize, usize)) -> Result<f64> {
    let rho_h = partial_trace(rho_hk.matrix(), dims, Subsystem::K)?;
    let rho_k = partial_trace(rho_hk.matrix(), dims, Subsystem::H)?;
    Ok(entropy_of(&rho_h)? + entropy_of(&rho_k)? - von_neumann_entropy(rho_hk))
}
