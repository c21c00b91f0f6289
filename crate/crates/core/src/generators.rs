//! Generator families `G(ρ) = T(ρ) + iΓ(ρ)` and the executable criteria
//! attached to them.
//!
//! The state operator obeys `iγ̇ = G(γγ†)γ` (ħ = 1), which gives
//! `iρ̇ = [T(ρ), ρ] + i{Γ(ρ), ρ}` for the density matrix. Trace is conserved
//! when `Γ` is zero-mean, `Tr[Γ(ρ)ρ] = 0`.
//!
//! All evaluators accept unnormalized Hermitian PSD inputs; blocks of a
//! measured state are fed to the generator with their own trace weight.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    anticommutator, commutator, hermiticity_defect, herm_eig, identity, max_abs, trace, trace_product,
    ComplexMatrix, SpectralDecomposition, C64, DEFAULT_SUPPORT_TOL, I,
};
use crate::parallel::Execution;
use crate::sampling;
use crate::serial;
use crate::state::{sqrt_factor, DensityMatrix};

/// Hermitian part of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum TFamily {
    /// `T(ρ) = H`, the linear limit.
    #[serde(rename = "vonNeumann")]
    VonNeumann,
    /// `T(ρ) = Hρ^q + ρ^q H`.
    #[serde(rename = "powerLaw")]
    PowerLaw { q: f64 },
}

/// Dissipative part of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family")]
pub enum GammaFamily {
    #[default]
    #[serde(rename = "none")]
    None,
    /// `Γ(ρ) = σ[ρ^r − Tr(ρ^{r+1})/Tr(ρ)]`.
    #[serde(rename = "zeroMean")]
    ZeroMean { sigma: f64, r: f64 },
    /// `Γ(ρ) = σ[ρ^r − ζH − ξI]` with `(ζ, ξ)` fixed by trace and energy conservation.
    #[serde(rename = "energyConserving")]
    EnergyConserving { sigma: f64, r: f64 },
    /// `Γ(ρ) = (I − ρ^{r−1}) A (I − P_ρ) + h.c.`, which vanishes on the support of `ρ`.
    #[serde(rename = "nonEssential")]
    NonEssential {
        r: f64,
        #[serde(rename = "A", with = "serial::matrix")]
        a: ComplexMatrix,
    },
}

impl GammaFamily {
    pub fn is_none(&self) -> bool {
        matches!(self, GammaFamily::None)
    }
}

/// Immutable, validated description of a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct GeneratorSpec {
    hamiltonian: ComplexMatrix,
    t_family: TFamily,
    gamma_family: GammaFamily,
    support_tol: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    #[serde(rename = "H", with = "serial::matrix")]
    hamiltonian: ComplexMatrix,
    t: TFamily,
    #[serde(default)]
    gamma: GammaFamily,
    #[serde(default = "default_support_tol")]
    support_tol: f64,
}

fn default_support_tol() -> f64 {
    DEFAULT_SUPPORT_TOL
}

impl TryFrom<RawSpec> for GeneratorSpec {
    type Error = Error;
    fn try_from(raw: RawSpec) -> Result<Self> {
        GeneratorSpec::new(raw.hamiltonian, raw.t, raw.gamma)?.with_support_tol(raw.support_tol)
    }
}

impl From<GeneratorSpec> for RawSpec {
    fn from(s: GeneratorSpec) -> Self {
        RawSpec { hamiltonian: s.hamiltonian, t: s.t_family, gamma: s.gamma_family, support_tol: s.support_tol }
    }
}

const SPEC_HERMITIAN_TOL: f64 = 1e-12;

impl GeneratorSpec {
    pub fn new(hamiltonian: ComplexMatrix, t_family: TFamily, gamma_family: GammaFamily) -> Result<Self> {
        crate::linalg::ensure_square(&hamiltonian)?;
        let d = hamiltonian.nrows();
        if hermiticity_defect(&hamiltonian) > SPEC_HERMITIAN_TOL {
            return Err(Error::validation("H is not Hermitian"));
        }
        if let TFamily::PowerLaw { q } = t_family {
            if !(q > 0.0) {
                return Err(Error::validation(format!("powerLaw requires q > 0, got {q}")));
            }
        }
        match &gamma_family {
            GammaFamily::None => {}
            GammaFamily::ZeroMean { sigma, r } | GammaFamily::EnergyConserving { sigma, r } => {
                if !(*r > 0.0) {
                    return Err(Error::validation(format!("r must be positive, got {r}")));
                }
                if !sigma.is_finite() {
                    return Err(Error::validation("sigma must be finite"));
                }
            }
            GammaFamily::NonEssential { r, a } => {
                if !(*r > 1.0) {
                    return Err(Error::validation(format!("nonEssential requires r > 1, got {r}")));
                }
                if a.shape() != (d, d) {
                    return Err(Error::DimensionMismatch { expected: d, found: a.nrows() });
                }
                if hermiticity_defect(a) > SPEC_HERMITIAN_TOL {
                    return Err(Error::validation("A is not Hermitian"));
                }
            }
        }
        Ok(Self { hamiltonian, t_family, gamma_family, support_tol: DEFAULT_SUPPORT_TOL })
    }

    /// Linear dynamics `T = H`, `Γ = 0`.
    pub fn von_neumann(hamiltonian: ComplexMatrix) -> Result<Self> {
        Self::new(hamiltonian, TFamily::VonNeumann, GammaFamily::None)
    }

    pub fn with_support_tol(mut self, rel_tol: f64) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::validation(format!("support tolerance must lie in (0, 1), got {rel_tol}")));
        }
        self.support_tol = rel_tol;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn t_family(&self) -> &TFamily {
        &self.t_family
    }

    pub fn gamma_family(&self) -> &GammaFamily {
        &self.gamma_family
    }

    pub fn support_tol(&self) -> f64 {
        self.support_tol
    }

    fn needs_spectrum(&self) -> bool {
        !matches!((&self.t_family, &self.gamma_family), (TFamily::VonNeumann, GammaFamily::None))
    }

    fn check_dim(&self, rho: &ComplexMatrix) -> Result<()> {
        if rho.shape() != (self.dim(), self.dim()) {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rho.nrows() });
        }
        Ok(())
    }

    /// `T(ρ)` and `Γ(ρ)` from a single eigen-decomposition of `ρ`.
    pub fn evaluate(&self, rho: &ComplexMatrix) -> Result<GeneratorValue> {
        self.check_dim(rho)?;
        if !self.needs_spectrum() {
            let d = self.dim();
            return Ok(GeneratorValue { t: self.hamiltonian.clone(), gamma: ComplexMatrix::zeros(d, d) });
        }
        let spec = herm_eig(rho)?;
        Ok(GeneratorValue { t: self.t_from(&spec)?, gamma: self.gamma_from(&spec, rho)? })
    }

    /// `G = T + iΓ`.
    pub fn generator(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(self.evaluate(rho)?.generator())
    }

    fn t_from(&self, spec: &SpectralDecomposition) -> Result<ComplexMatrix> {
        Ok(match self.t_family {
            TFamily::VonNeumann => self.hamiltonian.clone(),
            TFamily::PowerLaw { q } => {
                let rq = spec.power(q)?;
                &self.hamiltonian * &rq + &rq * &self.hamiltonian
            }
        })
    }

    fn gamma_from(&self, spec: &SpectralDecomposition, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.dim();
        Ok(match &self.gamma_family {
            GammaFamily::None => ComplexMatrix::zeros(d, d),
            GammaFamily::ZeroMean { sigma, r } => {
                let lam = spec.clipped()?;
                let tr: f64 = lam.iter().sum();
                let tr_next: f64 = lam.iter().map(|&l| if l > 0.0 { l.powf(r + 1.0) } else { 0.0 }).sum();
                let mean = if tr > 0.0 { tr_next / tr } else { 0.0 };
                (spec.power(*r)? - identity(d).scale(mean)).scale(*sigma)
            }
            GammaFamily::EnergyConserving { sigma, r } => {
                let (zeta, xi) = lagrange_from(&self.hamiltonian, *r, spec, rho)?;
                (spec.power(*r)? - self.hamiltonian.scale(zeta) - identity(d).scale(xi)).scale(*sigma)
            }
            GammaFamily::NonEssential { r, a } => {
                let id = identity(d);
                let left = &id - spec.power(r - 1.0)?;
                let outside = &id - spec.support_projector(self.support_tol)?;
                let half = left * a * outside;
                let adj = half.adjoint();
                half + adj
            }
        })
    }
}

/// `T` and `Γ` evaluated at one state.
#[derive(Debug, Clone)]
pub struct GeneratorValue {
    pub t: ComplexMatrix,
    pub gamma: ComplexMatrix,
}

impl GeneratorValue {
    pub fn generator(&self) -> ComplexMatrix {
        &self.t + self.gamma.map(|z| z * I)
    }

    /// `ρ̇ = −i[T, ρ] + {Γ, ρ}`.
    pub fn density_rate(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        commutator(&self.t, rho).map(|z| -z * I) + anticommutator(&self.gamma, rho)
    }
}

pub fn eval_t(spec: &GeneratorSpec, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    Ok(spec.evaluate(rho.matrix())?.t)
}

pub fn eval_gamma(spec: &GeneratorSpec, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    Ok(spec.evaluate(rho.matrix())?.gamma)
}

/// Below this `|det|` the trace/energy constraints cannot be solved separately.
pub const LAGRANGE_DET_TOL: f64 = 1e-12;

/// `(ζ, ξ)` with
/// `Tr[ρ^{r+1}] = ζ Tr[Hρ] + ξ Tr[ρ]` and `Tr[Hρ^{r+1}] = ζ Tr[H²ρ] + ξ Tr[Hρ]`,
/// which make `Γ = σ[ρ^r − ζH − ξI]` satisfy `Tr[Γρ] = 0` and `Re Tr[HΓρ] = 0`.
pub fn solve_lagrange_parameters(h: &ComplexMatrix, r: f64, rho: &DensityMatrix) -> Result<(f64, f64)> {
    if h.shape() != rho.matrix().shape() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: h.nrows() });
    }
    lagrange_from(h, r, &rho.spectrum(), rho.matrix())
}

fn lagrange_from(h: &ComplexMatrix, r: f64, spec: &SpectralDecomposition, rho: &ComplexMatrix) -> Result<(f64, f64)> {
    let rho_next = spec.power(r + 1.0)?;
    let h_rho = h * rho;
    let tr_rho = trace(rho).re;
    let tr_h_rho = trace(&h_rho).re;
    let tr_hh_rho = trace_product(h, &h_rho).re;
    let tr_next = trace(&rho_next).re;
    let tr_h_next = trace_product(h, &rho_next).re;
    let det = tr_h_rho * tr_h_rho - tr_rho * tr_hh_rho;
    if det.abs() <= LAGRANGE_DET_TOL {
        return Err(Error::DegenerateConstraint(format!(
            "H acts as a scalar on the support of rho (det = {det:.3e}); energy and trace constraints coincide"
        )));
    }
    let zeta = (tr_next * tr_h_rho - tr_rho * tr_h_next) / det;
    let xi = (tr_h_rho * tr_h_next - tr_hh_rho * tr_next) / det;
    Ok((zeta, xi))
}

/// `‖([T,ρ] + i{Γ,ρ}) − [H,ρ]‖_max`: how far the motion at `ρ` is from the
/// linear Hamiltonian motion under `spec.hamiltonian()`. Zero on pure states for
/// the pure-state-linear families.
pub fn pure_state_residual(spec: &GeneratorSpec, rho: &DensityMatrix) -> Result<f64> {
    let v = spec.evaluate(rho.matrix())?;
    let rho = rho.matrix();
    let lhs = commutator(&v.t, rho) + anticommutator(&v.gamma, rho).map(|z| z * I);
    Ok(crate::linalg::max_abs_diff(&lhs, &commutator(&spec.hamiltonian, rho)))
}

/// Outcome of the zero-mean audit.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroMeanReport {
    /// `|Tr[γ†Γ(γγ†)γ]|` per sample, with canonical `γ`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub passed: bool,
}

pub const ZERO_MEAN_TOL: f64 = 1e-9;

pub fn check_zero_mean(spec: &GeneratorSpec, samples: &[DensityMatrix]) -> Result<ZeroMeanReport> {
    check_zero_mean_with(|rho| Ok(spec.evaluate(rho.matrix())?.gamma), samples)
}

/// Zero-mean audit of an arbitrary dissipative map `ρ ↦ Γ(ρ)`.
pub fn check_zero_mean_with<F>(gamma: F, samples: &[DensityMatrix]) -> Result<ZeroMeanReport>
where
    F: Fn(&DensityMatrix) -> Result<ComplexMatrix>,
{
    let mut residuals = Vec::with_capacity(samples.len());
    for rho in samples {
        let g = sqrt_factor(rho);
        let g = g.matrix();
        let gam = gamma(rho)?;
        residuals.push(trace(&(g.adjoint() * gam * g)).norm());
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(ZeroMeanReport { passed: max_residual <= ZERO_MEAN_TOL, residuals, max_residual })
}

/// Zero-mean projection of a linear superoperator at `w`:
/// `a(w) − (Tr[w†a(w)] / Tr[w†w]) w`.
///
/// `a` acts on row-major vectorized `d×d` operators, so it is `d²×d²`.
pub fn make_zero_mean(a: &ComplexMatrix, w: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = crate::linalg::ensure_square(w)?;
    if a.shape() != (d * d, d * d) {
        return Err(Error::DimensionMismatch { expected: d * d, found: a.nrows() });
    }
    let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if norm == 0.0 {
        return Err(Error::validation("make_zero_mean is undefined at w = 0"));
    }
    let vec_w = nalgebra::DVector::from_fn(d * d, |k, _| w[(k / d, k % d)]);
    let vec_aw = a * &vec_w;
    let aw = ComplexMatrix::from_fn(d, d, |i, j| vec_aw[i * d + j]);
    let mean: C64 = vec_w.dotc(&vec_aw) / norm;
    Ok(aw - w.map(|z| z * mean))
}

/// `‖P_ρ Γ(ρ) P_ρ‖_max` against [`POLCHINSKI_TOL`].
#[derive(Debug, Clone, Serialize)]
pub struct PolchinskiCheck {
    pub residual: f64,
    pub passed: bool,
}

pub const POLCHINSKI_TOL: f64 = 1e-9;

pub fn check_polchinski_condition(spec: &GeneratorSpec, rho: &DensityMatrix, rel_tol: f64) -> Result<PolchinskiCheck> {
    let gamma = spec.evaluate(rho.matrix())?.gamma;
    let p = rho.spectrum().support_projector(rel_tol)?;
    let residual = max_abs(&(&p * gamma * &p));
    Ok(PolchinskiCheck { residual, passed: residual <= POLCHINSKI_TOL })
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Classification {
    /// No sample violated the support condition. Sampling cannot prove this.
    NonEssentialWitnessed { samples_checked: usize, samples_skipped: usize, note: String },
    EssentialWitnessed { witness: DensityMatrix, residual: f64, full_rank: bool, samples_checked: usize },
}

impl Classification {
    pub fn is_essential(&self) -> bool {
        matches!(self, Classification::EssentialWitnessed { .. })
    }
}

/// Sample states of dimension `spec.dim()` (alternating Hilbert–Schmidt
/// full-rank and random rank-deficient ones) and look for a violation of
/// `P_ρ Γ(ρ) P_ρ = 0`. Samples where `Γ` cannot be evaluated (degenerate
/// Lagrange constraints) are skipped and counted.
pub fn classify_dissipative_part(
    spec: &GeneratorSpec,
    sample_count: usize,
    seed: u64,
    exec: Execution,
) -> Result<Classification> {
    let d = spec.dim();
    let mut rng = StdRng::seed_from_u64(seed);
    let samples: Vec<(DensityMatrix, bool)> = (0..sample_count)
        .map(|k| {
            if k % 2 == 0 || d < 2 {
                (sampling::random_density(&mut rng, d), true)
            } else {
                let rank = rng.random_range(1..d);
                (sampling::random_density_rank(&mut rng, d, rank), false)
            }
        })
        .collect();
    let checks = exec.map(&samples, |(rho, _)| check_polchinski_condition(spec, rho, spec.support_tol));
    let mut skipped = 0;
    for ((rho, full_rank), check) in samples.iter().zip(checks) {
        match check {
            Ok(c) if !c.passed => {
                return Ok(Classification::EssentialWitnessed {
                    witness: rho.clone(),
                    residual: c.residual,
                    full_rank: *full_rank,
                    samples_checked: sample_count,
                })
            }
            Ok(_) => {}
            Err(Error::DegenerateConstraint(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(Classification::NonEssentialWitnessed {
        samples_checked: sample_count - skipped,
        samples_skipped: skipped,
        note: "no violation of P_rho Gamma(rho) P_rho = 0 found; sampling can falsify but not prove non-essentiality"
            .to_string(),
    })
}
