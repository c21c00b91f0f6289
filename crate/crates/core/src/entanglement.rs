//! Extensions of local nonlinear dynamics to `H ⊗ K`.
//!
//! The product-propagator ("Polchinski") extension drives the joint state
//! with `G_H(Tr_K ρ) ⊗ I_K + I_H ⊗ G_K(Tr_H ρ)`, the second term present only
//! when the environment has its own dynamics. Marginals are recomputed at
//! every RK stage. It is completely positive exactly when the local `Γ`
//! vanishes on the support of the local state, which the checks below
//! expose numerically.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::integrator::GeneratorField;
use crate::linalg::{identity, max_abs, max_abs_diff, partial_trace, tensor_product, trace, ComplexMatrix, Subsystem};
use crate::parallel::Execution;
use crate::propagation::{evolve, evolve_field, IntegratorConfig, Trajectory};
use crate::sampling;
use crate::state::DensityMatrix;

/// Density matrix on `H ⊗ K` with its factor dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    dims: (usize, usize),
    state: DensityMatrix,
}

impl BipartiteState {
    pub fn new(state: DensityMatrix, d_h: usize, d_k: usize) -> Result<Self> {
        if d_h == 0 || d_k == 0 || d_h * d_k != state.dim() {
            return Err(Error::DimensionMismatch { expected: d_h * d_k, found: state.dim() });
        }
        Ok(Self { dims: (d_h, d_k), state })
    }

    pub fn product(rho_h: &DensityMatrix, rho_k: &DensityMatrix) -> Self {
        let state = DensityMatrix::from_hermitian_unchecked(tensor_product(rho_h.matrix(), rho_k.matrix()));
        Self { dims: (rho_h.dim(), rho_k.dim()), state }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    /// `Tr_K ρ`.
    pub fn local_h(&self) -> DensityMatrix {
        let m = partial_trace(self.state.matrix(), self.dims, Subsystem::K).expect("dims checked at construction");
        DensityMatrix::from_hermitian_unchecked(m)
    }

    /// `Tr_H ρ`.
    pub fn local_k(&self) -> DensityMatrix {
        let m = partial_trace(self.state.matrix(), self.dims, Subsystem::H).expect("dims checked at construction");
        DensityMatrix::from_hermitian_unchecked(m)
    }
}

/// Local laws for the system and, optionally, the environment. Without
/// `spec_k` the environment is passive and noninteracting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteDynamics {
    #[serde(rename = "H")]
    pub spec_h: GeneratorSpec,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub spec_k: Option<GeneratorSpec>,
}

impl BipartiteDynamics {
    pub fn passive(spec_h: GeneratorSpec) -> Self {
        Self { spec_h, spec_k: None }
    }

    pub fn two_sided(spec_h: GeneratorSpec, spec_k: GeneratorSpec) -> Self {
        Self { spec_h, spec_k: Some(spec_k) }
    }

    pub(crate) fn check_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.spec_h.dim() != dims.0 {
            return Err(Error::DimensionMismatch { expected: dims.0, found: self.spec_h.dim() });
        }
        if let Some(k) = &self.spec_k {
            if k.dim() != dims.1 {
                return Err(Error::DimensionMismatch { expected: dims.1, found: k.dim() });
            }
        }
        Ok(())
    }

    /// `H_H ⊗ I + I ⊗ H_K`, the energy reported in bipartite monitors.
    pub fn energy_operator(&self, dims: (usize, usize)) -> ComplexMatrix {
        let mut e = tensor_product(self.spec_h.hamiltonian(), &identity(dims.1));
        if let Some(k) = &self.spec_k {
            e += tensor_product(&identity(dims.0), k.hamiltonian());
        }
        e
    }
}

/// The product-propagator generator as an integrable field.
pub(crate) struct PolchinskiField<'a> {
    pub dynamics: &'a BipartiteDynamics,
    pub dims: (usize, usize),
}

impl GeneratorField for PolchinskiField<'_> {
    fn dim(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    fn generator(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        polchinski_generator_raw(self.dynamics, rho, self.dims)
    }
}

pub(crate) fn polchinski_generator_raw(dynamics: &BipartiteDynamics, rho: &ComplexMatrix, dims: (usize, usize)) -> Result<ComplexMatrix> {
    let (dh, dk) = dims;
    let rho_h = partial_trace(rho, dims, Subsystem::K)?;
    let mut g = tensor_product(&dynamics.spec_h.generator(&rho_h)?, &identity(dk));
    if let Some(spec_k) = &dynamics.spec_k {
        let rho_k = partial_trace(rho, dims, Subsystem::H)?;
        g += tensor_product(&identity(dh), &spec_k.generator(&rho_k)?);
    }
    Ok(g)
}

/// `G_H(Tr_K ρ) ⊗ I_K (+ I_H ⊗ G_K(Tr_H ρ))`.
pub fn polchinski_generator(dynamics: &BipartiteDynamics, rho_hk: &BipartiteState) -> Result<ComplexMatrix> {
    dynamics.check_dims(rho_hk.dims)?;
    polchinski_generator_raw(dynamics, rho_hk.state.matrix(), rho_hk.dims)
}

/// Joint evolution under the product-propagator extension. Monitors carry
/// local entropies and mutual information.
pub fn evolve_bipartite(rho0: &BipartiteState, dynamics: &BipartiteDynamics, cfg: &IntegratorConfig) -> Result<Trajectory> {
    dynamics.check_dims(rho0.dims)?;
    let field = PolchinskiField { dynamics, dims: rho0.dims };
    let energy = dynamics.energy_operator(rho0.dims);
    evolve_field(&rho0.state, &field, &energy, Some(rho0.dims), cfg)
}

/// `‖Tr_H[(Γ_H(Tr_K ρ) ⊗ I_K) ρ]‖_max`: the rate at which a passive
/// environment's state would be disturbed.
pub fn check_environment_stationarity(dynamics: &BipartiteDynamics, rho_hk: &BipartiteState) -> Result<f64> {
    dynamics.check_dims(rho_hk.dims)?;
    let (_, dk) = rho_hk.dims;
    let gamma = dynamics.spec_h.evaluate(rho_hk.local_h().matrix())?.gamma;
    let lifted = tensor_product(&gamma, &identity(dk)) * rho_hk.state.matrix();
    Ok(max_abs(&partial_trace(&lifted, rho_hk.dims, Subsystem::H)?))
}

/// `g_H(Tr_K ρ) ⊗ Tr_H ρ`. Always a product state, whatever the input's correlations.
pub fn trivial_extension<G>(g_h: G, rho_hk: &BipartiteState) -> Result<BipartiteState>
where
    G: Fn(&ComplexMatrix) -> Result<ComplexMatrix>,
{
    let mapped = g_h(rho_hk.local_h().matrix())?;
    let joint = tensor_product(&mapped, rho_hk.local_k().matrix());
    BipartiteState::new(DensityMatrix::new(joint)?, rho_hk.dims.0, rho_hk.dims.1)
}

/// Transposition, a positive map with no linear completely positive extension.
pub fn transpose_map(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(m.transpose())
}

pub const LOCAL_EQUIVALENCE_TOL: f64 = 1e-9;

/// Whether `w` lies in the local equivalence class of `η ⊗ χ`:
/// `Tr_K w = Tr[χ] η` and `Tr_H w = Tr[η] χ`.
pub fn check_local_equivalence(w: &ComplexMatrix, eta: &ComplexMatrix, chi: &ComplexMatrix) -> Result<bool> {
    let dims = (eta.nrows(), chi.nrows());
    if !eta.is_square() || !chi.is_square() {
        return Err(Error::validation("eta and chi must be square"));
    }
    let n = crate::linalg::ensure_square(w)?;
    if n != dims.0 * dims.1 {
        return Err(Error::DimensionMismatch { expected: dims.0 * dims.1, found: n });
    }
    let lhs_h = partial_trace(w, dims, Subsystem::K)?;
    let lhs_k = partial_trace(w, dims, Subsystem::H)?;
    let rhs_h = eta * trace(chi);
    let rhs_k = chi * trace(eta);
    Ok(max_abs_diff(&lhs_h, &rhs_h) <= LOCAL_EQUIVALENCE_TOL && max_abs_diff(&lhs_k, &rhs_k) <= LOCAL_EQUIVALENCE_TOL)
}

/// Residual thresholds for [`verify_cp_extension`].
pub const CP_POSITIVITY_FLOOR: f64 = -1e-10;
pub const CP_MARGINAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct CpSampleReport {
    pub min_eigenvalue: f64,
    /// `max_t ‖Tr_K ρ(t) − g_H(ρ_H(0))(t)‖_max`.
    pub local_h_residual: f64,
    /// `max_t ‖Tr_H ρ(t) − ρ_K(t)‖_max` against the environment's own law (constant when passive).
    pub remote_k_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CpReport {
    pub samples: Vec<CpSampleReport>,
    pub all_passed: bool,
    /// Index of the first failing sample.
    pub first_failure: Option<usize>,
}

/// Evolve every sample under the extension and check positivity and both
/// marginal conditions.
pub fn verify_cp_extension(
    dynamics: &BipartiteDynamics,
    samples: &[BipartiteState],
    cfg: &IntegratorConfig,
    exec: Execution,
) -> Result<CpReport> {
    let reports = exec.try_map(samples, |s| audit_sample(dynamics, s, cfg))?;
    let first_failure = reports.iter().position(|r| !r.passed);
    Ok(CpReport { all_passed: first_failure.is_none(), first_failure, samples: reports })
}

fn audit_sample(dynamics: &BipartiteDynamics, sample: &BipartiteState, cfg: &IntegratorConfig) -> Result<CpSampleReport> {
    let joint = evolve_bipartite(sample, dynamics, cfg)?;
    let local_h = evolve(&DensityMatrix::new(sample.local_h().into_matrix())?, &dynamics.spec_h, cfg)?;
    let rho_k0 = sample.local_k();
    let local_k = match &dynamics.spec_k {
        Some(spec_k) => Some(evolve(&DensityMatrix::new(rho_k0.matrix().clone())?, spec_k, cfg)?),
        None => None,
    };
    let mut local_h_residual = 0.0f64;
    let mut remote_k_residual = 0.0f64;
    for (i, state) in joint.states.iter().enumerate() {
        let h = partial_trace(state.matrix(), sample.dims, Subsystem::K)?;
        let k = partial_trace(state.matrix(), sample.dims, Subsystem::H)?;
        local_h_residual = local_h_residual.max(max_abs_diff(&h, local_h.states[i].matrix()));
        let k_ref = local_k.as_ref().map_or(rho_k0.matrix(), |tr| tr.states[i].matrix());
        remote_k_residual = remote_k_residual.max(max_abs_diff(&k, k_ref));
    }
    let min_eigenvalue = joint.min_eigenvalue();
    Ok(CpSampleReport {
        passed: min_eigenvalue >= CP_POSITIVITY_FLOOR
            && local_h_residual <= CP_MARGINAL_TOL
            && remote_k_residual <= CP_MARGINAL_TOL,
        min_eigenvalue,
        local_h_residual,
        remote_k_residual,
    })
}

/// Generic correlated states on `H ⊗ K`: partial traces of random pure
/// states on `H ⊗ K ⊗ E` for varying `E`, with every third sample a convex
/// mixture of two such states.
pub fn entangled_samples(seed: u64, d_h: usize, d_k: usize, count: usize) -> Vec<BipartiteState> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let env = rng.random_range(1..=3);
            let mut m = sampling::random_bipartite(&mut rng, d_h, d_k, env).into_matrix();
            if i % 3 == 2 {
                let other = sampling::random_bipartite(&mut rng, d_h, d_k, 1).into_matrix();
                let w: f64 = rng.random_range(0.2..0.8);
                m = m.scale(w) + other.scale(1.0 - w);
            }
            let state = DensityMatrix::normalized(m).expect("convex mixtures of states are states");
            BipartiteState::new(state, d_h, d_k).expect("dims agree by construction")
        })
        .collect()
}
