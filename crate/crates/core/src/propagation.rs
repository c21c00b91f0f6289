//! Time evolution of density matrices through their state operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::integrator::{self, GeneratorField, StepPolicy};
use crate::linalg::{
    identity, max_abs_diff, partial_trace, trace_product, ComplexMatrix, Subsystem,
};
use crate::parallel::Execution;
use crate::state::{entropy_of, entropy_of_spectrum, hs_norm_sqr, sqrt_factor, DensityMatrix, StateOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_true")]
    pub renormalize_each_step: bool,
    #[serde(default = "default_stride")]
    pub monitor_stride: usize,
}

fn default_true() -> bool {
    true
}

fn default_stride() -> usize {
    1
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64) -> Result<Self> {
        let cfg = Self { dt, t_final, renormalize_each_step: true, monitor_stride: 1 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        self.monitor_stride = stride;
        self.validate()?;
        Ok(self)
    }

    pub fn without_renormalization(mut self) -> Self {
        self.renormalize_each_step = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::validation(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.dt > self.t_final {
            return Err(Error::validation("dt must not exceed t_final"));
        }
        if self.monitor_stride == 0 {
            return Err(Error::validation("monitor_stride must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn policy(&self) -> StepPolicy {
        StepPolicy::unit(self.renormalize_each_step)
    }
}

/// Scalars recorded alongside each stored state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monitor {
    pub trace: f64,
    pub energy: f64,
    pub purity: f64,
    pub entropy: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

/// Extra diagnostics for states on `H ⊗ K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BipartiteMonitor {
    pub entropy_h: f64,
    pub entropy_k: f64,
    pub entropy_total: f64,
    pub mutual_info: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub monitors: Vec<Monitor>,
    /// Present for bipartite runs.
    pub bipartite: Option<Vec<BipartiteMonitor>>,
    pub dims: Option<(usize, usize)>,
    /// Worst relative `Tr[γ†γ]` change over a single step, before rescaling.
    pub max_norm_drift: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectories always hold the initial state")
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn max_trace_deviation(&self) -> f64 {
        self.monitors.iter().map(|m| (m.trace - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.monitors.iter().map(|m| m.eigenvalues[0]).fold(f64::INFINITY, f64::min)
    }

    /// Partial trace of every stored state.
    pub fn marginals(&self, over: Subsystem) -> Result<Vec<ComplexMatrix>> {
        let dims = self.dims.ok_or_else(|| Error::validation("trajectory is not bipartite"))?;
        self.states.iter().map(|s| partial_trace(s.matrix(), dims, over)).collect()
    }
}

pub(crate) fn monitor_of(rho: &DensityMatrix, energy_op: &ComplexMatrix) -> Monitor {
    let eigenvalues = rho.spectrum().eigenvalues;
    Monitor {
        trace: rho.trace(),
        energy: trace_product(energy_op, rho.matrix()).re,
        purity: trace_product(rho.matrix(), rho.matrix()).re,
        entropy: entropy_of_spectrum(&eigenvalues),
        eigenvalues,
    }
}

pub(crate) fn bipartite_monitor_of(rho: &DensityMatrix, dims: (usize, usize), total_entropy: f64) -> Result<BipartiteMonitor> {
    let s_h = entropy_of(&partial_trace(rho.matrix(), dims, Subsystem::K)?)?;
    let s_k = entropy_of(&partial_trace(rho.matrix(), dims, Subsystem::H)?)?;
    Ok(BipartiteMonitor { entropy_h: s_h, entropy_k: s_k, entropy_total: total_entropy, mutual_info: s_h + s_k - total_entropy })
}

/// Collects states and monitors on a stride.
pub(crate) struct Recorder<'a> {
    energy_op: &'a ComplexMatrix,
    dims: Option<(usize, usize)>,
    stride: usize,
    traj: Trajectory,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(energy_op: &'a ComplexMatrix, dims: Option<(usize, usize)>, stride: usize) -> Self {
        Self {
            energy_op,
            dims,
            stride,
            traj: Trajectory {
                times: Vec::new(),
                states: Vec::new(),
                monitors: Vec::new(),
                bipartite: dims.map(|_| Vec::new()),
                dims,
                max_norm_drift: 0.0,
            },
        }
    }

    pub(crate) fn record(&mut self, t: f64, rho: DensityMatrix) -> Result<()> {
        let m = monitor_of(&rho, self.energy_op);
        if let (Some(dims), Some(bp)) = (self.dims, self.traj.bipartite.as_mut()) {
            bp.push(bipartite_monitor_of(&rho, dims, m.entropy)?);
        }
        self.traj.times.push(t);
        self.traj.states.push(rho);
        self.traj.monitors.push(m);
        Ok(())
    }

    pub(crate) fn observe(&mut self, step: usize, last: usize, t: f64, gamma: &ComplexMatrix) -> Result<()> {
        if step % self.stride == 0 || step == last {
            self.record(t, DensityMatrix::from_factor(gamma))?;
        }
        Ok(())
    }

    pub(crate) fn finish(mut self, max_norm_drift: f64) -> Trajectory {
        self.traj.max_norm_drift = max_norm_drift;
        self.traj
    }
}

/// Integrate any generator field from `rho0` per `cfg`.
pub(crate) fn evolve_field<F: GeneratorField + ?Sized>(
    rho0: &DensityMatrix,
    field: &F,
    energy_op: &ComplexMatrix,
    dims: Option<(usize, usize)>,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if field.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), found: rho0.dim() });
    }
    let (n, _) = integrator::grid(cfg.t_final, cfg.dt);
    let mut rec = Recorder::new(energy_op, dims, cfg.monitor_stride);
    rec.record(0.0, rho0.clone())?;
    let mut carry = vec![sqrt_factor(rho0).into_matrix()];
    let drift = integrator::integrate(field, &mut carry, 0.0, cfg.t_final, cfg.dt, cfg.policy(), |step, t, c| {
        rec.observe(step, n, t, &c[0])
    })?;
    Ok(rec.finish(drift))
}

/// Result of a single integration step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Rescaled to unit norm when renormalization was requested.
    pub gamma: ComplexMatrix,
    /// Relative change of `Tr[γ†γ]` before any rescaling.
    pub norm_drift: f64,
}

impl StepOutcome {
    pub fn into_state_operator(self) -> Result<StateOperator> {
        StateOperator::new(self.gamma)
    }
}

/// One RK4 step of `iγ̇ = G(γγ†)γ`.
pub fn step_state_operator(gamma: &StateOperator, spec: &GeneratorSpec, dt: f64, renormalize: bool) -> Result<StepOutcome> {
    if spec.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: gamma.dim() });
    }
    let mut carry = vec![gamma.matrix().clone()];
    let norm_drift = integrator::rk4_step(spec, &mut carry, dt, StepPolicy::unit(renormalize), 0.0)?;
    Ok(StepOutcome { gamma: carry.pop().unwrap(), norm_drift })
}

pub fn evolve(rho0: &DensityMatrix, spec: &GeneratorSpec, cfg: &IntegratorConfig) -> Result<Trajectory> {
    evolve_field(rho0, spec, spec.hamiltonian(), None, cfg)
}

/// Integrate the density-matrix equation directly alongside the production
/// state-operator route and return `max_t ‖ρ_direct(t) − ρ_γ(t)‖_max` over
/// every step of the grid.
pub fn consistency_check_rho_route(rho0: &DensityMatrix, spec: &GeneratorSpec, cfg: &IntegratorConfig) -> Result<f64> {
    cfg.validate()?;
    let (n, h) = integrator::grid(cfg.t_final, cfg.dt);
    let mut carry = vec![sqrt_factor(rho0).into_matrix()];
    let mut direct = rho0.matrix().clone();
    let mut worst = 0.0f64;
    for step in 0..n {
        let t = step as f64 * h;
        integrator::rk4_step(spec, &mut carry, h, cfg.policy(), t)?;
        direct = integrator::rk4_density_step(spec, &direct, h)?;
        let via_gamma = &carry[0] * carry[0].adjoint();
        worst = worst.max(max_abs_diff(&direct, &via_gamma));
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct PropagatorRun {
    /// `S(t_final)`, with `S(0) = I`.
    pub propagator: ComplexMatrix,
    pub trajectory: Trajectory,
    /// `‖S ρ0 S† − ρ(t_final)‖_max`.
    pub reconstruction_residual: f64,
    /// `‖S S† − I‖_max`.
    pub unitarity_defect: f64,
    /// `‖P₀ S†S P₀ − P₀‖_max` with `P₀` the support projector of `ρ0`.
    pub support_isometry_defect: f64,
}

/// Integrate `iṠ = G(ρ(t)) S` alongside `γ`, sharing every stage generator.
pub fn accumulate_propagator(rho0: &DensityMatrix, spec: &GeneratorSpec, cfg: &IntegratorConfig) -> Result<PropagatorRun> {
    cfg.validate()?;
    if spec.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: rho0.dim() });
    }
    let d = rho0.dim();
    let (n, _) = integrator::grid(cfg.t_final, cfg.dt);
    let mut rec = Recorder::new(spec.hamiltonian(), None, cfg.monitor_stride);
    rec.record(0.0, rho0.clone())?;
    let mut carry = vec![sqrt_factor(rho0).into_matrix(), identity(d)];
    let drift = integrator::integrate(spec, &mut carry, 0.0, cfg.t_final, cfg.dt, cfg.policy(), |step, t, c| {
        rec.observe(step, n, t, &c[0])
    })?;
    let trajectory = rec.finish(drift);
    let s = carry.pop().unwrap();
    let rebuilt = &s * rho0.matrix() * s.adjoint();
    let p0 = rho0.spectrum().support_projector(spec.support_tol())?;
    Ok(PropagatorRun {
        reconstruction_residual: max_abs_diff(&rebuilt, trajectory.final_state().matrix()),
        unitarity_defect: max_abs_diff(&(&s * s.adjoint()), &identity(d)),
        support_isometry_defect: max_abs_diff(&(&p0 * s.adjoint() * &s * &p0), &p0),
        propagator: s,
        trajectory,
    })
}

/// Convex combination of autonomous processes started from the same state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture")]
pub struct MixtureSpec {
    weights: Vec<f64>,
    processes: Vec<GeneratorSpec>,
}

#[derive(Deserialize)]
struct RawMixture {
    weights: Vec<f64>,
    processes: Vec<GeneratorSpec>,
}

impl TryFrom<RawMixture> for MixtureSpec {
    type Error = Error;
    fn try_from(raw: RawMixture) -> Result<Self> {
        MixtureSpec::new(raw.weights, raw.processes)
    }
}

impl MixtureSpec {
    pub const WEIGHT_SUM_TOL: f64 = 1e-12;

    pub fn new(weights: Vec<f64>, processes: Vec<GeneratorSpec>) -> Result<Self> {
        if weights.is_empty() || weights.len() != processes.len() {
            return Err(Error::validation("mixture needs one positive weight per process"));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::validation("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > Self::WEIGHT_SUM_TOL {
            return Err(Error::validation(format!("mixture weights sum to {total}, expected 1")));
        }
        let d = processes[0].dim();
        if let Some(p) = processes.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
        }
        Ok(Self { weights, processes })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn processes(&self) -> &[GeneratorSpec] {
        &self.processes
    }
}

/// Each branch `k` evolves autonomously from `rho0` under its own law; the
/// output state is `Σ λ_k ρ_k(t)`. The energy column is `Σ λ_k Tr[H_k ρ_k(t)]`.
pub fn evolve_convex_mixture(
    rho0: &DensityMatrix,
    mix: &MixtureSpec,
    cfg: &IntegratorConfig,
    exec: Execution,
) -> Result<Trajectory> {
    let branches = exec.try_map(mix.processes(), |spec| evolve(rho0, spec, cfg))?;
    let first = &branches[0];
    let d = rho0.dim();
    let zero = ComplexMatrix::zeros(d, d);
    let mut rec = Recorder::new(&zero, None, 1);
    let mut energies = Vec::with_capacity(first.len());
    for (i, &t) in first.times.iter().enumerate() {
        let mut acc = ComplexMatrix::zeros(d, d);
        let mut energy = 0.0;
        for ((w, branch), spec) in mix.weights().iter().zip(&branches).zip(mix.processes()) {
            acc += branch.states[i].matrix().scale(*w);
            energy += w * trace_product(spec.hamiltonian(), branch.states[i].matrix()).re;
        }
        rec.record(t, DensityMatrix::from_hermitian_unchecked(acc))?;
        energies.push(energy);
    }
    let drift = branches.iter().map(|b| b.max_norm_drift).fold(0.0, f64::max);
    let mut traj = rec.finish(drift);
    for (m, e) in traj.monitors.iter_mut().zip(energies) {
        m.energy = e;
    }
    Ok(traj)
}

/// Norm of a state operator relative to one; exposed for diagnostics.
pub fn norm_defect(gamma: &ComplexMatrix) -> f64 {
    (hs_norm_sqr(gamma) - 1.0).abs()
}
