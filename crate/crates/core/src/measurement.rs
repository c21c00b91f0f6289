//! Binary projective measurements, post-measurement block dynamics and
//! two-time correlations on entangled pairs.
//!
//! A measurement with projector `P` and complement `Q = I − P` maps
//! `ρ → PρP + QρQ`. When `H` (and `A`, if present) commute with `P`, the two
//! blocks never mix again and can be propagated on their own.
//!
//! For the correlation scenarios the joint probability of a positive `P_H` at
//! `t1` followed by a positive `P_K` at `t2` is computed two ways:
//!
//! * **full**: evolve to `t1`, measure, evolve the block-resolved state with
//!   each `H` block driven by its own (unnormalized) marginal and a single
//!   `K` generator driven by `Tr_H` of the whole state, then project.
//! * **switch-off**: never collapse; the `H` generator is simply dropped
//!   after `t1` and both projectors are applied at `t2`.

use serde::{Deserialize, Serialize};

use crate::entanglement::{BipartiteDynamics, BipartiteState, PolchinskiField};
use crate::error::{Error, Result};
use crate::generators::{GammaFamily, GeneratorSpec};
use crate::integrator::{self, GeneratorField, StepPolicy};
use crate::linalg::{
    hermitian_part, hermiticity_defect, identity, max_abs, max_abs_diff, partial_trace, tensor_product, trace,
    ComplexMatrix, Subsystem,
};
use crate::propagation::{evolve, IntegratorConfig, Trajectory};
use crate::serial;
use crate::state::{sqrt_factor, DensityMatrix};

const PROJECTOR_HERMITIAN_TOL: f64 = 1e-12;
const PROJECTOR_IDEMPOTENCE_TOL: f64 = 1e-10;
/// `‖PXQ‖_max` above this means `X` couples the two blocks.
pub const INVARIANCE_TOL: f64 = 1e-10;

/// Complete binary measurement `{P, I − P}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "serial::MatrixJson", into = "serial::MatrixJson")]
pub struct MeasurementSetup {
    p: ComplexMatrix,
    q: ComplexMatrix,
}

impl TryFrom<serial::MatrixJson> for MeasurementSetup {
    type Error = Error;
    fn try_from(j: serial::MatrixJson) -> Result<Self> {
        MeasurementSetup::new(j.to_matrix()?)
    }
}

impl From<MeasurementSetup> for serial::MatrixJson {
    fn from(m: MeasurementSetup) -> Self {
        serial::MatrixJson::from_matrix(&m.p)
    }
}

impl MeasurementSetup {
    pub fn new(p: ComplexMatrix) -> Result<Self> {
        let d = crate::linalg::ensure_square(&p)?;
        if hermiticity_defect(&p) > PROJECTOR_HERMITIAN_TOL {
            return Err(Error::validation("projector is not Hermitian"));
        }
        let p = hermitian_part(&p);
        if max_abs_diff(&(&p * &p), &p) > PROJECTOR_IDEMPOTENCE_TOL {
            return Err(Error::validation("projector is not idempotent"));
        }
        let q = identity(d) - &p;
        Ok(Self { p, q })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn p(&self) -> &ComplexMatrix {
        &self.p
    }

    pub fn q(&self) -> &ComplexMatrix {
        &self.q
    }

    /// `P ⊗ I_K`.
    pub fn on_h(&self, d_k: usize) -> Self {
        let p = tensor_product(&self.p, &identity(d_k));
        Self { q: identity(p.nrows()) - &p, p }
    }

    /// `I_H ⊗ P`.
    pub fn on_k(&self, d_h: usize) -> Self {
        let p = tensor_product(&identity(d_h), &self.p);
        Self { q: identity(p.nrows()) - &p, p }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.dim() });
        }
        Ok(())
    }
}

/// `PρP + QρQ` and `Tr[PρP]`.
pub fn projective_measure(rho: &DensityMatrix, m: &MeasurementSetup) -> Result<(DensityMatrix, f64)> {
    m.check_dim(rho.dim())?;
    let (post, p) = measure_raw(rho.matrix(), m);
    Ok((DensityMatrix::from_hermitian_unchecked(post), p))
}

fn measure_raw(rho: &ComplexMatrix, m: &MeasurementSetup) -> (ComplexMatrix, f64) {
    let pp = &m.p * rho * &m.p;
    let p = trace(&pp).re;
    (hermitian_part(&(pp + &m.q * rho * &m.q)), p)
}

fn coupling(x: &ComplexMatrix, m: &MeasurementSetup) -> f64 {
    max_abs(&(&m.p * x * &m.q))
}

/// Whether `H` (and `A`, when given) leave the ranges of `P` and `Q` invariant.
pub fn check_subspace_invariance(h: &ComplexMatrix, a: Option<&ComplexMatrix>, m: &MeasurementSetup) -> bool {
    if h.shape() != m.p.shape() || a.is_some_and(|a| a.shape() != m.p.shape()) {
        return false;
    }
    coupling(h, m) <= INVARIANCE_TOL && a.is_none_or(|a| coupling(a, m) <= INVARIANCE_TOL)
}

fn require_invariance(spec: &GeneratorSpec, m: &MeasurementSetup) -> Result<()> {
    m.check_dim(spec.dim())?;
    let a = match spec.gamma_family() {
        GammaFamily::NonEssential { a, .. } => Some(a),
        _ => None,
    };
    if !check_subspace_invariance(spec.hamiltonian(), a, m) {
        return Err(Error::InvarianceViolation("dynamics couple the measured subspace to its complement".into()));
    }
    Ok(())
}

/// `P G(x) P`, the generator of one block.
struct BlockField<'a> {
    spec: &'a GeneratorSpec,
    p: &'a ComplexMatrix,
}

impl GeneratorField for BlockField<'_> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn generator(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(self.p * self.spec.generator(rho)? * self.p)
    }
}

/// Evolve a block-diagonal state both as a whole and block by block.
/// Each block keeps its own trace weight and feeds its unnormalized self to
/// the generator. Returns the whole-state trajectory and
/// `max_t ‖ρ(t) − ρ_P(t) − ρ_Q(t)‖_max`.
pub fn evolve_block_diagonal(
    rho_bd: &DensityMatrix,
    spec: &GeneratorSpec,
    m: &MeasurementSetup,
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, f64)> {
    require_invariance(spec, m)?;
    if max_abs(&(&m.p * rho_bd.matrix() * &m.q)) > INVARIANCE_TOL {
        return Err(Error::validation("state is not block diagonal with respect to the measurement"));
    }
    let full = evolve(rho_bd, spec, cfg)?;
    let mut sum = vec![ComplexMatrix::zeros(rho_bd.dim(), rho_bd.dim()); full.len()];
    for proj in [&m.p, &m.q] {
        let block = hermitian_part(&(proj * rho_bd.matrix() * proj));
        for (acc, b) in sum.iter_mut().zip(evolve_block(&block, spec, proj, cfg)?) {
            *acc += b;
        }
    }
    let residual = full.states.iter().zip(&sum).map(|(s, b)| max_abs_diff(s.matrix(), b)).fold(0.0, f64::max);
    Ok((full, residual))
}

/// Block states on the same recording schedule as [`evolve`].
fn evolve_block(block: &ComplexMatrix, spec: &GeneratorSpec, p: &ComplexMatrix, cfg: &IntegratorConfig) -> Result<Vec<ComplexMatrix>> {
    let (n, _) = integrator::grid(cfg.t_final, cfg.dt);
    let weight = trace(block).re;
    if weight <= 0.0 {
        let count = 1 + (1..=n).filter(|s| s % cfg.monitor_stride == 0 || *s == n).count();
        return Ok(vec![block.clone(); count]);
    }
    let field = BlockField { spec, p };
    let policy = StepPolicy { renormalize: cfg.renormalize_each_step, target_norm: weight };
    let mut out = vec![block.clone()];
    let mut carry = vec![crate::linalg::psd_power(block, 0.5)?];
    integrator::integrate(&field, &mut carry, 0.0, cfg.t_final, cfg.dt, policy, |step, _, c| {
        if step % cfg.monitor_stride == 0 || step == n {
            out.push(hermitian_part(&(&c[0] * c[0].adjoint())));
        }
        Ok(())
    })?;
    Ok(out)
}

/// Two-time correlation setup on `H ⊗ K`. Both local laws must be free of a
/// dissipative part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCorrelation", into = "RawCorrelation")]
pub struct CorrelationScenario {
    pub rho0: BipartiteState,
    pub dynamics: BipartiteDynamics,
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    pub p_h: MeasurementSetup,
    pub p_k: MeasurementSetup,
    pub dt: f64,
}

#[derive(Serialize, Deserialize)]
struct RawCorrelation {
    rho0: DensityMatrix,
    #[serde(rename = "d_H")]
    d_h: usize,
    #[serde(rename = "d_K")]
    d_k: usize,
    #[serde(rename = "dyn")]
    dynamics: BipartiteDynamics,
    t0: f64,
    t1: f64,
    t2: f64,
    #[serde(rename = "P_H")]
    p_h: MeasurementSetup,
    #[serde(rename = "P_K")]
    p_k: MeasurementSetup,
    #[serde(default = "default_dt")]
    dt: f64,
}

fn default_dt() -> f64 {
    1e-3
}

impl TryFrom<RawCorrelation> for CorrelationScenario {
    type Error = Error;
    fn try_from(r: RawCorrelation) -> Result<Self> {
        let rho0 = BipartiteState::new(r.rho0, r.d_h, r.d_k)?;
        CorrelationScenario::new(rho0, r.dynamics, (r.t0, r.t1, r.t2), r.p_h, r.p_k, r.dt)
    }
}

impl From<CorrelationScenario> for RawCorrelation {
    fn from(s: CorrelationScenario) -> Self {
        let (d_h, d_k) = s.rho0.dims();
        RawCorrelation {
            rho0: s.rho0.state().clone(),
            d_h,
            d_k,
            dynamics: s.dynamics,
            t0: s.t0,
            t1: s.t1,
            t2: s.t2,
            p_h: s.p_h,
            p_k: s.p_k,
            dt: s.dt,
        }
    }
}

impl CorrelationScenario {
    pub fn new(
        rho0: BipartiteState,
        dynamics: BipartiteDynamics,
        (t0, t1, t2): (f64, f64, f64),
        p_h: MeasurementSetup,
        p_k: MeasurementSetup,
        dt: f64,
    ) -> Result<Self> {
        let sc = Self { rho0, dynamics, t0, t1, t2, p_h, p_k, dt };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        let (d_h, d_k) = self.rho0.dims();
        if !(self.t0.is_finite() && self.t1.is_finite() && self.t2.is_finite()) {
            return Err(Error::TimeOrdering("times must be finite".into()));
        }
        if !(self.t0 <= self.t1 && self.t1 < self.t2) {
            return Err(Error::TimeOrdering(format!(
                "need t0 <= t1 < t2, got {} / {} / {}",
                self.t0, self.t1, self.t2
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation(format!("dt must be positive, got {}", self.dt)));
        }
        self.dynamics.check_dims((d_h, d_k))?;
        self.p_h.check_dim(d_h)?;
        self.p_k.check_dim(d_k)?;
        let specs = std::iter::once(&self.dynamics.spec_h).chain(self.dynamics.spec_k.as_ref());
        if specs.into_iter().any(|s| !s.gamma_family().is_none()) {
            return Err(Error::validation("correlation scenarios require gamma = none on both sides"));
        }
        require_invariance(&self.dynamics.spec_h, &self.p_h)
    }

    fn dims(&self) -> (usize, usize) {
        self.rho0.dims()
    }
}

/// `I_H ⊗ G_K(Tr_H ρ)`, or zero for a passive environment.
struct RemoteField<'a> {
    spec_k: Option<&'a GeneratorSpec>,
    dims: (usize, usize),
}

impl GeneratorField for RemoteField<'_> {
    fn dim(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    fn generator(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.dim();
        match self.spec_k {
            None => Ok(ComplexMatrix::zeros(n, n)),
            Some(k) => {
                let rho_k = partial_trace(rho, self.dims, Subsystem::H)?;
                Ok(tensor_product(&identity(self.dims.0), &k.generator(&rho_k)?))
            }
        }
    }
}

/// Generator after the `H` measurement: each `H` block driven by its own
/// marginal, one `K` generator driven by the whole state.
struct PostMeasurementField<'a> {
    spec_h: &'a GeneratorSpec,
    p: ComplexMatrix,
    q: ComplexMatrix,
    remote: RemoteField<'a>,
}

impl<'a> PostMeasurementField<'a> {
    fn new(sc: &'a CorrelationScenario) -> Self {
        Self {
            spec_h: &sc.dynamics.spec_h,
            p: sc.p_h.p.clone(),
            q: sc.p_h.q.clone(),
            remote: RemoteField { spec_k: sc.dynamics.spec_k.as_ref(), dims: sc.dims() },
        }
    }
}

impl GeneratorField for PostMeasurementField<'_> {
    fn dim(&self) -> usize {
        self.remote.dim()
    }

    fn generator(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let dims = self.remote.dims;
        let lift = |x: &ComplexMatrix| tensor_product(x, &identity(dims.1));
        let mut g_h = ComplexMatrix::zeros(dims.0, dims.0);
        for proj in [&self.p, &self.q] {
            let block = partial_trace(&(lift(proj) * rho * lift(proj)), dims, Subsystem::K)?;
            if trace(&block).re > 0.0 {
                g_h += proj * self.spec_h.generator(&hermitian_part(&block))? * proj;
            }
        }
        Ok(lift(&g_h) + self.remote.generator(rho)?)
    }
}

/// Integrate `rho` over `[t_start, t_end]`; `observe` sees each post-step state.
fn segment<F, O>(field: &F, rho: &ComplexMatrix, t_start: f64, t_end: f64, dt: f64, mut observe: O) -> Result<ComplexMatrix>
where
    F: GeneratorField + ?Sized,
    O: FnMut(f64, &ComplexMatrix),
{
    if t_end <= t_start {
        return Ok(rho.clone());
    }
    let mut carry = vec![sqrt_factor(&DensityMatrix::from_hermitian_unchecked(rho.clone())).into_matrix()];
    integrator::integrate(field, &mut carry, t_start, t_end, dt, StepPolicy::unit(true), |_, t, c| {
        observe(t, &hermitian_part(&(&c[0] * c[0].adjoint())));
        Ok(())
    })?;
    Ok(hermitian_part(&(&carry[0] * carry[0].adjoint())))
}

fn state_at_t1(sc: &CorrelationScenario) -> Result<ComplexMatrix> {
    let field = PolchinskiField { dynamics: &sc.dynamics, dims: sc.dims() };
    segment(&field, sc.rho0.state().matrix(), sc.t0, sc.t1, sc.dt, |_, _| {})
}

/// Joint weight `Tr[(P_H ⊗ P_K) ρ (P_H ⊗ P_K)]`.
fn joint_weight(rho: &ComplexMatrix, sc: &CorrelationScenario) -> f64 {
    let (d_h, d_k) = sc.dims();
    let both = sc.p_h.on_h(d_k).p * sc.p_k.on_k(d_h).p;
    trace(&(&both * rho * both.adjoint())).re
}

struct FullRoute {
    rho_t1: ComplexMatrix,
    p_first: f64,
    rho_t2: ComplexMatrix,
    /// `(t, Tr_H ρ(t))` on `(t1, t2]`.
    remote: Vec<(f64, ComplexMatrix)>,
}

fn run_full_route(sc: &CorrelationScenario) -> Result<FullRoute> {
    let dims = sc.dims();
    let rho_t1 = state_at_t1(sc)?;
    let (post, p_first) = measure_raw(&rho_t1, &sc.p_h.on_h(dims.1));
    let field = PostMeasurementField::new(sc);
    let mut remote = Vec::new();
    let rho_t2 = segment(&field, &post, sc.t1, sc.t2, sc.dt, |t, r| {
        remote.push((t, partial_trace(r, dims, Subsystem::H).expect("dims validated")));
    })?;
    Ok(FullRoute { rho_t1, p_first, rho_t2, remote })
}

/// Measure `P_H` at `t1` and `P_K` at `t2`; the joint probability of two
/// positive outcomes.
pub fn correlation_full_route(sc: &CorrelationScenario) -> Result<f64> {
    sc.validate()?;
    Ok(joint_weight(&run_full_route(sc)?.rho_t2, sc))
}

/// Same joint probability from the unmeasured state, with the `H` generator
/// active only before `t1`.
pub fn correlation_switch_off_route(sc: &CorrelationScenario) -> Result<f64> {
    sc.validate()?;
    let rho_t1 = state_at_t1(sc)?;
    let remote = RemoteField { spec_k: sc.dynamics.spec_k.as_ref(), dims: sc.dims() };
    let rho_t2 = segment(&remote, &rho_t1, sc.t1, sc.t2, sc.dt, |_, _| {})?;
    Ok(joint_weight(&rho_t2, sc))
}

/// `‖T_K(Tr_H ρ) − T_K(Tr_H[PρP + QρQ])‖_max` at `ρ(t1)`. With a passive
/// environment the two marginals themselves are compared.
pub fn check_remote_generator_unaffected(sc: &CorrelationScenario) -> Result<f64> {
    sc.validate()?;
    remote_generator_residual(sc, &state_at_t1(sc)?)
}

fn remote_generator_residual(sc: &CorrelationScenario, rho: &ComplexMatrix) -> Result<f64> {
    let dims = sc.dims();
    let (post, _) = measure_raw(rho, &sc.p_h.on_h(dims.1));
    let before = partial_trace(rho, dims, Subsystem::H)?;
    let after = partial_trace(&post, dims, Subsystem::H)?;
    Ok(match &sc.dynamics.spec_k {
        Some(k) => max_abs_diff(&k.evaluate(&before)?.t, &k.evaluate(&after)?.t),
        None => max_abs_diff(&before, &after),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub p_joint_full: f64,
    pub p_joint_switch: f64,
    pub p_first: f64,
    /// `p_joint_full / p_first`; absent when the first outcome has zero weight.
    pub p_conditional: Option<f64>,
    /// Conditional probability of a second positive `P_H` at `t2`.
    pub p_conditional_repeat: Option<f64>,
    pub route_gap: f64,
    pub remote_generator_residual: f64,
    /// `max_{t ∈ (t1, t2]} ‖Tr_H ρ_measured(t) − Tr_H ρ_unmeasured(t)‖_max`.
    pub no_signaling_residual: f64,
}

/// Both routes plus the structural diagnostics, sharing the `t0 → t1` leg.
pub fn correlation_report(sc: &CorrelationScenario) -> Result<CorrelationReport> {
    sc.validate()?;
    let dims = sc.dims();
    let full = run_full_route(sc)?;
    let p_joint_full = joint_weight(&full.rho_t2, sc);

    let remote = RemoteField { spec_k: sc.dynamics.spec_k.as_ref(), dims };
    let switched = segment(&remote, &full.rho_t1, sc.t1, sc.t2, sc.dt, |_, _| {})?;
    let p_joint_switch = joint_weight(&switched, sc);

    let polchinski = PolchinskiField { dynamics: &sc.dynamics, dims };
    let mut k = 0;
    let mut no_signaling_residual = 0.0f64;
    segment(&polchinski, &full.rho_t1, sc.t1, sc.t2, sc.dt, |_, r| {
        let unmeasured = partial_trace(r, dims, Subsystem::H).expect("dims validated");
        no_signaling_residual = no_signaling_residual.max(max_abs_diff(&unmeasured, &full.remote[k].1));
        k += 1;
    })?;

    let p_h = sc.p_h.on_h(dims.1);
    let repeat = trace(&(&p_h.p * &full.rho_t2 * &p_h.p)).re;
    let conditional = |x: f64| (full.p_first > 0.0).then(|| x / full.p_first);
    Ok(CorrelationReport {
        p_joint_full,
        p_joint_switch,
        p_first: full.p_first,
        p_conditional: conditional(p_joint_full),
        p_conditional_repeat: conditional(repeat),
        route_gap: (p_joint_full - p_joint_switch).abs(),
        remote_generator_residual: remote_generator_residual(sc, &full.rho_t1)?,
        no_signaling_residual,
    })
}
