//! Scenario files: a versioned envelope around a kind-specific payload.
//!
//! ```json
//! { "schema": "nlqd/1", "kind": "evolve", "seed": 7, "output": "out.csv", "payload": { ... } }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use nlqd_core::entanglement::{
    entangled_samples, evolve_bipartite, verify_cp_extension, BipartiteDynamics, BipartiteState,
};
use nlqd_core::generators::{check_zero_mean, classify_dissipative_part};
use nlqd_core::measurement::{correlation_report, CorrelationScenario};
use nlqd_core::propagation::{evolve, evolve_convex_mixture};
use nlqd_core::serial::MatrixJson;
use nlqd_core::{sampling, DensityMatrix, Execution, GeneratorSpec, IntegratorConfig, MixtureSpec, Trajectory, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::error::CliError;
use crate::report;

pub const SCHEMA_VERSION: &str = "nlqd/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Evolve,
    EvolveBipartite,
    Mixture,
    MeasureCorrelation,
    Check,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Evolve => "evolve",
            Kind::EvolveBipartite => "evolve_bipartite",
            Kind::Mixture => "mixture",
            Kind::MeasureCorrelation => "measure_correlation",
            Kind::Check => "check",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    schema: String,
    kind: Kind,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output: Option<PathBuf>,
    payload: Value,
}

/// Command-line settings that take precedence over the file.
pub struct Overrides {
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub dump_states: bool,
    pub exec: Execution,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvolvePayload {
    rho0: Value,
    spec: GeneratorSpec,
    config: IntegratorConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BipartitePayload {
    rho0: Value,
    #[serde(rename = "d_H")]
    d_h: usize,
    #[serde(rename = "d_K")]
    d_k: usize,
    #[serde(rename = "dyn")]
    dynamics: BipartiteDynamics,
    config: IntegratorConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixturePayload {
    rho0: Value,
    mixture: MixtureSpec,
    config: IntegratorConfig,
}

#[derive(Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
enum CheckPayload {
    /// Evolve generic correlated states under the extension and audit them.
    CpAudit {
        #[serde(rename = "dyn")]
        dynamics: BipartiteDynamics,
        #[serde(rename = "d_H")]
        d_h: usize,
        #[serde(rename = "d_K")]
        d_k: usize,
        samples: usize,
        config: IntegratorConfig,
    },
    Classify { spec: GeneratorSpec, samples: usize },
    ZeroMean { spec: GeneratorSpec, samples: usize },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomState {
    dim: usize,
    #[serde(default)]
    rank: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Ket {
    re: Vec<f64>,
    #[serde(default)]
    im: Option<Vec<f64>>,
}

fn payload<T: DeserializeOwned>(v: Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::schema(format!("payload: {e}")))
}

/// An initial state is a matrix, `{"random": {"dim", "rank"?}}` or
/// `{"ket": {"re", "im"?}}`.
fn initial_state(v: Value, seed: u64) -> Result<DensityMatrix, CliError> {
    if let Some(r) = v.get("random") {
        let r: RandomState = payload(r.clone())?;
        let rank = r.rank.unwrap_or(r.dim);
        if r.dim == 0 || rank == 0 || rank > r.dim {
            return Err(CliError::schema(format!("random state needs 1 <= rank <= dim, got rank {rank}, dim {}", r.dim)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(sampling::random_density_rank(&mut rng, r.dim, rank));
    }
    if let Some(k) = v.get("ket") {
        let k: Ket = payload(k.clone())?;
        let im = k.im.unwrap_or_else(|| vec![0.0; k.re.len()]);
        if im.len() != k.re.len() {
            return Err(CliError::schema("ket 're' and 'im' differ in length"));
        }
        let psi: Vec<C64> = k.re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
        return Ok(DensityMatrix::pure(&psi)?);
    }
    let m: MatrixJson = payload(v)?;
    Ok(DensityMatrix::new(m.to_matrix()?)?)
}

fn with_dt(mut cfg: IntegratorConfig, dt: Option<f64>) -> Result<IntegratorConfig, CliError> {
    if let Some(dt) = dt {
        cfg.dt = dt;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Load, validate and execute a scenario. `require` restricts the accepted
/// kind. Returns whether every criterion in the report passed.
pub fn run(path: &Path, output: Option<&Path>, ov: &Overrides, require: Option<Kind>) -> Result<bool, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let env: Envelope = serde_json::from_str(&text).map_err(|e| CliError::schema(e.to_string()))?;
    if env.schema != SCHEMA_VERSION {
        return Err(CliError::schema(format!("unsupported schema '{}', expected '{SCHEMA_VERSION}'", env.schema)));
    }
    if let Some(kind) = require {
        if env.kind != kind {
            return Err(CliError::usage(format!("expected a scenario of kind {}, got {}", kind.name(), env.kind.name())));
        }
    }
    let seed = ov.seed.unwrap_or(env.seed);
    let output = output.map(Path::to_path_buf).or(env.output);
    let output = output.as_deref();

    match env.kind {
        Kind::Evolve => {
            let p: EvolvePayload = payload(env.payload)?;
            let rho0 = initial_state(p.rho0, seed)?;
            let traj = evolve(&rho0, &p.spec, &with_dt(p.config, ov.dt)?)?;
            trajectory_out(env.kind, &traj, output, ov)
        }
        Kind::EvolveBipartite => {
            let p: BipartitePayload = payload(env.payload)?;
            let rho0 = BipartiteState::new(initial_state(p.rho0, seed)?, p.d_h, p.d_k)?;
            let traj = evolve_bipartite(&rho0, &p.dynamics, &with_dt(p.config, ov.dt)?)?;
            trajectory_out(env.kind, &traj, output, ov)
        }
        Kind::Mixture => {
            let p: MixturePayload = payload(env.payload)?;
            let rho0 = initial_state(p.rho0, seed)?;
            let traj = evolve_convex_mixture(&rho0, &p.mixture, &with_dt(p.config, ov.dt)?, ov.exec)?;
            trajectory_out(env.kind, &traj, output, ov)
        }
        Kind::MeasureCorrelation => {
            let mut sc: CorrelationScenario = payload(env.payload)?;
            if let Some(dt) = ov.dt {
                sc.dt = dt;
            }
            sc.validate()?;
            let r = report::correlation(correlation_report(&sc)?);
            report::emit_json(output, &r)?;
            Ok(r.passed)
        }
        Kind::Check => run_check(payload(env.payload)?, seed, output, ov),
    }
}

fn trajectory_out(kind: Kind, traj: &Trajectory, output: Option<&Path>, ov: &Overrides) -> Result<bool, CliError> {
    let summary = report::trajectory(kind, traj, output);
    match output {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            nlqd_core::export::write_csv(std::io::BufWriter::new(file), traj, ov.dump_states)?;
            report::emit_json(None, &summary)?;
        }
        None => {
            nlqd_core::export::write_csv(std::io::stdout().lock(), traj, ov.dump_states)?;
            eprintln!("{}", serde_json::to_string(&summary).expect("summary serializes"));
        }
    }
    Ok(summary.passed)
}

fn run_check(check: CheckPayload, seed: u64, output: Option<&Path>, ov: &Overrides) -> Result<bool, CliError> {
    let passed = match check {
        CheckPayload::CpAudit { dynamics, d_h, d_k, samples, config } => {
            let states = entangled_samples(seed, d_h, d_k, samples);
            let audit = verify_cp_extension(&dynamics, &states, &with_dt(config, ov.dt)?, ov.exec)?;
            let r = report::cp_audit(&audit, &states);
            report::emit_json(output, &r)?;
            r.passed
        }
        CheckPayload::Classify { spec, samples } => {
            let c = classify_dissipative_part(&spec, samples, seed, ov.exec)?;
            let r = report::classify(c);
            report::emit_json(output, &r)?;
            r.passed
        }
        CheckPayload::ZeroMean { spec, samples } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let states: Vec<DensityMatrix> = (0..samples).map(|_| sampling::random_density(&mut rng, spec.dim())).collect();
            let z = check_zero_mean(&spec, &states)?;
            let r = report::zero_mean(z, &states);
            report::emit_json(output, &r)?;
            r.passed
        }
    };
    Ok(passed)
}
