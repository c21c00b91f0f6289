use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nlqd_core::entanglement::{entangled_samples, verify_cp_extension, BipartiteDynamics};
use nlqd_core::generators::classify_dissipative_part;
use nlqd_core::propagation::evolve;
use nlqd_core::sampling;
use nlqd_core::{DensityMatrix, Execution, GammaFamily, GeneratorSpec, IntegratorConfig, TFamily};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn spec(d: usize) -> GeneratorSpec {
    let mut r = StdRng::seed_from_u64(1);
    let h = sampling::random_hermitian(&mut r, d);
    GeneratorSpec::new(h, TFamily::PowerLaw { q: 2.0 }, GammaFamily::ZeroMean { sigma: -0.5, r: 2.0 }).unwrap()
}

fn batch_evolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve_batch");
    group.sample_size(10);
    let cfg = IntegratorConfig::new(1e-3, 0.2).unwrap().with_stride(50).unwrap();
    for d in [2usize, 4] {
        let spec = spec(d);
        let mut r = StdRng::seed_from_u64(2);
        let states: Vec<DensityMatrix> = (0..32).map(|_| sampling::random_density(&mut r, d)).collect();
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), d), &states, |b, states| {
                b.iter(|| exec.try_map(states, |rho| evolve(rho, &spec, &cfg)).unwrap())
            });
        }
    }
    group.finish();
}

fn batch_audits(c: &mut Criterion) {
    let mut group = c.benchmark_group("audits");
    group.sample_size(10);
    let cfg = IntegratorConfig::new(1e-3, 0.2).unwrap().with_stride(50).unwrap();
    let samples = entangled_samples(3, 2, 2, 16);
    let dynamics = BipartiteDynamics::passive(spec(2));
    let classify_spec = spec(4);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(BenchmarkId::new("cp_extension", format!("{exec:?}")), |b| {
            b.iter(|| verify_cp_extension(&dynamics, &samples, &cfg, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("classify", format!("{exec:?}")), |b| {
            b.iter(|| classify_dissipative_part(&classify_spec, 2000, 7, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default()
        .significance_level(0.1)
        .noise_threshold(0.05)
        .configure_from_args();
    targets = batch_evolve, batch_audits
}
criterion_main!(benches);
