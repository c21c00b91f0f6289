mod common;

use common::{c, sigma_x};
use nlqd_core::entanglement::{
    check_environment_stationarity, entangled_samples, evolve_bipartite, verify_cp_extension, BipartiteDynamics,
    BipartiteState,
};
use nlqd_core::linalg::{diag, tensor_product};
use nlqd_core::sampling;
use nlqd_core::{DensityMatrix, Execution, GammaFamily, GeneratorSpec, IntegratorConfig, Subsystem, TFamily};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn cfg() -> IntegratorConfig {
    IntegratorConfig::new(1e-3, 1.0).unwrap().with_stride(50).unwrap()
}

fn non_essential(dh: usize, seed: u64) -> GeneratorSpec {
    let mut r = StdRng::seed_from_u64(seed);
    let h = sampling::random_hermitian(&mut r, dh);
    let a = sampling::random_hermitian(&mut r, dh);
    GeneratorSpec::new(h, TFamily::PowerLaw { q: 1.0 }, GammaFamily::NonEssential { r: 2.0, a }).unwrap()
}

fn zero_mean(dh: usize, seed: u64) -> GeneratorSpec {
    let mut r = StdRng::seed_from_u64(seed);
    let h = sampling::random_hermitian(&mut r, dh);
    GeneratorSpec::new(h, TFamily::VonNeumann, GammaFamily::ZeroMean { sigma: 1.0, r: 2.0 }).unwrap()
}

#[test]
fn non_essential_extension_passes_audit_on_entangled_states() {
    let samples = entangled_samples(3, 2, 2, 20);
    let dynamics = BipartiteDynamics::passive(non_essential(2, 1));
    let report = verify_cp_extension(&dynamics, &samples, &cfg(), Execution::Parallel).unwrap();
    assert!(report.all_passed, "{:?}", report.first_failure.map(|i| &report.samples[i]));
}

#[test]
fn non_essential_audit_with_rank_deficient_marginals() {
    // pure states on 3x2 have rank-2 marginals on H, where Gamma is active
    let mut r = StdRng::seed_from_u64(11);
    let samples: Vec<_> = (0..6)
        .map(|_| BipartiteState::new(sampling::random_bipartite(&mut r, 3, 2, 1), 3, 2).unwrap())
        .collect();
    let dynamics = BipartiteDynamics::passive(non_essential(3, 2));
    let report = verify_cp_extension(&dynamics, &samples, &cfg(), Execution::Sequential).unwrap();
    assert!(report.all_passed);
}

#[test]
fn essential_extension_disturbs_the_environment() {
    let samples = entangled_samples(4, 2, 2, 10);
    let dynamics = BipartiteDynamics::passive(zero_mean(2, 5));
    let report = verify_cp_extension(&dynamics, &samples, &cfg(), Execution::Parallel).unwrap();
    assert!(!report.all_passed);
    for s in &report.samples {
        // locality and positivity survive; only the remote marginal moves
        assert!(s.local_h_residual <= 1e-6);
        assert!(s.min_eigenvalue >= -1e-10);
        assert!(s.remote_k_residual > 1e-6, "{s:?}");
    }
}

#[test]
fn product_samples_pass_for_every_family() {
    let mut r = StdRng::seed_from_u64(21);
    let samples: Vec<_> = (0..4)
        .map(|_| BipartiteState::product(&sampling::random_density(&mut r, 2), &sampling::random_density(&mut r, 2)))
        .collect();
    let h = sampling::random_hermitian(&mut r, 2);
    for gamma in [
        GammaFamily::None,
        GammaFamily::ZeroMean { sigma: 1.0, r: 2.0 },
        GammaFamily::EnergyConserving { sigma: 0.5, r: 1.0 },
        GammaFamily::NonEssential { r: 2.0, a: sigma_x() },
    ] {
        let spec = GeneratorSpec::new(h.clone(), TFamily::PowerLaw { q: 2.0 }, gamma).unwrap();
        let report = verify_cp_extension(&BipartiteDynamics::passive(spec), &samples, &cfg(), Execution::Parallel).unwrap();
        assert!(report.all_passed);
    }
}

#[test]
fn environment_stationarity_residuals() {
    for s in entangled_samples(8, 2, 2, 10) {
        assert!(check_environment_stationarity(&BipartiteDynamics::passive(non_essential(2, 9)), &s).unwrap() <= 1e-9);
    }
    let mut r = StdRng::seed_from_u64(12);
    for _ in 0..10 {
        let s = BipartiteState::new(sampling::random_bipartite(&mut r, 3, 2, 1), 3, 2).unwrap();
        assert!(check_environment_stationarity(&BipartiteDynamics::passive(non_essential(3, 13)), &s).unwrap() <= 1e-9);
    }
    let full_rank = BipartiteState::new(sampling::random_bipartite(&mut r, 2, 2, 4), 2, 2).unwrap();
    let residual = check_environment_stationarity(&BipartiteDynamics::passive(zero_mean(2, 14)), &full_rank).unwrap();
    assert!(residual > 1e-3, "{residual}");
}

#[test]
fn passive_environment_keeps_product_factor() {
    let rho_h = DensityMatrix::pure(&[c(0.6), c(0.8)]).unwrap();
    let rho_k = DensityMatrix::new(diag(&[0.25, 0.75])).unwrap();
    let spec = zero_mean(2, 15);
    let joint = evolve_bipartite(&BipartiteState::product(&rho_h, &rho_k), &BipartiteDynamics::passive(spec.clone()), &cfg())
        .unwrap();
    let local = nlqd_core::propagation::evolve(&rho_h, &spec, &cfg()).unwrap();
    for (j, l) in joint.states.iter().zip(&local.states) {
        let expected = tensor_product(l.matrix(), rho_k.matrix());
        assert!(common::max_abs_diff(j.matrix(), &expected) <= 1e-9);
    }
    for k in joint.marginals(Subsystem::H).unwrap() {
        assert!(common::max_abs_diff(&k, rho_k.matrix()) <= 1e-12);
    }
}

#[test]
fn pure_entangled_states_stay_pure() {
    let mut r = StdRng::seed_from_u64(16);
    let s = BipartiteState::new(sampling::random_bipartite(&mut r, 3, 2, 1), 3, 2).unwrap();
    let traj = evolve_bipartite(&s, &BipartiteDynamics::passive(non_essential(3, 17)), &cfg()).unwrap();
    for m in &traj.monitors {
        assert!((m.purity - 1.0).abs() <= 1e-8);
    }
    let bp = traj.bipartite.unwrap();
    assert!(bp[0].mutual_info > 0.1);
    for b in &bp {
        assert!((b.entropy_h - b.entropy_k).abs() <= 1e-8);
    }
}
