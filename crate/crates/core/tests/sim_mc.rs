use reflected_ldp::experiments::bd_weight;
use reflected_ldp::model::{birth_death, continuised_lower_boundary_hat, reflected_bm};
use reflected_ldp::sim::simulate_endpoints;
use reflected_ldp::{martingale_residual, mc_log_mgf, solve_psi, Mesh, SimConfig, SolverOptions};

#[test]
fn bd_monte_carlo_agrees_with_solver() {
    let model = birth_death(50.0, 3).unwrap();
    let f = bd_weight(3).unwrap();
    let mesh = Mesh::lattice(&model).unwrap();
    let psi = solve_psi(&model, &f, 0.01, &mesh, &SolverOptions::default())
        .unwrap()
        .psi_hat;
    let cfg = SimConfig {
        dt: 1e-2,
        horizon: 40.0,
        paths: 2000,
        seed: 3,
        ..SimConfig::default()
    };
    let mc = mc_log_mgf(&model, &f, 0.01, &cfg).unwrap();
    assert!(
        (mc.estimate - psi).abs() <= 3.0 * mc.stderr + 5.0 / cfg.horizon,
        "{mc:?} vs {psi}"
    );
}

#[test]
fn rbm_martingale_small() {
    let model = reflected_bm(0.0, 1.0, 1.0).unwrap();
    let n = 200;
    let mesh = Mesh::new(n, 1.0).unwrap();
    let f = continuised_lower_boundary_hat(n, 1.0);
    let spectral = solve_psi(&model, &f, 0.5, &mesh, &SolverOptions::default()).unwrap();
    let cfg = SimConfig {
        dt: 1e-3,
        horizon: 2.0,
        paths: 1000,
        seed: 99,
        ..SimConfig::default()
    };
    let check = martingale_residual(&model, &f, &spectral, &cfg).unwrap();
    assert!(check.residual <= 3.0 * check.stderr + 0.02, "{check:?}");
}

#[test]
fn endpoints_are_reproducible_and_seed_dependent() {
    let model = reflected_bm(-0.5, 1.0, 1.0).unwrap();
    let f = continuised_lower_boundary_hat(100, 1.0);
    let cfg = SimConfig {
        dt: 1e-2,
        horizon: 1.0,
        paths: 50,
        seed: 1,
        ..SimConfig::default()
    };
    let a = simulate_endpoints(&model, &f, &cfg).unwrap();
    let b = simulate_endpoints(&model, &f, &cfg).unwrap();
    assert_eq!(a, b);
    let c = simulate_endpoints(&model, &f, &SimConfig { seed: 2, ..cfg }).unwrap();
    assert_ne!(a, c);
}
