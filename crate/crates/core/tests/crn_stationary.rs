// ψ'(0) is the long-run mean of Λ(t)/t. For one-dimensional models it
// follows from the stationary law, independently of the eigen-solver.

use reflected_ldp::experiments::CrnCase;
use reflected_ldp::model::{continuised_boundary_indicator, crn_jump_markov, crn_langevin, CrnRates};
use reflected_ldp::{mean_variance_at_zero, Mesh, SolverOptions, WeightSpec};

fn weight(case: CrnCase, n_mesh: usize) -> WeightSpec {
    case.weight(n_mesh).unwrap()
}

/// Stationary law of the birth-death chain on `{0, 1/n, ..., 1}`.
fn jmp_stationary(n: usize, gamma: f64) -> Vec<f64> {
    let r = CrnRates::bistable();
    let nf = n as f64;
    let up = |x: f64| 0.5 * gamma * x * (1.0 - x) + nf * r.r_plus(x);
    let down = |x: f64| 0.5 * gamma * x * (1.0 - x) + nf * r.r_minus(x);
    let mut logp = vec![0.0; n + 1];
    for k in 1..=n {
        let (a, b) = ((k - 1) as f64 / nf, k as f64 / nf);
        logp[k] = logp[k - 1] + up(a).ln() - down(b).ln();
    }
    let top = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p: Vec<f64> = logp.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter().map(|v| v / z).collect()
}

fn jmp_mean(n: usize, gamma: f64, f: &WeightSpec) -> f64 {
    jmp_stationary(n, gamma)
        .iter()
        .enumerate()
        .map(|(k, p)| p * f.eval(k as f64 / n as f64))
        .sum()
}

#[test]
fn jmp_derivative_matches_stationary_mean() {
    let n = 100;
    let gamma = n as f64;
    let model = crn_jump_markov(n as f64, gamma, CrnRates::bistable()).unwrap();
    let mesh = Mesh::lattice(&model).unwrap();
    for case in [CrnCase::EquilibriumN, CrnCase::Boundary10N2] {
        let f = weight(case, n);
        let exact = jmp_mean(n, gamma, &f);
        let mut opts = SolverOptions::default();
        opts.eigen.tol = 1e-15;
        // Richardson step removes the O(Δθ²) term of the centered difference
        let d = |h: f64| mean_variance_at_zero(&model, &f, &mesh, h, &opts).unwrap().psi_prime0;
        let slope = (4.0 * d(2e-3) - d(4e-3)) / 3.0;
        assert!((slope - exact).abs() < 1e-4 * exact, "{case:?}: {slope} vs {exact}");
    }
}

/// `E_π f + f(0) ℓ₀ + f(1) ℓ₁` for the Langevin diffusion, with the
/// local-time rates `ℓ = σ²(x) p(x) / (2ρ)` at the boundary.
fn cle_mean(n: f64, f: &WeightSpec) -> f64 {
    let r = CrnRates::bistable();
    let s2 = |x: f64| (r.r_plus(x) + r.r_minus(x) + x * (1.0 - x)) / n;
    let m = 200_000;
    let h = 1.0 / m as f64;
    let xs: Vec<f64> = (0..=m).map(|k| k as f64 * h).collect();
    // log p = ∫ 2μ/σ² − log σ²
    let mut log_scale = vec![0.0; m + 1];
    for k in 1..=m {
        let g = |x: f64| 2.0 * r.drift(x) / s2(x);
        log_scale[k] = log_scale[k - 1] + 0.5 * h * (g(xs[k - 1]) + g(xs[k]));
    }
    let logp: Vec<f64> = xs.iter().zip(&log_scale).map(|(x, l)| l - s2(*x).ln()).collect();
    let top = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p: Vec<f64> = logp.iter().map(|l| (l - top).exp()).collect();
    let trap = |g: &dyn Fn(usize) -> f64| h * ((0..=m).map(g).sum::<f64>() - 0.5 * (g(0) + g(m)));
    let z = trap(&|k| p[k]);
    let mass = trap(&|k| p[k] * f.f.eval(xs[k])) / z;
    let rho = 1.0 / n.sqrt();
    let l0 = s2(0.0) * p[0] / z / (2.0 * rho);
    let l1 = s2(1.0) * p[m] / z / (2.0 * rho);
    mass + f.f0 * l0 + f.fb * l1
}

#[test]
fn langevin_derivative_matches_stationary_density() {
    let n = 100.0;
    let model = crn_langevin(n, CrnRates::bistable()).unwrap();
    let n_mesh = 800;
    let mesh = Mesh::new(n_mesh, 1.0).unwrap();
    let cases = [
        weight(CrnCase::EquilibriumN, n_mesh),
        continuised_boundary_indicator(n_mesh, 1.0).unwrap(),
    ];
    for f in cases {
        let exact = cle_mean(n, &f);
        let mv = mean_variance_at_zero(&model, &f, &mesh, 1e-3, &SolverOptions::default()).unwrap();
        assert!(
            (mv.psi_prime0 - exact).abs() < 2e-2 * exact,
            "{} vs {exact}",
            mv.psi_prime0
        );
    }
}
