//! Fixed experiment set-ups: the two oracle tables, the mesh convergence
//! study and the chemical-reaction-network comparisons.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ldp::{mean_variance_at_zero, MeanVariance};
use crate::model::{
    birth_death, continuised_boundary_indicator, continuised_interval_indicator, continuised_lower_boundary_hat,
    continuised_point_indicator, crn_jump_diffusion, crn_jump_markov, crn_langevin, reflected_bm, CrnRates,
    ReflectedModel, WeightSpec,
};
use crate::oracles::{bd_psi_of_theta, rbm_psi_of_theta, BdParams, RbmParams};
use crate::pide::{solve_psi, Mesh, SolverOptions};

/// `θ ∈ {0, 0.001, ..., 0.01}`.
pub fn table_thetas() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 1000.0).collect()
}

/// `θ ∈ {0.1, 0.2, ..., 1.0}`.
pub fn convergence_thetas() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

/// `N ∈ {10, 20, ..., 110}`.
pub fn convergence_sizes() -> Vec<usize> {
    (1..=11).map(|i| 10 * i).collect()
}

const ORACLE_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleRow {
    pub theta: f64,
    pub interior: usize,
    pub psi_numeric: f64,
    pub psi_oracle: f64,
    pub abs_error: f64,
}

fn row(theta: f64, interior: usize, psi_numeric: f64, psi_oracle: f64) -> OracleRow {
    OracleRow {
        theta,
        interior,
        psi_numeric,
        psi_oracle,
        abs_error: (psi_numeric - psi_oracle).abs(),
    }
}

fn solve(model: &ReflectedModel, f: &WeightSpec, theta: f64, mesh: &Mesh, opts: &SolverOptions) -> Result<f64> {
    solve_psi(model, f, theta, mesh, opts)
        .map(|r| r.psi_hat)
        .map_err(|e| Error::SolveFailed {
            theta,
            source: Box::new(e),
        })
}

/// Standard reflected Brownian motion on `[0, 1]`, `Λ` the local time at 0
/// (hat of one mesh step at the origin).
pub fn rbm_table(interior: usize, thetas: &[f64], opts: &SolverOptions) -> Result<Vec<OracleRow>> {
    let model = reflected_bm(0.0, 1.0, 1.0)?;
    let mesh = Mesh::new(interior, 1.0)?;
    let f = continuised_lower_boundary_hat(interior, 1.0);
    let params = RbmParams::standard();
    thetas
        .par_iter()
        .map(|&theta| {
            let numeric = solve(&model, &f, theta, &mesh, opts)?;
            Ok(row(
                theta,
                interior,
                numeric,
                rbm_psi_of_theta(&params, theta, ORACLE_TOL)?,
            ))
        })
        .collect()
}

/// Weight `1_{[0,1)}` of the birth-death example (a ramp of width
/// `b/(N+1)` just below 1, which no lattice state sees).
pub fn bd_weight(b: usize) -> Result<WeightSpec> {
    let b = b as f64;
    continuised_interval_indicator(1.0, 1.0 / (b + 1.0), b)
}

/// Birth-death chain with `λ = 50` on `{0, 1, 2, 3}`, `Λ` the occupation
/// time of state 0.
pub fn bd_table(thetas: &[f64], opts: &SolverOptions) -> Result<Vec<OracleRow>> {
    let (lambda, b) = (50.0, 3);
    let model = birth_death(lambda, b)?;
    let mesh = Mesh::lattice(&model)?;
    let f = bd_weight(b)?;
    let params = BdParams::new(lambda, b)?;
    thetas
        .iter()
        .map(|&theta| {
            let numeric = solve(&model, &f, theta, &mesh, opts)?;
            Ok(row(
                theta,
                mesh.interior(),
                numeric,
                bd_psi_of_theta(&params, theta, ORACLE_TOL)?,
            ))
        })
        .collect()
}

/// Error of the reflected Brownian motion solve against the oracle over a
/// `(θ, N)` grid; rows are ordered by `θ`, then `N`.
pub fn rbm_convergence(thetas: &[f64], sizes: &[usize], opts: &SolverOptions) -> Result<Vec<OracleRow>> {
    let model = reflected_bm(0.0, 1.0, 1.0)?;
    let params = RbmParams::standard();
    let pairs: Vec<(f64, usize)> = thetas
        .iter()
        .flat_map(|&t| sizes.iter().map(move |&n| (t, n)))
        .collect();
    pairs
        .par_iter()
        .map(|&(theta, n)| {
            let mesh = Mesh::new(n, 1.0)?;
            let f = continuised_lower_boundary_hat(n, 1.0);
            let numeric = solve(&model, &f, theta, &mesh, opts)?;
            Ok(row(theta, n, numeric, rbm_psi_of_theta(&params, theta, ORACLE_TOL)?))
        })
        .collect()
}

/// The three network comparisons between the jump Markov process and its
/// diffusion-type approximation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrnCase {
    /// `γ_n = n`, occupation near the stable equilibria, constrained
    /// Langevin approximation.
    EquilibriumN,
    /// `γ_n = 10n²`, occupation near the equilibria, Langevin reactions with
    /// division errors kept as jumps.
    Equilibrium10N2,
    /// `γ_n = 10n²`, time near the boundary points `{0, 1}`.
    Boundary10N2,
}

impl CrnCase {
    pub fn gamma(&self, n: f64) -> f64 {
        match self {
            CrnCase::EquilibriumN => n,
            CrnCase::Equilibrium10N2 | CrnCase::Boundary10N2 => 10.0 * n * n,
        }
    }

    /// Jump Markov model and its approximation at system size `n`.
    pub fn models(&self, n: f64) -> Result<(ReflectedModel, ReflectedModel)> {
        let rates = CrnRates::bistable();
        let gamma = self.gamma(n);
        let jmp = crn_jump_markov(n, gamma, rates)?;
        let jda = match self {
            CrnCase::EquilibriumN => crn_langevin(n, rates)?,
            _ => crn_jump_diffusion(n, gamma, rates)?,
        };
        Ok((jmp, jda))
    }

    /// Weight built for mesh resolution `N`.
    pub fn weight(&self, n_mesh: usize) -> Result<WeightSpec> {
        match self {
            CrnCase::EquilibriumN | CrnCase::Equilibrium10N2 => Ok(WeightSpec::from_field(
                continuised_point_indicator(&[0.25, 0.75], n_mesh, 1.0)?,
                1.0,
            )),
            CrnCase::Boundary10N2 => continuised_boundary_indicator(n_mesh, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrnRow {
    pub theta: f64,
    pub psi_jmp: f64,
    pub psi_jda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrnComparison {
    pub case: CrnCase,
    pub rows: Vec<CrnRow>,
    pub jmp: MeanVariance,
    pub jda: MeanVariance,
}

/// Solves both models of `case` on `thetas`, plus centered derivatives at
/// zero with step `dtheta`. The jump Markov model is solved on its own
/// state lattice, the approximation on `n_mesh` interior nodes.
pub fn crn_comparison(
    case: CrnCase,
    n: f64,
    n_mesh: usize,
    thetas: &[f64],
    dtheta: f64,
    opts: &SolverOptions,
) -> Result<CrnComparison> {
    let (jmp, jda) = case.models(n)?;
    let f = case.weight(n_mesh)?;
    let jmp_mesh = Mesh::lattice(&jmp)?;
    let jda_mesh = Mesh::new(n_mesh, 1.0)?;
    let rows = thetas
        .par_iter()
        .map(|&theta| {
            Ok(CrnRow {
                theta,
                psi_jmp: solve(&jmp, &f, theta, &jmp_mesh, opts)?,
                psi_jda: solve(&jda, &f, theta, &jda_mesh, opts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (jmp_mv, jda_mv) = rayon::join(
        || mean_variance_at_zero(&jmp, &f, &jmp_mesh, dtheta, opts),
        || mean_variance_at_zero(&jda, &f, &jda_mesh, dtheta, opts),
    );
    Ok(CrnComparison {
        case,
        rows,
        jmp: jmp_mv?,
        jda: jda_mv?,
    })
}
