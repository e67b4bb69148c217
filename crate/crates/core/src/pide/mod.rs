//! Finite-difference / quadrature discretisation of the boundary-constrained
//! PIDE and extraction of its principal eigenpair `(ψ̂_θ, u_θ)`.

mod assemble;
mod eigen;
mod mesh;

pub use assemble::{
    assemble_interior, assemble_jump, fold_boundary, DiscreteOperator, InteriorStencil, Interpolation, Layout,
    SolverWarning,
};
pub use eigen::{dominant_eigenpair, inf_norm, residual, residual_bound, EigenMethod, EigenOptions, Eigenpair};
pub use mesh::Mesh;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{ReflectedModel, WeightSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolverOptions {
    pub eigen: EigenOptions,
    pub interpolation: Interpolation,
}

/// Principal eigenpair of the discretised tilted generator.
#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub theta: f64,
    pub psi_hat: f64,
    /// Eigenfunction on all `N + 2` mesh nodes, scaled so that its largest
    /// interior value is one.
    pub u: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub method: EigenMethod,
    pub mesh: Mesh,
    pub warnings: Vec<SolverWarning>,
}

impl SpectralResult {
    /// Eigenfunction at an arbitrary state, by linear interpolation.
    pub fn u_at(&self, x: f64) -> f64 {
        self.mesh.interpolate(&self.u, x)
    }
}

/// Assembles `A + G` for one value of `θ`.
pub fn build_operator(
    model: &ReflectedModel,
    f: &WeightSpec,
    theta: f64,
    mesh: &Mesh,
    interpolation: Interpolation,
) -> Result<DiscreteOperator> {
    if (mesh.b() - model.b).abs() > 1e-12 * model.b {
        return Err(invalid(format!(
            "mesh covers [0, {}] but model lives on [0, {}]",
            mesh.b(),
            model.b
        )));
    }
    if !theta.is_finite() {
        return Err(invalid("theta must be finite"));
    }
    let stencil = assemble_interior(model, f, theta, mesh);
    let jumps = assemble_jump(model, mesh, interpolation);
    fold_boundary(&stencil, &jumps, theta, f, model, mesh)
}

pub fn solve_psi(
    model: &ReflectedModel,
    f: &WeightSpec,
    theta: f64,
    mesh: &Mesh,
    opts: &SolverOptions,
) -> Result<SpectralResult> {
    let op = build_operator(model, f, theta, mesh, opts.interpolation)?;
    let pair = dominant_eigenpair(&op.matrix, &opts.eigen)?;
    let mut u = op.full_grid(&pair.vector);
    let n = mesh.interior();
    let top = u[1..=n].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return Err(Error::NotSignDefinite { eigenvalue: pair.value });
    }
    u.iter_mut().for_each(|v| *v /= top);
    Ok(SpectralResult {
        theta,
        psi_hat: pair.value,
        u,
        residual: pair.residual,
        iterations: pair.iterations,
        method: pair.method,
        mesh: *mesh,
        warnings: op.warnings,
    })
}

/// `ψ̂_θ(N)` over a grid of `θ` values and mesh sizes.
#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub thetas: Vec<f64>,
    pub interior_sizes: Vec<usize>,
    /// `psi[t][k]` is `ψ̂` at `thetas[t]` on the mesh with
    /// `interior_sizes[k]` interior nodes.
    pub psi: Vec<Vec<f64>>,
}

impl ConvergenceTable {
    /// `|ψ̂(N) - reference|` per θ, against `reference(θ)`.
    pub fn errors_against(&self, reference: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
        self.thetas
            .iter()
            .zip(&self.psi)
            .map(|(&t, row)| {
                let r = reference(t);
                row.iter().map(|p| (p - r).abs()).collect()
            })
            .collect()
    }

    /// `|ψ̂(N) - ψ̂(N_max)|` per θ.
    pub fn deviation_from_finest(&self) -> Vec<Vec<f64>> {
        self.psi
            .iter()
            .map(|row| {
                let last = *row.last().expect("at least one mesh");
                row.iter().map(|p| (p - last).abs()).collect()
            })
            .collect()
    }
}

/// Number of strict increases along a sequence of errors.
pub fn monotonicity_violations(errors: &[f64]) -> usize {
    errors.windows(2).filter(|w| w[1] >= w[0]).count()
}

/// Solves on every `(θ, N)` pair. The weight may depend on the mesh (hat
/// widths scale with `h`).
pub fn convergence_study<W>(
    model: &ReflectedModel,
    weight: W,
    thetas: &[f64],
    interior_sizes: &[usize],
    opts: &SolverOptions,
) -> Result<ConvergenceTable>
where
    W: Fn(&Mesh) -> Result<WeightSpec> + Sync,
{
    if interior_sizes.is_empty() || interior_sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("mesh sizes must be nonempty and strictly increasing"));
    }
    let meshes = interior_sizes
        .iter()
        .map(|&n| Mesh::new(n, model.b))
        .collect::<Result<Vec<_>>>()?;
    let weights = meshes.iter().map(&weight).collect::<Result<Vec<_>>>()?;
    let psi = thetas
        .par_iter()
        .map(|&theta| {
            meshes
                .iter()
                .zip(&weights)
                .map(|(mesh, f)| {
                    solve_psi(model, f, theta, mesh, opts)
                        .map(|r| r.psi_hat)
                        .map_err(|e| Error::SolveFailed {
                            theta,
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable {
        thetas: thetas.to_vec(),
        interior_sizes: interior_sizes.to_vec(),
        psi,
    })
}
