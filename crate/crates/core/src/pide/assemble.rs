//! Matrix assembly for the tilted generator `L + θ f`.
//!
//! Derivatives are replaced by centered differences at interior nodes, the
//! jump integral by atom sums and composite trapezoid sums, and the boundary
//! constraint by second-order one-sided differences that are solved for the
//! boundary values and substituted into the interior rows.

use nalgebra::DMatrix;

use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::model::{ReflectedModel, WeightSpec};

/// Centered-difference coefficients at interior nodes `x_1..x_N`; entry
/// `k` belongs to node `k + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteriorStencil {
    /// Coefficient of `u_{i-1}`: `-μ/(2h) + σ²/(2h²)`.
    pub lower: Vec<f64>,
    /// Coefficient of `u_i`: `-σ²/h² + θ f`.
    pub diag: Vec<f64>,
    /// Coefficient of `u_{i+1}`: `μ/(2h) + σ²/(2h²)`.
    pub upper: Vec<f64>,
}

impl InteriorStencil {
    /// True when some off-diagonal coefficient is negative, i.e. the mesh
    /// Péclet number exceeds one somewhere.
    pub fn has_negative_offdiagonal(&self) -> bool {
        self.lower.iter().chain(&self.upper).any(|&a| a < 0.0)
    }
}

pub fn assemble_interior(model: &ReflectedModel, f: &WeightSpec, theta: f64, mesh: &Mesh) -> InteriorStencil {
    let h = mesh.h();
    let n = mesh.interior();
    let mut st = InteriorStencil {
        lower: Vec::with_capacity(n),
        diag: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
    };
    for i in 1..=n {
        let x = mesh.x(i);
        let mu = model.mu.eval(x);
        let s2 = model.sigma2.eval(x);
        st.lower.push(-mu / (2.0 * h) + s2 / (2.0 * h * h));
        st.diag.push(-s2 / (h * h) + theta * f.eval(x));
        st.upper.push(mu / (2.0 * h) + s2 / (2.0 * h * h));
    }
    st
}

/// How an off-mesh jump destination is spread onto mesh nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Interpolation {
    /// Linear weights on the two bracketing nodes. Rows keep summing to zero.
    #[default]
    Linear,
    /// All weight on the nearest node.
    Nearest,
}

/// Full-grid jump generator: entry `(i, l)` is the coefficient of `u_l` in
/// the discretised jump integral at node `x_i`, for all `i, l in 0..=N+1`.
pub fn assemble_jump(model: &ReflectedModel, mesh: &Mesh, rule: Interpolation) -> DMatrix<f64> {
    let m = mesh.nodes();
    let mut g = DMatrix::zeros(m, m);
    if model.kernel.is_empty() {
        return g;
    }
    let h = mesh.h();
    let last = mesh.interior() + 1;
    let deposit = |g: &mut DMatrix<f64>, i: usize, dest: f64, rate: f64| {
        if rate == 0.0 {
            return;
        }
        let pos = (dest / h).clamp(0.0, last as f64);
        match rule {
            Interpolation::Linear => {
                let mut l = (pos.floor() as usize).min(last - 1);
                let mut w = pos - l as f64;
                // snap destinations that sit on a node up to rounding
                if w < 1e-9 {
                    w = 0.0;
                } else if w > 1.0 - 1e-9 {
                    l += 1;
                    w = 0.0;
                }
                g[(i, l)] += rate * (1.0 - w);
                if w > 0.0 {
                    g[(i, l + 1)] += rate * w;
                }
            }
            Interpolation::Nearest => {
                let l = (pos.round() as usize).min(last);
                g[(i, l)] += rate;
            }
        }
        g[(i, i)] -= rate;
    };
    for i in 0..m {
        let x = mesh.x(i);
        for atom in &model.kernel.atoms {
            let rate = atom.rate.eval(x);
            deposit(&mut g, i, model.destination(x, atom.displacement), rate);
        }
        for comp in &model.kernel.continuous {
            for (y, w) in comp.quadrature() {
                let rate = w * (comp.density)(x, y);
                deposit(&mut g, i, model.destination(x, y), rate);
            }
        }
    }
    g
}

/// Which nodes the rows and columns of a [`DiscreteOperator`] refer to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Layout {
    /// Interior nodes `1..=N`; boundary values were eliminated with the
    /// boundary constraint. `d0` and `db` are the substitution denominators
    /// `3ρ₀ - 2θf(0)h` and `2θf(b)h - 3ρ_b`.
    Folded { d0: f64, db: f64, rho0: f64, rhob: f64 },
    /// All nodes `0..=N+1` are states (no continuous boundary process).
    AllNodes,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolverWarning {
    /// Centered drift differences produce negative off-diagonals.
    NegativeStencil,
    /// Mesh much finer than the smallest jump.
    MeshFinerThanJumps { h: f64, smallest_jump: f64 },
}

/// Square matrix approximating the tilted generator on the mesh.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub matrix: DMatrix<f64>,
    pub theta: f64,
    pub mesh: Mesh,
    pub layout: Layout,
    /// All off-diagonal entries are nonnegative, so `M + cI` is a
    /// nonnegative matrix for large enough `c`.
    pub positivity_shift_valid: bool,
    pub warnings: Vec<SolverWarning>,
}

impl DiscreteOperator {
    /// Recovers nodal values on the full mesh from an eigenvector.
    pub fn full_grid(&self, v: &[f64]) -> Vec<f64> {
        match self.layout {
            Layout::AllNodes => v.to_vec(),
            Layout::Folded { d0, db, rho0, rhob } => {
                let n = self.mesh.interior();
                let mut u = Vec::with_capacity(n + 2);
                u.push((4.0 * rho0 * v[0] - rho0 * v[1]) / d0);
                u.extend_from_slice(v);
                u.push((rhob * v[n - 2] - 4.0 * rhob * v[n - 1]) / db);
                u
            }
        }
    }

    /// Node index of row `k` of the matrix.
    pub fn node_of_row(&self, k: usize) -> usize {
        match self.layout {
            Layout::AllNodes => k,
            Layout::Folded { .. } => k + 1,
        }
    }
}

pub(crate) fn offdiagonals_nonnegative(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= 0.0))
}

/// Combines the interior stencil and jump rows into the square operator,
/// eliminating boundary values when the model has a continuous boundary
/// process.
pub fn fold_boundary(
    stencil: &InteriorStencil,
    jumps: &DMatrix<f64>,
    theta: f64,
    f: &WeightSpec,
    model: &ReflectedModel,
    mesh: &Mesh,
) -> Result<DiscreteOperator> {
    let n = mesh.interior();
    let h = mesh.h();
    let mut warnings = Vec::new();
    if stencil.has_negative_offdiagonal() {
        warnings.push(SolverWarning::NegativeStencil);
    }
    if let Some(smallest) = model
        .kernel
        .atoms
        .iter()
        .map(|a| a.displacement.abs())
        .filter(|d| *d > 0.0)
        .reduce(f64::min)
    {
        if h < 0.5 * smallest {
            warnings.push(SolverWarning::MeshFinerThanJumps {
                h,
                smallest_jump: smallest,
            });
        }
    }

    let (matrix, layout) = if model.has_continuous_reflection {
        if n < 2 {
            return Err(crate::error::invalid("boundary folding needs N >= 2"));
        }
        let (rho0, rhob) = (model.rho0, model.rhob);
        let d0 = 3.0 * rho0 - 2.0 * theta * f.f0 * h;
        let db = 2.0 * theta * f.fb * h - 3.0 * rhob;
        if d0.abs() <= 1e-12 * rho0 {
            return Err(Error::VanishingBoundaryDenominator {
                theta,
                critical_theta: 3.0 * rho0 / (2.0 * f.f0 * h),
            });
        }
        if db.abs() <= 1e-12 * rhob {
            return Err(Error::VanishingBoundaryDenominator {
                theta,
                critical_theta: 3.0 * rhob / (2.0 * f.fb * h),
            });
        }
        let mut a = DMatrix::zeros(n, n);
        let mut row = vec![0.0; n + 2];
        for i in 1..=n {
            row.iter_mut().for_each(|r| *r = 0.0);
            let k = i - 1;
            row[i - 1] += stencil.lower[k];
            row[i] += stencil.diag[k];
            row[i + 1] += stencil.upper[k];
            for l in 0..n + 2 {
                row[l] += jumps[(i, l)];
            }
            // u_0 = (4ρ₀u_1 - ρ₀u_2)/d0, u_{N+1} = (ρ_b u_{N-1} - 4ρ_b u_N)/db
            let c0 = row[0];
            row[1] += c0 * 4.0 * rho0 / d0;
            row[2] -= c0 * rho0 / d0;
            let cb = row[n + 1];
            row[n - 1] += cb * rhob / db;
            row[n] -= cb * 4.0 * rhob / db;
            for l in 1..=n {
                a[(k, l - 1)] = row[l];
            }
        }
        (a, Layout::Folded { d0, db, rho0, rhob })
    } else {
        let m = n + 2;
        let mut a = jumps.clone();
        for k in 0..n {
            let i = k + 1;
            a[(i, i - 1)] += stencil.lower[k];
            a[(i, i)] += stencil.diag[k];
            a[(i, i + 1)] += stencil.upper[k];
        }
        // boundary states: tilt plus drift by inward upwind difference
        let mu0 = model.mu.eval(0.0);
        let mub = model.mu.eval(model.b);
        a[(0, 0)] += theta * f.f0;
        a[(m - 1, m - 1)] += theta * f.fb;
        if mu0 > 0.0 {
            a[(0, 0)] -= mu0 / h;
            a[(0, 1)] += mu0 / h;
        }
        if mub < 0.0 {
            a[(m - 1, m - 1)] += mub / h;
            a[(m - 1, m - 2)] -= mub / h;
        }
        (a, Layout::AllNodes)
    };

    let positivity_shift_valid = offdiagonals_nonnegative(&matrix);
    Ok(DiscreteOperator {
        matrix,
        theta,
        mesh: *mesh,
        layout,
        positivity_shift_valid,
        warnings,
    })
}
