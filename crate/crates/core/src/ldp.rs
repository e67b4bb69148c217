//! `θ`-sweeps of `ψ̂_θ`, the Legendre transform `ψ*(x) = sup_θ [θx − ψ_θ]`,
//! and long-run mean and variance from derivatives of `ψ` at zero.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{ReflectedModel, WeightSpec};
use crate::pide::{solve_psi, Mesh, SolverOptions};

/// Sampled `θ ↦ ψ̂_θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiCurve {
    pub thetas: Vec<f64>,
    pub psis: Vec<f64>,
    /// Interior node count of the solver mesh, when the curve came from one.
    pub interior: Option<usize>,
    pub tol: Option<f64>,
}

impl PsiCurve {
    /// Wraps sampled values; the grid must be strictly increasing with at
    /// least three points.
    pub fn new(thetas: Vec<f64>, psis: Vec<f64>) -> Result<Self> {
        if thetas.len() != psis.len() || thetas.len() < 3 {
            return Err(invalid("a psi curve needs at least three (theta, psi) pairs"));
        }
        if thetas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("theta grid must be strictly increasing"));
        }
        if thetas.iter().chain(&psis).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("psi curve".into()));
        }
        Ok(Self {
            thetas,
            psis,
            interior: None,
            tol: None,
        })
    }

    /// Tabulates a known function on a grid.
    pub fn from_fn(thetas: Vec<f64>, psi: impl Fn(f64) -> f64) -> Result<Self> {
        let psis = thetas.iter().map(|&t| psi(t)).collect();
        Self::new(thetas, psis)
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Second differences normalised to the local mean spacing; equal to
    /// the plain `ψ_{i+1} − 2ψ_i + ψ_{i−1}` on uniform grids.
    pub fn second_differences(&self) -> Vec<f64> {
        let (t, p) = (&self.thetas, &self.psis);
        (1..t.len() - 1)
            .map(|i| {
                let hl = t[i] - t[i - 1];
                let hr = t[i + 1] - t[i];
                let jump = (p[i + 1] - p[i]) / hr - (p[i] - p[i - 1]) / hl;
                jump * 0.5 * (hl + hr)
            })
            .collect()
    }

    /// Fails on the first second difference below `-1e-8 · max(1, max|ψ|)`.
    pub fn check_convexity(&self) -> Result<()> {
        let scale = self.psis.iter().fold(1.0_f64, |m, p| m.max(p.abs()));
        for (k, d) in self.second_differences().into_iter().enumerate() {
            if d < -1e-8 * scale {
                return Err(Error::NotConvex {
                    index: k + 1,
                    second_difference: d,
                });
            }
        }
        Ok(())
    }

    /// Centered difference of `ψ` around the grid point closest to zero.
    pub fn slope_at_zero(&self) -> f64 {
        let i0 = self.index_of_zero().clamp(1, self.len() - 2);
        (self.psis[i0 + 1] - self.psis[i0 - 1]) / (self.thetas[i0 + 1] - self.thetas[i0 - 1])
    }

    fn index_of_zero(&self) -> usize {
        self.thetas
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// One value of the rate function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatePoint {
    pub x: f64,
    pub value: f64,
    pub argmax_theta: f64,
    /// The supremum sits on an end of the grid; the true value may be
    /// larger and the grid should be extended in that direction.
    pub at_grid_edge: bool,
}

/// Solves once per grid point (in parallel) and checks convexity.
pub fn psi_curve(
    model: &ReflectedModel,
    f: &WeightSpec,
    thetas: &[f64],
    mesh: &Mesh,
    opts: &SolverOptions,
) -> Result<PsiCurve> {
    if !thetas.contains(&0.0) {
        return Err(invalid("theta grid must contain 0"));
    }
    let psis = thetas
        .par_iter()
        .map(|&theta| {
            solve_psi(model, f, theta, mesh, opts)
                .map(|r| r.psi_hat)
                .map_err(|e| Error::SolveFailed {
                    theta,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut curve = PsiCurve::new(thetas.to_vec(), psis)?;
    curve.interior = Some(mesh.interior());
    curve.tol = Some(opts.eigen.tol);
    curve.check_convexity()?;
    Ok(curve)
}

const TERNARY_ITERATIONS: usize = 30;

fn grid_argmax(curve: &PsiCurve, x: f64) -> usize {
    curve
        .thetas
        .iter()
        .zip(&curve.psis)
        .map(|(t, p)| t * x - p)
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn ternary_max(mut lo: f64, mut hi: f64, g: &mut impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    for _ in 0..TERNARY_ITERATIONS {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if g(a)? < g(b)? {
            lo = a;
        } else {
            hi = b;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok((t, g(t)?))
}

/// `ψ*(x)` from the sampled curve: grid argmax of `θx − ψ_θ`, refined by
/// ternary search on the quadratic through the argmax and its neighbours.
pub fn legendre_transform(curve: &PsiCurve, x: f64) -> RatePoint {
    let i = grid_argmax(curve, x);
    let (t, p) = (&curve.thetas, &curve.psis);
    let grid_value = t[i] * x - p[i];
    if i == 0 || i == curve.len() - 1 {
        return RatePoint {
            x,
            value: grid_value,
            argmax_theta: t[i],
            at_grid_edge: true,
        };
    }
    // Lagrange quadratic through the three points
    let (t0, t1, t2) = (t[i - 1], t[i], t[i + 1]);
    let (g0, g1, g2) = (t0 * x - p[i - 1], grid_value, t2 * x - p[i + 1]);
    let mut g = |s: f64| -> Result<f64> {
        Ok(g0 * (s - t1) * (s - t2) / ((t0 - t1) * (t0 - t2))
            + g1 * (s - t0) * (s - t2) / ((t1 - t0) * (t1 - t2))
            + g2 * (s - t0) * (s - t1) / ((t2 - t0) * (t2 - t1)))
    };
    let (theta, value) = ternary_max(t0, t2, &mut g).expect("interpolant is infallible");
    let (theta, value) = if value >= grid_value {
        (theta, value)
    } else {
        (t1, grid_value)
    };
    RatePoint {
        x,
        value,
        argmax_theta: theta,
        at_grid_edge: false,
    }
}

/// As [`legendre_transform`], but the ternary refinement evaluates `ψ`
/// itself (e.g. a fresh solve) between the grid neighbours.
pub fn legendre_transform_with(curve: &PsiCurve, x: f64, mut psi: impl FnMut(f64) -> Result<f64>) -> Result<RatePoint> {
    let i = grid_argmax(curve, x);
    let (t, p) = (&curve.thetas, &curve.psis);
    let grid_value = t[i] * x - p[i];
    if i == 0 || i == curve.len() - 1 {
        return Ok(RatePoint {
            x,
            value: grid_value,
            argmax_theta: t[i],
            at_grid_edge: true,
        });
    }
    let mut g = |s: f64| psi(s).map(|v| s * x - v);
    let (theta, value) = ternary_max(t[i - 1], t[i + 1], &mut g)?;
    let (theta, value) = if value >= grid_value {
        (theta, value)
    } else {
        (t[i], grid_value)
    };
    Ok(RatePoint {
        x,
        value,
        argmax_theta: theta,
        at_grid_edge: false,
    })
}

/// Centered-difference estimates of `ψ'(0)` (long-run mean of `Λ(t)/t`)
/// and `ψ''(0)` (long-run variance rate).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanVariance {
    pub psi_prime0: f64,
    pub psi_second0: f64,
    /// `ψ̂` at `−Δθ`, `0`, `+Δθ`.
    pub samples: [f64; 3],
    pub dtheta: f64,
}

pub fn mean_variance_at_zero(
    model: &ReflectedModel,
    f: &WeightSpec,
    mesh: &Mesh,
    dtheta: f64,
    opts: &SolverOptions,
) -> Result<MeanVariance> {
    if !(dtheta > 0.0 && dtheta.is_finite()) {
        return Err(invalid(format!("dtheta must be positive, got {dtheta}")));
    }
    let thetas = [-dtheta, 0.0, dtheta];
    let psi: Vec<f64> = thetas
        .par_iter()
        .map(|&theta| {
            solve_psi(model, f, theta, mesh, opts)
                .map(|r| r.psi_hat)
                .map_err(|e| Error::SolveFailed {
                    theta,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    Ok(MeanVariance {
        psi_prime0: (psi[2] - psi[0]) / (2.0 * dtheta),
        psi_second0: (psi[2] - 2.0 * psi[1] + psi[0]) / (dtheta * dtheta),
        samples: [psi[0], psi[1], psi[2]],
        dtheta,
    })
}
