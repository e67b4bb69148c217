use crate::error::{invalid, Result};
use crate::model::ReflectedModel;

/// Uniform mesh `x_i = i h`, `i = 0..=N+1`, with `h = b/(N+1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mesh {
    interior: usize,
    b: f64,
}

impl Mesh {
    pub fn new(interior: usize, b: f64) -> Result<Self> {
        if interior == 0 {
            return Err(invalid("mesh needs at least one interior node"));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(invalid(format!("mesh needs b > 0, got {b}")));
        }
        Ok(Self { interior, b })
    }

    /// Mesh with `subintervals` equal pieces, i.e. `N = subintervals - 1`.
    pub fn with_subintervals(subintervals: usize, b: f64) -> Result<Self> {
        if subintervals < 2 {
            return Err(invalid("mesh needs at least two subintervals"));
        }
        Self::new(subintervals - 1, b)
    }

    /// Mesh coinciding with the state lattice of a pure-jump model.
    pub fn lattice(model: &ReflectedModel) -> Result<Self> {
        let h = model
            .lattice_step()
            .ok_or_else(|| invalid("model has no jump lattice (diffusive or incommensurate jumps)"))?;
        let pieces = (model.b / h).round() as usize;
        Self::with_subintervals(pieces, model.b)
    }

    /// Number of interior nodes `N`.
    pub fn interior(&self) -> usize {
        self.interior
    }

    /// Number of nodes including both boundary points, `N + 2`.
    pub fn nodes(&self) -> usize {
        self.interior + 2
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn h(&self) -> f64 {
        self.b / (self.interior as f64 + 1.0)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.interior + 1 {
            self.b
        } else {
            i as f64 * self.h()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.x(i)).collect()
    }

    /// Piecewise-linear interpolation of nodal values `u` (length `N + 2`).
    pub fn interpolate(&self, u: &[f64], x: f64) -> f64 {
        debug_assert_eq!(u.len(), self.nodes());
        let pos = (x / self.h()).clamp(0.0, (self.interior + 1) as f64);
        let l = (pos.floor() as usize).min(self.interior);
        let w = pos - l as f64;
        (1.0 - w) * u[l] + w * u[l + 1]
    }
}
