//! Large deviations of additive functionals of one-dimensional reflected
//! jump-diffusions.
//!
//! The limiting log moment generating function `ψ_θ` of
//! `Λ(t) = ∫ f(V) ds + f(0) L₀ᶜ(t) + f(b) L_bᶜ(t)` is the principal eigenvalue of
//! the tilted generator `𝓛 + θf` under the boundary constraint
//! `ρ₀ u'(0) = -θ f(0) u(0)`, `ρ_b u'(b) = θ f(b) u(b)`. [`pide`] discretises
//! that eigenproblem, [`oracles`] gives closed forms for two models, [`sim`]
//! estimates the same quantities by path simulation and [`ldp`] turns
//! `θ ↦ ψ_θ` into rate functions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod ldp;
pub mod model;
pub mod oracles;
pub mod pide;
pub mod sim;
pub mod skorokhod;

pub use error::{Error, Result};
pub use ldp::{legendre_transform, legendre_transform_with, mean_variance_at_zero, psi_curve, PsiCurve, RatePoint};
pub use model::{ReflectedModel, WeightSpec};
pub use pide::{solve_psi, Mesh, SolverOptions, SpectralResult};
pub use sim::{martingale_residual, mc_log_mgf, simulate, SimConfig};
