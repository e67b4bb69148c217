//! Closed-form implicit relations between `θ` and `ψ_θ` for the two
//! analytically tractable models.
//!
//! * Reflected Brownian motion with drift `μ` and variance `σ²` on `[0, b]`,
//!   with `ρ₀ = ρ_b = 1` and the functional `Λ = L₀` (weight concentrated at
//!   the lower boundary: `f(0) = 1`, `f = 0` on `(0, b]`).
//! * The reflected birth-death process on `{0, ..., b}` with jump rate `λ`
//!   and `Λ` the occupation time of state 0.
//!
//! Inversion always follows the branch through `(θ, ψ) = (0, 0)`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RbmParams {
    pub mu: f64,
    pub sigma2: f64,
    pub b: f64,
}

impl RbmParams {
    pub fn new(mu: f64, sigma2: f64, b: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(invalid("drift must be finite"));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(invalid(format!("sigma2 must be positive, got {sigma2}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(invalid(format!("b must be positive, got {b}")));
        }
        Ok(Self { mu, sigma2, b })
    }

    /// Standard Brownian motion on `[0, 1]`.
    pub fn standard() -> Self {
        Self {
            mu: 0.0,
            sigma2: 1.0,
            b: 1.0,
        }
    }

    /// Discriminant `μ² + 2σ²ψ` of the characteristic equation.
    fn discriminant(&self, psi: f64) -> f64 {
        self.mu * self.mu + 2.0 * self.sigma2 * psi
    }

    /// `ψ` below which the complex-regime phase `αb/σ²` exceeds `π`; the
    /// principal branch lies strictly above it.
    fn branch_floor(&self) -> f64 {
        let w = std::f64::consts::PI * self.sigma2 / self.b;
        -(self.mu * self.mu + w * w) / (2.0 * self.sigma2)
    }

    /// `R(ψ)` with `θ = 2ψ / R(ψ)`: `α coth(αb/σ²) − μ` in the real regime,
    /// `α cot(αb/σ²) − μ` in the complex regime and `σ²/b − μ` at the
    /// repeated root. Increasing in `ψ` above [`Self::branch_floor`]; its zero
    /// is the pole of the implicit relation.
    fn gain(&self, psi: f64) -> f64 {
        let disc = self.discriminant(psi);
        let scale = self.b / self.sigma2;
        let alpha = disc.abs().sqrt();
        let z = alpha * scale;
        let zcot = if z < 1e-6 {
            // z coth z and z cot z to second order
            if disc >= 0.0 {
                1.0 + z * z / 3.0
            } else {
                1.0 - z * z / 3.0
            }
        } else if disc > 0.0 {
            z / z.tanh()
        } else {
            z / z.tan()
        };
        zcot / scale - self.mu
    }
}

/// `θ` as a function of `ψ` for reflected Brownian motion.
pub fn rbm_theta_of_psi(p: &RbmParams, psi: f64) -> Result<f64> {
    if !psi.is_finite() {
        return Err(invalid("psi must be finite"));
    }
    if psi == 0.0 {
        return Ok(0.0);
    }
    let r = p.gain(psi);
    let level = p.mu.abs() + p.sigma2 / p.b;
    if r.abs() <= 1e-14 * level {
        return Err(Error::Pole { psi });
    }
    Ok(2.0 * psi / r)
}

/// Principal-branch inverse of [`rbm_theta_of_psi`].
pub fn rbm_psi_of_theta(p: &RbmParams, theta: f64, tol: f64) -> Result<f64> {
    invert_principal(
        theta,
        tol,
        |psi| rbm_theta_of_psi(p, psi),
        |psi| p.gain(psi),
        p.branch_floor(),
    )
}

/// Principal eigenfunction of reflected Brownian motion for the lower
/// boundary functional, normalised by `u(b) = 1`:
/// `u(x) = e^{-μy/σ²} (cosh(αy/σ²) + (μ/α) sinh(αy/σ²))` with `y = x − b`
/// (circular functions in the complex regime, `1 + μy/σ²` at the repeated
/// root).
pub fn rbm_eigenfunction(p: &RbmParams, psi: f64, x: f64) -> Result<f64> {
    if !(0.0..=p.b).contains(&x) {
        return Err(invalid(format!("x = {x} lies outside [0, {}]", p.b)));
    }
    let y = (x - p.b) / p.sigma2;
    let disc = p.discriminant(psi);
    let alpha = disc.abs().sqrt();
    let z = alpha * y;
    // cosh/cos part and sinh(z)/α (resp. sin(z)/α) written as y·sinc(z)
    let (even, odd) = if disc >= 0.0 {
        let shc = if z.abs() < 1e-8 { 1.0 } else { z.sinh() / z };
        (z.cosh(), y * shc)
    } else {
        let sc = if z.abs() < 1e-8 { 1.0 } else { z.sin() / z };
        (z.cos(), y * sc)
    };
    Ok((-p.mu * y).exp() * (even + p.mu * odd))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BdParams {
    pub lambda: f64,
    pub b: usize,
}

impl BdParams {
    pub fn new(lambda: f64, b: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        if b < 2 {
            return Err(invalid(format!("state space top must be at least 2, got {b}")));
        }
        Ok(Self { lambda, b })
    }

    /// Solves the interior and upper-boundary recurrences from `u(b) = 1`
    /// and returns `(u(0), u(1))`.
    fn lower_values(&self, psi: f64) -> (f64, f64) {
        let l = self.lambda;
        let mut above = 1.0;
        let mut here = 1.0 + 2.0 * psi / l;
        for _ in 1..self.b {
            let below = 2.0 / l * (l + psi) * here - above;
            above = here;
            here = below;
        }
        (here, above)
    }

    fn theta_by_recurrence(&self, psi: f64) -> Result<f64> {
        let (u0, u1) = self.lower_values(psi);
        if u0 == 0.0 {
            return Err(Error::Pole { psi });
        }
        Ok(self.lambda / 2.0 + psi - self.lambda / 2.0 * u1 / u0)
    }

    /// `u(0)` under `u(b) = 1`, scaled to order one; its largest zero is the
    /// pole of the implicit relation.
    fn denominator(&self, psi: f64) -> f64 {
        let (u0, u1) = self.lower_values(psi);
        u0 / u0.abs().max(u1.abs()).max(1.0)
    }
}

/// `θ` as a function of `ψ` for the reflected birth-death process, from the
/// closed form `θ = A/B` evaluated in complex arithmetic (the square root
/// `√(ψ(2λ+ψ))` is imaginary for `-2λ < ψ < 0`). Near the degenerate
/// points `ψ ∈ {0, -2λ}` the recurrence is used instead.
pub fn bd_theta_of_psi(p: &BdParams, psi: f64) -> Result<f64> {
    if !psi.is_finite() {
        return Err(invalid("psi must be finite"));
    }
    if psi == 0.0 {
        return Ok(0.0);
    }
    let l = p.lambda;
    let disc = psi * (2.0 * l + psi);
    if disc.abs() <= 1e-8 * l * l {
        return p.theta_by_recurrence(psi);
    }
    let s = Complex64::new(disc, 0.0).sqrt();
    let base = Complex64::new(l + psi, 0.0);
    let lo = ((base - s) / l).powu(p.b as u32);
    let hi = ((base + s) / l).powu(p.b as u32);
    let diff = lo - hi;
    let sum = lo + hi;
    let a = psi * (diff * l + diff * psi - s * sum);
    let b = diff * psi - s * sum;
    if b.norm() <= 1e-300 {
        return Err(Error::Pole { psi });
    }
    let theta = a / b;
    if theta.im.abs() > 1e-10 * theta.re.abs().max(1.0) {
        return Err(Error::NonFinite(format!(
            "birth-death relation left an imaginary residue {} at psi = {psi}",
            theta.im
        )));
    }
    Ok(theta.re)
}

/// Principal-branch inverse of [`bd_theta_of_psi`].
pub fn bd_psi_of_theta(p: &BdParams, theta: f64, tol: f64) -> Result<f64> {
    invert_principal(
        theta,
        tol,
        |psi| bd_theta_of_psi(p, psi),
        |psi| p.denominator(psi),
        -2.0 * p.lambda,
    )
}

/// Bisection for `θ(ψ) = θ` on the branch through the origin.
///
/// `denominator` is positive on `[0, ∞)` and its first zero below 0, searched
/// on `(floor, 0)`, is the pole that bounds the branch from below; `θ(ψ)`
/// tends to `-∞` there.
fn invert_principal(
    theta: f64,
    tol: f64,
    theta_of: impl Fn(f64) -> Result<f64>,
    denominator: impl Fn(f64) -> f64,
    floor: f64,
) -> Result<f64> {
    if !theta.is_finite() {
        return Err(invalid("theta must be finite"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if theta == 0.0 {
        return Ok(0.0);
    }

    let (mut lo, mut hi) = if theta > 0.0 {
        let mut hi = theta.abs().max(1e-6);
        let mut grown = 0;
        while theta_of(hi)? < theta {
            hi *= 2.0;
            grown += 1;
            if grown > 2000 || !hi.is_finite() {
                return Err(Error::OutOfBranch { theta, pole: None });
            }
        }
        (0.0, hi)
    } else {
        let pole = first_zero_below(&denominator, floor);
        let lo = match pole {
            Some(p) => p,
            None => {
                if theta_of(floor)? > theta {
                    return Err(Error::OutOfBranch { theta, pole: None });
                }
                floor
            }
        };
        (lo, 0.0)
    };

    // below(ψ): θ(ψ) < target, counting the pole side as below
    let below = |psi: f64| -> Result<bool> {
        if denominator(psi) <= 0.0 {
            return Ok(true);
        }
        match theta_of(psi) {
            Ok(t) => Ok(t < theta),
            Err(Error::Pole { .. }) => Ok(true),
            Err(e) => Err(e),
        }
    };
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * mid.abs().max(1e-300) || mid == lo || mid == hi {
            break;
        }
        if below(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let psi = 0.5 * (lo + hi);
    match theta_of(psi) {
        Ok(_) => Ok(psi),
        Err(Error::Pole { psi: p }) => Err(Error::OutOfBranch { theta, pole: Some(p) }),
        Err(e) => Err(e),
    }
}

/// Largest `ψ` in `(floor, 0)` at which `denominator` changes sign.
fn first_zero_below(denominator: &impl Fn(f64) -> f64, floor: f64) -> Option<f64> {
    const STEPS: usize = 4096;
    let mut upper = 0.0;
    for k in 1..=STEPS {
        // stop just short of the floor, where the denominator may blow up
        let psi = floor * (k as f64 / STEPS as f64) * (1.0 - 1e-12);
        if !(denominator(psi) > 0.0) {
            let (mut lo, mut hi) = (psi, upper);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if denominator(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        upper = psi;
    }
    None
}
