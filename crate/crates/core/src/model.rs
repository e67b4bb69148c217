//! Reflected jump-diffusion models on `[0, b]`.
//!
//! A [`ReflectedModel`] bundles drift, diffusion coefficient, jump kernel and
//! the reflection magnitudes at the two boundary points. Both the PIDE solver
//! and the path simulator consume the same model value.
//!
//! The built-in models are:
//!
//! * reflected Brownian motion with constant drift ([`reflected_bm`]),
//! * the reflected birth-death chain on `{0, 1, ..., b}` ([`birth_death`]),
//! * three descriptions of a bistable two-species reaction network with
//!   division errors ([`crn_langevin`], [`crn_jump_diffusion`],
//!   [`crn_jump_markov`]).

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};

/// Number of points used when scanning coefficients over `[0, b]` for
/// validation.
const SCAN_POINTS: usize = 1001;

/// A real function on the state space with a human-readable name.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarField {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| c)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ScalarField").field(&self.name).finish()
    }
}

/// A jump of fixed displacement occurring at a state-dependent rate.
#[derive(Clone, Debug)]
pub struct JumpAtom {
    pub displacement: f64,
    pub rate: ScalarField,
}

impl JumpAtom {
    pub fn new(displacement: f64, rate: ScalarField) -> Self {
        Self { displacement, rate }
    }
}

/// Jumps with displacement spread over `[lo, hi]` with density
/// `density(x, y)`, integrated by the composite trapezoid rule on
/// `subdivisions` equal pieces.
#[derive(Clone)]
pub struct ContinuousJumpComponent {
    pub lo: f64,
    pub hi: f64,
    pub density: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub subdivisions: usize,
}

impl ContinuousJumpComponent {
    pub fn new(
        lo: f64,
        hi: f64,
        subdivisions: usize,
        density: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!(
                "jump interval [{lo}, {hi}] must be finite with lo < hi"
            )));
        }
        if subdivisions == 0 {
            return Err(invalid("jump quadrature needs at least one subdivision"));
        }
        Ok(Self {
            lo,
            hi,
            density: Arc::new(density),
            subdivisions,
        })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.subdivisions as f64
    }

    /// Trapezoid nodes `(y_k, w_k)` with `sum_k w_k g(y_k) ≈ ∫ g`.
    pub fn quadrature(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = self.step();
        let m = self.subdivisions;
        (0..=m).map(move |k| {
            let y = self.lo + k as f64 * h;
            let w = if k == 0 || k == m { 0.5 * h } else { h };
            (y, w)
        })
    }

    /// Trapezoid approximation of `∫ density(x, y) dy`.
    pub fn intensity(&self, x: f64) -> f64 {
        self.quadrature().map(|(y, w)| w * (self.density)(x, y)).sum()
    }
}

impl fmt::Debug for ContinuousJumpComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuousJumpComponent")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("subdivisions", &self.subdivisions)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, Default)]
pub struct JumpKernel {
    pub atoms: Vec<JumpAtom>,
    pub continuous: Vec<ContinuousJumpComponent>,
}

impl JumpKernel {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_atoms(atoms: Vec<JumpAtom>) -> Self {
        Self {
            atoms,
            continuous: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.continuous.is_empty()
    }

    /// Total jump intensity `ν_x(M)` at state `x`.
    pub fn total_intensity(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.rate.eval(x)).sum();
        let cont: f64 = self.continuous.iter().map(|c| c.intensity(x)).sum();
        atoms + cont
    }
}

/// One-dimensional reflected jump-diffusion on `[0, b]`.
///
/// `rho0` and `rhob` are the magnitudes of the inward pushes at `0` and `b`.
/// They enter the boundary rows of the PIDE whenever the continuous boundary
/// process can be active, which is the case iff `sigma2` does not vanish
/// identically.
#[derive(Clone, Debug)]
pub struct ReflectedModel {
    pub b: f64,
    pub mu: ScalarField,
    pub sigma2: ScalarField,
    pub kernel: JumpKernel,
    pub rho0: f64,
    pub rhob: f64,
    pub has_continuous_reflection: bool,
}

impl ReflectedModel {
    pub fn new(b: f64, mu: ScalarField, sigma2: ScalarField, kernel: JumpKernel, rho0: f64, rhob: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(invalid(format!("domain bound b = {b} must be positive and finite")));
        }
        if !(rho0.is_finite() && rho0 > 0.0 && rhob.is_finite() && rhob > 0.0) {
            return Err(invalid(format!(
                "reflection magnitudes must be positive (rho0 = {rho0}, rhob = {rhob})"
            )));
        }
        for atom in &kernel.atoms {
            if !atom.displacement.is_finite() {
                return Err(invalid("jump displacement must be finite"));
            }
        }
        let mut any_diffusion = false;
        for k in 0..SCAN_POINTS {
            let x = b * k as f64 / (SCAN_POINTS - 1) as f64;
            let (m, s2) = (mu.eval(x), sigma2.eval(x));
            if !m.is_finite() || !s2.is_finite() {
                return Err(invalid(format!("non-finite drift or diffusion at x = {x}")));
            }
            if s2 < 0.0 {
                return Err(invalid(format!("diffusion coefficient {s2} < 0 at x = {x}")));
            }
            any_diffusion |= s2 > 0.0;
            for atom in &kernel.atoms {
                let r = atom.rate.eval(x);
                if !(r.is_finite() && r >= 0.0) {
                    return Err(invalid(format!(
                        "jump rate {r} of atom {} is negative or non-finite at x = {x}",
                        atom.displacement
                    )));
                }
            }
            for comp in &kernel.continuous {
                for (y, _) in comp.quadrature() {
                    let d = (comp.density)(x, y);
                    if !(d.is_finite() && d >= 0.0) {
                        return Err(invalid(format!(
                            "jump density {d} is negative or non-finite at (x, y) = ({x}, {y})"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            b,
            mu,
            sigma2,
            kernel,
            rho0,
            rhob,
            has_continuous_reflection: any_diffusion,
        })
    }

    /// Destination of a jump of size `y` from `x`: the overshoot is clamped
    /// back onto the boundary.
    #[inline]
    pub fn destination(&self, x: f64, y: f64) -> f64 {
        (x + y).clamp(0.0, self.b)
    }

    /// Lattice spacing of a pure-jump model whose atoms all live on a common
    /// grid `{0, h, 2h, ..., b}`; `None` otherwise.
    pub fn lattice_step(&self) -> Option<f64> {
        if self.has_continuous_reflection || !self.kernel.continuous.is_empty() {
            return None;
        }
        let h = self
            .kernel
            .atoms
            .iter()
            .map(|a| a.displacement.abs())
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !h.is_finite() {
            return None;
        }
        let on_grid = |v: f64| {
            let r = v / h;
            (r - r.round()).abs() <= 1e-9 * r.abs().max(1.0)
        };
        if on_grid(self.b) && self.kernel.atoms.iter().all(|a| on_grid(a.displacement)) {
            Some(h)
        } else {
            None
        }
    }
}

/// Weight function `f` of the additive functional together with its exact
/// boundary values.
#[derive(Clone, Debug)]
pub struct WeightSpec {
    pub f: ScalarField,
    pub f0: f64,
    pub fb: f64,
}

impl WeightSpec {
    /// Wraps `f`, reading the boundary values off `f(0)` and `f(b)`.
    pub fn from_field(f: ScalarField, b: f64) -> Self {
        let f0 = f.eval(0.0);
        let fb = f.eval(b);
        Self { f, f0, fb }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            f: ScalarField::constant(c),
            f0: c,
            fb: c,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.f.eval(x)
    }
}

/// Piecewise-linear hats of height one and radius `b/(N+1)` around each of
/// `centers`.
pub fn continuised_point_indicator(centers: &[f64], n: usize, b: f64) -> Result<ScalarField> {
    if centers.is_empty() {
        return Err(invalid("at least one hat center is required"));
    }
    let radius = b / (n as f64 + 1.0);
    let mut sorted = centers.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &c in &sorted {
        if !(c - radius > 0.0 && c + radius < b) {
            return Err(invalid(format!(
                "hat at {c} with radius {radius} touches the boundary of [0, {b}]"
            )));
        }
    }
    for pair in sorted.windows(2) {
        if pair[1] - pair[0] <= 2.0 * radius {
            return Err(invalid(format!(
                "hats at {} and {} overlap (radius {radius})",
                pair[0], pair[1]
            )));
        }
    }
    let name = format!("hats{sorted:?}/N={n}");
    Ok(ScalarField::new(name, move |x| {
        sorted
            .iter()
            .map(|&c| (1.0 - (x - c).abs() / radius).max(0.0))
            .fold(0.0, f64::max)
    }))
}

/// Continuous approximation of the indicator of the two boundary
/// neighbourhoods `[0, w] ∪ [b - w, b]`, `w = b/(N+1)`, ramping to zero over
/// one further step.
pub fn continuised_boundary_indicator(n: usize, b: f64) -> Result<WeightSpec> {
    if n < 4 {
        return Err(invalid(format!("boundary indicator needs N >= 4, got {n}")));
    }
    let w = b / (n as f64 + 1.0);
    let f = ScalarField::new(format!("boundary-hats/N={n}"), move |x| {
        if x <= w || x >= b - w {
            1.0
        } else if x < 2.0 * w {
            2.0 - x / w
        } else if x > b - 2.0 * w {
            2.0 - (b - x) / w
        } else {
            0.0
        }
    });
    Ok(WeightSpec { f, f0: 1.0, fb: 1.0 })
}

/// One-sided hat at the lower boundary, `f(x) = (1 - (N+1) x / b)^+`. Its
/// additive functional is the local time at `0` plus a vanishing occupation
/// term.
pub fn continuised_lower_boundary_hat(n: usize, b: f64) -> WeightSpec {
    let w = b / (n as f64 + 1.0);
    WeightSpec {
        f: ScalarField::new(format!("lower-hat/N={n}"), move |x| (1.0 - x / w).max(0.0)),
        f0: 1.0,
        fb: 0.0,
    }
}

/// Continuous approximation of `1_{[0, right)}`: one up to `right - width`,
/// then a linear ramp reaching zero at `right`.
pub fn continuised_interval_indicator(right: f64, width: f64, b: f64) -> Result<WeightSpec> {
    if !(width > 0.0 && right - width >= 0.0 && right <= b) {
        return Err(invalid(format!(
            "interval indicator needs 0 <= right - width and right <= b (right = {right}, width = {width})"
        )));
    }
    let f = ScalarField::new(format!("interval[0,{right})"), move |x| {
        if x < right - width {
            1.0
        } else if x < right {
            (right - x) / width
        } else {
            0.0
        }
    });
    Ok(WeightSpec::from_field(f, b))
}

/// Reflected Brownian motion with constant drift and diffusion, normal
/// reflection of unit magnitude.
pub fn reflected_bm(mu: f64, sigma2: f64, b: f64) -> Result<ReflectedModel> {
    if !(sigma2 > 0.0) {
        return Err(invalid(format!("reflected BM needs sigma2 > 0, got {sigma2}")));
    }
    ReflectedModel::new(
        b,
        ScalarField::constant(mu),
        ScalarField::constant(sigma2),
        JumpKernel::empty(),
        1.0,
        1.0,
    )
}

/// Symmetric birth-death chain on `{0, ..., b}` with total rate `lambda`;
/// jumps that would leave the state space are suppressed.
pub fn birth_death(lambda: f64, b: usize) -> Result<ReflectedModel> {
    if !(lambda > 0.0) || b < 2 {
        return Err(invalid(format!(
            "birth-death needs lambda > 0 and b >= 2 (lambda = {lambda}, b = {b})"
        )));
    }
    let half = 0.5 * lambda;
    let kernel = JumpKernel::from_atoms(vec![
        JumpAtom::new(1.0, ScalarField::constant(half)),
        JumpAtom::new(-1.0, ScalarField::constant(half)),
    ]);
    ReflectedModel::new(b as f64, ScalarField::zero(), ScalarField::zero(), kernel, 1.0, 1.0)
}

/// Rate constants of the two-species network
/// `A → B`, `B → A`, `A + B → 2B`, `2A + B → 3A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrnRates {
    pub k10m: f64,
    pub k01p: f64,
    pub k11m: f64,
    pub k21p: f64,
}

impl CrnRates {
    /// Constants with stable equilibria at 0.25 and 0.75 and an unstable one
    /// at 0.5.
    pub fn bistable() -> Self {
        Self {
            k10m: 1.0,
            k01p: 1.0,
            k11m: 16.0 / 3.0,
            k21p: 32.0 / 3.0,
        }
    }

    /// Scaled rate of reactions decreasing the proportion of `A`.
    pub fn r_minus(&self, x: f64) -> f64 {
        self.k10m * x + self.k11m * x * (1.0 - x)
    }

    /// Scaled rate of reactions increasing the proportion of `A`.
    pub fn r_plus(&self, x: f64) -> f64 {
        self.k01p * (1.0 - x) + self.k21p * x * x * (1.0 - x)
    }

    pub fn drift(&self, x: f64) -> f64 {
        -self.k10m * x + self.k01p * (1.0 - x) - self.k11m * x * (1.0 - x) + self.k21p * x * x * (1.0 - x)
    }

    fn validate(&self) -> Result<()> {
        let all = [self.k10m, self.k01p, self.k11m, self.k21p];
        if all.iter().all(|k| k.is_finite() && *k >= 0.0) {
            Ok(())
        } else {
            Err(invalid(format!("reaction constants must be nonnegative: {self:?}")))
        }
    }
}

impl Default for CrnRates {
    fn default() -> Self {
        Self::bistable()
    }
}

pub fn crn_drift(rates: CrnRates) -> ScalarField {
    ScalarField::new("crn-drift", move |x| rates.drift(x))
}

/// Division-error rate `ξ_n(x) = γ_n x (1 - x) / 2`.
pub fn division_rate(gamma_n: f64) -> ScalarField {
    ScalarField::new(format!("xi(gamma={gamma_n})"), move |x| 0.5 * gamma_n * x * (1.0 - x))
}

fn check_scale(n: f64) -> Result<()> {
    if n.is_finite() && n >= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("system size n must be >= 1, got {n}")))
    }
}

/// Constrained Langevin approximation of the network at system size `n`.
pub fn crn_langevin(n: f64, rates: CrnRates) -> Result<ReflectedModel> {
    check_scale(n)?;
    rates.validate()?;
    let sigma2 = ScalarField::new("crn-cle-sigma2", move |x| {
        (rates.r_plus(x) + rates.r_minus(x) + x * (1.0 - x)) / n
    });
    let rho = 1.0 / n.sqrt();
    ReflectedModel::new(1.0, crn_drift(rates), sigma2, JumpKernel::empty(), rho, rho)
}

/// Reactions as a constrained Langevin diffusion, division errors kept as
/// `±1/n` jumps at rate `ξ_n`.
pub fn crn_jump_diffusion(n: f64, gamma_n: f64, rates: CrnRates) -> Result<ReflectedModel> {
    check_scale(n)?;
    rates.validate()?;
    if !(gamma_n.is_finite() && gamma_n >= 0.0) {
        return Err(invalid(format!("division rate scale must be >= 0, got {gamma_n}")));
    }
    let sigma2 = ScalarField::new("crn-jda-sigma2", move |x| (rates.r_plus(x) + rates.r_minus(x)) / n);
    let xi = division_rate(gamma_n);
    let kernel = JumpKernel::from_atoms(vec![JumpAtom::new(1.0 / n, xi.clone()), JumpAtom::new(-1.0 / n, xi)]);
    let rho = 1.0 / n.sqrt();
    ReflectedModel::new(1.0, crn_drift(rates), sigma2, kernel, rho, rho)
}

/// The density-scaled jump Markov process itself.
pub fn crn_jump_markov(n: f64, gamma_n: f64, rates: CrnRates) -> Result<ReflectedModel> {
    check_scale(n)?;
    rates.validate()?;
    if !(gamma_n.is_finite() && gamma_n >= 0.0) {
        return Err(invalid(format!("division rate scale must be >= 0, got {gamma_n}")));
    }
    let up = ScalarField::new("crn-jmp-up", move |x| {
        0.5 * gamma_n * x * (1.0 - x) + n * rates.r_plus(x)
    });
    let down = ScalarField::new("crn-jmp-down", move |x| {
        0.5 * gamma_n * x * (1.0 - x) + n * rates.r_minus(x)
    });
    let kernel = JumpKernel::from_atoms(vec![JumpAtom::new(1.0 / n, up), JumpAtom::new(-1.0 / n, down)]);
    ReflectedModel::new(1.0, ScalarField::zero(), ScalarField::zero(), kernel, 1.0, 1.0)
}
