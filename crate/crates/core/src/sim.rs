//! Monte Carlo simulation of reflected jump-diffusions and the estimators
//! built on it.
//!
//! Each Euler step first moves the diffusion part and reflects it, then
//! applies the jumps proposed during the step (thinning against a constant
//! bound on the total intensity), each clamped back into `[0, b]`. Pushes
//! caused by clamped jumps are kept apart from the continuous boundary
//! processes, and only the latter enter `Λ`.
//!
//! Per-path random streams are `ChaCha8` keyed by the seed with the path
//! index as stream id, so results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{ReflectedModel, WeightSpec};
use crate::pide::SpectralResult;
use crate::skorokhod::{incremental_reflect, ReflectState};

/// How the continuous boundary pushes of a diffusion step are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BoundaryScheme {
    /// Samples the minimum and maximum of the Brownian bridge between the
    /// step endpoints and pushes by their excursions outside `[0, b]`.
    /// Catches boundary contact inside the step, which plain projection
    /// misses (its local time is biased low by `O(√dt)`).
    #[default]
    BridgeExtremum,
    /// Clamps the Euler endpoint with [`incremental_reflect`].
    Projection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    /// Overrides the scanned bound on the total jump intensity.
    pub intensity_bound: Option<f64>,
    /// Starting state; defaults to `b/2`, snapped to the jump lattice for
    /// pure-jump models.
    pub x0: Option<f64>,
    pub scheme: BoundaryScheme,
    /// Keep every `record_every`-th step in a [`ReflectedPathRecord`].
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 10.0,
            paths: 1000,
            seed: 0,
            intensity_bound: None,
            x0: None,
            scheme: BoundaryScheme::default(),
            record_every: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(invalid(format!(
                "horizon {} must be at least dt = {}",
                self.horizon, self.dt
            )));
        }
        if self.paths == 0 {
            return Err(invalid("at least one path is required"));
        }
        if self.record_every == 0 {
            return Err(invalid("record stride must be positive"));
        }
        if let Some(b) = self.intensity_bound {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(invalid(format!("intensity bound must be finite and >= 0, got {b}")));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt).round() as usize).max(1)
    }

    fn start(&self, model: &ReflectedModel) -> Result<f64> {
        let x0 = match self.x0 {
            Some(x) => x,
            None => {
                let mid = 0.5 * model.b;
                match model.lattice_step() {
                    Some(h) if !model.has_continuous_reflection => (mid / h).round() * h,
                    _ => mid,
                }
            }
        };
        if !(0.0..=model.b).contains(&x0) {
            return Err(invalid(format!("start {x0} lies outside [0, {}]", model.b)));
        }
        Ok(x0)
    }
}

/// Sampled trajectory of one simulated path.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReflectedPathRecord {
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    /// Continuous boundary processes (the `L^c` parts).
    pub l0: Vec<f64>,
    pub lb: Vec<f64>,
    /// Pushes caused by jumps that overshot the boundary.
    pub l0_jump: Vec<f64>,
    pub lb_jump: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl ReflectedPathRecord {
    fn push(&mut self, t: f64, s: &PathState) {
        self.times.push(t);
        self.v.push(s.v);
        self.l0.push(s.l0);
        self.lb.push(s.lb);
        self.l0_jump.push(s.l0_jump);
        self.lb_jump.push(s.lb_jump);
        self.lambda.push(s.lambda);
    }
}

/// Start and end of one path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Endpoint {
    pub v0: f64,
    pub v: f64,
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct PathState {
    v: f64,
    l0: f64,
    lb: f64,
    l0_jump: f64,
    lb_jump: f64,
    lambda: f64,
}

/// `1.1 ×` the largest total jump intensity over a uniform scan of `[0, b]`.
pub fn scan_intensity_bound(model: &ReflectedModel) -> Result<f64> {
    const POINTS: usize = 10_010;
    let mut top = 0.0_f64;
    for k in 0..POINTS {
        let x = model.b * k as f64 / (POINTS - 1) as f64;
        let rate = model.kernel.total_intensity(x);
        if !rate.is_finite() {
            return Err(Error::NonFinite(format!("jump intensity at x = {x}")));
        }
        top = top.max(rate);
    }
    Ok(1.1 * top)
}

struct Engine<'a> {
    model: &'a ReflectedModel,
    f: &'a WeightSpec,
    cfg: &'a SimConfig,
    bound: f64,
    x0: f64,
}

impl<'a> Engine<'a> {
    fn new(model: &'a ReflectedModel, f: &'a WeightSpec, cfg: &'a SimConfig) -> Result<Self> {
        cfg.validate()?;
        let bound = if model.kernel.is_empty() {
            0.0
        } else {
            match cfg.intensity_bound {
                Some(b) => b,
                None => scan_intensity_bound(model)?,
            }
        };
        let x0 = cfg.start(model)?;
        Ok(Self {
            model,
            f,
            cfg,
            bound,
            x0,
        })
    }

    fn rng(&self, path: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(path);
        rng
    }

    fn run(&self, path: u64, mut record: Option<&mut ReflectedPathRecord>) -> Result<Endpoint> {
        let mut rng = self.rng(path);
        let b = self.model.b;
        let dt = self.cfg.dt;
        let sqdt = dt.sqrt();
        let steps = self.cfg.steps();
        let mut s = PathState {
            v: self.x0,
            ..PathState::default()
        };
        if let Some(r) = record.as_deref_mut() {
            r.push(0.0, &s);
        }
        let mut next_jump = if self.bound > 0.0 {
            rng.sample::<f64, _>(Exp1) / self.bound
        } else {
            f64::INFINITY
        };

        for k in 1..=steps {
            let t_end = k as f64 * dt;
            let x = s.v;
            let mu = self.model.mu.eval(x);
            let s2 = self.model.sigma2.eval(x);
            let fx = self.f.eval(x);
            if !(mu.is_finite() && s2.is_finite() && s2 >= 0.0 && fx.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "coefficients at x = {x}: mu = {mu}, sigma2 = {s2}, f = {fx}"
                )));
            }

            // diffusion part
            let end = if s2 > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                x + mu * dt + s2.sqrt() * sqdt * z
            } else {
                x + mu * dt
            };
            let (dl0, dlb, v) = match self.cfg.scheme {
                _ if end == x => (0.0, 0.0, x),
                BoundaryScheme::Projection => {
                    let r = incremental_reflect(ReflectState::at(x), end - x, b);
                    (r.l0, r.lb, r.v)
                }
                BoundaryScheme::BridgeExtremum => {
                    let var = s2 * dt;
                    let (p0, pb) = if var > 0.0 {
                        let e0 = -2.0 * var * (1.0 - rng.random::<f64>()).ln();
                        let eb = -2.0 * var * (1.0 - rng.random::<f64>()).ln();
                        let gap = (x - end) * (x - end);
                        let lo = 0.5 * (x + end - (gap + e0).sqrt());
                        let hi = 0.5 * (x + end + (gap + eb).sqrt());
                        ((-lo).max(0.0), (hi - b).max(0.0))
                    } else {
                        (0.0, 0.0)
                    };
                    let r = incremental_reflect(ReflectState::at(x), end + p0 - pb - x, b);
                    (p0 + r.l0, pb + r.lb, r.v)
                }
            };
            s.v = v;
            s.l0 += dl0;
            s.lb += dlb;
            s.lambda += fx * dt + self.f.f0 * dl0 + self.f.fb * dlb;

            // jumps proposed during the step
            while next_jump <= t_end {
                self.jump(&mut s, &mut rng)?;
                next_jump += rng.sample::<f64, _>(Exp1) / self.bound;
            }

            if let Some(r) = record.as_deref_mut() {
                if k % self.cfg.record_every == 0 || k == steps {
                    r.push(t_end, &s);
                }
            }
        }
        Ok(Endpoint {
            v0: self.x0,
            v: s.v,
            lambda: s.lambda,
        })
    }

    fn jump(&self, s: &mut PathState, rng: &mut ChaCha8Rng) -> Result<()> {
        let x = s.v;
        let kernel = &self.model.kernel;
        let total = kernel.total_intensity(x);
        if !total.is_finite() {
            return Err(Error::NonFinite(format!("jump intensity at x = {x}")));
        }
        if total > self.bound * (1.0 + 1e-12) {
            return Err(Error::IntensityBoundExceeded {
                x,
                rate: total,
                bound: self.bound,
            });
        }
        let mut pick = rng.random::<f64>() * self.bound;
        if pick >= total {
            return Ok(());
        }
        let mut displacement = None;
        for atom in &kernel.atoms {
            let r = atom.rate.eval(x);
            if pick < r {
                displacement = Some(atom.displacement);
                break;
            }
            pick -= r;
        }
        if displacement.is_none() {
            for comp in &kernel.continuous {
                let r = comp.intensity(x);
                if pick < r {
                    displacement = Some(sample_component(comp, x, pick / r, rng));
                    break;
                }
                pick -= r;
            }
        }
        // rounding can leave `pick` just past the last rate
        let Some(y) = displacement else {
            return Ok(());
        };
        let r = incremental_reflect(ReflectState::at(x), y, self.model.b);
        s.v = r.v;
        s.l0_jump += r.l0;
        s.lb_jump += r.lb;
        Ok(())
    }
}

/// Draws a displacement from the piecewise-linear interpolant of a
/// component's density through its quadrature nodes (the same measure the
/// trapezoid rule integrates against). `u` in `[0, 1)` selects the cell.
fn sample_component(comp: &crate::model::ContinuousJumpComponent, x: f64, u: f64, rng: &mut ChaCha8Rng) -> f64 {
    let h = comp.step();
    let n = comp.subdivisions;
    let d = |k: usize| (comp.density)(x, comp.lo + k as f64 * h).max(0.0);
    let masses: Vec<f64> = (0..n).map(|k| 0.5 * h * (d(k) + d(k + 1))).collect();
    let total: f64 = masses.iter().sum();
    let mut target = u * total;
    let mut cell = n - 1;
    for (k, m) in masses.iter().enumerate() {
        if target < *m {
            cell = k;
            break;
        }
        target -= m;
    }
    // inverse CDF of a linear density on one cell
    let (d0, d1) = (d(cell), d(cell + 1));
    let w: f64 = rng.random();
    let frac = if (d1 - d0).abs() <= 1e-12 * (d0 + d1) {
        w
    } else {
        let disc = d0 * d0 + w * (d1 * d1 - d0 * d0);
        (disc.max(0.0).sqrt() - d0) / (d1 - d0)
    };
    comp.lo + (cell as f64 + frac.clamp(0.0, 1.0)) * h
}

/// Simulates path number `path` of the ensemble described by `cfg`.
pub fn simulate(model: &ReflectedModel, f: &WeightSpec, cfg: &SimConfig, path: u64) -> Result<ReflectedPathRecord> {
    let engine = Engine::new(model, f, cfg)?;
    let mut record = ReflectedPathRecord::default();
    engine.run(path, Some(&mut record))?;
    Ok(record)
}

/// Start and end states and `Λ(T)` for every path, in path order.
pub fn simulate_endpoints(model: &ReflectedModel, f: &WeightSpec, cfg: &SimConfig) -> Result<Vec<Endpoint>> {
    let engine = Engine::new(model, f, cfg)?;
    (0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| engine.run(i, None))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub theta: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
}

/// `(1/T) log mean exp(θ Λ(T))` over the simulated paths, with a
/// delta-method standard error.
pub fn mc_log_mgf(model: &ReflectedModel, f: &WeightSpec, theta: f64, cfg: &SimConfig) -> Result<McEstimate> {
    if cfg.paths < 2 {
        return Err(invalid("the estimator needs at least two paths"));
    }
    if !theta.is_finite() {
        return Err(invalid("theta must be finite"));
    }
    let mut out = McEstimate {
        theta,
        estimate: 0.0,
        stderr: 0.0,
        paths: cfg.paths,
        horizon: cfg.steps() as f64 * cfg.dt,
        dt: cfg.dt,
        seed: cfg.seed,
    };
    if theta == 0.0 {
        cfg.validate()?;
        return Ok(out);
    }
    let ends = simulate_endpoints(model, f, cfg)?;
    let exponents: Vec<f64> = ends.iter().map(|e| theta * e.lambda).collect();
    let (log_mean, rel_se) = log_mean_exp(&exponents)?;
    out.estimate = log_mean / out.horizon;
    out.stderr = rel_se / out.horizon;
    Ok(out)
}

/// `log mean exp(a_i)` and the standard error of that logarithm.
fn log_mean_exp(a: &[f64]) -> Result<(f64, f64)> {
    let n = a.len() as f64;
    let top = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::NonFinite("exponent of the moment generating function".into()));
    }
    let w: Vec<f64> = a.iter().map(|x| (x - top).exp()).collect();
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let log_mean = top + mean.ln();
    let se = var.sqrt() / (n.sqrt() * mean);
    if !(log_mean.is_finite() && se.is_finite()) {
        return Err(Error::NonFinite("log moment generating function estimate".into()));
    }
    Ok((log_mean, se))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MartingaleCheck {
    /// `|mean M(T)/M(0) − 1|` with `M(t) = e^{θΛ(t) − ψ̂t} u(V(t))`.
    pub residual: f64,
    /// Standard error of the mean ratio.
    pub stderr: f64,
    pub paths: usize,
}

/// Monte Carlo check that `e^{θΛ(t) − ψt} u(V(t))` has constant mean, with
/// `(ψ, u)` taken from a solver result.
pub fn martingale_residual(
    model: &ReflectedModel,
    f: &WeightSpec,
    spectral: &SpectralResult,
    cfg: &SimConfig,
) -> Result<MartingaleCheck> {
    if cfg.paths < 2 {
        return Err(invalid("the estimator needs at least two paths"));
    }
    if spectral.u.iter().any(|&v| !(v > 0.0)) {
        return Err(invalid("eigenfunction must be strictly positive"));
    }
    let ends = simulate_endpoints(model, f, cfg)?;
    let horizon = cfg.steps() as f64 * cfg.dt;
    let u0 = spectral.u_at(ends[0].v0);
    let ratios: Vec<f64> = ends
        .iter()
        .map(|e| (spectral.theta * e.lambda - spectral.psi_hat * horizon).exp() * spectral.u_at(e.v) / u0)
        .collect();
    if ratios.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("martingale weight overflowed".into()));
    }
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    Ok(MartingaleCheck {
        residual: (mean - 1.0).abs(),
        stderr: (var / n).sqrt(),
        paths: ratios.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        birth_death, continuised_boundary_indicator, crn_jump_markov, reflected_bm, CrnRates, JumpKernel, ScalarField,
    };

    fn still_model() -> ReflectedModel {
        ReflectedModel::new(
            1.0,
            ScalarField::zero(),
            ScalarField::zero(),
            JumpKernel::empty(),
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn no_dynamics_gives_constant_path() {
        let f = WeightSpec::from_field(ScalarField::new("sq", |x| x * x), 1.0);
        let cfg = SimConfig {
            dt: 0.01,
            horizon: 3.0,
            ..SimConfig::default()
        };
        let r = simulate(&still_model(), &f, &cfg, 0).unwrap();
        assert!(r.v.iter().all(|&v| v == 0.5));
        assert!((r.lambda.last().unwrap() - 0.25 * 3.0).abs() < 1e-12);
        assert_eq!(r.times.len(), 301);
    }

    #[test]
    fn records_respect_invariants() {
        let model = reflected_bm(0.5, 1.0, 1.0).unwrap();
        let f = continuised_boundary_indicator(20, 1.0).unwrap();
        for scheme in [BoundaryScheme::Projection, BoundaryScheme::BridgeExtremum] {
            let cfg = SimConfig {
                dt: 1e-3,
                horizon: 5.0,
                scheme,
                ..SimConfig::default()
            };
            let r = simulate(&model, &f, &cfg, 3).unwrap();
            assert_eq!((r.l0[0], r.lb[0]), (0.0, 0.0));
            assert!(r.v.iter().all(|&v| (0.0..=1.0).contains(&v)));
            for i in 1..r.v.len() {
                assert!(r.l0[i] >= r.l0[i - 1] && r.lb[i] >= r.lb[i - 1]);
                if scheme == BoundaryScheme::Projection {
                    if r.l0[i] > r.l0[i - 1] {
                        assert_eq!(r.v[i], 0.0);
                    }
                    if r.lb[i] > r.lb[i - 1] {
                        assert_eq!(r.v[i], 1.0);
                    }
                }
            }
            assert!(*r.lambda.last().unwrap() > 0.0);
        }
    }

    #[test]
    fn jump_markov_needs_no_pushes() {
        let model = crn_jump_markov(100.0, 100.0, CrnRates::bistable()).unwrap();
        let cfg = SimConfig {
            dt: 1e-3,
            horizon: 20.0,
            ..SimConfig::default()
        };
        let r = simulate(&model, &WeightSpec::constant(0.0), &cfg, 1).unwrap();
        assert!(r
            .l0
            .iter()
            .chain(&r.lb)
            .chain(&r.l0_jump)
            .chain(&r.lb_jump)
            .all(|&l| l == 0.0));
        assert!(r.v.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // lattice values only
        assert!(r.v.iter().all(|&v| ((v * 100.0) - (v * 100.0).round()).abs() < 1e-9));
        assert!(r.v.iter().any(|&v| v != 0.5));
    }

    #[test]
    fn birth_death_clamps_go_to_jump_accumulators() {
        let model = birth_death(50.0, 3).unwrap();
        let cfg = SimConfig {
            dt: 0.01,
            horizon: 20.0,
            ..SimConfig::default()
        };
        let r = simulate(&model, &WeightSpec::constant(1.0), &cfg, 0).unwrap();
        assert_eq!(r.v[0], 2.0);
        assert!(r.l0.iter().chain(&r.lb).all(|&l| l == 0.0));
        assert!(r.l0_jump.last().unwrap() + r.lb_jump.last().unwrap() > 0.0);
        assert!((r.lambda.last().unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn zero_theta_is_exactly_zero() {
        let model = reflected_bm(0.0, 1.0, 1.0).unwrap();
        let cfg = SimConfig {
            paths: 2,
            ..SimConfig::default()
        };
        let e = mc_log_mgf(&model, &WeightSpec::constant(1.0), 0.0, &cfg).unwrap();
        assert_eq!((e.estimate, e.stderr), (0.0, 0.0));
    }

    #[test]
    fn deterministic_functional_has_no_spread() {
        let cfg = SimConfig {
            dt: 0.01,
            horizon: 2.0,
            paths: 8,
            ..SimConfig::default()
        };
        let e = mc_log_mgf(&still_model(), &WeightSpec::constant(0.7), 1.3, &cfg).unwrap();
        assert!((e.estimate - 1.3 * 0.7).abs() < 1e-12);
        assert!(e.stderr < 1e-12);
    }

    #[test]
    fn seeds_reproduce_and_paths_differ() {
        let model = reflected_bm(0.0, 1.0, 1.0).unwrap();
        let f = WeightSpec::constant(0.0);
        let cfg = SimConfig {
            dt: 0.01,
            horizon: 1.0,
            ..SimConfig::default()
        };
        assert_eq!(
            simulate(&model, &f, &cfg, 5).unwrap(),
            simulate(&model, &f, &cfg, 5).unwrap()
        );
        assert_ne!(
            simulate(&model, &f, &cfg, 5).unwrap(),
            simulate(&model, &f, &cfg, 6).unwrap()
        );
    }

    #[test]
    fn too_small_bound_is_reported() {
        let model = birth_death(50.0, 3).unwrap();
        let cfg = SimConfig {
            intensity_bound: Some(10.0),
            dt: 0.01,
            horizon: 5.0,
            ..SimConfig::default()
        };
        assert!(matches!(
            simulate(&model, &WeightSpec::constant(0.0), &cfg, 0),
            Err(Error::IntensityBoundExceeded { .. })
        ));
    }

    #[test]
    fn rejects_bad_config() {
        let model = still_model();
        let f = WeightSpec::constant(0.0);
        for cfg in [
            SimConfig {
                dt: 0.0,
                ..SimConfig::default()
            },
            SimConfig {
                horizon: 1e-4,
                ..SimConfig::default()
            },
            SimConfig {
                paths: 0,
                ..SimConfig::default()
            },
            SimConfig {
                x0: Some(2.0),
                ..SimConfig::default()
            },
        ] {
            assert!(simulate(&model, &f, &cfg, 0).is_err());
        }
        let one = SimConfig {
            paths: 1,
            ..SimConfig::default()
        };
        assert!(mc_log_mgf(&model, &f, 0.5, &one).is_err());
    }

    #[test]
    fn log_mean_exp_is_overflow_safe() {
        let (m, se) = log_mean_exp(&[1000.0, 1000.0]).unwrap();
        assert!((m - 1000.0).abs() < 1e-12 && se == 0.0);
    }
}
