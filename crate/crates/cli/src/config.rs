//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use reflected_ldp::experiments::{bd_weight, table_thetas};
use reflected_ldp::model::{
    birth_death, continuised_boundary_indicator, continuised_interval_indicator, continuised_lower_boundary_hat,
    continuised_point_indicator, crn_drift, crn_jump_diffusion, crn_jump_markov, crn_langevin, reflected_bm,
    ContinuousJumpComponent, CrnRates, JumpAtom, JumpKernel, ScalarField,
};
use reflected_ldp::pide::EigenOptions;
use reflected_ldp::sim::BoundaryScheme;
use reflected_ldp::{Mesh, ReflectedModel, SimConfig, SolverOptions, WeightSpec};

use crate::CliError;

const MAX_INTERIOR: usize = 20_000;
const MAX_THETAS: usize = 100_000;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub weight: Option<WeightSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sim: SimSection,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSection {
    Rbm {
        #[serde(default)]
        mu: f64,
        #[serde(default = "one")]
        sigma2: f64,
        #[serde(default = "one")]
        b: f64,
    },
    BirthDeath {
        lambda: f64,
        b: usize,
    },
    CrnLangevin {
        n: f64,
        #[serde(default)]
        rates: RatesSection,
    },
    CrnJumpDiffusion {
        n: f64,
        gamma: f64,
        #[serde(default)]
        rates: RatesSection,
    },
    CrnJumpMarkov {
        n: f64,
        gamma: f64,
        #[serde(default)]
        rates: RatesSection,
    },
    Custom(CustomModel),
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub k10m: f64,
    pub k01p: f64,
    pub k11m: f64,
    pub k21p: f64,
}

impl Default for RatesSection {
    fn default() -> Self {
        let r = CrnRates::bistable();
        Self {
            k10m: r.k10m,
            k01p: r.k01p,
            k11m: r.k11m,
            k21p: r.k21p,
        }
    }
}

impl From<RatesSection> for CrnRates {
    fn from(r: RatesSection) -> Self {
        CrnRates {
            k10m: r.k10m,
            k01p: r.k01p,
            k11m: r.k11m,
            k21p: r.k21p,
        }
    }
}

/// Coefficients given as named built-in expressions.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub b: f64,
    pub drift: Expr,
    pub diffusion: Expr,
    #[serde(default = "one")]
    pub rho0: f64,
    #[serde(default = "one")]
    pub rhob: f64,
    #[serde(default)]
    pub jumps: Vec<AtomSection>,
    pub density: Option<DensitySection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    pub displacement: f64,
    pub rate: Expr,
}

/// Continuous jump component on `[lo, hi]`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_subdivisions")]
    pub subdivisions: usize,
    pub shape: DensityShape,
}

fn default_subdivisions() -> usize {
    64
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityShape {
    /// Total rate `rate` spread evenly over `[lo, hi]`.
    Uniform { rate: f64 },
    /// `rate` times the centred normal density with standard deviation `std`.
    Gaussian { rate: f64, std: f64 },
}

/// Named one-variable expressions for custom coefficients and weights.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Expr {
    Constant {
        value: f64,
    },
    /// `a + slope * x`
    Linear {
        a: f64,
        slope: f64,
    },
    /// `a + slope * x + curvature * x²`
    Quadratic {
        a: f64,
        slope: f64,
        curvature: f64,
    },
    /// `scale * x * (b - x)`
    Logistic {
        scale: f64,
    },
    /// `rate * (mean - x)`
    MeanReverting {
        rate: f64,
        mean: f64,
    },
    /// Drift of the bistable reaction network.
    CrnDrift,
}

impl Expr {
    fn field(self, b: f64) -> ScalarField {
        match self {
            Expr::Constant { value } => ScalarField::constant(value),
            Expr::Linear { a, slope } => ScalarField::new(format!("{a}+{slope}x"), move |x| a + slope * x),
            Expr::Quadratic { a, slope, curvature } => {
                ScalarField::new(format!("{a}+{slope}x+{curvature}x^2"), move |x| {
                    a + x * (slope + curvature * x)
                })
            }
            Expr::Logistic { scale } => ScalarField::new(format!("{scale}x(b-x)"), move |x| scale * x * (b - x)),
            Expr::MeanReverting { rate, mean } => {
                ScalarField::new(format!("{rate}({mean}-x)"), move |x| rate * (mean - x))
            }
            Expr::CrnDrift => crn_drift(CrnRates::bistable()),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    PointHats,
    BoundaryHats,
    CustomBuiltin,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    pub kind: WeightKind,
    pub centers: Option<Vec<f64>>,
    /// Resolution of the hats; defaults to the mesh size.
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub builtin: Option<BuiltinWeight>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BuiltinWeight {
    /// Hat at the lower boundary; its functional is the local time at 0.
    LowerHat,
    /// Ramped indicator of `[0, right)`; the ramp width defaults to one
    /// mesh step.
    Interval { right: f64, width: Option<f64> },
    /// Any coefficient expression, with `f(0)`, `f(b)` read off it.
    Expr { expr: Expr },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(rename = "N", default = "default_interior")]
    pub n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub power_iterations: Option<usize>,
    pub thetas: Option<Vec<f64>>,
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    pub theta_step: Option<f64>,
}

fn default_interior() -> usize {
    1000
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            n: default_interior(),
            tol: default_tol(),
            power_iterations: None,
            thetas: None,
            theta_min: None,
            theta_max: None,
            theta_step: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    pub x0: Option<f64>,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    pub intensity_bound: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    Bridge,
    Projection,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_horizon() -> f64 {
    10.0
}

fn default_paths() -> usize {
    1000
}

fn default_record_every() -> usize {
    1
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            horizon: default_horizon(),
            paths: default_paths(),
            seed: 0,
            x0: None,
            scheme: SchemeName::default(),
            record_every: default_record_every(),
            intensity_bound: None,
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let s = &self.solver;
        if s.n < 2 || s.n > MAX_INTERIOR {
            return Err(config_error(format!(
                "solver.N must lie in [2, {MAX_INTERIOR}], got {}",
                s.n
            )));
        }
        if !(s.tol > 0.0 && s.tol < 1e-2) {
            return Err(config_error(format!("solver.tol must lie in (0, 1e-2), got {}", s.tol)));
        }
        self.thetas()?;
        let sim = &self.sim;
        if !(sim.dt > 0.0 && sim.dt.is_finite()) || !(sim.horizon >= sim.dt && sim.horizon.is_finite()) {
            return Err(config_error(format!(
                "sim needs 0 < dt <= T (dt = {}, T = {})",
                sim.dt, sim.horizon
            )));
        }
        if sim.paths == 0 || sim.record_every == 0 {
            return Err(config_error("sim.paths and sim.record_every must be positive"));
        }
        if let Some(w) = &self.weight {
            match w.kind {
                WeightKind::PointHats if w.centers.as_ref().is_none_or(|c| c.is_empty()) => {
                    return Err(config_error(
                        "weight.kind = \"point-hats\" needs a nonempty centers list",
                    ));
                }
                WeightKind::CustomBuiltin if w.builtin.is_none() => {
                    return Err(config_error("weight.kind = \"custom-builtin\" needs a builtin table"));
                }
                _ => {}
            }
        }
        if matches!(self.model, ModelSection::Custom(_)) && self.weight.is_none() {
            return Err(config_error("custom models need an explicit [weight] section"));
        }
        Ok(())
    }

    /// The θ grid: an explicit list, a `(min, max, step)` range, or the
    /// default `{0, 0.001, ..., 0.01}`.
    pub fn thetas(&self) -> Result<Vec<f64>, CliError> {
        let s = &self.solver;
        let range = (s.theta_min, s.theta_max, s.theta_step);
        let grid = match (&s.thetas, range) {
            (Some(_), (Some(_), _, _) | (_, Some(_), _) | (_, _, Some(_))) => {
                return Err(config_error("give either solver.thetas or a theta range, not both"));
            }
            (Some(list), _) => list.clone(),
            (None, (Some(lo), Some(hi), Some(step))) => {
                if !(step > 0.0 && lo <= hi && lo.is_finite() && hi.is_finite()) {
                    return Err(config_error(format!(
                        "theta range needs min <= max and step > 0 (min = {lo}, max = {hi}, step = {step})"
                    )));
                }
                let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
                if count > MAX_THETAS {
                    return Err(config_error(format!(
                        "theta range has {count} points, limit {MAX_THETAS}"
                    )));
                }
                // integer multiples keep the grid free of accumulated rounding
                (0..count).map(|k| clean(lo + k as f64 * step)).collect()
            }
            (None, (None, None, None)) => table_thetas(),
            (None, _) => return Err(config_error("theta range needs theta_min, theta_max and theta_step")),
        };
        if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) {
            return Err(config_error("theta grid must be nonempty and finite"));
        }
        Ok(grid)
    }

    pub fn build_model(&self) -> Result<ReflectedModel, CliError> {
        let model = match &self.model {
            ModelSection::Rbm { mu, sigma2, b } => reflected_bm(*mu, *sigma2, *b),
            ModelSection::BirthDeath { lambda, b } => birth_death(*lambda, *b),
            ModelSection::CrnLangevin { n, rates } => crn_langevin(*n, (*rates).into()),
            ModelSection::CrnJumpDiffusion { n, gamma, rates } => crn_jump_diffusion(*n, *gamma, (*rates).into()),
            ModelSection::CrnJumpMarkov { n, gamma, rates } => crn_jump_markov(*n, *gamma, (*rates).into()),
            ModelSection::Custom(c) => build_custom(c),
        };
        model.map_err(|e| config_error(e.to_string()))
    }

    /// The lattice for pure-jump models on a grid, `solver.N` interior nodes
    /// otherwise.
    pub fn build_mesh(&self, model: &ReflectedModel) -> Result<Mesh, CliError> {
        let mesh = if model.lattice_step().is_some() {
            Mesh::lattice(model)
        } else {
            Mesh::new(self.solver.n, model.b)
        };
        mesh.map_err(|e| config_error(e.to_string()))
    }

    pub fn build_weight(&self, model: &ReflectedModel, mesh: &Mesh) -> Result<WeightSpec, CliError> {
        let b = model.b;
        let weight = match &self.weight {
            None => match &self.model {
                ModelSection::Rbm { .. } => Ok(continuised_lower_boundary_hat(mesh.interior(), b)),
                ModelSection::BirthDeath { b, .. } => bd_weight(*b),
                ModelSection::Custom(_) => unreachable!("validated"),
                _ => {
                    continuised_point_indicator(&[0.25, 0.75], mesh.interior(), b).map(|f| WeightSpec::from_field(f, b))
                }
            },
            Some(w) => {
                let n = w.n.unwrap_or(mesh.interior());
                match w.kind {
                    WeightKind::PointHats => {
                        let centers = w.centers.as_deref().unwrap_or_default();
                        continuised_point_indicator(centers, n, b).map(|f| WeightSpec::from_field(f, b))
                    }
                    WeightKind::BoundaryHats => continuised_boundary_indicator(n, b),
                    WeightKind::CustomBuiltin => match w.builtin.expect("validated") {
                        BuiltinWeight::LowerHat => Ok(continuised_lower_boundary_hat(n, b)),
                        BuiltinWeight::Interval { right, width } => {
                            continuised_interval_indicator(right, width.unwrap_or(b / (n as f64 + 1.0)), b)
                        }
                        BuiltinWeight::Expr { expr } => Ok(WeightSpec::from_field(expr.field(b), b)),
                    },
                }
            }
        };
        weight.map_err(|e| config_error(e.to_string()))
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut eigen = EigenOptions {
            tol: self.solver.tol,
            ..EigenOptions::default()
        };
        if let Some(k) = self.solver.power_iterations {
            eigen.power_iterations = k;
        }
        SolverOptions {
            eigen,
            ..SolverOptions::default()
        }
    }

    pub fn sim_config(&self, seed_override: Option<u64>) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            dt: s.dt,
            horizon: s.horizon,
            paths: s.paths,
            seed: seed_override.unwrap_or(s.seed),
            intensity_bound: s.intensity_bound,
            x0: s.x0,
            scheme: match s.scheme {
                SchemeName::Bridge => BoundaryScheme::BridgeExtremum,
                SchemeName::Projection => BoundaryScheme::Projection,
            },
            record_every: s.record_every,
        }
    }
}

/// Rounds away the last-bit noise of `lo + k * step`.
fn clean(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn build_custom(c: &CustomModel) -> reflected_ldp::Result<ReflectedModel> {
    let b = c.b;
    let mut kernel = JumpKernel::from_atoms(
        c.jumps
            .iter()
            .map(|a| JumpAtom::new(a.displacement, a.rate.field(b)))
            .collect(),
    );
    if let Some(d) = &c.density {
        let shape = d.shape;
        let width = d.hi - d.lo;
        let comp = ContinuousJumpComponent::new(d.lo, d.hi, d.subdivisions, move |_x, y| match shape {
            DensityShape::Uniform { rate } => rate / width,
            DensityShape::Gaussian { rate, std } => {
                rate * (-0.5 * (y / std).powi(2)).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            }
        })?;
        kernel.continuous.push(comp);
    }
    ReflectedModel::new(b, c.drift.field(b), c.diffusion.field(b), kernel, c.rho0, c.rhob)
}
