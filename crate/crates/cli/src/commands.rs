use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;

use reflected_ldp::experiments::{
    bd_table, convergence_sizes, convergence_thetas, crn_comparison, rbm_convergence, rbm_table, table_thetas, CrnCase,
    OracleRow,
};
use reflected_ldp::oracles::{bd_psi_of_theta, rbm_psi_of_theta, BdParams, RbmParams};
use reflected_ldp::{
    legendre_transform, mc_log_mgf, psi_curve, simulate, solve_psi, PsiCurve, SolverOptions, SpectralResult,
};

use crate::config::{ModelSection, RunConfig};
use crate::CliError;

const ORACLE_TOL: f64 = 1e-15;

type CsvOut = csv::Writer<Box<dyn Write>>;

pub fn open_output(path: Option<&Path>) -> Result<CsvOut, CliError> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn row<I, S>(w: &mut CsvOut, fields: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(fields).map_err(io_error)
}

fn finish(mut w: CsvOut) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn io_error(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn solver_error(e: reflected_ldp::Error) -> CliError {
    CliError::Solver(e.to_string())
}

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn solve(cfg: &RunConfig, out: Option<&Path>, eigenfunction: Option<&Path>) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let mesh = cfg.build_mesh(&model)?;
    let f = cfg.build_weight(&model, &mesh)?;
    let opts = cfg.solver_options();
    let results: Vec<SpectralResult> = cfg
        .thetas()?
        .par_iter()
        .map(|&theta| {
            solve_psi(&model, &f, theta, &mesh, &opts).map_err(|e| CliError::Solver(format!("theta = {theta}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    for r in &results {
        for warning in &r.warnings {
            eprintln!("warning: theta = {}: {warning:?}", r.theta);
        }
    }
    let mut w = open_output(out)?;
    row(&mut w, ["theta", "psi_hat", "residual", "N", "iterations"])?;
    for r in &results {
        row(
            &mut w,
            [
                num(r.theta),
                num(r.psi_hat),
                num(r.residual),
                mesh.interior().to_string(),
                r.iterations.to_string(),
            ],
        )?;
    }
    finish(w)?;
    if let Some(path) = eigenfunction {
        let mut w = open_output(Some(path))?;
        row(&mut w, ["theta", "x", "u"])?;
        for r in &results {
            for (x, u) in r.mesh.points().iter().zip(&r.u) {
                row(&mut w, [num(r.theta), num(*x), num(*u)])?;
            }
        }
        finish(w)?;
    }
    Ok(())
}

fn compute_curve(cfg: &RunConfig) -> Result<PsiCurve, CliError> {
    let model = cfg.build_model()?;
    let mesh = cfg.build_mesh(&model)?;
    let f = cfg.build_weight(&model, &mesh)?;
    let thetas = cfg.thetas()?;
    if !thetas.contains(&0.0) {
        return Err(CliError::Config("the theta grid of a curve must contain 0".into()));
    }
    psi_curve(&model, &f, &thetas, &mesh, &cfg.solver_options()).map_err(solver_error)
}

pub fn curve(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let curve = compute_curve(cfg)?;
    let mut w = open_output(out)?;
    row(&mut w, ["theta", "psi"])?;
    for (t, p) in curve.thetas.iter().zip(&curve.psis) {
        row(&mut w, [num(*t), num(*p)])?;
    }
    finish(w)
}

/// Reads a `theta, psi` CSV (the `psi` column may also be `psi_hat`).
pub fn read_curve(path: &Path) -> Result<PsiCurve, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim()));
    let (Some(ti), Some(pi)) = (col(&["theta"]), col(&["psi", "psi_hat"])) else {
        return Err(bad("expected columns theta and psi".into()));
    };
    let (mut thetas, mut psis) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(format!("row {}: cannot parse a number", line + 1)))
        };
        thetas.push(parse(ti)?);
        psis.push(parse(pi)?);
    }
    PsiCurve::new(thetas, psis).map_err(|e| bad(e.to_string()))
}

pub fn rate(
    cfg: Option<&RunConfig>,
    curve_path: Option<&Path>,
    xs: &[f64],
    out: Option<&Path>,
) -> Result<(), CliError> {
    let curve = match (curve_path, cfg) {
        (Some(p), _) => {
            let c = read_curve(p)?;
            c.check_convexity()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            c
        }
        (None, Some(cfg)) => compute_curve(cfg)?,
        (None, None) => return Err(CliError::Config("rate needs --curve or --config".into())),
    };
    let mut w = open_output(out)?;
    row(&mut w, ["x", "rate", "argmax_theta"])?;
    for &x in xs {
        let r = legendre_transform(&curve, x);
        if r.at_grid_edge {
            eprintln!(
                "warning: x = {x}: supremum at the grid edge theta = {}; extend the grid",
                r.argmax_theta
            );
        }
        row(&mut w, [num(x), num(r.value), num(r.argmax_theta)])?;
    }
    finish(w)
}

pub fn oracle(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let psi: Box<dyn Fn(f64) -> reflected_ldp::Result<f64>> = match &cfg.model {
        ModelSection::Rbm { mu, sigma2, b } => {
            let p = RbmParams::new(*mu, *sigma2, *b).map_err(|e| CliError::Config(e.to_string()))?;
            Box::new(move |t| rbm_psi_of_theta(&p, t, ORACLE_TOL))
        }
        ModelSection::BirthDeath { lambda, b } => {
            let p = BdParams::new(*lambda, *b).map_err(|e| CliError::Config(e.to_string()))?;
            Box::new(move |t| bd_psi_of_theta(&p, t, ORACLE_TOL))
        }
        _ => {
            return Err(CliError::Config(
                "closed forms exist only for rbm and birth-death models".into(),
            ))
        }
    };
    let mut w = open_output(out)?;
    row(&mut w, ["theta", "psi_oracle"])?;
    for theta in cfg.thetas()? {
        let value = psi(theta).map_err(|e| CliError::Solver(format!("theta = {theta}: {e}")))?;
        row(&mut w, [num(theta), num(value)])?;
    }
    finish(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimulateMode {
    Paths,
    SplitPaths,
    Estimate,
}

pub fn simulate_cmd(
    cfg: &RunConfig,
    seed: Option<u64>,
    mode: SimulateMode,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let mesh = cfg.build_mesh(&model)?;
    let f = cfg.build_weight(&model, &mesh)?;
    let sim = cfg.sim_config(seed);
    sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
    match mode {
        SimulateMode::Estimate => {
            if sim.paths < 2 {
                return Err(CliError::Config("estimates need sim.paths >= 2".into()));
            }
            let estimates = cfg
                .thetas()?
                .into_iter()
                .map(|theta| mc_log_mgf(&model, &f, theta, &sim).map_err(solver_error))
                .collect::<Result<Vec<_>, _>>()?;
            let mut w = open_output(out)?;
            row(&mut w, ["theta", "estimate", "stderr", "paths", "T", "dt", "seed"])?;
            for e in estimates {
                row(
                    &mut w,
                    [
                        num(e.theta),
                        num(e.estimate),
                        num(e.stderr),
                        e.paths.to_string(),
                        num(e.horizon),
                        num(e.dt),
                        e.seed.to_string(),
                    ],
                )?;
            }
            finish(w)
        }
        SimulateMode::Paths => {
            // the first path runs before the output is created, so bad
            // settings fail without leaving a truncated file
            let mut first = Some(simulate(&model, &f, &sim, 0).map_err(solver_error)?);
            let mut w = open_output(out)?;
            row(&mut w, ["path", "t", "V", "L0", "Lb", "Lambda"])?;
            for p in 0..sim.paths {
                let r = match first.take() {
                    Some(r) => r,
                    None => simulate(&model, &f, &sim, p as u64).map_err(solver_error)?,
                };
                for i in 0..r.times.len() {
                    row(
                        &mut w,
                        [
                            p.to_string(),
                            num(r.times[i]),
                            num(r.v[i]),
                            num(r.l0[i]),
                            num(r.lb[i]),
                            num(r.lambda[i]),
                        ],
                    )?;
                }
            }
            finish(w)
        }
        SimulateMode::SplitPaths => {
            let dir: PathBuf = out
                .map(Path::to_path_buf)
                .ok_or_else(|| CliError::Config("--split needs --out DIR".into()))?;
            fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
            let width = (sim.paths.max(2) - 1).to_string().len();
            for p in 0..sim.paths {
                let r = simulate(&model, &f, &sim, p as u64).map_err(solver_error)?;
                let mut w = open_output(Some(&dir.join(format!("path_{p:0width$}.csv"))))?;
                row(&mut w, ["t", "V", "L0", "Lb", "Lambda"])?;
                for i in 0..r.times.len() {
                    row(
                        &mut w,
                        [
                            num(r.times[i]),
                            num(r.v[i]),
                            num(r.l0[i]),
                            num(r.lb[i]),
                            num(r.lambda[i]),
                        ],
                    )?;
                }
                finish(w)?;
            }
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    TableRbm,
    TableBd,
    FigConvergence,
    CrnEqN,
    #[value(name = "crn-eq-10n2")]
    CrnEq10n2,
    #[value(name = "crn-bdry-10n2")]
    CrnBdry10n2,
}

pub struct CrnArgs {
    pub n: usize,
    pub mesh: usize,
    pub dtheta: f64,
}

/// θ grid of the network comparisons: `{-0.5, -0.45, ..., 0.5}`.
pub fn crn_thetas() -> Vec<f64> {
    (-10..=10).map(|k| k as f64 * 0.05).collect()
}

fn oracle_rows(w: &mut CsvOut, rows: &[OracleRow], with_n: bool) -> Result<(), CliError> {
    if with_n {
        row(w, ["theta", "N", "psi_numeric", "psi_oracle", "abs_error"])?;
    } else {
        row(w, ["theta", "psi_numeric", "psi_oracle", "abs_error"])?;
    }
    for r in rows {
        let mut fields = vec![num(r.theta)];
        if with_n {
            fields.push(r.interior.to_string());
        }
        fields.extend([num(r.psi_numeric), num(r.psi_oracle), num(r.abs_error)]);
        row(w, fields)?;
    }
    let worst = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
    eprintln!("max abs_error = {worst:.3e} over {} rows", rows.len());
    Ok(())
}

pub fn reproduce(target: Target, crn: &CrnArgs, out: Option<&Path>) -> Result<(), CliError> {
    let opts = SolverOptions::default();
    let case = match target {
        Target::TableRbm => {
            let rows = rbm_table(1000, &table_thetas(), &opts).map_err(solver_error)?;
            let mut w = open_output(out)?;
            oracle_rows(&mut w, &rows, false)?;
            return finish(w);
        }
        Target::TableBd => {
            let rows = bd_table(&table_thetas(), &opts).map_err(solver_error)?;
            let mut w = open_output(out)?;
            oracle_rows(&mut w, &rows, false)?;
            return finish(w);
        }
        Target::FigConvergence => {
            let rows = rbm_convergence(&convergence_thetas(), &convergence_sizes(), &opts).map_err(solver_error)?;
            let mut w = open_output(out)?;
            oracle_rows(&mut w, &rows, true)?;
            return finish(w);
        }
        Target::CrnEqN => CrnCase::EquilibriumN,
        Target::CrnEq10n2 => CrnCase::Equilibrium10N2,
        Target::CrnBdry10n2 => CrnCase::Boundary10N2,
    };
    if crn.n < 2 || crn.mesh < 4 || !(crn.dtheta > 0.0 && crn.dtheta.is_finite()) {
        return Err(CliError::Config(format!(
            "network comparison needs n >= 2, N >= 4 and dtheta > 0 (n = {}, N = {}, dtheta = {})",
            crn.n, crn.mesh, crn.dtheta
        )));
    }
    let c = crn_comparison(case, crn.n as f64, crn.mesh, &crn_thetas(), crn.dtheta, &opts).map_err(solver_error)?;
    let mut w = open_output(out)?;
    row(&mut w, ["theta", "psi_jmp", "psi_jda"])?;
    for r in &c.rows {
        row(&mut w, [num(r.theta), num(r.psi_jmp), num(r.psi_jda)])?;
    }
    finish(w)?;
    eprintln!(
        "gamma_n = {}, n = {}, N = {}, dtheta = {}",
        case.gamma(crn.n as f64),
        crn.n,
        crn.mesh,
        crn.dtheta
    );
    eprintln!("psi'(0):  JMP {:.4e}  JDA {:.4e}", c.jmp.psi_prime0, c.jda.psi_prime0);
    eprintln!("psi''(0): JMP {:.4e}  JDA {:.4e}", c.jmp.psi_second0, c.jda.psi_second0);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [
            0.0,
            -0.0,
            1.0,
            0.5,
            1e-4,
            9.99e-5,
            1.7e-17,
            -3.25e20,
            5.016711221224758e-3,
            123456.789,
        ] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            assert!(s.len() < 26, "{s}");
        }
        assert_eq!(num(1.7e-17), "1.7e-17");
        assert_eq!(num(0.25), "0.25");
    }

    #[test]
    fn crn_grid() {
        let t = crn_thetas();
        assert_eq!(t.len(), 21);
        assert_eq!((t[0], t[10], t[20]), (-0.5, 0.0, 0.5));
    }
}
