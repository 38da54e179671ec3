use std::fmt::Write as _;
use std::path::PathBuf;

use steercert::certify_analytic::{chsh_slope, comparison_table, three_setting_slope, tilted_slope};
use steercert::certify_sdp::{self, SolverStatus};
use steercert::model::Family;
use steercert::sampling::{sample_count, Regime};

use crate::config::{ConfigFile, RunConfig};
use crate::{CliError, Common, Figure};

pub fn resolve(file: &ConfigFile, c: &Common, default_family: Option<Family>, workers: usize) -> Result<RunConfig, CliError> {
    let family = match file.pick_opt(c.family.clone(), "family")? {
        Some(name) => name.parse::<Family>().map_err(|e| CliError::Input(e.to_string()))?,
        None => default_family.unwrap_or(Family::TiltedAnalog),
    };
    let alpha = file.pick(c.alpha, "alpha", 0.0)?;
    let beta = if family == Family::TiltedAnalog { 1.0 } else { file.pick(c.beta, "beta", 1.0)? };
    Ok(RunConfig {
        family,
        alpha,
        beta,
        grid_min: file.pick_opt(None, "grid_min")?,
        grid_max: file.pick_opt(None, "grid_max")?,
        grid_points: file.pick(None, "grid_points", 100)?,
        tol: file.pick(None, "tol", certify_sdp::DEFAULT_SOLVER_TOL)?,
        output: file.pick_opt(None, "output")?,
        workers,
    })
}

pub fn bounds(cfg: &RunConfig) -> Result<String, CliError> {
    let ineq = cfg.inequality()?;
    let mut out = String::new();
    writeln!(out, "family: {}", ineq.family()).unwrap();
    writeln!(out, "alpha: {}", ineq.alpha()).unwrap();
    writeln!(out, "beta: {}", ineq.beta()).unwrap();
    writeln!(out, "lhs_bound: {}", ineq.lhs_bound()).unwrap();
    writeln!(out, "quantum_bound: {}", ineq.quantum_bound()).unwrap();
    writeln!(out, "target_theta: {}", ineq.target_theta()).unwrap();
    Ok(out)
}

pub struct CurveFlags {
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
    pub grid_points: Option<usize>,
    pub tol: Option<f64>,
    pub output: Option<PathBuf>,
}

fn emit(csv: String, output: &Option<PathBuf>) -> Result<String, CliError> {
    match output {
        Some(p) => {
            std::fs::write(p, &csv)?;
            Ok(String::new())
        }
        None => Ok(csv),
    }
}

pub fn curve(file: &ConfigFile, figure: Figure, common: &Common, flags: CurveFlags, workers: usize) -> Result<String, CliError> {
    let default_family = match figure {
        Figure::Fig5 => Family::ThreeTrusted,
        _ => Family::TiltedAnalog,
    };
    let mut cfg = resolve(file, common, Some(default_family), workers)?;
    if figure == Figure::Fig5 {
        cfg.alpha = file.pick(common.alpha, "alpha", 1.0)?;
        cfg.beta = file.pick(common.beta, "beta", 2.0)?;
    } else if figure == Figure::Fig2 {
        cfg.alpha = file.pick(common.alpha, "alpha", 1.0)?;
    }
    cfg.grid_min = flags.grid_min.or(cfg.grid_min);
    cfg.grid_max = flags.grid_max.or(cfg.grid_max);
    cfg.grid_points = file.pick(flags.grid_points, "grid_points", if figure == Figure::Fig5 { 30 } else { 100 })?;
    cfg.tol = flags.tol.unwrap_or(cfg.tol);
    cfg.output = flags.output.or(cfg.output);
    match figure {
        Figure::Fig2 => {
            if cfg.family != Family::TiltedAnalog {
                return Err(CliError::Input("fig2 is defined for the tilted-analog family".into()));
            }
            let ineq = cfg.inequality()?;
            let grid = cfg.grid(ineq.lhs_bound(), ineq.quantum_bound())?;
            let rows = comparison_table(cfg.alpha, &grid).map_err(|e| CliError::Input(e.to_string()))?;
            let mut csv = String::from("observed,F_DD,F_1SDI,F_DI\n");
            for r in rows {
                writeln!(csv, "{},{},{},{}", r.observed, r.dd, r.one_sided, r.di).unwrap();
            }
            emit(csv, &cfg.output)
        }
        Figure::Fig3 => {
            let grid = cfg.grid(0.5, 1.0)?;
            let (s2, s3) = (chsh_slope(), three_setting_slope());
            let mut csv = String::from("p,F_2setting,F_3setting\n");
            for p in grid {
                let f2 = (s2 * (2.0 * p - 1.0) * 2.0 + 1.0 - 2.0 * s2).clamp(0.0, 1.0);
                let f3 = (s3 * (2.0 * p - 1.0) * 3.0 + 1.0 - 3.0 * s3).clamp(0.0, 1.0);
                writeln!(csv, "{p},{f2},{f3}").unwrap();
            }
            emit(csv, &cfg.output)
        }
        Figure::Fig5 => {
            let ineq = cfg.inequality()?;
            if !(cfg.tol > 0.0) {
                return Err(CliError::Input(format!("tol = {} must be positive", cfg.tol)));
            }
            let grid = cfg.grid(ineq.lhs_bound(), ineq.quantum_bound())?;
            let rows = certify_sdp::sweep_curve(&ineq, ineq.target_theta(), &grid, cfg.tol, cfg.workers);
            let solved = rows
                .iter()
                .filter(|r| matches!(&r.result, Ok(s) if s.status == SolverStatus::Optimal))
                .count();
            let out = emit(certify_sdp::csv(&rows), &cfg.output)?;
            if (solved as f64) < 0.9 * rows.len() as f64 {
                print!("{out}");
                return Err(CliError::Verification(format!("only {solved} of {} rows solved", rows.len())));
            }
            Ok(out)
        }
    }
}

fn default_slope(cfg: &RunConfig) -> Option<f64> {
    match cfg.family {
        Family::TiltedAnalog => Some(tilted_slope(cfg.alpha)),
        Family::ThreeTrusted if cfg.alpha == 0.0 && cfg.beta == 1.0 => Some(three_setting_slope()),
        Family::TwoTrusted if cfg.alpha == 0.0 && cfg.beta == 1.0 => Some(chsh_slope()),
        _ => None,
    }
}

pub fn plan(cfg: &RunConfig, eps: f64, delta: f64, slope: Option<f64>) -> Result<String, CliError> {
    let ineq = cfg.inequality()?;
    let slope = slope.or_else(|| default_slope(cfg)).ok_or_else(|| {
        CliError::Input(format!("no analytic certificate for {} at alpha = {}, beta = {}; pass --slope", cfg.family, cfg.alpha, cfg.beta))
    })?;
    let plan = sample_count(&ineq, eps, delta, slope).map_err(|e| CliError::Input(e.to_string()))?;
    let mut out = String::new();
    writeln!(out, "family: {}", ineq.family()).unwrap();
    writeln!(out, "regime: {}", plan.regime).unwrap();
    writeln!(out, "slope: {slope}").unwrap();
    writeln!(out, "c: {}", plan.c).unwrap();
    writeln!(out, "epsilon: {}", plan.epsilon).unwrap();
    writeln!(out, "delta: {}", plan.delta).unwrap();
    writeln!(out, "n_required: {}", plan.n_required).unwrap();
    if plan.regime == Regime::Quadratic {
        writeln!(out, "note: order-of-magnitude (unit constant)").unwrap();
    }
    Ok(out)
}
