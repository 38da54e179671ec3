//! Browser bindings for a few `steercert` computations. Each export takes
//! plain numbers and strings and returns text, so the page needs no glue
//! beyond the generated module.

use std::fmt::Write as _;

use steercert::certify_analytic::{chsh_slope, comparison_table, three_setting_slope, tilted_slope};
use steercert::model::{Family, SteeringInequality};
use steercert::sampling::{guessing_probability, sample_count, Regime};
use wasm_bindgen::prelude::wasm_bindgen;

fn inequality(family: &str, alpha: f64, beta: f64) -> Result<SteeringInequality, String> {
    let family: Family = family.parse().map_err(|e| format!("{e}"))?;
    let beta = if family == Family::TiltedAnalog { 1.0 } else { beta };
    SteeringInequality::new(family, alpha, beta).map_err(|e| e.to_string())
}

/// LHS bound, quantum bound and target angle, one `key: value` per line.
#[wasm_bindgen]
pub fn bounds(family: &str, alpha: f64, beta: f64) -> Result<String, String> {
    let ineq = inequality(family, alpha, beta)?;
    let mut out = String::new();
    writeln!(out, "family: {}", ineq.family()).unwrap();
    writeln!(out, "lhs_bound: {}", ineq.lhs_bound()).unwrap();
    writeln!(out, "quantum_bound: {}", ineq.quantum_bound()).unwrap();
    writeln!(out, "target_theta: {}", ineq.target_theta()).unwrap();
    Ok(out)
}

/// Certified fidelity in the three trust scenarios for the tilted family,
/// as CSV over `points` violations from the LHS bound to the quantum bound.
#[wasm_bindgen]
pub fn scenario_curve(alpha: f64, points: usize) -> Result<String, String> {
    let ineq = inequality("tilted-analog", alpha, 1.0)?;
    if points < 2 {
        return Err("need at least 2 points".into());
    }
    let (lo, hi) = (ineq.lhs_bound(), ineq.quantum_bound());
    let grid: Vec<f64> = (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect();
    let rows = comparison_table(alpha, &grid).map_err(|e| e.to_string())?;
    let mut csv = String::from("observed,F_DD,F_1SDI,F_DI\n");
    for r in rows {
        writeln!(csv, "{},{},{},{}", r.observed, r.dd, r.one_sided, r.di).unwrap();
    }
    Ok(csv)
}

/// Copies needed to certify infidelity below `epsilon` at significance `delta`.
/// Only families with a closed-form certificate slope are accepted.
#[wasm_bindgen]
pub fn sample_plan(family: &str, alpha: f64, beta: f64, epsilon: f64, delta: f64) -> Result<String, String> {
    let ineq = inequality(family, alpha, beta)?;
    let slope = match ineq.family() {
        Family::TiltedAnalog => tilted_slope(alpha),
        Family::ThreeTrusted if alpha == 0.0 && beta == 1.0 => three_setting_slope(),
        Family::TwoTrusted if alpha == 0.0 && beta == 1.0 => chsh_slope(),
        f => return Err(format!("no closed-form certificate for {f} at alpha = {alpha}, beta = {beta}")),
    };
    let plan = sample_count(&ineq, epsilon, delta, slope).map_err(|e| e.to_string())?;
    let mut out = String::new();
    writeln!(out, "regime: {}", plan.regime).unwrap();
    writeln!(out, "c: {}", plan.c).unwrap();
    writeln!(out, "n_required: {}", plan.n_required).unwrap();
    if plan.regime == Regime::Quadratic {
        writeln!(out, "note: order-of-magnitude (unit constant)").unwrap();
    }
    if let Ok(p) = guessing_probability(&ineq, ineq.quantum_bound()) {
        writeln!(out, "guessing_probability_at_quantum_bound: {p}").unwrap();
    }
    Ok(out)
}
