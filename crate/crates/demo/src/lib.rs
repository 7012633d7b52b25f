//! Browser demo. The pure functions below take and return JSON strings so
//! they can be tested natively; the `#[wasm_bindgen]` wrappers only convert
//! errors.

use std::collections::BTreeSet;

use artin_kms::kms::{check_subinvariance, t_beta, wold};
use artin_kms::linalg::smallest_singular_value;
use artin_kms::model::load_model;
use artin_kms::transfer::example_optimal;
use artin_kms::{Tolerances, TraceVec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct LambdaPoint {
    lambda: f64,
    pass: bool,
    worst: f64,
}

#[derive(Serialize)]
struct LambdaScan {
    radius: f64,
    points: Vec<LambdaPoint>,
}

/// Scans `τ_λ = (λ, 1 − λ)` on the two-copy Bernoulli example with `I = {1..size}`.
pub fn lambda_scan(n: usize, size: usize, alpha: f64, steps: usize) -> Result<String, String> {
    if !(2..=100_000).contains(&steps) {
        return Err("steps must be between 2 and 100000".into());
    }
    if size == 0 || size > n {
        return Err(format!("|I| must be between 1 and {n}"));
    }
    let subset: BTreeSet<usize> = (1..=size).collect();
    let (sys, _) = example_optimal(n, &subset, alpha).map_err(|e| e.to_string())?;
    let tol = Tolerances::default();
    let mut points = Vec::with_capacity(steps);
    for k in 0..steps {
        let lambda = k as f64 / (steps - 1) as f64;
        let tau = TraceVec::new(vec![lambda, 1.0 - lambda]).map_err(|e| e.to_string())?;
        let report = check_subinvariance(&sys, &tau, 1.0, &tol).map_err(|e| e.to_string())?;
        points.push(LambdaPoint { lambda, pass: report.pass, worst: report.worst_value });
    }
    let radius = 0.5 * ((alpha - 2.0) / (alpha + 2.0)).powi(size as i32);
    serde_json::to_string(&LambdaScan { radius, points }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SweepPoint {
    beta: f64,
    subinvariant: bool,
    min_slack: f64,
    mass_tau0: f64,
    sigma_min: f64,
}

fn model_trace(model_json: &str, trace: &str) -> Result<(artin_kms::model::Model, TraceVec), String> {
    let model = load_model(model_json).map_err(|e| e.to_string())?;
    let tau = if trace.contains(',') || trace.parse::<f64>().is_ok() {
        let values =
            trace.split(',').map(|s| s.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
        let tau = TraceVec::new(values).map_err(|e| e.to_string())?;
        model.system.check_trace(&tau).map_err(|e| e.to_string())?;
        tau
    } else {
        model.trace(trace).map_err(|e| e.to_string())?.clone()
    };
    Ok((model, tau))
}

/// Subinvariance slack and `σ_min(T_β)` over an inclusive β grid. `trace` is
/// a trace name or comma-separated values.
pub fn beta_sweep(model_json: &str, trace: &str, from: f64, to: f64, steps: usize) -> Result<String, String> {
    if from.partial_cmp(&to) != Some(std::cmp::Ordering::Less) || !(2..=10_000).contains(&steps) {
        return Err("need from < to and 2 ≤ steps ≤ 10000".into());
    }
    let (model, tau) = model_trace(model_json, trace)?;
    let tol = Tolerances::default();
    let mut rows = Vec::with_capacity(steps);
    for k in 0..steps {
        let beta = from + (to - from) * k as f64 / (steps - 1) as f64;
        let report = check_subinvariance(&model.system, &tau, beta, &tol).map_err(|e| e.to_string())?;
        let t = t_beta(&model.system, beta);
        rows.push(SweepPoint {
            beta,
            subinvariant: report.pass,
            min_slack: report.worst_value,
            mass_tau0: (&t * tau.vector()).sum(),
            sigma_min: smallest_singular_value(&t),
        });
    }
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

/// Finite and infinite type parts of a subinvariant trace.
pub fn wold_split(model_json: &str, trace: &str, beta: f64) -> Result<String, String> {
    let (model, tau) = model_trace(model_json, trace)?;
    let split = wold(&model.system, &tau, beta, &Tolerances::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&split).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = lambdaScan)]
pub fn lambda_scan_js(n: usize, size: usize, alpha: f64, steps: usize) -> Result<String, JsValue> {
    lambda_scan(n, size, alpha, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = betaSweep)]
pub fn beta_sweep_js(model_json: &str, trace: &str, from: f64, to: f64, steps: usize) -> Result<String, JsValue> {
    beta_sweep(model_json, trace, from, to, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = woldSplit)]
pub fn wold_split_js(model_json: &str, trace: &str, beta: f64) -> Result<String, JsValue> {
    wold_split(model_json, trace, beta).map_err(|e| JsValue::from_str(&e))
}
