//! Command implementations. Each returns a [`Report`]; the binary only
//! parses arguments and writes the result.

use std::collections::BTreeSet;

use anyhow::{anyhow, bail, Context, Result};
use artin_kms::kms::{
    check_subinvariance, critical_beta, infinite_type_at_critical, product_decompose, t_beta, wold, TraceType,
};
use artin_kms::linalg::smallest_singular_value;
use artin_kms::model::Model;
use artin_kms::monoid::{MonoidElement, WeightMap};
use artin_kms::setalgebra::atom_weights;
use artin_kms::transfer::{example_optimal, from_kgraph, trivial_system, KGraphModel};
use artin_kms::{SimpleGraph, Tolerances, TraceVec, TransferSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::report::{format_float, Report};

/// How a command picks its trace.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceArg {
    Named(String),
    Inline(Vec<f64>),
}

pub fn parse_inline_trace(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("invalid trace entry `{}`", s.trim())))
        .collect()
}

/// Parses `A:B:N` into an inclusive grid of `N ≥ 2` points.
pub fn parse_beta_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        bail!("--beta-range must look like A:B:N, got `{text}`");
    };
    let from: f64 = a.trim().parse().with_context(|| format!("invalid range start `{a}`"))?;
    let to: f64 = b.trim().parse().with_context(|| format!("invalid range end `{b}`"))?;
    let steps: usize = n.trim().parse().with_context(|| format!("invalid step count `{n}`"))?;
    if !(from < to) {
        bail!("--beta-range needs A < B");
    }
    if steps < 2 {
        bail!("--beta-range needs at least 2 steps");
    }
    Ok((0..steps).map(|k| from + (to - from) * k as f64 / (steps - 1) as f64).collect())
}

/// Resolves the trace: a named one, an inline one, or the model's only trace.
pub fn resolve_trace(model: &Model, arg: Option<&TraceArg>) -> Result<(String, TraceVec)> {
    match arg {
        Some(TraceArg::Named(name)) => Ok((name.clone(), model.trace(name)?.clone())),
        Some(TraceArg::Inline(values)) => {
            let trace = TraceVec::new(values.clone())?;
            model.system.check_trace(&trace)?;
            Ok(("inline".to_string(), trace))
        }
        None if model.traces.len() == 1 => {
            let (name, trace) = model.traces.iter().next().expect("one trace");
            Ok((name.clone(), trace.clone()))
        }
        None => bail!("choose a trace with --trace NAME or --trace-inline CSV"),
    }
}

fn base(command: &str, sys: &TransferSystem, tol: &Tolerances, trace: Option<(&str, &TraceVec)>) -> Report {
    let report = Report::new(command, Some(sys), tol);
    match trace {
        Some((name, t)) => report.arg("trace", name).arg("trace_values", t.entries()),
        None => report,
    }
}

pub fn cmd_check(model: &Model, trace: (&str, &TraceVec), beta: f64, tol: &Tolerances) -> Result<Report> {
    let sys = &model.system;
    let result = check_subinvariance(sys, trace.1, beta, tol)?;
    let pass = result.pass;
    Ok(base("check", sys, tol, Some(trace)).arg("beta", beta).with_result(result).with_pass(pass))
}

pub fn cmd_wold(model: &Model, trace: (&str, &TraceVec), beta: f64, tol: &Tolerances) -> Result<Report> {
    let sys = &model.system;
    let result = wold(sys, trace.1, beta, tol)?;
    Ok(base("wold", sys, tol, Some(trace)).arg("beta", beta).with_result(result))
}

pub fn cmd_critical(model: &Model, tol: &Tolerances) -> Result<Report> {
    let sys = &model.system;
    let critical = critical_beta(sys, tol)?;
    let witness = match critical.beta_c {
        Some(_) => infinite_type_at_critical(sys, tol)?,
        None => None,
    };
    Ok(base("critical", sys, tol, None).with_result(json!({ "critical": critical, "witness": witness })))
}

pub fn cmd_decompose(model: &Model, trace: (&str, &TraceVec), beta: f64, tol: &Tolerances) -> Result<Report> {
    let sys = &model.system;
    let result = product_decompose(sys, trace.1, beta, tol)?;
    Ok(base("decompose", sys, tol, Some(trace)).arg("beta", beta).with_result(result))
}

#[derive(Debug, Clone, Serialize)]
struct AtomRow {
    element: String,
    length: usize,
    weight: f64,
}

pub fn cmd_atoms(
    model: &Model,
    trace: (&str, &TraceVec),
    beta: f64,
    length: usize,
    tol: &Tolerances,
) -> Result<Report> {
    let sys = &model.system;
    let atoms = atom_weights(sys, trace.1, beta, length, tol)?;
    let rows: Vec<AtomRow> = atoms
        .weights
        .iter()
        .map(|(p, w)| AtomRow { element: sys.monoid().format(p), length: p.len(), weight: *w })
        .collect();
    let result = json!({
        "atoms": rows,
        "level_sums": atoms.level_sums,
        "total": atoms.total,
        "mass": atoms.mass,
        "tail_bound": atoms.tail_bound,
        "last_ratio": atoms.last_ratio,
    });
    let pass = atoms.total <= atoms.mass + tol.residual * atoms.mass.max(1.0);
    Ok(base("atoms", sys, tol, Some(trace)).arg("beta", beta).arg("length", length).with_result(result).with_pass(pass))
}

/// One row of a β-sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub subinvariant: bool,
    /// Smallest entry over all subinvariance vectors.
    pub min_slack: f64,
    pub mass_tau0: f64,
    /// Present when the Wold decomposition exists at this β.
    pub mass_tau_inf: Option<f64>,
    pub sigma_min: f64,
}

pub const SWEEP_COLUMNS: [&str; 6] = ["beta", "subinvariant", "min_slack", "mass_tau0", "mass_tau_inf", "sigma_min"];

/// Rows are computed in parallel and returned in β order.
pub fn sweep_rows(sys: &TransferSystem, tau: &TraceVec, betas: &[f64], tol: &Tolerances) -> Result<Vec<SweepRow>> {
    betas
        .par_iter()
        .map(|&beta| {
            let report = check_subinvariance(sys, tau, beta, tol)?;
            let t = t_beta(sys, beta);
            let mass_tau0 = (&t * tau.vector()).sum();
            let mass_tau_inf =
                if report.pass { wold(sys, tau, beta, tol).ok().map(|w| w.tau_inf.mass()) } else { None };
            Ok(SweepRow {
                beta,
                subinvariant: report.pass,
                min_slack: report.worst_value,
                mass_tau0,
                mass_tau_inf,
                sigma_min: smallest_singular_value(&t),
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let cells = [
            format_float(r.beta),
            r.subinvariant.to_string(),
            format_float(r.min_slack),
            format_float(r.mass_tau0),
            r.mass_tau_inf.map(format_float).unwrap_or_default(),
            format_float(r.sigma_min),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn cmd_sweep(
    model: &Model,
    trace: (&str, &TraceVec),
    betas: &[f64],
    tol: &Tolerances,
) -> Result<(Report, Vec<SweepRow>)> {
    let sys = &model.system;
    let rows = sweep_rows(sys, trace.1, betas, tol)?;
    let report = base("sweep", sys, tol, Some(trace))
        .arg("beta_from", betas[0])
        .arg("beta_to", betas[betas.len() - 1])
        .arg("steps", betas.len())
        .with_result(&rows);
    Ok((report, rows))
}

/// The three parameter sets of the optimality example, with `I` 1-based.
pub const OPTIMAL_CASES: [(usize, &[usize], f64); 3] = [(2, &[1], 3.0), (3, &[1, 2], 4.0), (3, &[1, 2, 3], 3.0)];

/// Boundary of the admissible `λ` interval: `½((α−2)/(α+2))^{|I|}`.
pub fn optimal_lambda_radius(alpha: f64, size: usize) -> f64 {
    0.5 * ((alpha - 2.0) / (alpha + 2.0)).powi(size as i32)
}

/// Grid points closer than this to the boundary are not scored.
pub const LAMBDA_BOUNDARY_TOL: f64 = 1e-9;

pub fn verify_optimal(tol: &Tolerances) -> Result<Report> {
    let mut cases = Vec::new();
    let mut all = true;
    for (n, subset, alpha) in OPTIMAL_CASES {
        let set: BTreeSet<usize> = subset.iter().copied().collect();
        let (sys, mu) = example_optimal(n, &set, alpha)?;
        let report = check_subinvariance(&sys, &mu, 1.0, tol)?;
        let expected: Vec<String> = subset.iter().map(|i| format!("e{i}")).collect();
        let fails_exactly_at_i = report.failing == vec![expected.clone()];
        let radius = optimal_lambda_radius(alpha, subset.len());
        let mut mismatches = Vec::new();
        let mut admissible = 0;
        for k in 0..=1000 {
            let lambda = k as f64 / 1000.0;
            let tau = TraceVec::new(vec![lambda, 1.0 - lambda])?;
            let pass = check_subinvariance(&sys, &tau, 1.0, tol)?.pass;
            admissible += usize::from(pass);
            let offset = (lambda - 0.5).abs() - radius;
            if offset.abs() > LAMBDA_BOUNDARY_TOL && pass != (offset <= 0.0) {
                mismatches.push(lambda);
            }
        }
        let ok = fails_exactly_at_i && mismatches.is_empty();
        all &= ok;
        cases.push(json!({
            "n": n,
            "I": subset,
            "alpha": alpha,
            "mu": mu.entries(),
            "failing": report.failing,
            "fails_exactly_at_I": fails_exactly_at_i,
            "lambda_radius": radius,
            "lambda_admissible_points": admissible,
            "lambda_mismatches": mismatches,
            "pass": ok,
        }));
    }
    Ok(Report::new("verify-example optimal", None, tol).arg("beta", 1.0).with_result(cases).with_pass(all))
}

/// A random pair of commuting nonnegative integer matrices, entries `≤ 2`.
pub fn random_kgraph(rng: &mut impl Rng) -> KGraphModel {
    let k = rng.gen_range(1..=2);
    let v = rng.gen_range(1..=4);
    let random = |rng: &mut dyn rand::RngCore| -> Vec<Vec<u64>> {
        (0..v).map(|_| (0..v).map(|_| rng.gen_range(0..=2)).collect()).collect()
    };
    let a1 = random(rng);
    let mut matrices = vec![a1.clone()];
    if k == 2 {
        let commute = |x: &Vec<Vec<u64>>, y: &Vec<Vec<u64>>| {
            (0..v).all(|i| {
                (0..v).all(|j| {
                    (0..v).map(|l| x[i][l] * y[l][j]).sum::<u64>() == (0..v).map(|l| y[i][l] * x[l][j]).sum::<u64>()
                })
            })
        };
        let found = (0..400).map(|_| random(rng)).find(|b| commute(&a1, b));
        let a2 = found.unwrap_or_else(|| {
            let identity: Vec<Vec<u64>> = (0..v).map(|i| (0..v).map(|j| u64::from(i == j)).collect()).collect();
            let doubled: Vec<Vec<u64>> = identity.iter().map(|r| r.iter().map(|x| 2 * x).collect()).collect();
            let zero = vec![vec![0; v]; v];
            let options = [zero, identity, doubled, a1.clone()];
            options[rng.gen_range(0..options.len())].clone()
        });
        matrices.push(a2);
    }
    KGraphModel { vertices: v, matrices }
}

/// Counts paths of degree `degree` with range `v` and source `w` by walking
/// explicit edges, colour by colour from the range end.
pub fn count_paths(model: &KGraphModel, degree: &[usize], v: usize, w: usize) -> u64 {
    let colours: Vec<usize> = degree.iter().enumerate().flat_map(|(i, &n)| std::iter::repeat_n(i, n)).collect();
    fn walk(model: &KGraphModel, colours: &[usize], at: usize, w: usize) -> u64 {
        let Some((&c, rest)) = colours.split_first() else {
            return u64::from(at == w);
        };
        let mut total = 0;
        for next in 0..model.vertices {
            for _edge in 0..model.matrices[c][at][next] {
                total += walk(model, rest, next, w);
            }
        }
        total
    }
    walk(model, &colours, v, w)
}

pub fn kgraph_mismatches(model: &KGraphModel, max_degree: usize) -> Result<usize> {
    let k = model.matrices.len();
    let sys = from_kgraph(model, WeightMap::uniform(k, 2.0)?)?;
    let mut mismatches = 0;
    let degrees: Vec<Vec<usize>> = if k == 1 {
        (0..=max_degree).map(|n| vec![n]).collect()
    } else {
        (0..=max_degree).flat_map(|a| (0..=max_degree - a).map(move |b| vec![a, b])).collect()
    };
    for degree in degrees {
        let word: Vec<usize> = degree.iter().enumerate().flat_map(|(i, &n)| std::iter::repeat_n(i, n)).collect();
        let p: MonoidElement = sys.monoid().normalize(&word)?;
        for w in 0..model.vertices {
            let mut delta = vec![0.0; model.vertices];
            delta[w] = 1.0;
            let image = sys.apply_fp(&p, &TraceVec::new(delta)?)?;
            for v in 0..model.vertices {
                let value = image.entries()[v];
                if value.fract() != 0.0 || value as u64 != count_paths(model, &degree, v, w) {
                    mismatches += 1;
                }
            }
        }
    }
    Ok(mismatches)
}

pub fn verify_kgraph(seed: u64, trials: usize, tol: &Tolerances) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut total = 0;
    for _ in 0..trials {
        let model = random_kgraph(&mut rng);
        let mismatches = kgraph_mismatches(&model, 4)?;
        total += mismatches;
        rows.push(json!({ "vertices": model.vertices, "matrices": model.matrices, "mismatches": mismatches }));
    }
    Ok(Report::new("verify-example kgraph", None, tol)
        .arg("seed", seed)
        .arg("trials", trials)
        .with_result(json!({ "models": rows, "total_mismatches": total }))
        .with_pass(total == 0))
}

/// Root of `1 − Σ_s N(s)^{−β} + …` (the clique polynomial in `N^{−β}`) for
/// trivial fibers, by scalar bisection. Returns `None` if no sign change is found.
pub fn clique_polynomial_root(sys: &TransferSystem) -> Option<f64> {
    let value = |beta: f64| t_beta(sys, beta)[(0, 0)];
    let (mut lo, mut hi) = (1e-9, 64.0);
    if value(lo) >= 0.0 || value(hi) <= 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn verify_semigroup(tol: &Tolerances) -> Result<Report> {
    let sys = trivial_system(SimpleGraph::edgeless(2), WeightMap::uniform(2, 2.0)?)?;
    let root = clique_polynomial_root(&sys).ok_or_else(|| anyhow!("clique polynomial has no positive root"))?;
    let critical = critical_beta(&sys, tol)?;
    let beta_c = critical.beta_c.ok_or_else(|| anyhow!("critical value is -infinity"))?;
    let tau = TraceVec::new(vec![1.0])?;
    let above = wold(&sys, &tau, 1.5, tol)?.trace_type;
    let at = wold(&sys, &tau, 1.0, tol)?.trace_type;
    let pass = (beta_c - root).abs() <= 1e-8 && above == TraceType::Finite && at == TraceType::Infinite;
    Ok(Report::new("verify-example semigroup", Some(&sys), tol)
        .with_result(json!({
            "beta_c": beta_c,
            "clique_polynomial_root": root,
            "type_at_1.5": above,
            "type_at_1": at,
        }))
        .with_pass(pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ranges_and_traces() {
        assert_eq!(parse_beta_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_beta_range("1:0:3").is_err());
        assert!(parse_beta_range("0:1:1").is_err());
        assert!(parse_beta_range("0:1").is_err());
        assert_eq!(parse_inline_trace("0.5, 1").unwrap(), vec![0.5, 1.0]);
        assert!(parse_inline_trace("a").is_err());
    }

    #[test]
    fn path_counts_small() {
        let model = KGraphModel { vertices: 2, matrices: vec![vec![vec![1, 1], vec![0, 1]]] };
        // A^3 = [[1,3],[0,1]]
        assert_eq!(count_paths(&model, &[3], 0, 1), 3);
        assert_eq!(kgraph_mismatches(&model, 4).unwrap(), 0);
    }

    #[test]
    fn canned_examples_pass() {
        let tol = Tolerances::default();
        assert_eq!(verify_semigroup(&tol).unwrap().pass, Some(true));
        assert_eq!(verify_kgraph(1, 3, &tol).unwrap().pass, Some(true));
    }
}
