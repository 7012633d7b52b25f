use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::gibbs::t_beta;
use super::subinvariance::check_subinvariance;
use super::{KmsError, Tolerances};
use crate::linalg::{
    nonnegative_kernel_vector, nonnegative_radius, smallest_singular_value, spectral_radius, support_has_cycle,
};
use crate::monoid::{GenMask, NormalFormAutomaton};
use crate::transfer::{TraceVec, TransferSystem};

/// Accuracy of the power iteration behind the closed form.
pub const RADIUS_TOL: f64 = 1e-10;

/// `σ_min(T_β)` below this counts as singular.
const SINGULAR_TOL: f64 = 1e-7;

/// Offsets above `β_c` at which `T_β` is checked to be invertible.
const ABOVE_OFFSETS: [f64; 4] = [1e-3, 1e-2, 0.1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalMethod {
    ClosedForm,
    Bisection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorRadius {
    pub generator: String,
    pub radius: f64,
    pub charpoly_radius: Option<f64>,
    pub weight: f64,
    /// `log r(F_s) / log N(s)`, absent when `r(F_s) = 0`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalReport {
    /// `None` stands for `−∞`.
    pub beta_c: Option<f64>,
    pub method: CriticalMethod,
    /// Per-generator data for the closed form (complete graphs only).
    pub generators: Vec<GeneratorRadius>,
    pub maximizer: Option<String>,
    /// Abscissa of convergence of `Σ_p N(p)^{−β} ‖F_p‖₁`, from bisection.
    pub abscissa: Option<f64>,
    pub bisection_iterations: usize,
    /// Nearest `β` to `β_c` where `T_β` is numerically singular.
    pub singular_root: Option<f64>,
    pub sigma_min_at_critical: Option<f64>,
    /// `σ_min(T_β)` at `β_c` plus each offset in `[1e-3, 1e-2, 0.1, 1]`.
    pub sigma_min_above: Vec<f64>,
    /// Closed form, abscissa and singular root agree within `1e-6` where present.
    pub consistent: bool,
}

fn require_weights_above_one(sys: &TransferSystem) -> Result<(), KmsError> {
    for (g, &n) in sys.weights().values().iter().enumerate() {
        if !(n > 1.0) {
            return Err(KmsError::WeightPrecondition {
                generator: sys.graph().name(g).to_string(),
                value: n,
                requirement: "N(s) > 1",
            });
        }
    }
    Ok(())
}

/// Transfer matrix of the level recursion, one `d × d` block per reachable
/// state of the normal-form automaton; block `(X', X)` is `N(x)^{−β} F_x`
/// when reading `x` moves `X` to `X'`.
pub fn block_transfer_matrix(sys: &TransferSystem, beta: f64) -> (DMatrix<f64>, Vec<GenMask>) {
    let automaton = NormalFormAutomaton::new(sys.graph());
    let n = sys.generators();
    let mut index: BTreeMap<GenMask, usize> = BTreeMap::from([(automaton.start(), 0)]);
    let mut states = vec![automaton.start()];
    let mut queue = VecDeque::from([automaton.start()]);
    let mut moves = Vec::new();
    while let Some(state) = queue.pop_front() {
        for x in 0..n {
            if let Some(to) = automaton.step(state, x) {
                let next = *index.entry(to).or_insert_with(|| {
                    states.push(to);
                    queue.push_back(to);
                    states.len() - 1
                });
                moves.push((index[&state], next, x));
            }
        }
    }
    let d = sys.dim();
    let mut m = DMatrix::<f64>::zeros(states.len() * d, states.len() * d);
    for (from, to, x) in moves {
        let block = sys.operator(x) * sys.weights().generator_factor(x, beta);
        let mut view = m.view_mut((to * d, from * d), (d, d));
        view += block;
    }
    (m, states)
}

/// Rows and columns reachable from the start block in the support digraph.
fn reachable_nodes(m: &DMatrix<f64>, d: usize) -> Vec<usize> {
    let size = m.nrows();
    let mut seen = vec![false; size];
    let mut stack: Vec<usize> = (0..d.min(size)).collect();
    for &s in &stack {
        seen[s] = true;
    }
    while let Some(j) = stack.pop() {
        for i in 0..size {
            if !seen[i] && m[(i, j)] > 0.0 {
                seen[i] = true;
                stack.push(i);
            }
        }
    }
    (0..size).filter(|&i| seen[i]).collect()
}

fn restrict(m: &DMatrix<f64>, nodes: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(nodes.len(), nodes.len(), |a, b| m[(nodes[a], nodes[b])])
}

/// Exponential growth rate of the level sums `Σ_{|p|=ℓ} N(p)^{−β} ‖F_p‖₁`.
pub fn growth_radius(sys: &TransferSystem, beta: f64) -> f64 {
    let (m, _) = block_transfer_matrix(sys, beta);
    let nodes = reachable_nodes(&m, sys.dim());
    nonnegative_radius(&restrict(&m, &nodes))
}

/// Root of `growth_radius(β) = 1` by bisection, or `None` when the level
/// sums vanish eventually.
fn abscissa(sys: &TransferSystem, tol: &Tolerances) -> Result<(Option<f64>, usize), KmsError> {
    let (m, _) = block_transfer_matrix(sys, 0.0);
    let nodes = reachable_nodes(&m, sys.dim());
    if !support_has_cycle(&restrict(&m, &nodes)) {
        return Ok((None, 0));
    }
    let g = |beta: f64| {
        let (m, _) = block_transfer_matrix(sys, beta);
        nonnegative_radius(&restrict(&m, &nodes))
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut step = 1.0;
    let mut iterations = 0;
    while g(lo) <= 1.0 {
        lo -= step;
        step *= 2.0;
        iterations += 1;
        if iterations > 200 {
            return Err(KmsError::BisectionFailed);
        }
    }
    step = 1.0;
    while g(hi) >= 1.0 {
        hi += step;
        step *= 2.0;
        iterations += 1;
        if iterations > 400 {
            return Err(KmsError::BisectionFailed);
        }
    }
    while hi - lo > tol.critical_beta * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok((Some(0.5 * (lo + hi)), iterations))
}

fn sigma_min(sys: &TransferSystem, beta: f64) -> f64 {
    smallest_singular_value(&t_beta(sys, beta))
}

/// Largest zero of `σ_min(T_β)` near `center`: every local minimum of a grid
/// scan is refined by golden section, and the rightmost one that is singular
/// to working precision wins. `T_β` may be singular at several points below
/// `β_c`.
fn singular_root_near(sys: &TransferSystem, center: f64) -> Option<f64> {
    const HALF_WIDTH: f64 = 0.5;
    const CELLS: usize = 100;
    let h = 2.0 * HALF_WIDTH / CELLS as f64;
    let grid: Vec<f64> = (0..=CELLS).map(|k| center - HALF_WIDTH + k as f64 * h).collect();
    let values: Vec<f64> = grid.iter().map(|&b| sigma_min(sys, b)).collect();
    let local_minima = (0..=CELLS)
        .rev()
        .filter(|&k| (k == 0 || values[k] <= values[k - 1]) && (k == CELLS || values[k] <= values[k + 1]));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for best in local_minima {
        let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(CELLS)]);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        for _ in 0..80 {
            if sigma_min(sys, c) < sigma_min(sys, d) {
                b = d;
            } else {
                a = c;
            }
            c = b - ratio * (b - a);
            d = a + ratio * (b - a);
        }
        let root = 0.5 * (a + b);
        let scale = t_beta(sys, root).amax().max(1.0);
        if sigma_min(sys, root) <= SINGULAR_TOL * scale {
            return Some(root);
        }
    }
    None
}

/// The critical inverse temperature. Complete graphs use
/// `max_s log r(F_s) / log N(s)`; other graphs use the abscissa of the level
/// sums. Both routes also report the nearest singular point of `T_β`, since
/// the two notions are not known to agree in general.
pub fn critical_beta(sys: &TransferSystem, tol: &Tolerances) -> Result<CriticalReport, KmsError> {
    require_weights_above_one(sys)?;
    let graph = sys.graph();
    let (abscissa, bisection_iterations) = abscissa(sys, tol)?;
    let mut generators = Vec::new();
    let mut maximizer = None;
    let (beta_c, method) = if graph.is_complete() {
        let mut best: Option<(f64, usize)> = None;
        for g in 0..sys.generators() {
            let f = sys.operator(g);
            let sr = spectral_radius(f, RADIUS_TOL);
            let radius = if support_has_cycle(f) { sr.value } else { 0.0 };
            let weight = sys.weights().get(g);
            let ratio = (radius > 0.0).then(|| radius.ln() / weight.ln());
            if let Some(r) = ratio {
                if best.is_none_or(|(b, _)| r > b) {
                    best = Some((r, g));
                }
            }
            generators.push(GeneratorRadius {
                generator: graph.name(g).to_string(),
                radius,
                charpoly_radius: sr.charpoly,
                weight,
                ratio,
            });
        }
        maximizer = best.map(|(_, g)| graph.name(g).to_string());
        (best.map(|(b, _)| b), CriticalMethod::ClosedForm)
    } else {
        (abscissa, CriticalMethod::Bisection)
    };
    let (singular_root, sigma_min_at_critical, sigma_min_above) = match beta_c {
        Some(b) => (
            singular_root_near(sys, b),
            Some(sigma_min(sys, b)),
            ABOVE_OFFSETS.iter().map(|o| sigma_min(sys, b + o)).collect(),
        ),
        None => (None, None, Vec::new()),
    };
    let agree = |x: Option<f64>| match (beta_c, x) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-6,
        (None, None) => true,
        _ => false,
    };
    let consistent = agree(abscissa) && (beta_c.is_none() || agree(singular_root));
    Ok(CriticalReport {
        beta_c,
        method,
        generators,
        maximizer,
        abscissa,
        bisection_iterations,
        singular_root,
        sigma_min_at_critical,
        sigma_min_above,
        consistent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessMethod {
    Perron,
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalWitness {
    pub beta_c: f64,
    pub trace: TraceVec,
    pub method: WitnessMethod,
    /// `‖T_{β_c} τ‖∞`.
    pub residual: f64,
    pub subinvariant: bool,
}

/// A tracial state of infinite type at `β_c`, i.e. a nonnegative unit-mass
/// `τ` with `T_{β_c} τ = 0`.
pub fn infinite_type_at_critical(sys: &TransferSystem, tol: &Tolerances) -> Result<Option<CriticalWitness>, KmsError> {
    let report = critical_beta(sys, tol)?;
    let beta_c = report.beta_c.ok_or(KmsError::NoCriticalValue)?;
    let t = t_beta(sys, beta_c);
    let mut candidates: Vec<(DVector<f64>, WitnessMethod)> = Vec::new();
    if let Some(name) = &report.maximizer {
        let g = sys.graph().index_of(name)?;
        let f = sys.operator(g);
        let r = nonnegative_radius(f);
        let d = sys.dim();
        let shifted = DMatrix::<f64>::identity(d, d) * r - f;
        candidates.push((nonnegative_kernel_vector(&shifted), WitnessMethod::Perron));
    }
    candidates.push((nonnegative_kernel_vector(&t), WitnessMethod::Kernel));
    for (v, method) in candidates {
        if v.sum() <= 0.0 {
            continue;
        }
        let residual = (&t * &v).amax();
        if residual <= tol.residual {
            let trace = TraceVec::from_vector(v);
            let subinvariant = check_subinvariance(sys, &trace, beta_c, tol)?.pass;
            return Ok(Some(CriticalWitness { beta_c, trace, method, residual, subinvariant }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monoid::{SimpleGraph, WeightMap};
    use crate::transfer::trivial_system;
    use nalgebra::dmatrix;

    fn z2_example() -> TransferSystem {
        TransferSystem::new(
            SimpleGraph::complete(2),
            2,
            vec![dmatrix![1.0, 1.0; 1.0, 1.0], DMatrix::identity(2, 2) * 2.0],
            WeightMap::new(vec![2.0, 4.0]).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn scalar_critical_value() {
        let tol = Tolerances::default();
        let sys = TransferSystem::new(
            SimpleGraph::edgeless(1),
            1,
            vec![DMatrix::from_element(1, 1, 3.0)],
            WeightMap::uniform(1, 3.0).unwrap(),
            None,
        )
        .unwrap();
        let report = critical_beta(&sys, &tol).unwrap();
        assert_eq!(report.method, CriticalMethod::ClosedForm);
        assert!((report.beta_c.unwrap() - 1.0).abs() < 1e-12);
        assert!(report.consistent);
        let w = infinite_type_at_critical(&sys, &tol).unwrap().unwrap();
        assert!((w.trace.entries()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z2_critical_value_and_witness() {
        let tol = Tolerances::default();
        let sys = z2_example();
        let report = critical_beta(&sys, &tol).unwrap();
        assert!((report.beta_c.unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(report.maximizer.as_deref(), Some("a"));
        assert!((report.abscissa.unwrap() - 1.0).abs() < 1e-9);
        let w = infinite_type_at_critical(&sys, &tol).unwrap().unwrap();
        assert_eq!(w.method, WitnessMethod::Perron);
        assert!(w.residual <= 1e-10);
        assert!(w.trace.max_abs_diff(&TraceVec::new(vec![0.5, 0.5]).unwrap()) < 1e-10);
    }

    #[test]
    fn free_monoid_critical_value() {
        let tol = Tolerances::default();
        let sys = trivial_system(SimpleGraph::edgeless(2), WeightMap::uniform(2, 2.0).unwrap()).unwrap();
        let report = critical_beta(&sys, &tol).unwrap();
        assert_eq!(report.method, CriticalMethod::Bisection);
        assert!((report.beta_c.unwrap() - 1.0).abs() < 1e-10);
        assert!((report.singular_root.unwrap() - 1.0).abs() < 1e-6);
        let w = infinite_type_at_critical(&sys, &tol).unwrap().unwrap();
        assert!((w.trace.entries()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_operators_have_no_critical_value() {
        let tol = Tolerances::default();
        let sys = TransferSystem::new(
            SimpleGraph::from_index_edges(3, &[(0, 1)]).unwrap(),
            2,
            vec![DMatrix::zeros(2, 2); 3],
            WeightMap::uniform(3, 2.0).unwrap(),
            None,
        )
        .unwrap();
        assert_eq!(critical_beta(&sys, &tol).unwrap().beta_c, None);
        assert!(matches!(infinite_type_at_critical(&sys, &tol), Err(KmsError::NoCriticalValue)));
    }

    #[test]
    fn weights_must_exceed_one() {
        let tol = Tolerances::default();
        let sys = trivial_system(SimpleGraph::edgeless(1), WeightMap::uniform(1, 1.0).unwrap()).unwrap();
        assert!(matches!(critical_beta(&sys, &tol), Err(KmsError::WeightPrecondition { .. })));
    }

    #[test]
    fn path_graph_growth_matches_clique_polynomial() {
        // Trivial fibers on the path a–b–c with N ≡ 2: the growth series is
        // 1 / (1 − 3x + 2x²) with x = 2^{−β}, whose smallest root is x = 1/2.
        let tol = Tolerances::default();
        let graph = SimpleGraph::from_index_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let sys = trivial_system(graph, WeightMap::uniform(3, 2.0).unwrap()).unwrap();
        let report = critical_beta(&sys, &tol).unwrap();
        assert!((report.beta_c.unwrap() - 1.0).abs() < 1e-10);
        assert!(report.consistent);
    }
}
