//! Small dense helpers for nonnegative matrices: spectral radius with a
//! Collatz–Wielandt bracket, Perron vectors, characteristic polynomials and
//! a Lawson–Hanson nonnegative least-squares solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMethod {
    PowerIteration,
    Eigenvalues,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralRadius {
    pub value: f64,
    pub method: RadiusMethod,
    /// Collatz–Wielandt bounds from the last power step.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    /// Largest root modulus of the characteristic polynomial (dimension ≤ 4).
    pub charpoly: Option<f64>,
}

const POWER_MAX_ITERATIONS: usize = 20_000;

/// Spectral radius of a nonnegative square matrix.
///
/// Runs power iteration on `I + F`, which is aperiodic, and stops when the
/// Collatz–Wielandt bracket is narrower than `tol`. When the bracket fails to
/// close (defective or slowly mixing matrices) the Schur eigenvalues are used.
pub fn spectral_radius(f: &DMatrix<f64>, tol: f64) -> SpectralRadius {
    let d = f.nrows();
    let charpoly = (d <= 4).then(|| charpoly_radius(f));
    if d == 0 {
        return SpectralRadius {
            value: 0.0,
            method: RadiusMethod::Eigenvalues,
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
            charpoly,
        };
    }
    let shifted = f + DMatrix::<f64>::identity(d, d);
    let mut x = DVector::from_element(d, 1.0 / d as f64);
    let (mut lower, mut upper) = (0.0, f64::INFINITY);
    let mut iterations = 0;
    while iterations < POWER_MAX_ITERATIONS {
        iterations += 1;
        let y = &shifted * &x;
        let ratios = y.iter().zip(x.iter()).map(|(a, b)| a / b);
        lower = ratios.clone().fold(f64::INFINITY, f64::min);
        upper = ratios.fold(0.0, f64::max);
        let sum = y.sum();
        x = y / sum;
        if upper - lower <= tol * upper.max(1.0) {
            return SpectralRadius {
                value: (0.5 * (lower + upper) - 1.0).max(0.0),
                method: RadiusMethod::PowerIteration,
                lower: (lower - 1.0).max(0.0),
                upper: upper - 1.0,
                iterations,
                charpoly,
            };
        }
    }
    SpectralRadius {
        value: eigen_radius(f),
        method: RadiusMethod::Eigenvalues,
        lower: (lower - 1.0).max(0.0),
        upper: upper - 1.0,
        iterations,
        charpoly,
    }
}

/// Largest eigenvalue modulus from the real Schur form.
pub fn eigen_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return m[(0, 0)].abs();
    }
    match m.clone().try_schur(1e-14, 10_000) {
        Some(schur) => schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => charpoly_radius(m),
    }
}

/// Coefficients `c_0..c_n` of `det(λI − A) = Σ c_k λ^k` (Faddeev–LeVerrier).
pub fn characteristic_polynomial(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut m = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        m = a * &m + &id * coeffs[n - k + 1];
        let am = a * &m;
        coeffs[n - k] = -am.trace() / k as f64;
    }
    coeffs
}

/// Roots of a monic-normalizable polynomial by Durand–Kerner iteration.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Vec::new();
    }
    let lead = coeffs[degree];
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |z: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    let radius = 1.0 + monic[..degree].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|k| seed.powu(k as u32) * radius).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..degree {
            let denom =
                (0..degree).filter(|&j| j != i).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (roots[i] - roots[j]));
            if denom.norm() == 0.0 {
                roots[i] += Complex64::new(1e-9, 1e-9);
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * radius {
            break;
        }
    }
    roots
}

/// Dominant root modulus of the characteristic polynomial.
pub fn charpoly_radius(a: &DMatrix<f64>) -> f64 {
    polynomial_roots(&characteristic_polynomial(a)).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Whether the support digraph of a nonnegative matrix has a cycle, which
/// is equivalent to a positive spectral radius.
pub fn support_has_cycle(m: &DMatrix<f64>) -> bool {
    let graph = support_graph(m);
    tarjan_scc(&graph).iter().any(|scc| {
        scc.len() > 1 || {
            let i = scc[0].index();
            m[(i, i)] > 0.0
        }
    })
}

fn support_graph(m: &DMatrix<f64>) -> DiGraph<(), ()> {
    let n = m.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if m[(i, j)] > 0.0 {
                graph.add_edge(nodes[j], nodes[i], ());
            }
        }
    }
    graph
}

/// Spectral radius of a nonnegative matrix computed block by block over the
/// strongly connected components of its support, where Perron roots are
/// simple and well conditioned.
pub fn nonnegative_radius(m: &DMatrix<f64>) -> f64 {
    let graph = support_graph(m);
    let mut radius = 0.0f64;
    for scc in tarjan_scc(&graph) {
        let idx: Vec<usize> = scc.iter().map(|n| n.index()).collect();
        let block = DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])]);
        radius = radius.max(eigen_radius(&block));
    }
    radius
}

pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Right singular vector for the smallest singular value.
pub fn smallest_singular_vector(m: &DMatrix<f64>) -> Option<DVector<f64>> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t?;
    let (k, _) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &s)| if s < best.1 { (i, s) } else { best });
    Some(v_t.row(k).transpose())
}

/// Lawson–Hanson: minimize `‖A x − b‖₂` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let cols: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = DMatrix::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])]);
            let Some(z_sub) = least_squares(&sub, b) else { break };
            if z_sub.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (c, &k) in cols.iter().enumerate() {
                    x[k] = z_sub[c];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (c, &k) in cols.iter().enumerate() {
                if z_sub[c] <= 0.0 {
                    alpha = alpha.min(x[k] / (x[k] - z_sub[c]));
                }
            }
            for (c, &k) in cols.iter().enumerate() {
                x[k] += alpha * (z_sub[c] - x[k]);
                if x[k] <= tol {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    x
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.ncols() == 0 {
        return None;
    }
    a.clone().svd(true, true).solve(b, 1e-13).ok()
}

/// A nonnegative unit-mass vector `x` minimizing `‖M x‖` (the mass constraint
/// is imposed as a heavily weighted extra row).
pub fn nonnegative_kernel_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let (r, c) = m.shape();
    let weight = 1e3 * m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut aug = DMatrix::<f64>::zeros(r + 1, c);
    aug.view_mut((0, 0), (r, c)).copy_from(m);
    aug.row_mut(r).fill(weight);
    let mut rhs = DVector::<f64>::zeros(r + 1);
    rhs[r] = weight;
    let x = nnls(&aug, &rhs);
    let mass = x.sum();
    if mass > 0.0 {
        x / mass
    } else {
        x
    }
}
