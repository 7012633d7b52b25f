//! Finite-dimensional transfer systems.
//!
//! The coefficient algebra is `C(Z)` for a finite set `Z` with `|Z| = d`, so a
//! trace is a nonnegative `d`-vector and each dual transfer operator `F_s` is
//! a nonnegative `d × d` matrix acting by left multiplication. Operators on
//! commuting generators must commute for `F_p` to be well defined.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monoid::{
    iter_mask, ArtinMonoid, GenMask, Generator, MonoidElement, MonoidError, SimpleGraph, WeightError, WeightMap,
};

/// Absolute commutation tolerance for floating-point input.
pub const COMMUTATION_TOL: f64 = 1e-9;

/// Slack below zero accepted when a trace vector is flagged positive.
pub const POSITIVITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransferError {
    #[error(transparent)]
    Monoid(#[from] MonoidError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("expected {expected} {what}, got {got}")]
    CountMismatch { what: &'static str, expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator for `{generator}` has entry {value} at ({row}, {col}); entries must be nonnegative and finite")]
    BadEntry { generator: String, row: usize, col: usize, value: f64 },
    #[error("operators for edge {{{a}, {b}}} do not commute: commutator entry ({row}, {col}) = {value}")]
    NotCommuting { a: String, b: String, row: usize, col: usize, value: f64 },
    #[error("map {map} is not surjective: state {missing} has no preimage")]
    NotSurjective { map: usize, missing: usize },
    #[error("maps {i} and {j} do not commute at state {state}")]
    MapsDoNotCommute { i: usize, j: usize, state: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("trace has non-finite entry {0}")]
    NonFiniteTrace(f64),
}

/// A trace on `C(Z)` written in the basis of point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TraceVec(DVector<f64>);

impl TraceVec {
    pub fn new(entries: Vec<f64>) -> Result<Self, TransferError> {
        if let Some(&bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(TransferError::NonFiniteTrace(bad));
        }
        Ok(TraceVec(DVector::from_vec(entries)))
    }

    pub fn zeros(d: usize) -> Self {
        TraceVec(DVector::zeros(d))
    }

    pub fn from_vector(v: DVector<f64>) -> Self {
        TraceVec(v)
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[f64] {
        self.0.as_slice()
    }

    /// `τ(1)`, pairing with the unit.
    pub fn mass(&self) -> f64 {
        self.0.sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|&v| v >= -POSITIVITY_EPS)
    }

    pub fn max_abs_diff(&self, other: &TraceVec) -> f64 {
        (&self.0 - &other.0).amax()
    }
}

impl TryFrom<Vec<f64>> for TraceVec {
    type Error = TransferError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        TraceVec::new(v)
    }
}

impl From<TraceVec> for Vec<f64> {
    fn from(t: TraceVec) -> Self {
        t.0.as_slice().to_vec()
    }
}

/// Largest commutator entry on one edge of the graph.
#[derive(Debug, Clone, Serialize)]
pub struct EdgeCommutator {
    pub edge: (String, String),
    pub max_entry: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutationReport {
    pub exact: bool,
    pub edges: Vec<EdgeCommutator>,
}

/// Graph, weights and commuting nonnegative operators `F_s`.
#[derive(Debug, Clone)]
pub struct TransferSystem {
    monoid: ArtinMonoid,
    dim: usize,
    operators: Vec<DMatrix<f64>>,
    weights: WeightMap,
    rank_hint: Option<Vec<u64>>,
    exact: bool,
}

impl TransferSystem {
    pub fn new(
        graph: SimpleGraph,
        dim: usize,
        operators: Vec<DMatrix<f64>>,
        weights: WeightMap,
        rank_hint: Option<Vec<u64>>,
    ) -> Result<Self, TransferError> {
        let n = graph.len();
        if operators.len() != n {
            return Err(TransferError::CountMismatch { what: "operators", expected: n, got: operators.len() });
        }
        if weights.len() != n {
            return Err(TransferError::CountMismatch { what: "weights", expected: n, got: weights.len() });
        }
        if let Some(hint) = &rank_hint {
            if hint.len() != n {
                return Err(TransferError::CountMismatch { what: "rank hints", expected: n, got: hint.len() });
            }
        }
        let exact = operators.iter().all(|m| m.iter().all(|v| v.fract() == 0.0 && v.abs() < (1u64 << 26) as f64));
        let system = TransferSystem { monoid: ArtinMonoid::new(graph), dim, operators, weights, rank_hint, exact };
        system.validate()?;
        Ok(system)
    }

    /// Checks shapes, nonnegativity and commutation along every edge.
    pub fn validate(&self) -> Result<CommutationReport, TransferError> {
        let graph = self.monoid.graph();
        for (g, m) in self.operators.iter().enumerate() {
            if m.nrows() != self.dim || m.ncols() != self.dim {
                return Err(TransferError::DimensionMismatch { expected: self.dim, got: m.nrows().max(m.ncols()) });
            }
            for ((row, col), &value) in m.iter().enumerate().map(|(k, v)| ((k % self.dim, k / self.dim), v)) {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(TransferError::BadEntry { generator: graph.name(g).to_string(), row, col, value });
                }
            }
        }
        let tol = if self.exact { 0.0 } else { COMMUTATION_TOL };
        let mut edges = Vec::new();
        for (a, b) in graph.edges() {
            let comm = &self.operators[a] * &self.operators[b] - &self.operators[b] * &self.operators[a];
            let (mut worst, mut at) = (0.0f64, (0, 0));
            for row in 0..self.dim {
                for col in 0..self.dim {
                    if comm[(row, col)].abs() > worst {
                        worst = comm[(row, col)].abs();
                        at = (row, col);
                    }
                }
            }
            if worst > tol {
                return Err(TransferError::NotCommuting {
                    a: graph.name(a).to_string(),
                    b: graph.name(b).to_string(),
                    row: at.0,
                    col: at.1,
                    value: comm[at],
                });
            }
            edges.push(EdgeCommutator {
                edge: (graph.name(a).to_string(), graph.name(b).to_string()),
                max_entry: worst,
            });
        }
        Ok(CommutationReport { exact: self.exact, edges })
    }

    pub fn monoid(&self) -> &ArtinMonoid {
        &self.monoid
    }

    pub fn graph(&self) -> &SimpleGraph {
        self.monoid.graph()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> usize {
        self.operators.len()
    }

    pub fn operator(&self, g: Generator) -> &DMatrix<f64> {
        &self.operators[g]
    }

    pub fn operators(&self) -> &[DMatrix<f64>] {
        &self.operators
    }

    pub fn weights(&self) -> &WeightMap {
        &self.weights
    }

    pub fn rank_hint(&self) -> Option<&[u64]> {
        self.rank_hint.as_deref()
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Same operators and graph with a different weight map.
    pub fn with_weights(&self, weights: WeightMap) -> Result<Self, TransferError> {
        if weights.len() != self.generators() {
            return Err(TransferError::CountMismatch {
                what: "weights",
                expected: self.generators(),
                got: weights.len(),
            });
        }
        Ok(TransferSystem { weights, ..self.clone() })
    }

    /// The matrix `F_p = F_{s_1} ⋯ F_{s_n}` for the normal form of `p`.
    pub fn operator_for(&self, p: &MonoidElement) -> Result<DMatrix<f64>, TransferError> {
        let mut m = DMatrix::<f64>::identity(self.dim, self.dim);
        for &g in p.word() {
            if g >= self.generators() {
                return Err(MonoidError::IndexOutOfRange { index: g, vertices: self.generators() }.into());
            }
            m *= &self.operators[g];
        }
        Ok(m)
    }

    /// Product of the operators of a clique.
    pub fn clique_operator(&self, clique: GenMask) -> DMatrix<f64> {
        iter_mask(clique).fold(DMatrix::<f64>::identity(self.dim, self.dim), |acc, g| acc * &self.operators[g])
    }

    /// `N(s_K)^{-β}` for a clique.
    pub fn clique_factor(&self, clique: GenMask, beta: f64) -> f64 {
        iter_mask(clique).map(|g| self.weights.generator_factor(g, beta)).product()
    }

    /// `F_p τ`, applied right to left along the word.
    pub fn apply_fp(&self, p: &MonoidElement, tau: &TraceVec) -> Result<TraceVec, TransferError> {
        self.check_trace(tau)?;
        let mut v = tau.vector().clone();
        for &g in p.word().iter().rev() {
            if g >= self.generators() {
                return Err(MonoidError::IndexOutOfRange { index: g, vertices: self.generators() }.into());
            }
            v = &self.operators[g] * v;
        }
        Ok(TraceVec(v))
    }

    pub fn check_trace(&self, tau: &TraceVec) -> Result<(), TransferError> {
        if tau.dim() != self.dim {
            return Err(TransferError::DimensionMismatch { expected: self.dim, got: tau.dim() });
        }
        Ok(())
    }
}

fn generator_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("e{i}")).collect()
}

/// A finite `k`-graph through its commuting vertex matrices
/// `A_i(v, w) = |v Λ^{e_i} w|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KGraphModel {
    pub vertices: usize,
    pub matrices: Vec<Vec<Vec<u64>>>,
}

impl KGraphModel {
    pub fn matrix(&self, i: usize) -> DMatrix<f64> {
        let d = self.vertices;
        DMatrix::from_fn(d, d, |r, c| self.matrices[i][r][c] as f64)
    }

    fn validate(&self) -> Result<(), TransferError> {
        for (i, m) in self.matrices.iter().enumerate() {
            if m.len() != self.vertices || m.iter().any(|row| row.len() != self.vertices) {
                return Err(TransferError::BadParameter(format!(
                    "matrix {} must be {}x{}",
                    i + 1,
                    self.vertices,
                    self.vertices
                )));
            }
        }
        Ok(())
    }
}

/// `F_i = A_i` on the complete graph with generators `e1..ek`; the rank hint
/// of `e_i` is the number of edges of degree `e_i`.
pub fn from_kgraph(model: &KGraphModel, weights: WeightMap) -> Result<TransferSystem, TransferError> {
    model.validate()?;
    let k = model.matrices.len();
    let names = generator_names(k);
    let graph = SimpleGraph::complete_named(&names)?;
    let operators: Vec<DMatrix<f64>> = (0..k).map(|i| model.matrix(i)).collect();
    let ranks = model.matrices.iter().map(|m| m.iter().flatten().sum()).collect();
    TransferSystem::new(graph, model.vertices, operators, weights, Some(ranks))
}

/// Commuting self-maps `h_1..h_n` of a finite set, each given as the image list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalMapModel {
    pub states: usize,
    pub maps: Vec<Vec<usize>>,
}

/// Dual Ruelle operators of the maps: with `(L f)(z) = Σ_{h(w)=z} f(w)`, the
/// dual acts on point masses by `(L^* τ)(w) = τ(h(w))`, so `F[w][z] = [h(w) = z]`.
pub fn from_local_maps(model: &LocalMapModel, weights: WeightMap) -> Result<TransferSystem, TransferError> {
    let d = model.states;
    for (i, h) in model.maps.iter().enumerate() {
        if h.len() != d {
            return Err(TransferError::BadParameter(format!("map {} must list {} images", i + 1, d)));
        }
        if let Some(&bad) = h.iter().find(|&&z| z >= d) {
            return Err(TransferError::BadParameter(format!("map {} sends a state to {bad}", i + 1)));
        }
        let hit: BTreeSet<usize> = h.iter().copied().collect();
        if let Some(missing) = (0..d).find(|z| !hit.contains(z)) {
            return Err(TransferError::NotSurjective { map: i + 1, missing });
        }
    }
    for i in 0..model.maps.len() {
        for j in i + 1..model.maps.len() {
            let (hi, hj) = (&model.maps[i], &model.maps[j]);
            if let Some(state) = (0..d).find(|&z| hi[hj[z]] != hj[hi[z]]) {
                return Err(TransferError::MapsDoNotCommute { i: i + 1, j: j + 1, state });
            }
        }
    }
    let names = generator_names(model.maps.len());
    let graph = SimpleGraph::complete_named(&names)?;
    let operators =
        model.maps.iter().map(|h| DMatrix::from_fn(d, d, |w, z| if h[w] == z { 1.0 } else { 0.0 })).collect();
    TransferSystem::new(graph, d, operators, weights, None)
}

/// Trivial fibers `X_p = ℂ`: `d = 1`, `F_s = [1]`, one generator per fiber.
pub fn trivial_system(graph: SimpleGraph, weights: WeightMap) -> Result<TransferSystem, TransferError> {
    let n = graph.len();
    let operators = vec![DMatrix::from_element(1, 1, 1.0); n];
    TransferSystem::new(graph, 1, operators, weights, Some(vec![1; n]))
}

/// Two-copy Bernoulli-shift system on `Z^n_+` restricted to the invariant span
/// of the two Bernoulli measures: `F_i = 2I` off `I`, `F_i = S = [[0,2],[2,0]]`
/// on `I`; `N(e_i) = 2` off `I` and `α` on `I`. Also returns
/// `μ = (1 − α⁻¹S)^{1−|I|}(0, 1)`.
pub fn example_optimal(
    n: usize,
    subset: &BTreeSet<usize>,
    alpha: f64,
) -> Result<(TransferSystem, TraceVec), TransferError> {
    if n < 2 {
        return Err(TransferError::BadParameter(format!("n must be at least 2, got {n}")));
    }
    if subset.is_empty() || subset.iter().any(|&i| i == 0 || i > n) {
        return Err(TransferError::BadParameter(format!("I must be a nonempty subset of 1..={n}")));
    }
    if !(alpha > 2.0) {
        return Err(TransferError::BadParameter(format!("alpha must exceed 2, got {alpha}")));
    }
    let names = generator_names(n);
    let graph = SimpleGraph::complete_named(&names)?;
    let swap = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
    let doubling = DMatrix::<f64>::identity(2, 2) * 2.0;
    let operators = (1..=n).map(|i| if subset.contains(&i) { swap.clone() } else { doubling.clone() }).collect();
    let weights = WeightMap::new((1..=n).map(|i| if subset.contains(&i) { alpha } else { 2.0 }).collect())?;
    let system = TransferSystem::new(graph, 2, operators, weights, None)?;
    let inverse = (DMatrix::<f64>::identity(2, 2) - &swap / alpha)
        .try_inverse()
        .expect("I - S/alpha is invertible for alpha > 2");
    let mut mu = DVector::from_vec(vec![0.0, 1.0]);
    for _ in 1..subset.len() {
        mu = &inverse * mu;
    }
    Ok((system, TraceVec(mu)))
}
