use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::subinvariance::{check_subinvariance, check_trace_nonnegative};
use super::{KmsError, Tolerances};
use crate::linalg::condition_number;
use crate::monoid::{iter_mask, GenMask, NormalFormAutomaton};
use crate::transfer::{TraceVec, TransferSystem};

/// `T_β = I + Σ_{K clique} (−1)^{|K|} N(s_K)^{−β} F_{s_K}`.
pub fn t_beta(sys: &TransferSystem, beta: f64) -> DMatrix<f64> {
    let d = sys.dim();
    let mut t = DMatrix::<f64>::identity(d, d);
    for clique in sys.monoid().clique_masks(sys.graph().all_mask()) {
        let sign = if clique.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        t += sys.clique_operator(clique) * (sign * sys.clique_factor(clique, beta));
    }
    t
}

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// A truncated monotone series together with its convergence evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSum {
    #[serde(serialize_with = "serialize_vector")]
    pub sum: DVector<f64>,
    pub levels: usize,
    pub terms: usize,
    pub last_increment: f64,
    pub ratio: Option<f64>,
    /// Geometric estimate of the mass not yet summed.
    pub tail_bound: f64,
}

pub(crate) fn serialize_vector<S: serde::Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

/// Tracks level masses and decides when a nonnegative series has converged.
struct Accumulator {
    history: Vec<f64>,
    series_tol: f64,
}

enum Step {
    Continue,
    Done { ratio: Option<f64>, tail: f64 },
}

impl Accumulator {
    fn new(first: f64, series_tol: f64) -> Self {
        Accumulator { history: vec![first], series_tol }
    }

    fn ratio(&self) -> Option<f64> {
        let h = &self.history;
        let k = h.len();
        if k < 2 || h[k - 2] == 0.0 {
            return None;
        }
        let mut r = h[k - 1] / h[k - 2];
        if k >= 3 && h[k - 3] > 0.0 {
            r = r.max((h[k - 1] / h[k - 3]).sqrt());
        }
        Some(r)
    }

    fn push(&mut self, increment: f64, total: f64) -> Step {
        self.history.push(increment);
        let ratio = self.ratio();
        if increment == 0.0 {
            return Step::Done { ratio, tail: 0.0 };
        }
        match ratio {
            Some(r) if r < 1.0 => {
                let tail = increment * r / (1.0 - r);
                let target = self.series_tol * total;
                if increment <= target && tail <= target {
                    Step::Done { ratio, tail }
                } else {
                    Step::Continue
                }
            }
            _ => Step::Continue,
        }
    }

    fn last_ratio(&self) -> f64 {
        self.ratio().unwrap_or(f64::NAN)
    }
}

/// `Σ_p N(p)^{−β} F_p τ₀`, summed level by level over the normal-form
/// automaton so that each element of `P` is counted once.
pub fn gibbs_series(sys: &TransferSystem, beta: f64, tau0: &TraceVec, tol: &Tolerances) -> Result<SeriesSum, KmsError> {
    sys.check_trace(tau0)?;
    let automaton = NormalFormAutomaton::new(sys.graph());
    let n = sys.generators();
    let scaled: Vec<DMatrix<f64>> = (0..n).map(|g| sys.operator(g) * sys.weights().generator_factor(g, beta)).collect();
    let mut level: BTreeMap<GenMask, DVector<f64>> = BTreeMap::from([(automaton.start(), tau0.vector().clone())]);
    let mut sum = tau0.vector().clone();
    let mut acc = Accumulator::new(l1(&sum), tol.series);
    let (mut levels, mut terms) = (0usize, 0usize);
    if l1(&sum) == 0.0 {
        return Ok(SeriesSum { sum, levels, terms, last_increment: 0.0, ratio: None, tail_bound: 0.0 });
    }
    loop {
        let mut next: BTreeMap<GenMask, DVector<f64>> = BTreeMap::new();
        for (&state, v) in &level {
            for (x, f) in scaled.iter().enumerate() {
                if let Some(to) = automaton.step(state, x) {
                    let w = f * v;
                    next.entry(to).and_modify(|acc| *acc += &w).or_insert(w);
                }
            }
        }
        terms += level.len() * n.max(1);
        levels += 1;
        next.retain(|_, v| v.iter().any(|&x| x != 0.0));
        let mut increment_vec = DVector::<f64>::zeros(sys.dim());
        for v in next.values() {
            increment_vec += v;
        }
        let increment = l1(&increment_vec);
        sum += &increment_vec;
        match acc.push(increment, l1(&sum)) {
            Step::Done { ratio, tail } => {
                return Ok(SeriesSum { sum, levels, terms, last_increment: increment, ratio, tail_bound: tail });
            }
            Step::Continue => {}
        }
        if terms > tol.budget {
            return Err(KmsError::BudgetExceeded { budget: tol.budget, ratio: acc.last_ratio() });
        }
        level = next;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsSolution {
    pub trace: TraceVec,
    pub condition: f64,
    pub series: SeriesSum,
    /// `max_v |x_v − series_v|`.
    pub gap: f64,
}

/// Solves `T_β x = τ₀` and confirms `x` against the Gibbs series.
pub fn s_beta_solve(
    sys: &TransferSystem,
    beta: f64,
    tau0: &TraceVec,
    tol: &Tolerances,
) -> Result<GibbsSolution, KmsError> {
    check_trace_nonnegative(sys, tau0)?;
    let t = t_beta(sys, beta);
    let condition = condition_number(&t);
    if !(condition <= tol.condition_limit) {
        return Err(KmsError::Singular { beta, condition });
    }
    let x = t.lu().solve(tau0.vector()).ok_or(KmsError::Singular { beta, condition })?;
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol.positivity_abs(l1(&x)) {
        return Err(KmsError::NegativeSolution { value: min });
    }
    let series = gibbs_series(sys, beta, tau0, tol)?;
    let gap = (&x - &series.sum).amax();
    if gap > series.tail_bound + tol.residual_abs(l1(&x)) {
        return Err(KmsError::SeriesMismatch { gap, tail: series.tail_bound });
    }
    Ok(GibbsSolution { trace: TraceVec::from_vector(x), condition, series, gap })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceType {
    Finite,
    Infinite,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WoldResiduals {
    /// `‖T_β τ_f − τ₀‖∞`.
    pub generating: f64,
    /// `‖T_β τ_∞‖∞`.
    pub infinite_part: f64,
    /// Most negative entry among `τ₀, τ_f, τ_∞` (zero if none).
    pub negativity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WoldResult {
    pub beta: f64,
    pub tau0: TraceVec,
    pub tau_f: TraceVec,
    pub tau_inf: TraceVec,
    #[serde(rename = "type")]
    pub trace_type: TraceType,
    pub tolerance: f64,
    pub series_levels: usize,
    pub series_tail: f64,
    pub residuals: WoldResiduals,
}

fn min_entry(v: &DVector<f64>) -> f64 {
    v.iter().copied().fold(0.0, f64::min)
}

/// Splits a subinvariant `τ` into its Gibbs part generated by `τ₀ = T_β τ`
/// and its part of infinite type.
pub fn wold(sys: &TransferSystem, tau: &TraceVec, beta: f64, tol: &Tolerances) -> Result<WoldResult, KmsError> {
    let report = check_subinvariance(sys, tau, beta, tol)?;
    if !report.pass {
        return Err(KmsError::NotSubinvariant {
            beta,
            subset: format!("{{{}}}", report.worst_subset.join(",")),
            value: report.worst_value,
        });
    }
    let t = t_beta(sys, beta);
    let tau0 = &t * tau.vector();
    let series = gibbs_series(sys, beta, &TraceVec::from_vector(tau0.clone()), tol)?;
    let tau_f = series.sum.clone();
    let tau_inf = tau.vector() - &tau_f;
    let threshold = tol.residual_abs(tau.mass());
    let trace_type = if l1(&tau0) <= threshold {
        TraceType::Infinite
    } else if l1(&tau_inf) <= threshold {
        TraceType::Finite
    } else {
        TraceType::Mixed
    };
    let residuals = WoldResiduals {
        generating: (&t * &tau_f - &tau0).amax(),
        infinite_part: (&t * &tau_inf).amax(),
        negativity: min_entry(&tau0).min(min_entry(&tau_f)).min(min_entry(&tau_inf)),
    };
    Ok(WoldResult {
        beta,
        tau0: TraceVec::from_vector(tau0),
        tau_f: TraceVec::from_vector(tau_f),
        tau_inf: TraceVec::from_vector(tau_inf),
        trace_type,
        tolerance: threshold,
        series_levels: series.levels,
        series_tail: series.tail_bound,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductComponent {
    /// The coordinates in which the component is of finite type.
    pub finite_in: Vec<String>,
    pub trace: TraceVec,
    pub generating: TraceVec,
    /// `‖N(e_i)^{−β} F_i τ_{F,0} − τ_{F,0}‖∞` for each `i ∉ F`.
    pub fixed_point_residuals: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductDecomposition {
    pub beta: f64,
    /// All `2^n` components, by size of `F` then lexicographically.
    pub components: Vec<ProductComponent>,
    pub reconstruction_residual: f64,
    pub max_fixed_point_residual: f64,
}

/// Finite part of `ρ` with respect to one coordinate:
/// `Σ_k A^k (1 − A) ρ` with `A = N(e_i)^{−β} F_i`.
fn coordinate_finite_part(
    a: &DMatrix<f64>,
    rho: &DVector<f64>,
    tol: &Tolerances,
    terms: &mut usize,
) -> Result<DVector<f64>, KmsError> {
    let mut v = rho - a * rho;
    let mut sum = v.clone();
    let mut acc = Accumulator::new(l1(&v), tol.series);
    if l1(&v) == 0.0 {
        return Ok(sum);
    }
    loop {
        v = a * v;
        sum += &v;
        *terms += 1;
        if let Step::Done { .. } = acc.push(l1(&v), l1(&sum)) {
            return Ok(sum);
        }
        if *terms > tol.budget {
            return Err(KmsError::BudgetExceeded { budget: tol.budget, ratio: acc.last_ratio() });
        }
    }
}

/// Iterated per-coordinate Wold decomposition on a complete graph: `τ_F` is
/// of finite type in the coordinates of `F` and of infinite type in the rest.
pub fn product_decompose(
    sys: &TransferSystem,
    tau: &TraceVec,
    beta: f64,
    tol: &Tolerances,
) -> Result<ProductDecomposition, KmsError> {
    if !sys.graph().is_complete() {
        return Err(KmsError::NotComplete);
    }
    let report = check_subinvariance(sys, tau, beta, tol)?;
    if !report.pass {
        return Err(KmsError::NotSubinvariant {
            beta,
            subset: format!("{{{}}}", report.worst_subset.join(",")),
            value: report.worst_value,
        });
    }
    let n = sys.generators();
    let steps: Vec<DMatrix<f64>> = (0..n).map(|g| sys.operator(g) * sys.weights().generator_factor(g, beta)).collect();
    let mut parts: BTreeMap<GenMask, DVector<f64>> = BTreeMap::from([(0, tau.vector().clone())]);
    let mut terms = 0;
    for (i, a) in steps.iter().enumerate() {
        let mut next = BTreeMap::new();
        for (mask, rho) in parts {
            let finite = coordinate_finite_part(a, &rho, tol, &mut terms)?;
            next.insert(mask, &rho - &finite);
            next.insert(mask | 1 << i, finite);
        }
        parts = next;
    }
    let graph = sys.graph();
    let d = sys.dim();
    let mut masks: Vec<GenMask> = parts.keys().copied().collect();
    masks.sort_by_key(|&m| (m.count_ones(), iter_mask(m).collect::<Vec<_>>()));
    let mut components = Vec::with_capacity(masks.len());
    let mut total = DVector::<f64>::zeros(d);
    let mut worst = 0.0f64;
    for mask in masks {
        let trace = parts[&mask].clone();
        total += &trace;
        let mut generating = trace.clone();
        for i in iter_mask(mask) {
            generating = &generating - &steps[i] * &generating;
        }
        let mut residuals = BTreeMap::new();
        for i in (0..n).filter(|&i| mask & 1 << i == 0) {
            let r = (&steps[i] * &generating - &generating).amax();
            worst = worst.max(r);
            residuals.insert(graph.name(i).to_string(), r);
        }
        components.push(ProductComponent {
            finite_in: iter_mask(mask).map(|g| graph.name(g).to_string()).collect(),
            trace: TraceVec::from_vector(trace),
            generating: TraceVec::from_vector(generating),
            fixed_point_residuals: residuals,
        });
    }
    Ok(ProductDecomposition {
        beta,
        components,
        reconstruction_residual: (total - tau.vector()).amax(),
        max_fixed_point_residual: worst,
    })
}
