//! The Boolean algebra generated by the cones `pP`.
//!
//! Every set in the algebra is a finite disjoint union of cells
//! `pΩ_J = {x ≥ p : ps ≰ x for all s ∈ J}` with `J` a set of generators
//! (`J = ∅` is the full cone). Cells intersect to a single cell or nothing,
//! which keeps intersections and complements inside this representation.

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::kms::{check_subinvariance, Tolerances};
use crate::monoid::{ArtinMonoid, ExtendedElement, Generator, MonoidElement, MonoidError};
use crate::transfer::{TraceVec, TransferError, TransferSystem};

/// Default word-length bound for membership audits.
pub const AUDIT_LENGTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SetError {
    #[error(transparent)]
    Monoid(#[from] MonoidError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error("set is not contained in the parent: element {0} is a witness")]
    NotContained(String),
    #[error("cells overlap at element {0}")]
    NotDisjoint(String),
    #[error("trace violates subinvariance at beta = {beta} (worst value {worst})")]
    NotSubinvariant { beta: f64, worst: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Cell {
    pub base: MonoidElement,
    pub carve: BTreeSet<Generator>,
}

impl Cell {
    pub fn cone(base: MonoidElement) -> Self {
        Cell { base, carve: BTreeSet::new() }
    }

    pub fn new(base: MonoidElement, carve: BTreeSet<Generator>) -> Self {
        Cell { base, carve }
    }

    pub fn contains(&self, monoid: &ArtinMonoid, p: &MonoidElement) -> Result<bool, MonoidError> {
        let Some(rest) = monoid.left_quotient(&self.base, p)? else {
            return Ok(false);
        };
        for &s in &self.carve {
            if monoid.leq(&monoid.generator(s), &rest)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// A finite disjoint union of cells, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CellSet {
    cells: Vec<Cell>,
}

impl CellSet {
    pub fn empty() -> Self {
        CellSet::default()
    }

    /// The whole monoid `P = eP`.
    pub fn whole() -> Self {
        cone(&MonoidElement::identity())
    }

    /// Builds a set from cells the caller asserts are pairwise disjoint.
    pub fn from_disjoint(mut cells: Vec<Cell>) -> Self {
        cells.sort();
        cells.dedup();
        CellSet { cells }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn describe(&self, monoid: &ArtinMonoid) -> String {
        if self.cells.is_empty() {
            return "∅".to_string();
        }
        let graph = monoid.graph();
        let parts: Vec<String> = self
            .cells
            .iter()
            .map(|c| {
                let base = monoid.format(&c.base);
                if c.carve.is_empty() {
                    format!("{base}P")
                } else {
                    let names: Vec<&str> = c.carve.iter().map(|&g| graph.name(g)).collect();
                    format!("{base}Ω{{{}}}", names.join(","))
                }
            })
            .collect();
        parts.join(" ⊔ ")
    }
}

pub fn cone(p: &MonoidElement) -> CellSet {
    CellSet { cells: vec![Cell::cone(p.clone())] }
}

/// Intersection of two cells, which is a cell or empty.
pub fn intersect_cells(monoid: &ArtinMonoid, a: &Cell, b: &Cell) -> Result<Option<Cell>, MonoidError> {
    let ExtendedElement::Finite(top) = monoid.join(&a.base, &b.base)? else {
        return Ok(None);
    };
    let mut carve = BTreeSet::new();
    for cell in [a, b] {
        let rest = monoid.left_quotient(&cell.base, &top)?.expect("base divides the join");
        for &s in &cell.carve {
            match monoid.join_generator(&rest, s)? {
                // s already divides rest, so the excluded cone swallows the cell
                ExtendedElement::Finite(x) if x == rest => return Ok(None),
                ExtendedElement::Finite(_) => {
                    carve.insert(s);
                }
                ExtendedElement::Infinity => {}
            }
        }
    }
    Ok(Some(Cell { base: top, carve }))
}

pub fn intersect(monoid: &ArtinMonoid, a: &CellSet, b: &CellSet) -> Result<CellSet, MonoidError> {
    let mut cells = Vec::new();
    for x in &a.cells {
        for y in &b.cells {
            if let Some(c) = intersect_cells(monoid, x, y)? {
                cells.push(c);
            }
        }
    }
    Ok(CellSet::from_disjoint(cells))
}

/// `P ∖ qΩ_K` as disjoint cells: `P ∖ qP` split along a word of `q`, plus the
/// cones `qsP` for `s ∈ K` made disjoint in order.
pub fn complement_of_cell(monoid: &ArtinMonoid, cell: &Cell) -> Result<CellSet, MonoidError> {
    let mut cells = Vec::new();
    let word = cell.base.word();
    for i in 0..word.len() {
        let prefix = monoid.normalize(&word[..i])?;
        cells.push(Cell::new(prefix, [word[i]].into()));
    }
    let carve: Vec<Generator> = cell.carve.iter().copied().collect();
    for (i, &s) in carve.iter().enumerate() {
        let top = Cell::cone(monoid.multiply(&cell.base, &monoid.generator(s))?);
        let earlier = Cell::new(cell.base.clone(), carve[..i].iter().copied().collect());
        if let Some(c) = intersect_cells(monoid, &top, &earlier)? {
            cells.push(c);
        }
    }
    Ok(CellSet::from_disjoint(cells))
}

/// `parent ∖ a`, requiring `a ⊆ parent` (audited on short elements and on the
/// bases of `a`).
pub fn complement_in(monoid: &ArtinMonoid, parent: &CellSet, a: &CellSet) -> Result<CellSet, SetError> {
    let mut sample = monoid.enumerate(AUDIT_LENGTH.min(sample_length(monoid)));
    sample.extend(a.cells.iter().map(|c| c.base.clone()));
    for p in &sample {
        if contains(monoid, a, p)? && !contains(monoid, parent, p)? {
            return Err(SetError::NotContained(monoid.format(p)));
        }
    }
    let mut result = parent.clone();
    for cell in &a.cells {
        result = intersect(monoid, &result, &complement_of_cell(monoid, cell)?)?;
    }
    Ok(result)
}

/// Keeps audits cheap on graphs with many generators.
fn sample_length(monoid: &ArtinMonoid) -> usize {
    match monoid.generators() {
        0..=2 => 8,
        3 => 6,
        4 => 5,
        5..=6 => 4,
        _ => 3,
    }
}

pub fn contains(monoid: &ArtinMonoid, a: &CellSet, p: &MonoidElement) -> Result<bool, MonoidError> {
    for cell in &a.cells {
        if cell.contains(monoid, p)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Checks that no element of length `≤ up_to_length` lies in two cells.
pub fn audit_disjoint(monoid: &ArtinMonoid, a: &CellSet, up_to_length: usize) -> Result<(), SetError> {
    for p in monoid.enumerate(up_to_length) {
        let mut hits = 0;
        for cell in &a.cells {
            if cell.contains(monoid, &p)? {
                hits += 1;
            }
        }
        if hits > 1 {
            return Err(SetError::NotDisjoint(monoid.format(&p)));
        }
    }
    Ok(())
}

/// `μ(Ω_J) = τ + Σ_{∅≠K⊆J clique} (−1)^{|K|} N(s_K)^{−β} F_{s_K} τ`.
pub fn carve_measure(sys: &TransferSystem, tau: &TraceVec, beta: f64, carve: &BTreeSet<Generator>) -> DVector<f64> {
    let mask = carve.iter().fold(0u64, |m, &g| m | 1 << g);
    let mut total = tau.vector().clone();
    for clique in sys.monoid().clique_masks(mask) {
        let sign = if clique.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        total += sys.clique_operator(clique) * tau.vector() * (sign * sys.clique_factor(clique, beta));
    }
    total
}

/// The finitely additive measure `μ(pΩ_J) = N(p)^{−β} F_p μ(Ω_J)` summed over
/// the cells of `a`.
pub fn measure(sys: &TransferSystem, a: &CellSet, tau: &TraceVec, beta: f64) -> Result<DVector<f64>, TransferError> {
    sys.check_trace(tau)?;
    let mut total = DVector::<f64>::zeros(sys.dim());
    for cell in &a.cells {
        let inner = carve_measure(sys, tau, beta, &cell.carve);
        let scale = sys.weights().boltzmann(&cell.base, beta);
        total += sys.operator_for(&cell.base)? * inner * scale;
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct AtomWeights {
    /// `(p, w_p)` for every `p` with `|p| ≤ up_to_length`, shortlex order.
    pub weights: Vec<(MonoidElement, f64)>,
    pub level_sums: Vec<f64>,
    pub total: f64,
    pub mass: f64,
    /// Geometric tail estimate `λ_L r / (1 − r)` from the last level ratio, when `r < 1`.
    pub tail_bound: Option<f64>,
    pub last_ratio: Option<f64>,
}

/// Ratios this close to 1 are treated as non-convergent.
pub const RATIO_TOL: f64 = 1e-10;

/// Atomic weights `w_p = N(p)^{−β} (F_p τ_S)(1)` where `τ_S = μ(Ω_S)` for the
/// full generating set `S`.
pub fn atom_weights(
    sys: &TransferSystem,
    tau: &TraceVec,
    beta: f64,
    up_to_length: usize,
    tol: &Tolerances,
) -> Result<AtomWeights, SetError> {
    let report = check_subinvariance(sys, tau, beta, tol).map_err(|e| match e {
        crate::kms::KmsError::Transfer(t) => SetError::Transfer(t),
        other => SetError::Transfer(TransferError::BadParameter(other.to_string())),
    })?;
    if !report.pass {
        return Err(SetError::NotSubinvariant { beta, worst: report.worst_value });
    }
    let all: BTreeSet<Generator> = (0..sys.generators()).collect();
    let generating = TraceVec::from_vector(carve_measure(sys, tau, beta, &all));
    let mut weights = Vec::new();
    let mut level_sums = vec![0.0; up_to_length + 1];
    for p in sys.monoid().enumerate(up_to_length) {
        let w = sys.weights().boltzmann(&p, beta) * sys.apply_fp(&p, &generating)?.mass();
        let w = w.max(0.0);
        level_sums[p.len()] += w;
        weights.push((p, w));
    }
    let total = level_sums.iter().sum();
    let last_ratio = (up_to_length >= 1 && level_sums[up_to_length - 1] > 0.0)
        .then(|| level_sums[up_to_length] / level_sums[up_to_length - 1]);
    let tail_bound = match last_ratio {
        Some(r) if r < 1.0 - RATIO_TOL => Some(level_sums[up_to_length] * r / (1.0 - r)),
        Some(_) => None,
        None => Some(0.0),
    };
    Ok(AtomWeights { weights, level_sums, total, mass: tau.mass(), tail_bound, last_ratio })
}
