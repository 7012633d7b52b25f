use std::collections::HashMap;

use nalgebra::DVector;
use serde::Serialize;

use super::{KmsError, Tolerances};
use crate::monoid::{iter_mask, ExtendedElement, GenMask, MonoidElement};
use crate::transfer::{TraceVec, TransferSystem};

/// The inclusion–exclusion vector for one subset `J`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetValue {
    pub subset: Vec<String>,
    pub value: Vec<f64>,
    pub min_entry: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubinvarianceReport {
    pub beta: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_subset: Vec<String>,
    pub worst_value: f64,
    pub failing: Vec<Vec<String>>,
    /// Every nonempty `J ⊆ S`, by size then lexicographically.
    pub subsets: Vec<SubsetValue>,
}

impl SubinvarianceReport {
    /// The row for `J = S`, which is `T_β τ`.
    pub fn full_subset(&self) -> Option<&SubsetValue> {
        self.subsets.last()
    }
}

pub(crate) fn check_trace_nonnegative(sys: &TransferSystem, tau: &TraceVec) -> Result<(), KmsError> {
    sys.check_trace(tau)?;
    let min = tau.min_entry();
    if min < -crate::transfer::POSITIVITY_EPS {
        return Err(KmsError::NegativeTrace(min));
    }
    Ok(())
}

fn subset_masks_by_size(n: usize) -> Vec<GenMask> {
    let mut masks: Vec<GenMask> = (1..(1u64 << n)).collect();
    masks.sort_by_key(|&m| (m.count_ones(), iter_mask(m).collect::<Vec<_>>()));
    masks
}

/// The clique form of the subinvariance condition: for every nonempty
/// `J ⊆ S`, `τ + Σ_{∅≠K⊆J clique} (−1)^{|K|} N(s_K)^{−β} F_{s_K} τ ≥ 0`.
pub fn check_subinvariance(
    sys: &TransferSystem,
    tau: &TraceVec,
    beta: f64,
    tol: &Tolerances,
) -> Result<SubinvarianceReport, KmsError> {
    check_trace_nonnegative(sys, tau)?;
    let n = sys.generators();
    if n > tol.max_generators {
        return Err(KmsError::TooManyGenerators { generators: n, cap: tol.max_generators });
    }
    let d = sys.dim();
    let graph = sys.graph();
    // Zeta transform over subsets: slot J accumulates the clique terms K ⊆ J.
    let mut table = vec![0.0; (1usize << n) * d];
    table[..d].copy_from_slice(tau.entries());
    for clique in sys.monoid().clique_masks(graph.all_mask()) {
        let sign = if clique.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        let term = sys.clique_operator(clique) * tau.vector() * (sign * sys.clique_factor(clique, beta));
        table[clique as usize * d..(clique as usize + 1) * d].copy_from_slice(term.as_slice());
    }
    for bit in 0..n {
        for mask in 0..(1usize << n) {
            if mask & (1 << bit) != 0 {
                let (lo, hi) = table.split_at_mut(mask * d);
                let src = &lo[(mask ^ (1 << bit)) * d..(mask ^ (1 << bit)) * d + d];
                for (t, s) in hi[..d].iter_mut().zip(src) {
                    *t += s;
                }
            }
        }
    }
    let threshold = -tol.positivity_abs(tau.mass());
    let mut subsets = Vec::with_capacity((1 << n) - 1);
    let mut failing = Vec::new();
    let (mut worst_subset, mut worst_value) = (Vec::new(), f64::INFINITY);
    for mask in subset_masks_by_size(n) {
        let value = table[mask as usize * d..(mask as usize + 1) * d].to_vec();
        let min_entry = value.iter().copied().fold(f64::INFINITY, f64::min);
        let names: Vec<String> = iter_mask(mask).map(|g| graph.name(g).to_string()).collect();
        let pass = min_entry >= threshold;
        if !pass {
            failing.push(names.clone());
        }
        if min_entry < worst_value {
            worst_value = min_entry;
            worst_subset = names.clone();
        }
        subsets.push(SubsetValue { subset: names, value, min_entry, pass });
    }
    if n == 0 {
        worst_value = 0.0;
    }
    Ok(SubinvarianceReport {
        beta,
        tolerance: -threshold,
        pass: failing.is_empty(),
        worst_subset,
        worst_value,
        failing,
        subsets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralSubinvarianceReport {
    pub beta: f64,
    pub length_cap: usize,
    pub subset_cap: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub evaluated: usize,
    pub worst_subset: Vec<String>,
    pub worst_value: f64,
    /// At most [`MAX_FAILING_ROWS`] failing subsets.
    pub failing: Vec<SubsetValue>,
}

pub const MAX_FAILING_ROWS: usize = 100;

struct GeneralSearch<'a> {
    sys: &'a TransferSystem,
    tau: &'a TraceVec,
    beta: f64,
    elements: Vec<MonoidElement>,
    subset_cap: usize,
    budget: usize,
    threshold: f64,
    terms: HashMap<MonoidElement, DVector<f64>>,
    joins: HashMap<(MonoidElement, usize), Option<MonoidElement>>,
    evaluated: usize,
    worst: (Vec<usize>, f64),
    failing: Vec<SubsetValue>,
    any_failed: bool,
}

impl GeneralSearch<'_> {
    fn term(&mut self, q: &MonoidElement) -> Result<DVector<f64>, KmsError> {
        if let Some(v) = self.terms.get(q) {
            return Ok(v.clone());
        }
        let v = self.sys.apply_fp(q, self.tau)?.into_vector() * self.sys.weights().boltzmann(q, self.beta);
        self.terms.insert(q.clone(), v.clone());
        Ok(v)
    }

    fn join(&mut self, q: &MonoidElement, index: usize) -> Result<Option<MonoidElement>, KmsError> {
        let key = (q.clone(), index);
        if let Some(j) = self.joins.get(&key) {
            return Ok(j.clone());
        }
        let j = match self.sys.monoid().join(q, &self.elements[index])? {
            ExtendedElement::Finite(r) => Some(r),
            ExtendedElement::Infinity => None,
        };
        self.joins.insert(key, j.clone());
        Ok(j)
    }

    /// `chosen` indexes the current `J`; `partial` holds `(q_K, sign)` for
    /// every `K ⊆ J` with `q_K` finite, and `value` their signed sum.
    fn descend(
        &mut self,
        start: usize,
        chosen: &mut Vec<usize>,
        partial: &[(MonoidElement, f64)],
        value: &DVector<f64>,
    ) -> Result<(), KmsError> {
        for next in start..self.elements.len() {
            self.evaluated += 1;
            if self.evaluated > self.budget {
                return Err(KmsError::Explosion { budget: self.budget });
            }
            let mut extended = partial.to_vec();
            let mut new_value = value.clone();
            for (q, sign) in partial {
                if let Some(r) = self.join(q, next)? {
                    new_value += self.term(&r)? * -sign;
                    extended.push((r, -sign));
                }
            }
            chosen.push(next);
            self.record(chosen, &new_value);
            if chosen.len() < self.subset_cap {
                self.descend(next + 1, chosen, &extended, &new_value)?;
            }
            chosen.pop();
        }
        Ok(())
    }

    fn record(&mut self, chosen: &[usize], value: &DVector<f64>) {
        let min_entry = value.iter().copied().fold(f64::INFINITY, f64::min);
        if min_entry < self.worst.1 {
            self.worst = (chosen.to_vec(), min_entry);
        }
        if min_entry < self.threshold {
            self.any_failed = true;
            if self.failing.len() < MAX_FAILING_ROWS {
                let subset = self.names(chosen);
                self.failing.push(SubsetValue { subset, value: value.as_slice().to_vec(), min_entry, pass: false });
            }
        }
    }

    fn names(&self, chosen: &[usize]) -> Vec<String> {
        chosen.iter().map(|&i| self.sys.monoid().format(&self.elements[i])).collect()
    }
}

/// The unreduced condition over finite `J ⊆ P ∖ {e}`: every `J` of at most
/// `subset_cap` elements of length `≤ length_cap` must give
/// `Σ_{K⊆J} (−1)^{|K|} N(q_K)^{−β} F_{q_K} τ ≥ 0`, with `q_K = ∨K` and terms
/// for `q_K = ∞` dropped.
pub fn check_subinvariance_general(
    sys: &TransferSystem,
    tau: &TraceVec,
    beta: f64,
    length_cap: usize,
    subset_cap: usize,
    tol: &Tolerances,
) -> Result<GeneralSubinvarianceReport, KmsError> {
    check_trace_nonnegative(sys, tau)?;
    let elements: Vec<MonoidElement> =
        sys.monoid().enumerate(length_cap).into_iter().filter(|p| !p.is_identity()).collect();
    let threshold = -tol.positivity_abs(tau.mass());
    let mut search = GeneralSearch {
        sys,
        tau,
        beta,
        elements,
        subset_cap,
        budget: tol.budget.saturating_mul(10),
        threshold,
        terms: HashMap::new(),
        joins: HashMap::new(),
        evaluated: 0,
        worst: (Vec::new(), f64::INFINITY),
        failing: Vec::new(),
        any_failed: false,
    };
    let root = vec![(MonoidElement::identity(), 1.0)];
    if subset_cap > 0 {
        search.descend(0, &mut Vec::new(), &root, tau.vector())?;
    }
    let worst_subset = search.names(&search.worst.0);
    let worst_value = if search.evaluated == 0 { 0.0 } else { search.worst.1 };
    Ok(GeneralSubinvarianceReport {
        beta,
        length_cap,
        subset_cap,
        tolerance: -threshold,
        pass: !search.any_failed,
        evaluated: search.evaluated,
        worst_subset,
        worst_value,
        failing: search.failing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monoid::{SimpleGraph, WeightMap};
    use crate::transfer::{example_optimal, trivial_system};
    use nalgebra::DMatrix;
    use std::collections::BTreeSet;

    fn scalar(f: f64, n: f64) -> TransferSystem {
        TransferSystem::new(
            SimpleGraph::edgeless(1),
            1,
            vec![DMatrix::from_element(1, 1, f)],
            WeightMap::uniform(1, n).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn boundary_case_passes_with_equality() {
        let tol = Tolerances::default();
        let tau = TraceVec::new(vec![1.0]).unwrap();
        let report = check_subinvariance(&scalar(2.0, 2.0), &tau, 1.0, &tol).unwrap();
        assert!(report.pass);
        assert_eq!(report.subsets.len(), 1);
        assert_eq!(report.subsets[0].value, vec![0.0]);
    }

    #[test]
    fn optimal_example_fails_exactly_at_i() {
        let tol = Tolerances::default();
        let (sys, mu) = example_optimal(3, &BTreeSet::from([1, 2]), 4.0).unwrap();
        let report = check_subinvariance(&sys, &mu, 1.0, &tol).unwrap();
        assert!(!report.pass);
        assert_eq!(report.failing, vec![vec!["e1".to_string(), "e2".to_string()]]);
        let row = report.subsets.iter().find(|r| r.subset == ["e1", "e2"]).unwrap();
        assert!((row.value[0] + 0.5).abs() < 1e-12 && (row.value[1] - 1.0).abs() < 1e-12);
        assert_eq!(report.subsets.len(), 7);
    }

    #[test]
    fn zero_trace_passes() {
        let tol = Tolerances::default();
        let (sys, _) = example_optimal(3, &BTreeSet::from([1, 2]), 4.0).unwrap();
        assert!(check_subinvariance(&sys, &TraceVec::zeros(2), 1.0, &tol).unwrap().pass);
    }

    #[test]
    fn generator_cap_is_enforced() {
        let tol = Tolerances { max_generators: 2, ..Tolerances::default() };
        let sys = trivial_system(SimpleGraph::edgeless(3), WeightMap::uniform(3, 2.0).unwrap()).unwrap();
        let tau = TraceVec::new(vec![1.0]).unwrap();
        assert!(matches!(check_subinvariance(&sys, &tau, 1.0, &tol), Err(KmsError::TooManyGenerators { .. })));
    }

    #[test]
    fn general_singletons_are_cone_inequalities() {
        let tol = Tolerances::default();
        let sys = scalar(2.0, 2.0);
        let tau = TraceVec::new(vec![1.0]).unwrap();
        // singleton J = {a^k}: 1 - 2^{-βk} 2^k
        let report = check_subinvariance_general(&sys, &tau, 0.9, 3, 1, &tol).unwrap();
        assert!(!report.pass);
        assert_eq!(report.evaluated, 3);
        assert_eq!(report.worst_subset, vec!["aaa".to_string()]);
        let expected = 1.0 - 2f64.powf(3.0 * 0.1);
        assert!((report.worst_value - expected).abs() < 1e-12);
        assert!(check_subinvariance_general(&sys, &tau, 1.2, 3, 3, &tol).unwrap().pass);
    }

    #[test]
    fn general_empty_enumeration_is_vacuous() {
        let tol = Tolerances::default();
        let tau = TraceVec::new(vec![1.0]).unwrap();
        let report = check_subinvariance_general(&scalar(5.0, 2.0), &tau, 0.1, 0, 3, &tol).unwrap();
        assert!(report.pass);
        assert_eq!(report.evaluated, 0);
    }
}
