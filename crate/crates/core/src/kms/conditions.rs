use std::collections::BTreeMap;

use serde::Serialize;

use super::subinvariance::{check_subinvariance, check_trace_nonnegative};
use super::{KmsError, Tolerances};
use crate::transfer::{TraceVec, TransferSystem};

/// Ratio `d_L / d_1` below which the decay profile counts as decaying.
pub const DECAY_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoConditionReport {
    pub beta: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// `‖N(s)^{−β} F_s τ − τ‖∞` per generator.
    pub residuals: BTreeMap<String, f64>,
}

/// Whether `N(s)^{−β} F_s τ = τ` for every generator, the trace-level form of
/// factoring through the Cuntz–Pimsner quotient when all left actions are
/// injective and by compacts.
pub fn check_no_condition(
    sys: &TransferSystem,
    tau: &TraceVec,
    beta: f64,
    tol: &Tolerances,
) -> Result<NoConditionReport, KmsError> {
    check_trace_nonnegative(sys, tau)?;
    let tolerance = tol.residual_abs(tau.mass());
    let mut residuals = BTreeMap::new();
    for g in 0..sys.generators() {
        let image = sys.operator(g) * tau.vector() * sys.weights().generator_factor(g, beta);
        residuals.insert(sys.graph().name(g).to_string(), (image - tau.vector()).amax());
    }
    let pass = residuals.values().all(|&r| r <= tolerance);
    Ok(NoConditionReport { beta, tolerance, pass, residuals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayVerdict {
    Decay,
    NoDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeBound {
    Guaranteed,
    NotGuaranteed,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeReport {
    pub beta: f64,
    pub delta: f64,
    /// `d_ℓ = max_{|p|=ℓ} N(p)^{−β} (F_p τ)(1)` for `ℓ = 0..=L`.
    pub profile: Vec<f64>,
    /// Heuristic: `d_L < 1e−6 · d_1`. Evidence only, not a proof.
    pub decay: DecayVerdict,
    /// `N(s)^β ≥ (1 + δ) m(s)` for every generator, given rank hints.
    pub bound: GaugeBound,
    pub bound_margins: BTreeMap<String, f64>,
}

/// Evidence and a sufficient condition for every KMS_β state with
/// restriction `τ` being gauge invariant.
pub fn check_gauge_sufficient(
    sys: &TransferSystem,
    tau: &TraceVec,
    beta: f64,
    levels: usize,
    delta: f64,
    tol: &Tolerances,
) -> Result<GaugeReport, KmsError> {
    check_trace_nonnegative(sys, tau)?;
    let mut profile = vec![0.0f64; levels + 1];
    let elements = sys.monoid().enumerate(levels);
    if elements.len() > tol.budget {
        return Err(KmsError::BudgetExceeded { budget: tol.budget, ratio: f64::NAN });
    }
    for p in &elements {
        let value = sys.weights().boltzmann(p, beta) * sys.apply_fp(p, tau)?.mass();
        profile[p.len()] = profile[p.len()].max(value);
    }
    let decay = if levels == 0 {
        DecayVerdict::NoDecay
    } else if profile[1] == 0.0 || profile[levels] < DECAY_RATIO * profile[1] {
        DecayVerdict::Decay
    } else {
        DecayVerdict::NoDecay
    };
    let mut bound_margins = BTreeMap::new();
    let bound = match sys.rank_hint() {
        None => GaugeBound::Unavailable,
        Some(ranks) => {
            for (g, &m) in ranks.iter().enumerate() {
                let margin = sys.weights().get(g).powf(beta) - (1.0 + delta) * m as f64;
                bound_margins.insert(sys.graph().name(g).to_string(), margin);
            }
            if bound_margins.values().all(|&m| m >= 0.0) {
                GaugeBound::Guaranteed
            } else {
                GaugeBound::NotGuaranteed
            }
        }
    };
    Ok(GaugeReport { beta, delta, profile, decay, bound, bound_margins })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityRow {
    pub beta: f64,
    pub pass: bool,
    pub worst_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub beta0: f64,
    pub rows: Vec<MonotonicityRow>,
    /// Values of `β ≥ β₀` at which subinvariance failed; nonempty means a defect.
    pub failures: Vec<f64>,
}

/// Confirms that subinvariance at `β₀` persists at every `β ≥ β₀` listed,
/// which holds whenever `N(s) ≥ 1` for all generators.
pub fn monotonicity_probe(
    sys: &TransferSystem,
    tau: &TraceVec,
    beta0: f64,
    betas: &[f64],
    tol: &Tolerances,
) -> Result<MonotonicityReport, KmsError> {
    for (g, &n) in sys.weights().values().iter().enumerate() {
        if n < 1.0 {
            return Err(KmsError::WeightPrecondition {
                generator: sys.graph().name(g).to_string(),
                value: n,
                requirement: "N(s) >= 1",
            });
        }
    }
    let base = check_subinvariance(sys, tau, beta0, tol)?;
    if !base.pass {
        return Err(KmsError::NotSubinvariant {
            beta: beta0,
            subset: format!("{{{}}}", base.worst_subset.join(",")),
            value: base.worst_value,
        });
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &beta in betas.iter().filter(|&&b| b >= beta0) {
        let report = check_subinvariance(sys, tau, beta, tol)?;
        if !report.pass {
            failures.push(beta);
        }
        rows.push(MonotonicityRow { beta, pass: report.pass, worst_value: report.worst_value });
    }
    Ok(MonotonicityReport { beta0, rows, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monoid::{SimpleGraph, WeightMap};
    use crate::transfer::{from_kgraph, trivial_system, KGraphModel};
    use nalgebra::DMatrix;

    fn loops(count: u64) -> TransferSystem {
        let model = KGraphModel { vertices: 1, matrices: vec![vec![vec![count]]] };
        from_kgraph(&model, WeightMap::uniform(1, 3.0).unwrap()).unwrap()
    }

    #[test]
    fn no_condition_examples() {
        let tol = Tolerances::default();
        let sys = loops(3);
        let one = TraceVec::new(vec![1.0]).unwrap();
        assert!(check_no_condition(&sys, &one, 1.0, &tol).unwrap().pass);
        assert!(!check_no_condition(&sys, &one, 2.0, &tol).unwrap().pass);
        assert!(check_no_condition(&sys, &TraceVec::zeros(1), 2.0, &tol).unwrap().pass);
    }

    #[test]
    fn gauge_examples() {
        let tol = Tolerances::default();
        let one = TraceVec::new(vec![1.0]).unwrap();
        let trivial = trivial_system(SimpleGraph::edgeless(1), WeightMap::uniform(1, 2.0).unwrap()).unwrap();
        let r = check_gauge_sufficient(&trivial, &one, 1.0, 4, 0.5, &tol).unwrap();
        assert_eq!(r.bound, GaugeBound::Guaranteed);
        let r = check_gauge_sufficient(&loops(3), &one, 1.0, 6, 0.1, &tol).unwrap();
        assert_eq!(r.bound, GaugeBound::NotGuaranteed);
        // N^{-β} F τ = τ: the profile is constant
        assert_eq!(r.decay, DecayVerdict::NoDecay);
        assert!(r.profile.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let r = check_gauge_sufficient(&trivial, &one, 30.0, 3, 0.5, &tol).unwrap();
        assert_eq!(r.decay, DecayVerdict::Decay);
        let plain = TransferSystem::new(
            SimpleGraph::edgeless(1),
            1,
            vec![DMatrix::from_element(1, 1, 1.0)],
            WeightMap::uniform(1, 2.0).unwrap(),
            None,
        )
        .unwrap();
        assert_eq!(check_gauge_sufficient(&plain, &one, 1.0, 2, 0.5, &tol).unwrap().bound, GaugeBound::Unavailable);
    }

    #[test]
    fn monotonicity_examples() {
        let tol = Tolerances::default();
        let one = TraceVec::new(vec![1.0]).unwrap();
        let sys = trivial_system(SimpleGraph::edgeless(2), WeightMap::uniform(2, 2.0).unwrap()).unwrap();
        let r = monotonicity_probe(&sys, &one, 1.0, &[2.0], &tol).unwrap();
        assert!(r.failures.is_empty() && r.rows.len() == 1);
        let flat = trivial_system(SimpleGraph::complete(2), WeightMap::uniform(2, 1.0).unwrap()).unwrap();
        let r = monotonicity_probe(&flat, &one, 0.0, &[0.5, 3.0], &tol).unwrap();
        assert!(r.failures.is_empty());
        assert!(matches!(monotonicity_probe(&sys, &one, 0.5, &[1.0], &tol), Err(KmsError::NotSubinvariant { .. })));
    }
}
