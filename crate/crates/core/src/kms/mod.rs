//! Classification of KMS states through their restrictions to the
//! coefficient algebra.
//!
//! A positive trace `τ` extends to a KMS_β state exactly when it passes the
//! clique subinvariance inequalities ([`check_subinvariance`]). Such traces
//! split into a Gibbs part generated by `τ₀ = T_β τ` and a part of infinite
//! type ([`wold`]). Above the critical inverse temperature ([`critical_beta`])
//! the Gibbs series `S_β` inverts `T_β`.

mod conditions;
mod critical;
mod gibbs;
mod mobius;
mod subinvariance;

use serde::Serialize;
use thiserror::Error;

use crate::monoid::MonoidError;
use crate::transfer::TransferError;

pub use conditions::{
    check_gauge_sufficient, check_no_condition, monotonicity_probe, DecayVerdict, GaugeBound, GaugeReport,
    MonotonicityReport, MonotonicityRow, NoConditionReport,
};
pub use critical::{
    block_transfer_matrix, critical_beta, growth_radius, infinite_type_at_critical, CriticalMethod, CriticalReport,
    CriticalWitness, GeneratorRadius, WitnessMethod,
};
pub use gibbs::{
    gibbs_series, product_decompose, s_beta_solve, t_beta, wold, GibbsSolution, ProductComponent, ProductDecomposition,
    SeriesSum, TraceType, WoldResult,
};
pub use mobius::{mobius_invert, JoinTable, MobiusResult};
pub use subinvariance::{
    check_subinvariance, check_subinvariance_general, GeneralSubinvarianceReport, SubinvarianceReport, SubsetValue,
};

/// Numerical tolerances shared by the analyses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Slack below zero for inequality checks, relative to `τ(1)`.
    pub positivity: f64,
    /// Absolute residual allowed in equalities and reconstructions, relative to `max(τ(1), 1)`.
    pub residual: f64,
    /// Series stop when the estimated remaining mass falls below this fraction of the running sum.
    pub series: f64,
    /// Maximum number of series terms (automaton states times levels).
    pub budget: usize,
    /// Largest generating set accepted by the clique checker.
    pub max_generators: usize,
    /// `T_β` counts as singular above this condition number.
    pub condition_limit: f64,
    /// Width of the final bisection bracket for `β_c`.
    pub critical_beta: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            positivity: 1e-9,
            residual: 1e-8,
            series: 1e-14,
            budget: 1_000_000,
            max_generators: 20,
            condition_limit: 1e12,
            critical_beta: 1e-12,
        }
    }
}

impl Tolerances {
    pub(crate) fn positivity_abs(&self, mass: f64) -> f64 {
        self.positivity * mass.max(0.0)
    }

    pub(crate) fn residual_abs(&self, mass: f64) -> f64 {
        self.residual * mass.max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KmsError {
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Monoid(#[from] MonoidError),
    #[error("trace has negative entry {0}")]
    NegativeTrace(f64),
    #[error("{generators} generators exceed the configured cap of {cap}")]
    TooManyGenerators { generators: usize, cap: usize },
    #[error("general subinvariance check would evaluate more than {budget} subsets")]
    Explosion { budget: usize },
    #[error("trace violates subinvariance at beta = {beta}; worst subset {subset} has minimum entry {value}")]
    NotSubinvariant { beta: f64, subset: String, value: f64 },
    #[error("T_beta is singular at beta = {beta} (condition number {condition})")]
    Singular { beta: f64, condition: f64 },
    #[error("solution of T_beta x = tau0 has negative entry {value}; beta is at or below the critical value")]
    NegativeSolution { value: f64 },
    #[error("Gibbs series disagrees with the linear solve by {gap} (tail bound {tail})")]
    SeriesMismatch { gap: f64, tail: f64 },
    #[error("series did not converge within the budget of {budget} terms (last level ratio {ratio})")]
    BudgetExceeded { budget: usize, ratio: f64 },
    #[error("operation requires a complete graph")]
    NotComplete,
    #[error("weight N({generator}) = {value} violates the requirement {requirement}")]
    WeightPrecondition { generator: String, value: f64, requirement: &'static str },
    #[error("critical inverse temperature is -infinity")]
    NoCriticalValue,
    #[error("bisection for the critical inverse temperature did not bracket a root")]
    BisectionFailed,
    #[error("inconsistent join table: {0}")]
    InconsistentJoinTable(String),
    #[error("{0}")]
    Unsupported(String),
}
