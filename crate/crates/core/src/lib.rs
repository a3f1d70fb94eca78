//! Label-efficient defect-rate estimation on finite prediction pools.
//!
//! Four sampling designs are provided: random (RS), stratified (SRS),
//! importance (IS) and stratified importance (SIS). All estimators are
//! unbiased for the pool's misclassification rate. Alongside them sit exact
//! variance diagnostics that predict when SIS beats IS or SRS, and a seeded
//! Monte-Carlo harness that measures MSE and relative efficiency.
//!
//! Pure arithmetic is generic over [`Scalar`] (`f64`, `f32` or [`Exact`]
//! rationals); the aliases below fix the common choices.

pub mod alias;
pub mod cli;
pub mod designs;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod pool;
pub mod proposal;
pub mod scalar;
pub mod strata;

pub use designs::{draw_plan, estimate, exact_estimator_mean, DesignKind, DesignSpec, Estimate, SamplePlan, Sampler};
pub use diagnostics::{stratum_diagnostics, theorem_report, StratumDiagnostics, TheoremReport, Verdict};
pub use error::{Error, Result};
pub use harness::{relative_efficiency, run_simulation, SimConfig, SimReport};
pub use pool::{load_pool, true_defect_rate, Instance, Pool};
pub use proposal::{build_proposal, Proposal, ScoreTransform, TransformFamily};
pub use scalar::{Exact, Scalar};
pub use strata::{allocate_proportional, merge_small_strata, AllocationPlan, Stratification};

pub type Proposal64 = Proposal<f64>;
pub type Proposal32 = Proposal<f32>;
pub type ExactProposal = Proposal<Exact>;

pub type DesignSpec64<'a> = DesignSpec<'a, f64>;
pub type ExactDesignSpec<'a> = DesignSpec<'a, Exact>;

pub type StratumDiagnostics64 = StratumDiagnostics<f64>;
pub type ExactStratumDiagnostics = StratumDiagnostics<Exact>;

pub type TheoremReport64 = TheoremReport<f64>;
pub type ExactTheoremReport = TheoremReport<Exact>;
