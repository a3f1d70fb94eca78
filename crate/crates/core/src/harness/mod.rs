//! Seeded Monte-Carlo replication engine.
//!
//! Every cell (design, proposal, budget) runs `M` independent replications:
//! draw a plan with the replication's derived seed, reveal labels from the
//! oracle-complete pool, estimate, and record the squared error. Replications
//! run on a rayon pool but are collected in index order, so reports do not
//! depend on the worker count.

pub mod config;
pub mod report;
pub mod seed;

use rayon::prelude::*;

use crate::designs::{estimate, DesignKind, DesignSpec, Sampler};
use crate::diagnostics::{stratum_diagnostics, theorem_report};
use crate::error::{Error, Result};
use crate::pool::{true_defect_rate, Pool};
use crate::proposal::Proposal;
use crate::scalar::compensated_sum;
use crate::strata::{allocate_proportional, Stratification};

pub use config::{ProposalConfig, ProposalConfigs, SimConfig, StrataConfig, StrataMethod};
pub use report::{CellReport, SimReport};
pub use seed::{cell_tag, replication_seed, splitmix64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeEfficiency {
    pub re: f64,
    pub se: f64,
    /// Target MSE was zero while the reference MSE was not; `re` is +inf.
    pub infinite: bool,
}

fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Sample standard deviation over `sqrt(len)`.
fn standard_error(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss = compensated_sum(xs.iter().map(|x| (x - m) * (x - m)));
    (ss / (xs.len() - 1) as f64).sqrt() / (xs.len() as f64).sqrt()
}

/// `MSE_ref / MSE_target` with a delete-one jackknife SE over the paired
/// squared-error sequences. Two zero MSEs compare as equal (RE 1, SE 0).
pub fn relative_efficiency_from_errors(reference: &[f64], target: &[f64]) -> Result<RelativeEfficiency> {
    let m = reference.len();
    if m != target.len() {
        return Err(Error::Mismatch(format!(
            "paired sequences differ in length ({m} vs {})",
            target.len()
        )));
    }
    if m < 2 {
        return Err(Error::InvalidArgument("relative efficiency needs at least 2 replications".into()));
    }
    let sum_ref = compensated_sum(reference.iter().copied());
    let sum_tgt = compensated_sum(target.iter().copied());
    if sum_tgt == 0.0 {
        return Ok(if sum_ref == 0.0 {
            RelativeEfficiency { re: 1.0, se: 0.0, infinite: false }
        } else {
            RelativeEfficiency { re: f64::INFINITY, se: f64::NAN, infinite: true }
        });
    }
    let re = sum_ref / sum_tgt;

    let loo: Vec<f64> = reference
        .iter()
        .zip(target)
        .map(|(a, b)| (sum_ref - a) / (sum_tgt - b))
        .collect();
    let se = if loo.iter().all(|t| t.is_finite()) {
        let centre = mean(&loo);
        let ss = compensated_sum(loo.iter().map(|t| (t - centre) * (t - centre)));
        ((m - 1) as f64 / m as f64 * ss).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(RelativeEfficiency { re, se, infinite: false })
}

/// Relative efficiency of `target` against `reference`; both cells must
/// share budget and replication count.
pub fn relative_efficiency(reference: &CellReport, target: &CellReport) -> Result<RelativeEfficiency> {
    if reference.n != target.n || reference.replications != target.replications {
        return Err(Error::Mismatch(format!(
            "cells differ in budget or replications ({}/{} vs {}/{})",
            reference.n, reference.replications, target.n, target.replications
        )));
    }
    relative_efficiency_from_errors(&reference.squared_errors, &target.squared_errors)
}

/// Runs all replications of one cell and returns the estimates in
/// replication order.
pub fn replicate(
    spec: &DesignSpec<'_, f64>,
    pool: &Pool,
    master_seed: u64,
    tag: u64,
    replications: usize,
) -> Result<Vec<f64>> {
    let cell_err = |replication, source| Error::Cell {
        design: spec.kind,
        budget: spec.budget,
        replication,
        source: Box::new(source),
    };
    let sampler = Sampler::new(spec, pool).map_err(|e| cell_err(None, e))?;
    (0..replications)
        .into_par_iter()
        .map(|m| {
            let plan = sampler.draw(replication_seed(master_seed, tag, spec.budget, m));
            estimate(&plan, pool, pool)
                .map(|e| e.value)
                .map_err(|e| cell_err(Some(m), e))
        })
        .collect()
}

struct Analytic<'a> {
    pool: &'a Pool,
    strata: Stratification,
    uniform: Proposal<f64>,
}

impl Analytic<'_> {
    fn variance(&self, kind: DesignKind, n: usize, proposal: Option<&Proposal<f64>>) -> Result<f64> {
        let prop = proposal.unwrap_or(&self.uniform);
        let diag = stratum_diagnostics(self.pool, &self.strata, prop)?;
        let nf = n as f64;
        Ok(match kind {
            DesignKind::Random => diag.var_p_z / nf,
            DesignKind::Importance => diag.var_q_r / nf,
            DesignKind::Stratified | DesignKind::StratifiedImportance => {
                let alloc = allocate_proportional(&self.strata, n)?;
                let report = theorem_report(&diag, &alloc, n)?;
                if kind == DesignKind::Stratified {
                    report.var_srs
                } else {
                    report.var_sis
                }
            }
        })
    }
}

fn summarize(
    kind: DesignKind,
    n: usize,
    tag: u64,
    estimates: Vec<f64>,
    epsilon: f64,
    analytic_var: f64,
) -> CellReport {
    let squared_errors: Vec<f64> = estimates.iter().map(|e| (e - epsilon) * (e - epsilon)).collect();
    CellReport {
        design: kind,
        strata: "none".into(),
        proposal: "none".into(),
        alpha: None,
        n,
        replications: estimates.len(),
        seed_tag: tag,
        mse: mean(&squared_errors),
        mse_se: standard_error(&squared_errors),
        mean_estimate: mean(&estimates),
        mean_estimate_se: standard_error(&estimates),
        analytic_var,
        re_vs_rs: None,
        re_se: None,
        re_infinite: false,
        estimates,
        squared_errors,
    }
}

/// Runs the whole grid. `workers = None` uses rayon's default thread count.
pub fn run_simulation(pool: &Pool, config: &SimConfig, workers: Option<usize>) -> Result<SimReport> {
    if !pool.is_oracle_complete() {
        return Err(Error::NotOracleComplete("simulation"));
    }
    config.validate()?;
    let epsilon: f64 = true_defect_rate(pool)?;
    let strata = config.strata.as_ref().map(|s| s.build(pool)).transpose()?;
    let strata_label = config.strata.as_ref().map(StrataConfig::describe);
    let proposals = config
        .proposals()
        .iter()
        .map(|p| p.build::<f64>(pool))
        .collect::<Result<Vec<_>>>()?;
    let analytic = Analytic {
        pool,
        strata: strata.clone().unwrap_or_else(|| Stratification::trivial(pool)),
        uniform: Proposal::uniform(pool.len())?,
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let threads = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;

    let m = config.replications;
    let mut cells = Vec::new();
    for &n in &config.budgets {
        let rs_spec = DesignSpec::<f64>::random(n);
        let rs_tag = cell_tag(DesignKind::Random.tag(), 0);
        let rs_estimates = threads.install(|| replicate(&rs_spec, pool, config.seed, rs_tag, m))?;
        let rs_var = analytic.variance(DesignKind::Random, n, None)?;
        let reference = summarize(DesignKind::Random, n, rs_tag, rs_estimates, epsilon, rs_var);

        for &kind in &config.designs {
            let variants: Vec<Option<usize>> = if kind.uses_proposal() {
                (0..proposals.len()).map(Some).collect()
            } else {
                vec![None]
            };
            for variant in variants {
                let tag = cell_tag(kind.tag(), variant.unwrap_or(0));
                let prop = variant.map(|i| &proposals[i]);
                let mut cell = if kind == DesignKind::Random {
                    reference.clone()
                } else {
                    let spec = DesignSpec::new(kind, n, strata.as_ref(), prop);
                    let estimates = threads.install(|| replicate(&spec, pool, config.seed, tag, m))?;
                    let var = analytic.variance(kind, n, prop).map_err(|e| Error::Cell {
                        design: kind,
                        budget: n,
                        replication: None,
                        source: Box::new(e),
                    })?;
                    summarize(kind, n, tag, estimates, epsilon, var)
                };
                if kind.is_stratified() {
                    cell.strata = strata_label.clone().unwrap_or_default();
                }
                if let Some(i) = variant {
                    let pc = &config.proposals()[i];
                    cell.proposal = pc.family.name().to_string();
                    cell.alpha = Some(pc.alpha);
                }
                let re = relative_efficiency(&reference, &cell)?;
                cell.re_infinite = re.infinite;
                if !re.infinite {
                    cell.re_vs_rs = Some(re.re);
                    cell.re_se = Some(re.se);
                }
                cells.push(cell);
            }
        }
    }

    Ok(SimReport {
        seed: config.seed,
        replications: m,
        pool_size: pool.len(),
        epsilon,
        strata_labels: strata.map(|s| s.labels().to_vec()).unwrap_or_default(),
        cells,
    })
}
