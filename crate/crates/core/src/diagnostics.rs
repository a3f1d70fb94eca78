//! Closed-form variance diagnostics over an oracle-complete pool.
//!
//! Every quantity is an exact finite sum over the pool, so it can be run in
//! [`Exact`](crate::scalar::Exact) arithmetic and compared against brute
//! enumeration of the draw space.
//!
//! Two within-stratum variances are kept for the importance-weighted signal:
//! `t_sis` uses the conditional weight `p_j/q_j` (what SIS actually
//! averages) and `t_is` uses the global weight `p/q` (what IS averages).
//! Under the global weight the stratum mean of `R` is `w_j π_j / r_j`, not
//! `π_j`, so the IS-vs-SIS gap decomposition only closes exactly when the
//! proposal puts mass `r_j = w_j` on each stratum. The report carries the
//! residual so callers can see when it does not.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pool::Pool;
use crate::proposal::Proposal;
use crate::scalar::{compensated_sum, Scalar};
use crate::strata::{AllocationPlan, Stratification};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumRow<T> {
    pub size: usize,
    /// `w_j = N_j / N`
    pub w: T,
    /// `r_j = Q_j`, proposal mass on the stratum
    pub r: T,
    /// Stratum defect rate.
    pub pi: T,
    /// `V_j = π_j (1 − π_j)`
    pub v: T,
    /// `Var_{q_j}(z p_j/q_j)`
    pub t_sis: T,
    /// `Var_{q_j}(z p/q)`
    pub t_is: T,
    /// `E_{q_j}[z p/q] = w_j π_j / r_j`
    pub is_cond_mean: T,
    /// `Δ_j = t_sis − V_j`
    pub delta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratumDiagnostics<T> {
    pub rows: Vec<StratumRow<T>>,
    pub labels: Vec<String>,
    pub epsilon: T,
    /// `Var_p(z) = ε(1 − ε)`
    pub var_p_z: T,
    /// `Var_q(z p/q)` over the whole pool, summed directly.
    pub var_q_r: T,
}

fn centered_variance<T: Scalar>(pairs: &[(T, T)]) -> (T, T) {
    let mean = compensated_sum(pairs.iter().map(|&(q, r)| q * r));
    let var = compensated_sum(pairs.iter().map(|&(q, r)| {
        let d = r - mean;
        q * d * d
    }));
    (mean, var)
}

pub fn stratum_diagnostics<T: Scalar>(
    pool: &Pool,
    strat: &Stratification,
    prop: &Proposal<T>,
) -> Result<StratumDiagnostics<T>> {
    let z = pool.defects("diagnostics")?;
    strat.check_pool(pool)?;
    prop.check_pool(pool)?;
    let zf = |p: usize| if z[p] { T::one() } else { T::zero() };

    let n_pool = T::from_count(pool.len());
    let defects = z.iter().filter(|&&d| d).count();
    let epsilon = T::from_count(defects) / n_pool;

    let stratum_mass = prop.stratum_masses(strat)?;
    let sis_weights = prop.stratum_weights(strat)?;

    let mut rows = Vec::with_capacity(strat.num_strata());
    for (j, &r) in stratum_mass.iter().enumerate() {
        let restricted = prop.restrict(strat, j)?;
        if restricted.is_empty() {
            return Err(Error::InvalidArgument(format!("stratum {} is empty", j + 1)));
        }
        let size = strat.size(j);
        let count = strat.members(j).iter().filter(|&&p| z[p]).count();
        let pi = T::from_count(count) / T::from_count(size);
        let v = pi * (T::one() - pi);

        let sis: Vec<(T, T)> = restricted.iter().map(|&(p, q)| (q, zf(p) * sis_weights[p])).collect();
        let is: Vec<(T, T)> = restricted
            .iter()
            .map(|&(p, q)| (q, zf(p) * prop.global_weight(p)))
            .collect();
        let (_, t_sis) = centered_variance(&sis);
        let (is_cond_mean, t_is) = centered_variance(&is);

        rows.push(StratumRow {
            size,
            w: strat.weight(j),
            r,
            pi,
            v,
            t_sis,
            t_is,
            is_cond_mean,
            delta: t_sis - v,
        });
    }

    let global: Vec<(T, T)> = (0..pool.len())
        .map(|p| (prop.mass(p), zf(p) * prop.global_weight(p)))
        .collect();
    let (_, var_q_r) = centered_variance(&global);

    Ok(StratumDiagnostics {
        rows,
        labels: strat.labels().to_vec(),
        epsilon,
        var_p_z: epsilon * (T::one() - epsilon),
        var_q_r,
    })
}

impl<T: Scalar> StratumDiagnostics<T> {
    /// Per-stratum rows: `j,w_j,r_j,pi_j,V_j,T_j_sis,T_j_is,Delta_j,label`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["j", "w_j", "r_j", "pi_j", "V_j", "T_j_sis", "T_j_is", "Delta_j", "label"])?;
        for (j, (row, label)) in self.rows.iter().zip(&self.labels).enumerate() {
            let mut rec = vec![(j + 1).to_string()];
            rec.extend(
                [row.w, row.r, row.pi, row.v, row.t_sis, row.t_is, row.delta]
                    .iter()
                    .map(|x| x.to_real().to_string()),
            );
            rec.push(label.clone());
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<diagnostics writer>", e))?;
        Ok(())
    }
}

/// Both efficiency criteria and the four exact design variances at an allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport<T> {
    pub n: usize,
    pub allocation: Vec<usize>,
    /// `Σ_j (r_j − w_j) t_is_j`
    pub mismatch_term: T,
    /// `Var_{S~r}(E_q[R | S])` with exact conditional means.
    pub inter_stratum_term: T,
    /// `Var_{S~r}(π_S)`, the same term with `π_j` as the conditional mean.
    pub inter_stratum_term_pi: T,
    /// `mismatch_term + inter_stratum_term`; SIS ≤ IS predicted when ≥ 0.
    pub thm1_criterion: T,
    /// `Σ_j w_j Δ_j`; SIS ≤ SRS predicted when < 0.
    pub thm2_criterion: T,
    pub var_rs: T,
    pub var_srs: T,
    pub var_is: T,
    pub var_sis: T,
    /// `n (var_is − var_sis) − thm1_criterion`; zero when the gap
    /// decomposition holds exactly.
    pub decomposition_residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Lower,
    Equal,
    Higher,
}

impl<T: Scalar> TheoremReport<T> {
    /// Predicted ordering of `Var_SIS` relative to `Var_SRS` from the sign of
    /// `Σ w_j Δ_j`, treating `|criterion| ≤ tol` as zero.
    pub fn sis_vs_srs(&self, tol: f64) -> Verdict {
        sign_verdict(self.thm2_criterion.to_real(), tol)
    }

    /// Predicted ordering of `Var_SIS` relative to `Var_IS` (a non-negative
    /// criterion predicts SIS no worse).
    pub fn sis_vs_is(&self, tol: f64) -> Verdict {
        match sign_verdict(self.thm1_criterion.to_real(), tol) {
            Verdict::Lower => Verdict::Higher,
            Verdict::Equal => Verdict::Equal,
            Verdict::Higher => Verdict::Lower,
        }
    }

    pub fn decomposition_holds(&self, tol: f64) -> bool {
        self.decomposition_residual.to_real().abs() <= tol
    }

    pub fn to_real(&self) -> TheoremReport<f64> {
        TheoremReport {
            n: self.n,
            allocation: self.allocation.clone(),
            mismatch_term: self.mismatch_term.to_real(),
            inter_stratum_term: self.inter_stratum_term.to_real(),
            inter_stratum_term_pi: self.inter_stratum_term_pi.to_real(),
            thm1_criterion: self.thm1_criterion.to_real(),
            thm2_criterion: self.thm2_criterion.to_real(),
            var_rs: self.var_rs.to_real(),
            var_srs: self.var_srs.to_real(),
            var_is: self.var_is.to_real(),
            var_sis: self.var_sis.to_real(),
            decomposition_residual: self.decomposition_residual.to_real(),
        }
    }

    /// Plain-text summary with one verdict line per criterion.
    pub fn summary(&self, tol: f64) -> String {
        let r = self.to_real();
        let mut out = String::new();
        let _ = writeln!(out, "n = {} (allocation {:?})", r.n, r.allocation);
        let _ = writeln!(out, "mismatch_term = {}", r.mismatch_term);
        let _ = writeln!(out, "inter_stratum_term = {}", r.inter_stratum_term);
        let _ = writeln!(out, "inter_stratum_term_pi = {}", r.inter_stratum_term_pi);
        let _ = writeln!(out, "thm1_criterion = {}", r.thm1_criterion);
        let _ = writeln!(out, "thm2_criterion = {}", r.thm2_criterion);
        let _ = writeln!(out, "var_rs = {}", r.var_rs);
        let _ = writeln!(out, "var_srs = {}", r.var_srs);
        let _ = writeln!(out, "var_is = {}", r.var_is);
        let _ = writeln!(out, "var_sis = {}", r.var_sis);
        let _ = writeln!(out, "decomposition_residual = {}", r.decomposition_residual);
        let line = match self.sis_vs_is(tol) {
            Verdict::Lower => "SIS <= IS predicted: yes",
            Verdict::Equal => "SIS <= IS predicted: yes (Var_IS = Var_SIS)",
            Verdict::Higher => "SIS <= IS predicted: no",
        };
        let _ = writeln!(out, "{line}");
        let line = match self.sis_vs_srs(tol) {
            Verdict::Lower => "SIS <= SRS predicted: yes",
            Verdict::Equal => "SIS <= SRS predicted: equal (Var_SIS = Var_SRS)",
            Verdict::Higher => "SIS <= SRS predicted: no",
        };
        let _ = writeln!(out, "{line}");
        let exact = |better: bool| if better { "yes" } else { "no" };
        let _ = writeln!(out, "SIS <= IS exact: {}", exact(r.var_sis <= r.var_is + tol));
        let _ = writeln!(out, "SIS <= SRS exact: {}", exact(r.var_sis <= r.var_srs + tol));
        if !self.decomposition_holds(tol) {
            let _ = writeln!(
                out,
                "note: IS/SIS gap decomposition residual is nonzero (proposal stratum mass differs from stratum weight)"
            );
        }
        out
    }
}

fn sign_verdict(x: f64, tol: f64) -> Verdict {
    if x.abs() <= tol {
        Verdict::Equal
    } else if x < 0.0 {
        Verdict::Lower
    } else {
        Verdict::Higher
    }
}

pub fn theorem_report<T: Scalar>(
    diag: &StratumDiagnostics<T>,
    alloc: &AllocationPlan,
    n: usize,
) -> Result<TheoremReport<T>> {
    if alloc.per_stratum.len() != diag.rows.len() {
        return Err(Error::Mismatch(format!(
            "allocation has {} strata, diagnostics have {}",
            alloc.per_stratum.len(),
            diag.rows.len()
        )));
    }
    if alloc.total != n || alloc.per_stratum.iter().sum::<usize>() != n {
        return Err(Error::Mismatch(format!("allocation does not sum to budget {n}")));
    }
    if alloc.per_stratum.contains(&0) {
        return Err(Error::InvalidArgument("allocation has an empty stratum".into()));
    }
    let nt = T::from_count(n);
    let rows = &diag.rows;

    let mismatch_term = compensated_sum(rows.iter().map(|r| (r.r - r.w) * r.t_is));
    let cond_mean = compensated_sum(rows.iter().map(|r| r.r * r.is_cond_mean));
    let inter_stratum_term = compensated_sum(rows.iter().map(|r| {
        let d = r.is_cond_mean - cond_mean;
        r.r * d * d
    }));
    let pi_mean = compensated_sum(rows.iter().map(|r| r.r * r.pi));
    let inter_stratum_term_pi = compensated_sum(rows.iter().map(|r| {
        let d = r.pi - pi_mean;
        r.r * d * d
    }));
    let thm1_criterion = mismatch_term + inter_stratum_term;
    let thm2_criterion = compensated_sum(rows.iter().map(|r| r.w * r.delta));

    let stratified = |f: fn(&StratumRow<T>) -> T| {
        compensated_sum(
            rows.iter()
                .zip(&alloc.per_stratum)
                .map(|(r, &nj)| r.w * r.w / T::from_count(nj) * f(r)),
        )
    };
    let var_srs = stratified(|r| r.v);
    let var_sis = stratified(|r| r.t_sis);
    let var_rs = diag.var_p_z / nt;
    let var_is = diag.var_q_r / nt;

    Ok(TheoremReport {
        n,
        allocation: alloc.per_stratum.clone(),
        mismatch_term,
        inter_stratum_term,
        inter_stratum_term_pi,
        thm1_criterion,
        thm2_criterion,
        var_rs,
        var_srs,
        var_is,
        var_sis,
        decomposition_residual: nt * (var_is - var_sis) - thm1_criterion,
    })
}

/// Zero-variance proposal `q*(x) ∝ z(x)`: uniform on defects. Reference only;
/// it starves non-defects and cannot be used for sampling.
pub fn optimal_proposal_reference<T: Scalar>(pool: &Pool) -> Result<Vec<T>> {
    let z = pool.defects("optimal proposal")?;
    let defects = z.iter().filter(|&&d| d).count();
    if defects == 0 {
        return Err(Error::NoDefects);
    }
    let mass = T::one() / T::from_count(defects);
    Ok(z.iter().map(|&d| if d { mass } else { T::zero() }).collect())
}

/// Within-stratum sum of squared deviations `Σ_j Σ_k (z − π_j)²`, the SRS
/// stratification objective. Needs labels, so it only ranks candidates.
pub fn srs_objective<T: Scalar>(pool: &Pool, strat: &Stratification) -> Result<T> {
    let z = pool.defects("SRS objective")?;
    strat.check_pool(pool)?;
    Ok(compensated_sum((0..strat.num_strata()).map(|j| {
        let size = strat.size(j);
        let count = strat.members(j).iter().filter(|&&p| z[p]).count();
        let pi = T::from_count(count) / T::from_count(size);
        T::from_count(size) * pi * (T::one() - pi)
    })))
}

/// Index and objective of the best candidate stratification for SRS.
pub fn best_srs_stratification<T: Scalar>(
    pool: &Pool,
    candidates: &[Stratification],
) -> Result<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let obj = srs_objective::<T>(pool, c)?;
        if best.is_none_or(|(_, b)| obj.partial_cmp(&b) == Some(Ordering::Less)) {
            best = Some((i, obj));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no candidate stratifications".into()))
}
