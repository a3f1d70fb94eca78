//! Importance proposals `q(x) ∝ max(s̃(x), floor)^α` over a finite pool.
//!
//! Masses are kept unnormalized (`g(x)`) next to their total so that
//! importance weights can be formed as ratios of unnormalized quantities;
//! with `α = 0` every weight is then exactly one in floating point.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::Pool;
use crate::scalar::{compensated_sum, Scalar};
use crate::strata::Stratification;

pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformFamily {
    /// `s`
    RawScore,
    /// `1 − s`
    OneMinusScore,
    /// `0.5 − |s − 0.5|`
    Margin,
    /// `−[s ln s + (1 − s) ln(1 − s)]`
    BinaryEntropy,
}

impl TransformFamily {
    pub fn name(self) -> &'static str {
        match self {
            TransformFamily::RawScore => "raw_score",
            TransformFamily::OneMinusScore => "one_minus_score",
            TransformFamily::Margin => "margin",
            TransformFamily::BinaryEntropy => "binary_entropy",
        }
    }

    pub fn apply(self, s: f64) -> f64 {
        match self {
            TransformFamily::RawScore => s,
            TransformFamily::OneMinusScore => 1.0 - s,
            TransformFamily::Margin => 0.5 - (s - 0.5).abs(),
            TransformFamily::BinaryEntropy => {
                let xlnx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
                -(xlnx(s) + xlnx(1.0 - s))
            }
        }
    }
}

impl FromStr for TransformFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw_score" => Ok(TransformFamily::RawScore),
            "one_minus_score" => Ok(TransformFamily::OneMinusScore),
            "margin" => Ok(TransformFamily::Margin),
            "binary_entropy" => Ok(TransformFamily::BinaryEntropy),
            other => Err(Error::InvalidArgument(format!(
                "unknown score transform `{other}` (expected raw_score, one_minus_score, margin or binary_entropy)"
            ))),
        }
    }
}

/// Score transform with a positive floor, which keeps every instance
/// reachable under the proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreTransform {
    pub family: TransformFamily,
    pub floor: f64,
}

impl ScoreTransform {
    pub fn new(family: TransformFamily, floor: f64) -> Result<Self> {
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::InvalidArgument(format!("floor {floor} must be positive")));
        }
        Ok(ScoreTransform { family, floor })
    }

    pub fn apply(&self, score: f64) -> f64 {
        self.family.apply(score).max(self.floor)
    }
}

impl Default for ScoreTransform {
    fn default() -> Self {
        ScoreTransform {
            family: TransformFamily::RawScore,
            floor: DEFAULT_FLOOR,
        }
    }
}

/// Sampling mass over pool positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal<T> {
    raw: Vec<T>,
    total: T,
    alpha: f64,
}

impl<T: Scalar> Proposal<T> {
    /// Proposal proportional to arbitrary positive masses.
    pub fn from_masses(raw: Vec<T>, alpha: f64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyPool);
        }
        if let Some(i) = raw.iter().position(|&m| m <= T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "proposal mass at position {i} is not positive"
            )));
        }
        let total = compensated_sum(raw.iter().copied());
        Ok(Proposal { raw, total, alpha })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_masses(vec![T::one(); n], 0.0)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Unnormalized mass `g(x)`.
    pub fn raw_mass(&self, pos: usize) -> T {
        self.raw[pos]
    }

    /// Normalized `q(x)`.
    pub fn mass(&self, pos: usize) -> T {
        self.raw[pos] / self.total
    }

    pub fn masses(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.mass(i)).collect()
    }

    pub fn check_pool(&self, pool: &Pool) -> Result<()> {
        if self.len() != pool.len() {
            return Err(Error::Mismatch(format!(
                "proposal covers {} instances but pool has {}",
                self.len(),
                pool.len()
            )));
        }
        Ok(())
    }

    fn check_strata(&self, strat: &Stratification) -> Result<()> {
        if self.len() != strat.pool_size() {
            return Err(Error::Mismatch(format!(
                "proposal covers {} instances but stratification covers {}",
                self.len(),
                strat.pool_size()
            )));
        }
        Ok(())
    }

    fn raw_stratum_total(&self, strat: &Stratification, j: usize) -> T {
        compensated_sum(strat.members(j).iter().map(|&p| self.raw[p]))
    }

    /// `Q_j = Σ_{x ∈ D_j} q(x)`, which is also the stratum marginal `r_j`.
    pub fn stratum_masses(&self, strat: &Stratification) -> Result<Vec<T>> {
        self.check_strata(strat)?;
        Ok((0..strat.num_strata())
            .map(|j| self.raw_stratum_total(strat, j) / self.total)
            .collect())
    }

    /// Conditional proposal `q_j(x) = q(x)/Q_j` over the members of stratum `j`,
    /// as `(position, mass)` pairs.
    pub fn restrict(&self, strat: &Stratification, j: usize) -> Result<Vec<(usize, T)>> {
        self.check_strata(strat)?;
        if j >= strat.num_strata() {
            return Err(Error::InvalidArgument(format!("no stratum {}", j + 1)));
        }
        let total = self.raw_stratum_total(strat, j);
        Ok(strat
            .members(j)
            .iter()
            .map(|&p| (p, self.raw[p] / total))
            .collect())
    }

    /// Within-stratum weight `p_j(x)/q_j(x) = Q_j / (N_j q(x))` for every position.
    pub fn stratum_weights(&self, strat: &Stratification) -> Result<Vec<T>> {
        self.check_strata(strat)?;
        let mut weights = vec![T::zero(); self.len()];
        for j in 0..strat.num_strata() {
            let total = self.raw_stratum_total(strat, j);
            let size = T::from_count(strat.size(j));
            for &p in strat.members(j) {
                weights[p] = total / (size * self.raw[p]);
            }
        }
        Ok(weights)
    }

    /// Global weight `p(x)/q(x) = 1 / (N q(x))`.
    pub fn global_weight(&self, pos: usize) -> T {
        self.total / (T::from_count(self.len()) * self.raw[pos])
    }

    /// Audit dump: `id,q`.
    pub fn write_csv<W: Write>(&self, pool: &Pool, writer: W) -> Result<()> {
        self.check_pool(pool)?;
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["id", "q"])?;
        for pos in 0..self.len() {
            wtr.write_record([
                pool.instance(pos).id.to_string(),
                self.mass(pos).to_real().to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<proposal writer>", e))?;
        Ok(())
    }
}

/// `q(x_i) ∝ max(s̃(x_i), floor)^α`; `α = 0` is the uniform proposal.
pub fn build_proposal<T: Scalar>(
    pool: &Pool,
    transform: &ScoreTransform,
    alpha: f64,
) -> Result<Proposal<T>> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} must be a finite value >= 0")));
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let raw = pool
        .scores()
        .map(|s| {
            if alpha == 0.0 {
                T::one()
            } else {
                T::from_real(transform.apply(s)).pow_real(alpha)
            }
        })
        .collect();
    Proposal::from_masses(raw, alpha)
}

/// Importance weight for the instance with `id` under SIS.
pub fn importance_weight<T: Scalar>(
    prop: &Proposal<T>,
    strat: &Stratification,
    pool: &Pool,
    id: u64,
) -> Result<T> {
    let pos = pool.position(id).ok_or(Error::UncoveredId(id))?;
    prop.check_pool(pool)?;
    let weights = prop.stratum_weights(strat)?;
    Ok(weights[pos])
}
