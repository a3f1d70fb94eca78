//! Budgeted sampling designs (RS, SRS, IS, SIS), their plans and estimators.
//!
//! All designs draw with replacement. Categorical draws use [`AliasTable`];
//! uniform draws use `gen_range`. Given a seed, a plan is reproducible
//! bit for bit.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alias::AliasTable;
use crate::error::{Error, Result};
use crate::pool::{Labels, Pool};
use crate::proposal::Proposal;
use crate::scalar::{compensated_sum, Scalar};
use crate::strata::{allocate_proportional, AllocationPlan, Stratification};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DesignKind {
    #[serde(rename = "RS")]
    Random,
    #[serde(rename = "SRS")]
    Stratified,
    #[serde(rename = "IS")]
    Importance,
    #[serde(rename = "SIS")]
    StratifiedImportance,
}

impl DesignKind {
    pub const ALL: [DesignKind; 4] = [
        DesignKind::Random,
        DesignKind::Stratified,
        DesignKind::Importance,
        DesignKind::StratifiedImportance,
    ];

    pub fn code(self) -> &'static str {
        match self {
            DesignKind::Random => "RS",
            DesignKind::Stratified => "SRS",
            DesignKind::Importance => "IS",
            DesignKind::StratifiedImportance => "SIS",
        }
    }

    pub fn is_stratified(self) -> bool {
        matches!(self, DesignKind::Stratified | DesignKind::StratifiedImportance)
    }

    pub fn uses_proposal(self) -> bool {
        matches!(self, DesignKind::Importance | DesignKind::StratifiedImportance)
    }

    /// Stable numeric tag used in replication seed derivation.
    pub fn tag(self) -> u64 {
        match self {
            DesignKind::Random => 1,
            DesignKind::Stratified => 2,
            DesignKind::Importance => 3,
            DesignKind::StratifiedImportance => 4,
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RS" => Ok(DesignKind::Random),
            "SRS" => Ok(DesignKind::Stratified),
            "IS" => Ok(DesignKind::Importance),
            "SIS" => Ok(DesignKind::StratifiedImportance),
            _ => Err(Error::InvalidArgument(format!(
                "unknown design `{s}` (expected RS, SRS, IS or SIS)"
            ))),
        }
    }
}

/// A design bound to its stratification and/or proposal and a label budget.
#[derive(Debug, Clone, Copy)]
pub struct DesignSpec<'a, T> {
    pub kind: DesignKind,
    pub budget: usize,
    pub strata: Option<&'a Stratification>,
    pub proposal: Option<&'a Proposal<T>>,
}

impl<'a, T: Scalar> DesignSpec<'a, T> {
    pub fn random(budget: usize) -> Self {
        DesignSpec {
            kind: DesignKind::Random,
            budget,
            strata: None,
            proposal: None,
        }
    }

    pub fn stratified(strata: &'a Stratification, budget: usize) -> Self {
        DesignSpec {
            kind: DesignKind::Stratified,
            budget,
            strata: Some(strata),
            proposal: None,
        }
    }

    pub fn importance(proposal: &'a Proposal<T>, budget: usize) -> Self {
        DesignSpec {
            kind: DesignKind::Importance,
            budget,
            strata: None,
            proposal: Some(proposal),
        }
    }

    pub fn stratified_importance(
        strata: &'a Stratification,
        proposal: &'a Proposal<T>,
        budget: usize,
    ) -> Self {
        DesignSpec {
            kind: DesignKind::StratifiedImportance,
            budget,
            strata: Some(strata),
            proposal: Some(proposal),
        }
    }

    /// Assembles a spec for `kind`, taking only the parts the design uses.
    pub fn new(
        kind: DesignKind,
        budget: usize,
        strata: Option<&'a Stratification>,
        proposal: Option<&'a Proposal<T>>,
    ) -> Self {
        DesignSpec {
            kind,
            budget,
            strata: strata.filter(|_| kind.is_stratified()),
            proposal: proposal.filter(|_| kind.uses_proposal()),
        }
    }

    fn require_strata(&self) -> Result<&'a Stratification> {
        self.strata
            .ok_or_else(|| Error::InvalidArgument(format!("{} needs a stratification", self.kind)))
    }

    fn require_proposal(&self) -> Result<&'a Proposal<T>> {
        self.proposal
            .ok_or_else(|| Error::InvalidArgument(format!("{} needs a proposal", self.kind)))
    }

    /// Checks the spec against a pool and returns the allocation for
    /// stratified designs.
    pub fn validate(&self, pool: &Pool) -> Result<Option<AllocationPlan>> {
        if self.budget == 0 {
            return Err(Error::InvalidArgument("budget must be at least 1".into()));
        }
        if self.kind.uses_proposal() {
            self.require_proposal()?.check_pool(pool)?;
        }
        if self.kind.is_stratified() {
            let strata = self.require_strata()?;
            strata.check_pool(pool)?;
            return allocate_proportional(strata, self.budget).map(Some);
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub id: u64,
    /// 0-based stratum for stratified designs.
    pub stratum: Option<usize>,
    pub weight: f64,
}

/// Ordered draws of one design realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub design: DesignKind,
    pub seed: u64,
    pub draws: Vec<Draw>,
    /// `w_j` per stratum; empty for unstratified designs.
    pub stratum_weights: Vec<f64>,
}

impl SamplePlan {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.draws.iter().map(|d| d.id).collect()
    }

    /// Draw count per stratum.
    pub fn stratum_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.stratum_weights.len()];
        for d in &self.draws {
            if let Some(j) = d.stratum {
                counts[j] += 1;
            }
        }
        counts
    }

    /// CSV with columns `id,stratum,weight,draw_index,design,stratum_weight,seed`.
    /// Strata are written 1-based; unstratified designs leave both stratum
    /// columns empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["id", "stratum", "weight", "draw_index", "design", "stratum_weight", "seed"])?;
        for (k, d) in self.draws.iter().enumerate() {
            let (stratum, w) = match d.stratum {
                Some(j) => ((j + 1).to_string(), self.stratum_weights[j].to_string()),
                None => (String::new(), String::new()),
            };
            wtr.write_record([
                d.id.to_string(),
                stratum,
                d.weight.to_string(),
                k.to_string(),
                self.design.code().to_string(),
                w,
                self.seed.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<plan writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<SamplePlan> {
        #[derive(Deserialize)]
        struct Row {
            id: u64,
            stratum: Option<usize>,
            weight: f64,
            draw_index: usize,
            design: String,
            stratum_weight: Option<f64>,
            seed: u64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows: Vec<Row> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        let Some(first) = rows.first() else {
            return Err(Error::InvalidArgument("plan file has no draws".into()));
        };
        let design: DesignKind = first.design.parse()?;
        let seed = first.seed;
        rows.sort_by_key(|r| r.draw_index);

        let mut stratum_weights: Vec<Option<f64>> = Vec::new();
        let mut draws = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            let bad = |why: &str| Error::InvalidArgument(format!("plan row {}: {why}", k + 1));
            if row.draw_index != k {
                return Err(bad("draw_index values are not 0..n"));
            }
            if row.design.parse::<DesignKind>()? != design || row.seed != seed {
                return Err(bad("design or seed differs from the first row"));
            }
            if !(row.weight > 0.0 && row.weight.is_finite()) {
                return Err(bad("weight must be positive"));
            }
            let stratum = match (design.is_stratified(), row.stratum, row.stratum_weight) {
                (true, Some(j), Some(w)) if j >= 1 => {
                    let j = j - 1;
                    if stratum_weights.len() <= j {
                        stratum_weights.resize(j + 1, None);
                    }
                    match stratum_weights[j] {
                        Some(prev) if prev != w => return Err(bad("inconsistent stratum_weight")),
                        _ => stratum_weights[j] = Some(w),
                    }
                    Some(j)
                }
                (false, None, None) => None,
                _ => return Err(bad("stratum columns do not match the design")),
            };
            draws.push(Draw {
                id: row.id,
                stratum,
                weight: row.weight,
            });
        }
        let stratum_weights = stratum_weights
            .into_iter()
            .enumerate()
            .map(|(j, w)| {
                w.ok_or_else(|| Error::InvalidArgument(format!("plan has no draws in stratum {}", j + 1)))
            })
            .collect::<Result<_>>()?;
        Ok(SamplePlan {
            design,
            seed,
            draws,
            stratum_weights,
        })
    }
}

/// Precomputed sampling tables for one design on one pool; draws many plans
/// cheaply.
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: DesignKind,
    budget: usize,
    ids: Vec<u64>,
    allocation: Option<AllocationPlan>,
    members: Vec<Vec<usize>>,
    tables: Vec<AliasTable>,
    weights: Vec<f64>,
    stratum_weights: Vec<f64>,
}

impl Sampler {
    pub fn new<T: Scalar>(spec: &DesignSpec<'_, T>, pool: &Pool) -> Result<Sampler> {
        let allocation = spec.validate(pool)?;
        let n = pool.len();
        let ids = pool.instances().iter().map(|i| i.id).collect();
        let table = |w: &[f64]| {
            AliasTable::new(w).ok_or_else(|| Error::InvalidArgument("degenerate proposal".into()))
        };

        let (members, stratum_weights) = match spec.strata {
            Some(s) => (
                (0..s.num_strata()).map(|j| s.members(j).to_vec()).collect(),
                s.weights::<f64>(),
            ),
            None => (Vec::new(), Vec::new()),
        };

        let (tables, weights) = match (spec.kind, spec.proposal) {
            (DesignKind::Importance, Some(prop)) => {
                let masses: Vec<f64> = (0..n).map(|p| prop.raw_mass(p).to_real()).collect();
                let weights = (0..n).map(|p| prop.global_weight(p).to_real()).collect();
                (vec![table(&masses)?], weights)
            }
            (DesignKind::StratifiedImportance, Some(prop)) => {
                let tables = members
                    .iter()
                    .map(|m: &Vec<usize>| {
                        table(&m.iter().map(|&p| prop.raw_mass(p).to_real()).collect::<Vec<_>>())
                    })
                    .collect::<Result<_>>()?;
                let weights = prop
                    .stratum_weights(spec.strata.expect("validated"))?
                    .into_iter()
                    .map(Scalar::to_real)
                    .collect();
                (tables, weights)
            }
            _ => (Vec::new(), vec![1.0; n]),
        };

        Ok(Sampler {
            kind: spec.kind,
            budget: spec.budget,
            ids,
            allocation,
            members,
            tables,
            weights,
            stratum_weights,
        })
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn allocation(&self) -> Option<&AllocationPlan> {
        self.allocation.as_ref()
    }

    fn push(&self, draws: &mut Vec<Draw>, pos: usize, stratum: Option<usize>) {
        draws.push(Draw {
            id: self.ids[pos],
            stratum,
            weight: self.weights[pos],
        });
    }

    /// Draws a plan from a ChaCha8 stream seeded with `seed`.
    pub fn draw(&self, seed: u64) -> SamplePlan {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draws = Vec::with_capacity(self.budget);
        match self.kind {
            DesignKind::Random => {
                for _ in 0..self.budget {
                    let pos = rng.gen_range(0..self.ids.len());
                    self.push(&mut draws, pos, None);
                }
            }
            DesignKind::Importance => {
                for _ in 0..self.budget {
                    let pos = self.tables[0].sample(&mut rng);
                    self.push(&mut draws, pos, None);
                }
            }
            DesignKind::Stratified | DesignKind::StratifiedImportance => {
                let alloc = self.allocation.as_ref().expect("stratified designs carry an allocation");
                for (j, members) in self.members.iter().enumerate() {
                    for _ in 0..alloc.get(j) {
                        let local = if self.kind == DesignKind::Stratified {
                            rng.gen_range(0..members.len())
                        } else {
                            self.tables[j].sample(&mut rng)
                        };
                        self.push(&mut draws, members[local], Some(j));
                    }
                }
            }
        }
        SamplePlan {
            design: self.kind,
            seed,
            draws,
            stratum_weights: self.stratum_weights.clone(),
        }
    }
}

pub fn draw_plan<T: Scalar>(spec: &DesignSpec<'_, T>, pool: &Pool, seed: u64) -> Result<SamplePlan> {
    Ok(Sampler::new(spec, pool)?.draw(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumPartial {
    /// 1-based stratum index.
    pub stratum: usize,
    pub n: usize,
    pub weight: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub design: DesignKind,
    pub n: usize,
    pub partials: Vec<StratumPartial>,
}

impl Estimate {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)
            .map_err(|e| Error::io("<estimate writer>", e.into()))
    }
}

/// Unbiased defect-rate estimate from a plan and revealed labels.
///
/// RS/IS: `(1/n) Σ z·weight`. SRS/SIS: `Σ_j w_j (1/n_j) Σ_k z·weight`.
pub fn estimate<L: Labels + ?Sized>(plan: &SamplePlan, labels: &L, pool: &Pool) -> Result<Estimate> {
    if plan.is_empty() {
        return Err(Error::InvalidArgument("plan has no draws".into()));
    }
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); plan.stratum_weights.len().max(1)];
    for d in &plan.draws {
        let inst = pool
            .get(d.id)
            .ok_or_else(|| Error::Mismatch(format!("plan id {} is not in the pool", d.id)))?;
        let defect = labels.label(d.id)? != inst.pred_label;
        let term = if defect { d.weight } else { 0.0 };
        terms[d.stratum.unwrap_or(0)].push(term);
    }

    if !plan.design.is_stratified() {
        let n = plan.len();
        return Ok(Estimate {
            value: compensated_sum(terms[0].iter().copied()) / n as f64,
            design: plan.design,
            n,
            partials: Vec::new(),
        });
    }

    let partials: Vec<StratumPartial> = terms
        .iter()
        .enumerate()
        .map(|(j, t)| {
            if t.is_empty() {
                return Err(Error::InvalidArgument(format!("no draws in stratum {}", j + 1)));
            }
            Ok(StratumPartial {
                stratum: j + 1,
                n: t.len(),
                weight: plan.stratum_weights[j],
                value: compensated_sum(t.iter().copied()) / t.len() as f64,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Estimate {
        value: compensated_sum(partials.iter().map(|p| p.weight * p.value)),
        design: plan.design,
        n: plan.len(),
        partials,
    })
}

/// Closed-form `E[ε̂]` by summation over the pool; equals the true defect
/// rate for every design.
pub fn exact_estimator_mean<T: Scalar>(spec: &DesignSpec<'_, T>, pool: &Pool) -> Result<T> {
    let z = pool.defects("exact estimator mean")?;
    spec.validate(pool)?;
    let zf = |p: usize| if z[p] { T::one() } else { T::zero() };
    let n_pool = T::from_count(pool.len());

    let mean = match spec.kind {
        DesignKind::Random => compensated_sum((0..pool.len()).map(zf)) / n_pool,
        DesignKind::Importance => {
            let prop = spec.require_proposal()?;
            compensated_sum((0..pool.len()).map(|p| prop.mass(p) * zf(p) * prop.global_weight(p)))
        }
        DesignKind::Stratified => {
            let strata = spec.require_strata()?;
            compensated_sum((0..strata.num_strata()).map(|j| {
                let size = T::from_count(strata.size(j));
                let within = compensated_sum(strata.members(j).iter().map(|&p| zf(p) / size));
                strata.weight::<T>(j) * within
            }))
        }
        DesignKind::StratifiedImportance => {
            let strata = spec.require_strata()?;
            let prop = spec.require_proposal()?;
            let weights = prop.stratum_weights(strata)?;
            let mut total = Vec::with_capacity(strata.num_strata());
            for j in 0..strata.num_strata() {
                let within = compensated_sum(
                    prop.restrict(strata, j)?
                        .into_iter()
                        .map(|(p, q)| q * zf(p) * weights[p]),
                );
                total.push(strata.weight::<T>(j) * within);
            }
            compensated_sum(total)
        }
    };
    Ok(mean)
}
