//! Partitions of a pool into strata, tiny-stratum merging and proportional
//! budget allocation.

use std::cmp::Ordering;
use std::io::Write;

use crate::error::{Error, Result};
use crate::pool::{AttrValue, Pool};
use crate::scalar::Scalar;

pub const DEFAULT_MIN_COUNT: usize = 3;
pub const DEFAULT_MIN_FRAC: f64 = 0.005;

/// Disjoint cover of a pool's positions by `P ≥ 1` non-empty strata.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratification {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
    labels: Vec<String>,
}

impl Stratification {
    /// Builds from a per-position stratum index. Indices must be dense
    /// (`0..P`, each used at least once).
    pub fn from_assignment(assignment: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::EmptyPool);
        }
        let p = labels.len();
        let mut members = vec![Vec::new(); p];
        for (pos, &j) in assignment.iter().enumerate() {
            if j >= p {
                return Err(Error::InvalidArgument(format!(
                    "stratum index {j} out of range for {p} strata"
                )));
            }
            members[j].push(pos);
        }
        if let Some(j) = members.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!("stratum {} is empty", j + 1)));
        }
        Ok(Stratification {
            assignment,
            members,
            labels,
        })
    }

    /// Single stratum covering the whole pool.
    pub fn trivial(pool: &Pool) -> Self {
        Stratification {
            assignment: vec![0; pool.len()],
            members: vec![(0..pool.len()).collect()],
            labels: vec!["all".into()],
        }
    }

    pub fn num_strata(&self) -> usize {
        self.members.len()
    }

    pub fn pool_size(&self) -> usize {
        self.assignment.len()
    }

    pub fn stratum_of(&self, pos: usize) -> usize {
        self.assignment[pos]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    pub fn size(&self, j: usize) -> usize {
        self.members[j].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `w_j = N_j / N`.
    pub fn weight<T: Scalar>(&self, j: usize) -> T {
        T::from_count(self.size(j)) / T::from_count(self.pool_size())
    }

    pub fn weights<T: Scalar>(&self) -> Vec<T> {
        (0..self.num_strata()).map(|j| self.weight(j)).collect()
    }

    pub fn check_pool(&self, pool: &Pool) -> Result<()> {
        if self.pool_size() != pool.len() {
            return Err(Error::Mismatch(format!(
                "stratification covers {} instances but pool has {}",
                self.pool_size(),
                pool.len()
            )));
        }
        Ok(())
    }

    /// Audit dump: `id,stratum` with 1-based stratum indices.
    pub fn write_csv<W: Write>(&self, pool: &Pool, writer: W) -> Result<()> {
        self.check_pool(pool)?;
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["id", "stratum"])?;
        for (pos, &j) in self.assignment.iter().enumerate() {
            wtr.write_record([pool.instance(pos).id.to_string(), (j + 1).to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<strata writer>", e))?;
        Ok(())
    }
}

fn attribute(pool: &Pool, pos: usize, attr: &str) -> Result<AttrValue> {
    let inst = pool.instance(pos);
    match attr {
        "pred_label" => Ok(AttrValue::Num(inst.pred_label as f64)),
        "score" => Ok(AttrValue::Num(inst.score)),
        _ => inst.attrs.get(attr).cloned().ok_or_else(|| Error::MissingAttribute {
            attr: attr.to_string(),
            id: inst.id,
        }),
    }
}

fn numeric_attribute(pool: &Pool, pos: usize, attr: &str) -> Result<f64> {
    attribute(pool, pos, attr)?
        .as_num()
        .ok_or_else(|| Error::NonNumericAttribute {
            attr: attr.to_string(),
            id: pool.instance(pos).id,
        })
}

fn cmp_keys(a: &[AttrValue], b: &[AttrValue]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Cartesian product of categorical attributes; one stratum per observed
/// combination, ordered by value. `pred_label` and `score` are accepted as
/// built-in attributes.
pub fn build_cross_strata(pool: &Pool, attrs: &[&str]) -> Result<Stratification> {
    if attrs.is_empty() {
        return Err(Error::InvalidArgument("no stratification attributes given".into()));
    }
    let keys: Vec<Vec<AttrValue>> = (0..pool.len())
        .map(|pos| attrs.iter().map(|a| attribute(pool, pos, a)).collect())
        .collect::<Result<_>>()?;
    let mut distinct: Vec<&Vec<AttrValue>> = keys.iter().collect();
    distinct.sort_by(|a, b| cmp_keys(a, b));
    distinct.dedup_by(|a, b| cmp_keys(a, b).is_eq());
    let assignment = keys
        .iter()
        .map(|k| {
            distinct
                .binary_search_by(|d| cmp_keys(d, k))
                .expect("key present by construction")
        })
        .collect();
    let labels = distinct
        .iter()
        .map(|key| {
            attrs
                .iter()
                .zip(key.iter())
                .map(|(a, v)| format!("{a}={v}"))
                .collect::<Vec<_>>()
                .join("&")
        })
        .collect();
    Stratification::from_assignment(assignment, labels)
}

/// One stratum per distinct value of `attr`, sorted by value.
pub fn build_categorical_strata(pool: &Pool, attr: &str) -> Result<Stratification> {
    build_cross_strata(pool, &[attr])
}

/// Nearest-rank quantile edges at levels `i/bins`, deduplicated, with any
/// edge equal to the maximum dropped so that no right-open bin is empty.
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let Some(&max) = sorted.last() else {
        return Vec::new();
    };
    let mut edges: Vec<f64> = (1..bins)
        .map(|i| {
            let rank = (i * n).div_ceil(bins).max(1);
            sorted[rank - 1]
        })
        .filter(|&e| e < max)
        .collect();
    edges.dedup();
    edges
}

/// Bin index under right-closed intervals `(e_{i-1}, e_i]`.
pub fn bin_of(value: f64, edges: &[f64]) -> usize {
    edges.partition_point(|&e| e < value)
}

/// Feature quantile bins over the pool, then score quantile bins within each
/// feature bin. Bins collapse on duplicate edges; no empty stratum is emitted.
pub fn build_quantile_strata(
    pool: &Pool,
    feature: &str,
    feature_bins: usize,
    score_bins: usize,
) -> Result<Stratification> {
    if feature_bins == 0 || score_bins == 0 {
        return Err(Error::InvalidArgument("bin counts must be at least 1".into()));
    }
    let values: Vec<f64> = (0..pool.len())
        .map(|pos| numeric_attribute(pool, pos, feature))
        .collect::<Result<_>>()?;
    let feature_edges = quantile_edges(&values, feature_bins);

    let mut by_feature = vec![Vec::new(); feature_edges.len() + 1];
    for (pos, &v) in values.iter().enumerate() {
        by_feature[bin_of(v, &feature_edges)].push(pos);
    }

    let mut assignment = vec![0; pool.len()];
    let mut labels = Vec::new();
    for (fb, positions) in by_feature.iter().enumerate() {
        let scores: Vec<f64> = positions.iter().map(|&p| pool.instance(p).score).collect();
        let score_edges = quantile_edges(&scores, score_bins);
        let base = labels.len();
        for sb in 0..=score_edges.len() {
            labels.push(format!("{feature}_q{}&score_q{}", fb + 1, sb + 1));
        }
        for (&pos, &s) in positions.iter().zip(&scores) {
            assignment[pos] = base + bin_of(s, &score_edges);
        }
    }
    Stratification::from_assignment(assignment, labels)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Merges every stratum smaller than `max(min_count, ⌈min_frac·N⌉)` into the
/// stratum whose median score is closest to its own (ties to the lower index).
/// The smallest tiny stratum is merged first; repeats until none remain or
/// only one stratum is left. Surviving strata keep their relative order.
pub fn merge_small_strata(
    strat: &Stratification,
    pool: &Pool,
    min_count: usize,
    min_frac: f64,
) -> Result<Stratification> {
    strat.check_pool(pool)?;
    if !(0.0..1.0).contains(&min_frac) {
        return Err(Error::InvalidArgument(format!("min_frac {min_frac} outside [0, 1)")));
    }
    let threshold = min_count.max((min_frac * pool.len() as f64).ceil() as usize);

    let mut groups: Vec<Vec<usize>> = strat.members.clone();
    let mut labels = strat.labels.clone();
    loop {
        if groups.len() <= 1 {
            break;
        }
        let tiny = (0..groups.len())
            .filter(|&j| groups[j].len() < threshold)
            .min_by_key(|&j| (groups[j].len(), j));
        let Some(tiny) = tiny else { break };

        let medians: Vec<f64> = groups
            .iter()
            .map(|g| median(&mut g.iter().map(|&p| pool.instance(p).score).collect::<Vec<_>>()))
            .collect();
        let target = (0..groups.len())
            .filter(|&j| j != tiny)
            .min_by(|&a, &b| {
                let da = (medians[a] - medians[tiny]).abs();
                let db = (medians[b] - medians[tiny]).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("at least two strata");

        let moved = groups.remove(tiny);
        let moved_label = labels.remove(tiny);
        let target = if target > tiny { target - 1 } else { target };
        groups[target].extend(moved);
        groups[target].sort_unstable();
        labels[target] = format!("{}+{}", labels[target], moved_label);
    }

    let mut assignment = vec![0; pool.len()];
    for (j, g) in groups.iter().enumerate() {
        for &pos in g {
            assignment[pos] = j;
        }
    }
    Stratification::from_assignment(assignment, labels)
}

/// Per-stratum label budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationPlan {
    pub per_stratum: Vec<usize>,
    pub total: usize,
}

impl AllocationPlan {
    pub fn get(&self, j: usize) -> usize {
        self.per_stratum[j]
    }

    /// True when `n_j = n·w_j` holds exactly for every stratum.
    pub fn is_exactly_proportional(&self, strat: &Stratification) -> bool {
        let n = strat.pool_size();
        (0..strat.num_strata()).all(|j| self.per_stratum[j] * n == self.total * strat.size(j))
    }
}

/// Largest-remainder proportional allocation with a minimum of one label per
/// stratum. Remainders are compared in exact integer arithmetic.
pub fn allocate_proportional(strat: &Stratification, n: usize) -> Result<AllocationPlan> {
    let p = strat.num_strata();
    if n < p {
        return Err(Error::BudgetBelowStrata { budget: n, strata: p });
    }
    let big_n = strat.pool_size() as u128;
    let mut alloc: Vec<usize> = Vec::with_capacity(p);
    let mut remainders: Vec<u128> = Vec::with_capacity(p);
    for j in 0..p {
        let scaled = n as u128 * strat.size(j) as u128;
        alloc.push((scaled / big_n) as usize);
        remainders.push(scaled % big_n);
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]).then(a.cmp(&b)));
    let leftover = n - alloc.iter().sum::<usize>();
    for &j in order.iter().take(leftover) {
        alloc[j] += 1;
    }
    while let Some(empty) = alloc.iter().position(|&k| k == 0) {
        let donor = (0..p)
            .max_by(|&a, &b| alloc[a].cmp(&alloc[b]).then(b.cmp(&a)))
            .expect("p >= 1");
        alloc[donor] -= 1;
        alloc[empty] += 1;
    }
    Ok(AllocationPlan {
        per_stratum: alloc,
        total: n,
    })
}
