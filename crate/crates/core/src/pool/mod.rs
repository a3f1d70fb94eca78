//! Finite prediction pools: the batch of scored instances a monitor audits.

mod io;
mod oracle;
pub mod synth;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use io::{load_labels, load_pool, read_labels, read_pool, write_pool, Schema};
pub use oracle::{LabelOracle, Labels};

/// Value of a stratification attribute.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Num(f64),
    Cat(String),
}

impl AttrValue {
    /// Numeric if the text parses as a finite number, categorical otherwise.
    pub fn parse(text: &str) -> Option<AttrValue> {
        let text = text.trim();
        if text.is_empty() {
            return None;
        }
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => Some(AttrValue::Num(x)),
            _ => Some(AttrValue::Cat(text.to_string())),
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            AttrValue::Num(x) => Some(*x),
            AttrValue::Cat(_) => None,
        }
    }

    /// Total order: numbers (ascending) before categories (lexicographic).
    pub fn total_cmp(&self, other: &AttrValue) -> Ordering {
        match (self, other) {
            (AttrValue::Num(a), AttrValue::Num(b)) => a.total_cmp(b),
            (AttrValue::Num(_), AttrValue::Cat(_)) => Ordering::Less,
            (AttrValue::Cat(_), AttrValue::Num(_)) => Ordering::Greater,
            (AttrValue::Cat(a), AttrValue::Cat(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Num(x) => write!(f, "{x}"),
            AttrValue::Cat(s) => f.write_str(s),
        }
    }
}

/// One scored prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: u64,
    /// Proxy score in `[0, 1]`; not assumed calibrated.
    pub score: f64,
    pub pred_label: i64,
    pub true_label: Option<i64>,
    pub attrs: BTreeMap<String, AttrValue>,
}

impl Instance {
    pub fn new(id: u64, score: f64, pred_label: i64) -> Self {
        Instance {
            id,
            score,
            pred_label,
            true_label: None,
            attrs: BTreeMap::new(),
        }
    }

    pub fn with_true_label(mut self, label: i64) -> Self {
        self.true_label = Some(label);
        self
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: AttrValue) -> Self {
        self.attrs.insert(name.into(), value);
        self
    }

    /// Misclassification indicator, if the true label is known.
    pub fn is_defect(&self) -> Option<bool> {
        self.true_label.map(|y| y != self.pred_label)
    }
}

/// Immutable finite population of instances, in ingestion order.
///
/// Positions (`0..len`) are the internal handle used by stratifications and
/// proposals; ids are the external handle used in files.
#[derive(Debug, Clone)]
pub struct Pool {
    instances: Vec<Instance>,
    positions: HashMap<u64, usize>,
    oracle_complete: bool,
}

impl Pool {
    pub fn new(instances: Vec<Instance>) -> Result<Pool> {
        if instances.is_empty() {
            return Err(Error::EmptyPool);
        }
        let mut positions = HashMap::with_capacity(instances.len());
        for (pos, inst) in instances.iter().enumerate() {
            if !(0.0..=1.0).contains(&inst.score) {
                return Err(Error::ScoreOutOfRange {
                    row: pos + 1,
                    id: inst.id,
                    score: inst.score,
                });
            }
            if positions.insert(inst.id, pos).is_some() {
                return Err(Error::DuplicateId {
                    row: pos + 1,
                    id: inst.id,
                });
            }
        }
        let oracle_complete = instances.iter().all(|i| i.true_label.is_some());
        Ok(Pool {
            instances,
            positions,
            oracle_complete,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn instance(&self, pos: usize) -> &Instance {
        &self.instances[pos]
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.positions.get(&id).copied()
    }

    pub fn get(&self, id: u64) -> Option<&Instance> {
        self.position(id).map(|p| &self.instances[p])
    }

    /// True when every instance carries its true label.
    pub fn is_oracle_complete(&self) -> bool {
        self.oracle_complete
    }

    /// Per-position defect indicators; fails unless the pool is oracle-complete.
    pub fn defects(&self, purpose: &'static str) -> Result<Vec<bool>> {
        if !self.oracle_complete {
            return Err(Error::NotOracleComplete(purpose));
        }
        Ok(self
            .instances
            .iter()
            .map(|i| i.is_defect().unwrap_or(false))
            .collect())
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.instances.iter().map(|i| i.score)
    }
}

/// Finite-population misclassification rate `(1/N) Σ 1{ŷ ≠ y}`.
pub fn true_defect_rate<T: Scalar>(pool: &Pool) -> Result<T> {
    let defects = pool.defects("defect rate")?.iter().filter(|&&d| d).count();
    Ok(T::from_count(defects) / T::from_count(pool.len()))
}


#[cfg(test)]
mod tests {
    use super::fixtures::t1;
    use super::*;
    use crate::scalar::Exact;

    fn labelled(z: &[bool]) -> Pool {
        let instances = z
            .iter()
            .enumerate()
            .map(|(i, &d)| Instance::new(i as u64, 0.5, 1).with_true_label(if d { 0 } else { 1 }))
            .collect();
        Pool::new(instances).unwrap()
    }

    #[test]
    fn defect_rate_identity_cases() {
        assert_eq!(true_defect_rate::<f64>(&labelled(&[false; 5])).unwrap(), 0.0);
        assert_eq!(true_defect_rate::<f64>(&labelled(&[true; 5])).unwrap(), 1.0);
    }

    #[test]
    fn defect_rate_of_reference_pool() {
        assert_eq!(true_defect_rate::<Exact>(&t1(true)).unwrap(), Exact::new(1, 3));
    }

    #[test]
    fn defect_rate_requires_labels() {
        let err = true_defect_rate::<f64>(&t1(false)).unwrap_err();
        assert!(matches!(err, Error::NotOracleComplete(_)));
    }

    #[test]
    fn rejects_duplicates_range_and_empty() {
        let dup = vec![Instance::new(7, 0.1, 0), Instance::new(7, 0.2, 0)];
        assert!(matches!(Pool::new(dup), Err(Error::DuplicateId { id: 7, .. })));
        let bad = vec![Instance::new(1, 1.3, 0)];
        assert!(matches!(Pool::new(bad), Err(Error::ScoreOutOfRange { row: 1, .. })));
        assert!(matches!(Pool::new(vec![]), Err(Error::EmptyPool)));
    }

    #[test]
    fn partial_labels_are_not_oracle_complete() {
        let pool = Pool::new(vec![
            Instance::new(1, 0.1, 0).with_true_label(0),
            Instance::new(2, 0.2, 0),
        ])
        .unwrap();
        assert!(!pool.is_oracle_complete());
    }

    #[test]
    fn attr_values_order_numbers_before_categories() {
        let mut vals = [
            AttrValue::Cat("b".into()),
            AttrValue::Num(2.0),
            AttrValue::Cat("a".into()),
            AttrValue::Num(-1.0),
        ];
        vals.sort_by(|a, b| a.total_cmp(b));
        let shown: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
        assert_eq!(shown, ["-1", "2", "a", "b"]);
    }
}
