use std::collections::HashMap;

use super::Pool;
use crate::error::{Error, Result};

/// Anything that can reveal a true label for an id.
pub trait Labels {
    fn label(&self, id: u64) -> Result<i64>;
}

impl Labels for HashMap<u64, i64> {
    fn label(&self, id: u64) -> Result<i64> {
        self.get(&id).copied().ok_or(Error::UncoveredId(id))
    }
}

impl Labels for Pool {
    fn label(&self, id: u64) -> Result<i64> {
        self.get(id)
            .and_then(|inst| inst.true_label)
            .ok_or(Error::UncoveredId(id))
    }
}

/// Source of ground truth: the pool's own label column (simulation) or an
/// external table collected from annotators (operational).
#[derive(Debug, Clone)]
pub enum LabelOracle<'a> {
    Pool(&'a Pool),
    Table(HashMap<u64, i64>),
}

impl LabelOracle<'_> {
    /// Labels for exactly the requested ids. Repeats are allowed.
    pub fn query(&self, ids: &[u64]) -> Result<HashMap<u64, i64>> {
        ids.iter().map(|&id| Ok((id, self.label(id)?))).collect()
    }
}

impl Labels for LabelOracle<'_> {
    fn label(&self, id: u64) -> Result<i64> {
        match self {
            LabelOracle::Pool(pool) => pool.label(id),
            LabelOracle::Table(table) => table.label(id),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::fixtures::t1;

    #[test]
    fn empty_query() {
        let pool = t1(true);
        assert!(LabelOracle::Pool(&pool).query(&[]).unwrap().is_empty());
    }

    #[test]
    fn repeated_ids_agree() {
        let pool = t1(true);
        let got = LabelOracle::Pool(&pool).query(&[3, 3]).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[&3], pool.get(3).unwrap().true_label.unwrap());
    }

    #[test]
    fn uncovered_id_is_an_error() {
        let table = HashMap::from([(1, 0), (2, 1)]);
        let err = LabelOracle::Table(table).query(&[1, 9]).unwrap_err();
        assert!(matches!(err, Error::UncoveredId(9)));
        let unlabelled = t1(false);
        assert!(LabelOracle::Pool(&unlabelled).query(&[1]).is_err());
    }
}
