use thiserror::Error;

use crate::designs::DesignKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: duplicate id {id}")]
    DuplicateId { row: usize, id: u64 },

    #[error("row {row}: column `{column}` value {value:?} is not a valid {expected}")]
    Parse {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },

    #[error("row {row} (id {id}): score {score} outside [0, 1]")]
    ScoreOutOfRange { row: usize, id: u64, score: f64 },

    #[error("pool is empty")]
    EmptyPool,

    #[error("{0} requires oracle-complete pool")]
    NotOracleComplete(&'static str),

    #[error("no label available for id {0}")]
    UncoveredId(u64),

    #[error("attribute `{attr}` missing on instance {id}")]
    MissingAttribute { attr: String, id: u64 },

    #[error("attribute `{attr}` on instance {id} is not numeric")]
    NonNumericAttribute { attr: String, id: u64 },

    #[error("budget {budget} is below the number of strata {strata}; every stratum needs at least one label (min-1 allocation rule)")]
    BudgetBelowStrata { budget: usize, strata: usize },

    #[error("{0}")]
    Mismatch(String),

    #[error("optimal proposal undefined: pool has no defects")]
    NoDefects,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("design {design} at budget {budget}{}: {source}", replication_suffix(.replication))]
    Cell {
        design: DesignKind,
        budget: usize,
        /// 0-based replication index; `None` when the cell failed during setup.
        replication: Option<usize>,
        #[source]
        source: Box<Error>,
    },
}

fn replication_suffix(replication: &Option<usize>) -> String {
    match replication {
        Some(m) => format!(", replication {m}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit status for the CLI: 3 for data problems, 4 for configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 4,
            Error::Cell { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
