use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("count vector has zero total")]
    ZeroTotal,

    #[error("domain size mismatch: {left} vs {right}")]
    DomainMismatch { left: usize, right: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid probability vector: {0}")]
    InvalidPdf(String),

    #[error("argument outside the function domain: {0}")]
    OutOfDomain(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("weight row {row} is not a distribution (sum {sum})")]
    WeightRowUnnormalized { row: usize, sum: f64 },

    #[error("privacy budget exhausted")]
    BudgetExhausted,

    #[error("budget overflow at slot {slot}: cumulative {cumulative} + cost {cost} exceeds {total}")]
    BudgetOverflow {
        slot: u64,
        cumulative: f64,
        cost: f64,
        total: f64,
    },

    #[error("sum query needs a released total")]
    MissingTotal,

    #[error("query has no scalar answer: {0}")]
    NotScalar(String),

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("non-contiguous slots: expected slot {expected}, found {found}")]
    NonContiguousSlots { expected: usize, found: usize },

    #[error("slot {slot}: {source}")]
    AtSlot {
        slot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for both budget failure modes, including when wrapped with a slot index.
    pub fn is_budget_exhaustion(&self) -> bool {
        match self {
            Error::BudgetExhausted | Error::BudgetOverflow { .. } => true,
            Error::AtSlot { source, .. } => source.is_budget_exhaustion(),
            _ => false,
        }
    }

    pub(crate) fn at_slot(self, slot: usize) -> Error {
        Error::AtSlot {
            slot,
            source: Box::new(self),
        }
    }
}
