use thiserror::Error;

/// Errors surfaced by every fallible operation in this crate.
///
/// `Malformed` covers invalid inputs (bad arities, elements outside the
/// universe, unparseable formulas); `SizeCap` is raised when a requested
/// construction would exceed the configured resource limits.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Resource limits shared by the carrier builders and formula generators.
///
/// `carrier_cap` bounds the number of elements in any constructed carrier or
/// enumeration; `formula_cap` bounds the node count of any constructed
/// formula.
#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub carrier_cap: usize,
    pub formula_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { carrier_cap: 200_000, formula_cap: 1_000_000 }
    }
}
