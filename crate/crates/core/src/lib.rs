//! Finite relational structures, pebble-forest and modal-path comonads,
//! resource-indexed comparison relations between structures, first-order and
//! modal formula evaluation, extension/retraction certificates, and
//! preservation-theorem test harnesses.
//!
//! The crate is organized bottom-up:
//!
//! - [`structure`]: structures, homomorphisms, (co)limits, the identity
//!   expansion/collapse adjunction.
//! - [`forest`]: forest-ordered structures, paths, path embeddings,
//!   corestrictions, canonical codes, type trees.
//! - [`comonad`]: the pebble-forest and modal-path comonads with their
//!   counit/comultiplication, the induced resource-graded structures, and
//!   transposes.
//! - [`logic`]: formula ASTs, s-expression syntax, evaluation,
//!   characteristic formulas, random sampling.
//! - [`equivalence`]: decision procedures for arrow/equivalence/isomorphism
//!   in each resource-graded setting, plus independent game oracles.
//! - [`extend`]: extension environments, matched pairs, one-step and
//!   iterated extensions with retraction certificates, relative
//!   extendability checks.
//! - [`harness`]: preservation harnesses over finite universes of
//!   structures.
//! - [`io`]: JSON (de)serialization for structures and decisions.

pub mod comonad;
pub mod equivalence;
pub mod error;
pub mod extend;
pub mod forest;
pub mod harness;
pub mod io;
pub mod logic;
pub mod structure;

pub use error::{Error, Limits, Result};
pub use structure::{
    Elem, Homomorphism, InputStructure, PointedStructure, Structure, Tuple, Vocabulary,
    IDENTITY_REL,
};
