//! Storage-constrained private information retrieval.
//!
//! A user wants one of `K` messages from `N` databases, each of which stores
//! only a fraction `mu` of the library, without any single database learning
//! which message was wanted. This crate builds the storage placements,
//! plans and answers the XOR-sum queries, decodes the result, measures the
//! exact rate `L/D` and audits the per-database query distributions.

pub mod audit;
pub mod bits;
pub mod engine;
pub mod error;
pub mod harness;
pub mod model;
pub mod placement;
pub mod rational;
pub mod session;

pub use bits::BitString;
pub use engine::{Engine, EngineChoice, GroupQueryPlan, Query};
pub use error::{Error, Result};
pub use model::{BitAddress, DatabaseStore, Library};
pub use placement::{PlacementSpec, ValidationReport};
pub use rational::Rational;
pub use session::{run_session, RateReport, SessionTranscript};
