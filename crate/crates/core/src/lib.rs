//! Defect-count prediction from cross-company project metrics.
//!
//! The crate covers the whole workflow: cleaning ISBSG-shaped project
//! tables ([`dataset`]), correlation analysis ([`stats`]), encoding and
//! scaling ([`preprocess`]), from-scratch tree ensembles ([`learners`]),
//! regression metrics with cross-validation and random search
//! ([`evaluation`]), exact TreeSHAP attributions ([`explain`]) and a
//! synthetic data generator plus end-to-end orchestration ([`harness`]).

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod harness;
pub mod learners;
pub mod preprocess;
pub mod stats;

mod io;
pub mod rng;

pub use error::{Error, ErrorClass, Result};
