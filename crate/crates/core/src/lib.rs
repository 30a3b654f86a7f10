//! Core of a small open experiment database.
//!
//! Datasets are ingested from ARFF or the MLD1 container ([`formats`]) and
//! profiled ([`metadata`]); [`tasks`] turn a dataset and a target into a
//! reproducible cross-validation problem; [`evaluation`] scores submitted
//! predictions; [`registry`] stores and links everything and answers the
//! comparison queries.

pub mod evaluation;
pub mod formats;
pub mod metadata;
pub mod registry;
pub mod tasks;
