//! Learning, attacking, and certifying predictions under instance-targeted
//! data poisoning.
//!
//! The crate provides:
//! * domain types and exact budget-membership checks for the five adversary
//!   classes ([`core`]);
//! * base learners — exact halfspace ERM in low dimension, K-NN, and a
//!   table learner ([`learners`]);
//! * robust learners: a subsample learner for weak adversaries and
//!   partition-aggregation majority ensembles with per-prediction margin
//!   certificates ([`robust`]);
//! * exact K-NN robustness under replace/add/remove adversaries
//!   ([`exactcert`]);
//! * sphere geometry and a certifying halfspace learner for the uniform
//!   distribution ([`geometry`]);
//! * constructive label-flip and point-adding attacks plus a brute-force
//!   optimal-attack oracle ([`attacks`]);
//! * empirical risk/robustness/certified-accuracy estimators and the exact
//!   risk-robustness identities ([`analytics`]);
//! * dataset generators, CSV persistence, and an IDX image loader
//!   ([`data`]).
//!
//! Everything is deterministic given explicit seeds: all randomness flows
//! through [`seeding::sub_seed`].

pub mod analytics;
pub mod attacks;
pub mod core;
pub mod data;
pub mod error;
pub mod exactcert;
pub mod experiments;
pub mod geometry;
pub mod learners;
pub mod modelfile;
pub mod robust;
pub mod seeding;

pub use error::{Error, Result};
