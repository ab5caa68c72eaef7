//! Cost-minimal selection of noisy workers under an accuracy constraint,
//! with confidence-bound learners, truthful-cost mechanisms and a seeded
//! simulation harness.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod error_model;
pub mod harness;
pub mod mechanism;
pub mod model;
pub mod optimizer;
pub mod seeding;
