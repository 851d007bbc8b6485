//! Pre-test risk stratification benchmark.
//!
//! Deterministic ingestion and curation of tabular cohort data, five
//! fixed-hyperparameter classifiers, stratified out-of-fold evaluation with
//! bootstrap confidence intervals, a synthetic cohort generator, and the
//! report writer used by the `ptrs` command-line tool.

pub mod curation;
pub mod evaluation;
pub mod ingest;
pub mod models;
pub mod report;
pub mod rng;
pub mod synth;
