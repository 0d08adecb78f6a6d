//! Noisy self-training for binary offensive-text classification.
//!
//! A teacher model trained on human-labelled text infers weak labels for an
//! unlabelled pool. Confident weak labels are class-balanced, optionally
//! noised with a text augmenter, and used together with the human labels to
//! train a fresh student, which becomes the next teacher.
//!
//! The crate is model-agnostic through [`classifier::Backend`]. It ships a
//! hashed n-gram logistic-regression backend ([`classifier::LinearBackend`])
//! and an HTTP client for remote transformer backends
//! ([`classifier::remote::RemoteBackend`]).
//!
//! Data-parallel inner loops (batch prediction, augmentation, experiment
//! cells) run on rayon when the `parallel` feature is enabled and fall back to
//! sequential iteration otherwise. Results are identical either way.

pub mod analysis;
pub mod augment;
pub mod classifier;
pub mod corpus;
mod error;
pub mod exec;
pub mod features;
pub mod metrics;
pub mod seed;
pub mod selftrain;
pub mod synthetic;

pub use error::{Error, Result};

pub use corpus::{DatasetBundle, Document, Label, LabeledExample, Provenance};
pub use exec::Execution;
