//! Target-only margin-disparity domain adaptation for 2D segmentation.
//!
//! The crate trains an encoder–decoder segmentation network on a labeled
//! *source* domain and adapts it to an unlabeled *target* domain by playing a
//! three-player game between the feature extractor `psi`, the segmentation
//! head `f`, and an adversary head `f'` that is a duplicate of `f`. The
//! adversary is pushed to agree with `f` on source features and disagree on
//! target features; the extractor is pushed to shrink that disagreement on
//! *both* domains, which removes the contradictory source-side term of the
//! classic margin-disparity scheme. A few-shot stage drops the adversary and
//! fine-tunes `f ∘ psi` on a handful of labeled target volumes.
//!
//! Real cross-modality data is replaced by a deterministic phantom generator
//! ([`phantom`]) whose target domain applies a configurable shift pipeline
//! (bias field, bright vessels, gamma remap, extra noise, circular
//! field-of-view truncation).
//!
//! Everything is deterministic: datasets are a pure function of their spec and
//! seed, and training reproduces bit-identical parameters for a fixed seed.
//!
//! The `tomdd` binary exposes the pipelines as subcommands
//! (`generate-data`, `pretrain`, `adapt`, `finetune`, `evaluate`, `sweep`,
//! `compare`); see the book under `book/` for a guided tour.

pub mod adapt;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod nn;
pub mod phantom;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Mask, Scalar, Tensor};
