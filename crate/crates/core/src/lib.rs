//! Pure algorithms behind a multi-annotator misogyny labeling campaign.
//!
//! Everything here is `no_std` with `alloc`: label types, sampling and round
//! planning, inter-annotator agreement statistics, gold-label resolution with
//! stratified folds, the binary / multiclass / CORAL classification heads with
//! their trainer, and forum-level flagging. File formats, persistence, the HTTP
//! API and the CLI live in the `labelwise` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agreement;
pub mod campaign;
pub mod corpus;
pub mod flagging;
pub mod label;
pub mod ordinal;
pub mod resolve;
pub mod sampling;

pub use label::{binarize, Label, NUM_CLASSES};
