//! Vision-language segmentation toolkit.
//!
//! Covers automated prompt generation from masks and metadata, small
//! self-contained vision-language segmentation models (sentence-level and
//! token-level conditioning), an image-only UNet baseline, the finetuning
//! recipe, Dice-based evaluation protocols and prompt-perturbation probes.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod prompt;
pub mod robust;
pub mod train;

pub use error::{Error, Result};
