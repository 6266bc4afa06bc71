//! Event streams to video frames: event stacking, a contrast-threshold
//! simulator, variance-exploding diffusion sampling, inter-frame residual
//! guidance, zero-shot interpolation/prediction and an error-bound harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod events;
pub mod guidance;
pub mod io;
pub mod pipeline;
pub mod sampler;
pub mod simulator;
pub mod synth;
pub mod zeroshot;

pub use error::{Error, Result};
