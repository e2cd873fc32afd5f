//! Frequency-supervised volumetric image synthesis.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic piece of
//! the pipeline: a small dense tensor type with reverse-mode differentiation,
//! the Gaussian low/high frequency split, the synthesis network with its
//! decomposition layer and factorized refinement module, the relativistic
//! discriminator, the training loop, sliding-window inference, evaluation
//! metrics and a deterministic paired-volume generator.
//!
//! File formats, configuration parsing and the command-line front end live in
//! the companion `freqsynth` crate.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod adversarial;
pub mod autodiff;
pub mod error;
pub mod evaluation;
pub mod frequency;
pub mod inference;
pub mod network;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod synthetic;
pub mod tensor;
pub mod training;
pub mod volume;

pub use autodiff::{Axis, Tape, Var};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;
pub use volume::{DomainTag, HuRange, Volume};
