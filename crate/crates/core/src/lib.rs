//! Determined multichannel blind source separation.
//!
//! The crate implements auxiliary-function IVA and ILRMA together with
//! their Sinkhorn-regularized variants, in which the source variance model
//! is re-allocated across frequency bands by an entropic, KL-relaxed
//! optimal transport plan before every demixing update.
//!
//! Everything here is `no_std` + `alloc`. The `std` feature (on by default)
//! adds an FFT backend built on `rustfft` plus the convenience entry points
//! that use it; `parallel` spreads the per-frame transport solves and the
//! per-bin demixing updates over a rayon pool. Results are bit-identical
//! with and without `parallel`.
//!
//! Randomness (NMF initialization, synthetic impulse responses, fixture
//! signals) always flows from a `u64` seed through [`rand_chacha::ChaCha8Rng`].
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod audio;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod math;
pub mod mixsim;
pub mod separation;
pub mod signal;
pub mod source_model;
pub mod stft;
pub mod transport;

pub use audio::AudioBuffer;
pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Floor shared by the transport solver and the variance models.
pub const EPS_FLOOR: f64 = 1e-12;
