//! Lossless analog compression via polarization.
//!
//! An i.i.d. mixed discrete-continuous (nonsingular) signal is compressed by
//! keeping a subset of its orthonormal Hadamard transform coefficients, and
//! reconstructed by an analog successive-cancellation (SC) decoder that
//! sequentially MAP-estimates the discarded coefficients from recursively
//! computed conditional distributions. The measurement rows are chosen by
//! Monte-Carlo estimation of the per-index MAP error probability, which
//! polarizes towards 0 or 1 under the transform.
//!
//! Modules:
//! - [`mixdist`]: closed algebra of "atoms + Gaussian mixture" distributions
//!   with entropy / information-dimension / MAP functionals.
//! - [`hadamard`]: orthonormal fast Walsh-Hadamard transform with bit reversal.
//! - [`polarops`]: the convolution (`f`) and conditioning (`g`) operations that
//!   track distributions through one butterfly stage.
//! - [`construction`]: reserved-set construction from genie-aided Monte Carlo.
//! - [`codec`]: partial-Hadamard encoder and the analog SC decoder.
//! - [`baselines`]: AMP, Basis Pursuit (ADMM) and least-squares references.
//! - [`harness`]: experiment runner, metrics, CSV/JSON outputs and file I/O.

pub mod baselines;
pub mod codec;
pub mod construction;
pub mod hadamard;
pub mod harness;
pub mod mixdist;
pub mod polarops;
pub mod quadrature;
pub mod rng;
