//! Fault-tolerant distributed multilayer perceptron.
//!
//! Networks are trained centrally with dropout, Adam, and mini-batch gradient
//! descent, then deployed so that every neuron runs as an independent
//! message-passing node. Because dropout forces the representation to spread
//! across units, the deployed network keeps producing usable predictions when
//! individual nodes die; failed neurons simply contribute zero to downstream
//! sums.
//!
//! The crate is organized along the pipeline:
//!
//! - [`nn`] — pure MLP math: forward pass with failure masks, losses,
//!   backpropagation, weight initialization.
//! - [`rng`] — the seeded generator every module shares (splitmix64-expanded
//!   xoshiro256++, polar Box-Muller gaussians) so runs reproduce bit-for-bit.
//! - [`datagen`] — synthetic regression datasets plus CSV persistence.
//! - [`trainer`] — mini-batch Adam training with inverted dropout.
//! - [`faults`] — analytic failure evaluation: masked test MSE, degradation
//!   sweeps, critical-threshold estimation, dropout-vs-plain comparison.
//! - [`wire`] — the binary frame codec, weight chunking under the 250-byte
//!   frame cap, and per-neuron deployment bundles.
//! - [`runtime`] — the distributed system: per-neuron state machines, a
//!   heartbeat-monitoring coordinator with standby handover, a deterministic
//!   discrete-event simulator, and a UDP transport running the same state
//!   machines.
//! - [`experiments`] — orchestration that reproduces the degradation,
//!   comparison, disconnection, and recovery-time studies as CSV + markdown
//!   reports.

pub mod config;
pub mod datagen;
pub mod experiments;
pub mod faults;
pub mod model_io;
pub mod nn;
pub mod rng;
pub mod runtime;
pub mod trainer;
pub mod wire;

mod scalar;

pub use scalar::Scalar;
