//! Learned KKL observers for autonomous nonlinear systems.
//!
//! The estimation pipeline lifts a nonlinear plant `ẋ = f(x), y = h(x)` into
//! a space where the dynamics are linear up to output injection,
//! `ż = Az + Bh(x)`, learns the lifting map `T` and its left inverse `T*`
//! from simulated data, and then runs the filter `ż̂ = Aẑ + By` online,
//! mapping `ẑ` back through the learned inverse to produce state estimates.
//!
//! The forward map is trained with a physics-informed objective: a data-fit
//! term on simulated `(x, z)` pairs plus the squared residual of the defining
//! PDE `∂T/∂x·f = AT + Bh` on collocation points. The inverse map is trained
//! afterwards, supervised on pairs produced by the frozen forward map.
//!
//! Modules:
//!
//! * [`ode`] — fixed-step RK4 integration, plain and input-driven
//! * [`system`] — the four benchmark plants and their noise channels
//! * [`observer`] — the `(A, B)` pair, envelopes, truncation times
//! * [`nn`] — multilayer perceptrons with exact forward/reverse derivatives
//! * [`datagen`] — synthetic dataset construction
//! * [`train`] — physics-informed risk assembly and the two-stage training
//! * [`estimate`] — online rollouts and error metrics
//! * [`bounds`] — generalization and robustness bound calculators
//!
//! The crate is `no_std` (with `alloc`): everything needed to run a learned
//! observer online — the filter, the network forward pass, the integrators —
//! works without an operating system. File formats and the batch pipeline
//! live in the companion CLI crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod bounds;
pub mod datagen;
mod error;
pub mod estimate;
pub mod mat;
pub mod math;
pub mod nn;
pub mod observer;
pub mod ode;
pub mod rng;
pub mod system;
pub mod train;

pub use error::{Error, Result};
