//! ADRC laboratory core.
//!
//! The crate is layered bottom-up:
//!
//! * [`matpoly`]: exact polynomials and the Routh array, small dense linear
//!   algebra (Lyapunov solve, spectral norm) and the RK4 stepper.
//! * [`stability`]: the observer companion matrices, the exact Hurwitz test on
//!   the gain-perturbed matrix, and the maximal tolerable gain-ratio interval.
//! * [`plant`], [`observer`], [`controller`]: the uncertain integrator chain,
//!   the linear extended state observer and the ADRC law.
//! * [`simulate`]: fixed-step closed-loop integration, bandwidth sweeps and
//!   the destabilising-sinusoid falsification harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod matpoly;
pub mod observer;
pub mod plant;
pub mod simulate;
pub mod stability;

pub use error::{Error, Result};
