//! Nonlocal p-Laplacian evolution on graphs generated from graphons.
//!
//! The library discretizes a graphon `K` into weighted or simple graphs
//! ([`graphon`]), evolves `u' = -Delta_p u` on them with explicit or implicit
//! Euler steps ([`integrate`]), studies the `p -> inf` limit ([`plimit`]) and
//! measures empirical convergence rates in `n` and `tau` ([`harness`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod graphon;
pub mod harness;
pub mod integrate;
pub mod io;
pub mod operator;
pub mod plimit;
pub mod run;

pub use error::{Error, Result};
pub use graphon::{GraphonSpec, KernelMatrix, SupportMask};
pub use integrate::{Scheme, StepSchedule, Trajectory};
pub use operator::{GridFunction, NormOrder, PExponent};
