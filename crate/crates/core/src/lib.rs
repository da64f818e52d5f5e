//! Reduced-bias CDF and survival estimation with infinite-order flat-top
//! kernels.
//!
//! The crate covers kernel construction ([`kernel`]), smoothed CDF and
//! survival estimators ([`cdf`], [`survival`]), characteristic-function
//! bandwidth selection ([`bandwidth`]), asymptotic MSE and deficiency
//! formulas ([`asymptotics`]) and a seeded Monte Carlo harness ([`sim`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bandwidth;
pub mod cdf;
pub mod error;
pub mod io;
pub mod kernel;
pub mod quadrature;
pub mod sim;
pub mod special;
pub mod survival;

pub use asymptotics::{AssumptionTag, MseExpansion, SecondOrderKind};
pub use bandwidth::{BandwidthMode, BandwidthRule, EcfCurve};
pub use cdf::{CensoredSample, EstimatorConfig, StepEstimate};
pub use error::{Error, Result};
pub use kernel::{FlatTopFamily, FlatTopSpec, KernelTable, SmoothingKernel};
pub use sim::{MseReport, Scenario};
