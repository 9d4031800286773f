//! Positive-definiteness analysis of the anisotropic kernel family
//! `K(x, y) = 1 / (pi (1 + (x-y)^2 + a (x^2+y^2)^t))`.

// NaN must fail the `!(x > 0.0)` style guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod definiteness;
pub mod eigen;
pub mod error;
pub mod exec;
pub mod frac_power;
pub mod hp;
pub mod kernel;
pub mod schwarz;
pub mod spectral;
pub mod sum;
pub mod witness;

pub use error::{Error, Result};
pub use exec::Exec;
pub use kernel::{GramMatrix, KernelParams, PointConfig};
