//! Punctured Glauber-Sudarshan states: a classical P function minus
//! narrow negative peaks, in a truncated Fock basis and in phase space.

// `!(x < y)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contour;
pub mod error;
pub mod fockspace;
pub mod phasespace;
pub mod positivity;
pub mod qndsim;
pub mod quadrature;
pub mod photonstats;
pub mod statemodel;
pub mod sweep;

pub use error::{Error, Result};
