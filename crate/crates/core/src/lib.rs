//! Unbiased extremum seeking with actuator delay and diffusion compensation.
//!
//! The crate contains two closed-loop simulators ([`delay_es`] and
//! [`diffusion_es`]), the signal generators they share ([`signals`],
//! [`demod`]), and an [`oracle`] layer of closed-form averaged solutions used
//! to check the simulators independently.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delay_es;
pub mod demod;
pub mod diffusion_es;
pub mod engine;
pub mod error;
pub mod maps;
pub mod oracle;
pub mod signals;
pub mod validation;

pub use error::{Error, Result};
