//! Rotationally symmetric shrinking Ricci solitons asymptotic to cones.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::needless_range_loop)]

pub mod carleman;
pub mod diffsys;
pub mod error;
pub mod exec;
pub mod fd;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod ode;
pub mod oracle;
pub mod soliton;

pub use error::{Error, Result};
