//! Command-line pipelines over the `shrinker` library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod report;
pub mod svg;
