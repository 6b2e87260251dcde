//! Configuration, presets, artifact output and run orchestration for the
//! `sncl` command-line tool.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
