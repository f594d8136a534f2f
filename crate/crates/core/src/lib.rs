#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod banded;
pub mod cli;
pub mod config;
pub mod control;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod potential;
pub mod state;
pub mod tangent;
