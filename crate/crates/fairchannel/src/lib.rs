//! Dataset ingestion, audit reports and the command-line interface built on
//! [`fairchannel_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cells;
pub mod cli;
pub mod context;
pub mod dataset;
pub mod error;
pub mod report;
pub mod schedule;
pub mod schema;
pub mod selftest;

pub use error::{Error, Result};
