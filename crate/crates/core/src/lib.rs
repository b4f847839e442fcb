//! Transient simulation of resistive-matchline CAM arrays.

pub mod analysis;
pub mod cell;
pub mod config;
pub mod device;
pub mod error;
pub mod linalg;
pub mod network;
pub mod runner;
pub mod seed;
pub mod transient;

pub use error::{Error, FieldIssue, Result};
