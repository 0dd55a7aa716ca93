//! File formats, parallel evaluation and the command-line front end for the
//! predictive coding engine in [`pcn_core`].

pub mod checkpoint;
pub mod cifar;
pub mod config;
pub mod parallel;
pub mod trace;

pub use pcn_core;
