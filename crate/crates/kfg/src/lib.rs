//! File formats, image sequences, the detector bridge, the review service and
//! the command-line front end for the key-frame generation pipeline in
//! [`kfg_core`].

pub mod baselines;
pub mod batch;
pub mod bridge;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod frames;
pub mod fsutil;
pub mod review;
pub mod simulate;

pub use error::{Error, Result};
