//! Cosserat rod dynamics and a boundary observer for tendon-driven continuum robots.

pub mod cli_io;
pub mod discretization;
pub mod error;
pub mod harness;
pub mod liegroup;
pub mod observer;
pub mod rod_model;

pub use error::{Error, Result};
