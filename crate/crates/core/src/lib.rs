//! Polar-format SAR simulation and imaging, with knowledge-aided 2-D
//! refocusing of ground moving targets.
//!
//! The chain is: [`echo_sim`] synthesises point-target phase histories,
//! [`pfa`] forms the image, [`error_model`] describes the residual 2-D phase
//! error of a moving target, and [`refocus`] estimates the azimuth phase
//! error ([`autofocus`]) and maps it to the full 2-D correction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autofocus;
pub mod axis;
pub mod echo_sim;
pub mod error;
pub mod error_model;
pub mod fft;
pub mod geometry;
pub mod interp;
pub mod io;
pub mod metrics;
pub mod parallel;
pub mod pfa;
pub mod poly;
pub mod refocus;
pub mod scenario;

pub use error::{Error, Result};
pub use parallel::Exec;
