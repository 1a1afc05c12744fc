//! Simulator and entropy-processing toolkit for a vacuum-fluctuation QRNG
//! built on multi-mode coherent states.

pub mod error;
pub mod config;
pub mod entropy;
pub mod extract;
pub mod io;
pub mod optics;
pub mod pipeline;
pub mod signal;
pub mod special;
pub mod stattests;
