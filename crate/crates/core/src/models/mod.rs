//! Benchmark systems.

pub mod mlz;
pub mod stirap;
pub mod transmon;
