//! Library half of the `epinet` binary: configuration loading and the
//! pipeline stages each subcommand runs. Kept as a library so integration
//! tests can drive the stages directly.

pub mod config;
pub mod pipeline;
