//! Library surface of the `ppgmorph` command-line tool: configuration,
//! per-subject stages, the end-to-end pipeline runner, and the SVG report
//! plots. The binary in `main.rs` is a thin argument-parsing wrapper; tests
//! and the acceptance suite drive these functions directly.

pub mod config;
pub mod pipeline;
pub mod plot;
pub mod stages;
