//! Command-line pipeline around the `rcaus` core library.
//!
//! The binary drives a file-based workflow: a plain-text config describes an
//! array, a phantom, an acquisition scheme, and a reconstruction grid; the
//! `simulate`, `decode`, `beamform`, and `metrics` stages persist their
//! artifacts in a binary dataset format and keep a content-hash manifest of
//! the output directory. `run` chains all four stages; `describe` summarizes
//! a config without simulating; `render` turns volumes into images.
//!
//! Exit codes: 0 success (possibly with warnings), 2 config error, 3 stage
//! or I/O error.

pub mod config;
pub mod error;
pub mod format;
pub mod manifest;
pub mod pipeline;
pub mod render;

pub use config::{load_config, parse_config, serialize_config, PhantomConfig, RunConfig};
pub use error::{CliError, Result};
