//! Command-line runs, a language-model client and the HTTP session service
//! for the blicket benchmark.

pub mod cli;
pub mod commands;
mod error;
pub mod llm;
pub mod server;

pub use error::{HarnessError, Result};
