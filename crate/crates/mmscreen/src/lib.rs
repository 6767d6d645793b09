//! File formats, thread-parallel runners and the `mmscreen` command line for
//! [`mmscreen_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod output;
pub mod runner;

pub use error::AppError;
