//! Command-line front end and file formats for `wishart-minors-core`.
//!
//! Also provides [`exec::ThreadPool`], a rayon-backed executor for the
//! core's Monte Carlo routines.

pub mod cli;
pub mod error;
pub mod exec;
pub mod io;

pub use cli::run;
pub use error::CliError;
pub use exec::ThreadPool;
