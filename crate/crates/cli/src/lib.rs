//! File formats, a rayon-backed executor and the `shm-locate` command-line
//! driver around `shm-locate-core`.

pub mod cli;
pub mod error;
pub mod exec;
pub mod io;
pub mod stages;
pub mod table;

pub use error::CliError;
pub use exec::RayonExecutor;
