//! File formats, the experiment runner, reports and plots on top of
//! [`ispfl_core`].

pub mod cli;
pub mod config;
pub mod exec;
pub mod plot;
pub mod records;
pub mod report;
pub mod runner;

pub use config::{ConfigError, RunConfig};
pub use exec::Rayon;
