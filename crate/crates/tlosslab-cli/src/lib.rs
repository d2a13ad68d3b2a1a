//! Library half of the experiment runner: config parsing, sweep execution,
//! CSV artifacts, and the standalone checks behind the `tlosslab` binary.

pub mod cmd;
pub mod config;
pub mod csvio;
pub mod limits;
pub mod runner;
