//! Command line and live session service around `cobot-core`.

pub mod cli;
pub mod protocol;
pub mod server;
pub mod session;
