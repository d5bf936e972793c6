//! Command line tools and the session server of the `kern` debugger.

pub mod cli;
pub mod server;
pub mod session;
