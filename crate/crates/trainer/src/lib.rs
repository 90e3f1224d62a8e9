//! Command-line front end and network server for the feedback pipeline.

pub mod offline;
pub mod server;
