//! Std companion to `soccer-core`: CSV IO, a threaded executor with wall-clock
//! timing, the experiment harness and the `soccer` command line.

pub mod cli;
pub mod exec;
pub mod harness;
pub mod io;
