//! Command-line plumbing for the destriping library: image and config I/O,
//! the synthetic benchmark and weight grid search.

pub mod bench;
pub mod commands;
pub mod config;
pub mod grid;
pub mod io;
