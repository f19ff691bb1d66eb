//! Library side of the `sdviab` command: config files, result files and the subcommands.

pub mod commands;
pub mod config;
pub mod io;
