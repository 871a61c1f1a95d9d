//! File formats, the graph cache and the command implementations.

pub mod cache;
pub mod commands;
pub mod config;
pub mod results;
pub mod stations;
