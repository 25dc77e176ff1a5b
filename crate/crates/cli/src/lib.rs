//! Configuration, presets, execution and artifact writing for the
//! `shockpath` command line tool.

pub mod artifacts;
pub mod config;
pub mod presets;
pub mod runner;
pub mod svg;
