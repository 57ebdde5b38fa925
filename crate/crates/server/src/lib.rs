//! HTTP API and command line driver for the truthy pipeline.

pub mod api;
pub mod cli;
pub mod config;
pub mod serve;
