//! Command-line front end and HTTP scenario service for the psi engine.

pub mod cli;
pub mod models;
pub mod service;

pub use cli::run;
