//! Loading models, evidence and configuration named on the command line.

use std::path::Path;

use psi_core::catalog::bundled_example;
use psi_core::graph::{build_model, CompiledModel, Evidence, ModelSpec};
use psi_core::inference::DiscretizationConfig;
use psi_core::io::{load_evidence, load_model, IoError};
use thiserror::Error;

/// Environment variable naming a default discretization config file.
pub const CONFIG_ENV: &str = "PSI_CONFIG";

#[derive(Debug, Error)]
pub enum LoadError {
    /// The named file does not exist or cannot be read.
    #[error("cannot read '{path}': {reason}")]
    Missing { path: String, reason: String },
    #[error("{path}: {source}")]
    Invalid { path: String, source: IoError },
    #[error("model '{name}' does not build: {message}")]
    Build { name: String, message: String },
    #[error("{path}: invalid configuration: {message}")]
    Config { path: String, message: String },
}

impl LoadError {
    /// Missing inputs are usage errors; malformed ones are validation failures.
    pub fn is_usage(&self) -> bool {
        matches!(self, LoadError::Missing { .. })
    }
}

fn wrap(path: &str, e: IoError) -> LoadError {
    match e {
        IoError::Io { source, .. } => LoadError::Missing { path: path.to_string(), reason: source.to_string() },
        source => LoadError::Invalid { path: path.to_string(), source },
    }
}

/// A model file path, or the id or short name of a bundled example.
pub fn resolve_model(reference: &str) -> Result<ModelSpec, LoadError> {
    if Path::new(reference).exists() {
        return load_model(reference).map_err(|e| wrap(reference, e));
    }
    if let Some(ex) = bundled_example(reference) {
        return Ok(ex.spec);
    }
    Err(LoadError::Missing { path: reference.to_string(), reason: "no such file or bundled example".to_string() })
}

pub fn compile(name: &str, spec: ModelSpec) -> Result<CompiledModel, LoadError> {
    build_model(spec).map_err(|e| LoadError::Build { name: name.to_string(), message: e.to_string() })
}

pub fn resolve_evidence(path: Option<&str>) -> Result<Evidence, LoadError> {
    match path {
        Some(p) => load_evidence(p).map_err(|e| wrap(p, e)),
        None => Ok(Evidence::new()),
    }
}

/// An explicit `--config` file, else `PSI_CONFIG`, else the defaults.
pub fn resolve_config(path: Option<&str>) -> Result<DiscretizationConfig, LoadError> {
    let env = std::env::var(CONFIG_ENV).ok().filter(|s| !s.is_empty());
    let Some(path) = path.map(str::to_string).or(env) else {
        return Ok(DiscretizationConfig::default());
    };
    let text = std::fs::read_to_string(&path).map_err(|e| LoadError::Missing { path: path.clone(), reason: e.to_string() })?;
    let config: DiscretizationConfig =
        serde_json::from_str(&text).map_err(|e| LoadError::Config { path: path.clone(), message: e.to_string() })?;
    config.validate().map_err(|message| LoadError::Config { path, message })?;
    Ok(config)
}
