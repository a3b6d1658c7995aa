//! Command-line workbench: the workcell bundle on disk, the synthetic demo
//! cell, and reports.

pub mod bundle;
pub mod commands;
pub mod demo;
pub mod report;

use basecamp_core::annotate::AnnotateError;
use basecamp_core::cloudio::CloudError;
use basecamp_core::optimizer::OptimizerError;
use basecamp_core::registry::RegistryError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_WRITE: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_BELOW_THRESHOLD: i32 = 3;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: missing; {hint}")]
    Missing { path: String, hint: String },
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

impl WorkbenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkbenchError::Write { .. } => EXIT_WRITE,
            WorkbenchError::Cloud(CloudError::Io { .. }) => EXIT_WRITE,
            _ => EXIT_BAD_INPUT,
        }
    }
}
