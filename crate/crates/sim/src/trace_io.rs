//! Trace files: versioned JSON with the job list and generator metadata.

use std::fmt;
use std::fs;
use std::path::Path;

use hfsp_core::workload::{TraceMetadata, WorkloadError, WorkloadTrace};
use hfsp_core::JobSpec;
use serde::{Deserialize, Serialize};

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TraceFile {
    format_version: u32,
    #[serde(default)]
    metadata: TraceMetadata,
    jobs: Vec<JobSpec>,
}

#[derive(Debug)]
pub enum TraceIoError {
    Io { path: String, source: std::io::Error },
    Json { path: String, source: serde_json::Error },
    Version { found: u32, expected: u32 },
    Invalid(WorkloadError),
}

impl fmt::Display for TraceIoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceIoError::Io { path, source } => write!(f, "{path}: {source}"),
            TraceIoError::Json { path, source } => {
                write!(f, "{path}: malformed trace JSON: {source}")
            }
            TraceIoError::Version { found, expected } => {
                write!(f, "unsupported format_version {found} (expected {expected})")
            }
            TraceIoError::Invalid(e) => write!(f, "invalid trace: {e}"),
        }
    }
}

impl std::error::Error for TraceIoError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            TraceIoError::Io { source, .. } => Some(source),
            TraceIoError::Json { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// Parse a trace file, validating the schema and every job invariant.
pub fn parse_trace(path: &Path) -> Result<WorkloadTrace, TraceIoError> {
    let text = fs::read_to_string(path).map_err(|source| TraceIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trace_str(&text).map_err(|e| match e {
        TraceIoError::Json { source, .. } => TraceIoError::Json {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn parse_trace_str(text: &str) -> Result<WorkloadTrace, TraceIoError> {
    let file: TraceFile = serde_json::from_str(text).map_err(|source| TraceIoError::Json {
        path: "<input>".to_string(),
        source,
    })?;
    if file.format_version != TRACE_FORMAT_VERSION {
        return Err(TraceIoError::Version {
            found: file.format_version,
            expected: TRACE_FORMAT_VERSION,
        });
    }
    let trace = WorkloadTrace {
        metadata: file.metadata,
        jobs: file.jobs,
    };
    trace.validate().map_err(TraceIoError::Invalid)?;
    Ok(trace)
}

/// Write a trace; parsing the result gives back an equal value.
pub fn write_trace(trace: &WorkloadTrace, path: &Path) -> Result<(), TraceIoError> {
    trace.validate().map_err(TraceIoError::Invalid)?;
    let file = TraceFile {
        format_version: TRACE_FORMAT_VERSION,
        metadata: trace.metadata.clone(),
        jobs: trace.jobs.clone(),
    };
    let text = serde_json::to_string_pretty(&file).expect("trace serialization");
    crate::report::write_atomic(path, text.as_bytes()).map_err(|source| TraceIoError::Io {
        path: path.display().to_string(),
        source,
    })
}
