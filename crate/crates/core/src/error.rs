use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("malformed manifest {path}: {message}")]
    ManifestSyntax { path: PathBuf, message: String },

    #[error("inconsistent manifest: {0}")]
    ManifestSemantic(String),

    #[error("generator for {root} failed: {message}")]
    GeneratorFailure { root: String, message: String },

    #[error("{item} references unresolvable {missing}")]
    UnresolvedRef { item: String, missing: String },

    #[error("{item} requires plugin {plugin}, which is not attached to the current phase")]
    PluginMissing { item: String, plugin: String },

    #[error("unknown test {0}")]
    UnknownTest(String),

    #[error("invalid compile request: {0}")]
    InvalidRequest(String),

    #[error("record from {found:?} passed where {expected} was expected")]
    WrongTask {
        expected: &'static str,
        found: crate::model::TaskKind,
    },

    #[error("test {0} passed; there is no failure to report")]
    TestPassed(String),

    #[error("generated source {0} is missing from the traced workspace")]
    MissingGeneratedFile(String),

    #[error("source file {0} is missing")]
    MissingSourceFile(String),

    #[error("trace names library class {0}, which no declared library provides")]
    UnknownLibraryClass(String),

    #[error("package at {path} is corrupt: {message}")]
    PackageCorrupt { path: PathBuf, message: String },

    #[error("archive {path}: {message}")]
    Archive { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("build round {round} failed: {source}")]
    BackendFailure { round: u8, source: Box<Error> },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Short stable name used as the failure type when a build error is
    /// surfaced as an outcome.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Error::InvalidValue(_) => "InvalidValue",
            Error::ManifestSyntax { .. } => "ManifestSyntax",
            Error::ManifestSemantic(_) => "ManifestSemantic",
            Error::GeneratorFailure { .. } => "GeneratorFailure",
            Error::UnresolvedRef { .. } => "UnresolvedRef",
            Error::PluginMissing { .. } => "PluginMissing",
            Error::UnknownTest(_) => "UnknownTest",
            Error::InvalidRequest(_) => "InvalidRequest",
            Error::WrongTask { .. } => "WrongTask",
            Error::TestPassed(_) => "TestPassed",
            Error::MissingGeneratedFile(_) => "MissingGeneratedFile",
            Error::MissingSourceFile(_) => "MissingSourceFile",
            Error::UnknownLibraryClass(_) => "UnknownLibraryClass",
            Error::PackageCorrupt { .. } => "PackageCorrupt",
            Error::Archive { .. } => "Archive",
            Error::Io { .. } => "IoFailure",
            Error::BackendFailure { .. } => "BackendFailure",
            Error::Json(_) => "Json",
        }
    }

    /// The message paired with [`Error::kind_name`] in a build-error outcome.
    pub fn outcome_message(&self) -> String {
        match self {
            Error::UnresolvedRef { item, missing } => format!("{item} -> {missing}"),
            Error::PluginMissing { plugin, .. } => plugin.clone(),
            Error::ManifestSemantic(m) => m.clone(),
            other => other.to_string(),
        }
    }
}

/// Helper for `map_err` on IO results.
pub(crate) trait IoContext<T> {
    fn ctx(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn ctx(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| Error::io(context(), e))
    }
}
