//! Shared domain vocabulary: items, library coordinates, build tasks,
//! failure traces and the per-task observations the backend reports.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identity of a library artifact, `group:artifact:version`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LibCoord {
    pub group: String,
    pub artifact: String,
    pub version: String,
}

impl LibCoord {
    pub fn new(group: &str, artifact: &str, version: &str) -> Result<Self> {
        let coord = LibCoord {
            group: group.to_string(),
            artifact: artifact.to_string(),
            version: version.to_string(),
        };
        coord.validate()?;
        Ok(coord)
    }

    pub fn validate(&self) -> Result<()> {
        if self.group.is_empty() || self.artifact.is_empty() || self.version.is_empty() {
            return Err(Error::InvalidValue(format!(
                "incomplete library coordinate `{self}`"
            )));
        }
        if !self.group.contains('.') {
            return Err(Error::InvalidValue(format!(
                "library group `{}` is not a reverse-domain identifier",
                self.group
            )));
        }
        for part in [&self.group, &self.artifact, &self.version] {
            if part.contains(':') || part.chars().any(char::is_whitespace) {
                return Err(Error::InvalidValue(format!(
                    "malformed library coordinate `{self}`"
                )));
            }
        }
        Ok(())
    }

    /// `(group, artifact)`: the key dependency mediation resolves versions for.
    pub fn key(&self) -> (&str, &str) {
        (&self.group, &self.artifact)
    }
}

impl fmt::Display for LibCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.group, self.artifact, self.version)
    }
}

impl FromStr for LibCoord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [g, a, v] => LibCoord::new(g, a, v),
            _ => Err(Error::InvalidValue(format!(
                "expected group:artifact:version, got `{s}`"
            ))),
        }
    }
}

/// The organization domain of a reverse-domain group: its first two labels.
fn organization(group: &str) -> Vec<&str> {
    group.split('.').take(2).collect()
}

/// True when `lib` is published by the same organization as the project,
/// i.e. the first two labels of the groups agree.
pub fn is_internal(lib: &LibCoord, project_group: &str) -> bool {
    organization(&lib.group) == organization(project_group)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ItemKind {
    AppSource,
    TestSource,
    GeneratedSource,
    LibraryClass,
}

impl ItemKind {
    pub fn is_source(self) -> bool {
        !matches!(self, ItemKind::LibraryClass)
    }
}

/// A class-granular unit of source or object code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemRef {
    pub kind: ItemKind,
    pub qualified_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lib_coord: Option<LibCoord>,
}

impl ItemRef {
    pub fn source(kind: ItemKind, qualified_name: &str) -> Self {
        debug_assert!(kind.is_source());
        ItemRef {
            kind,
            qualified_name: qualified_name.to_string(),
            lib_coord: None,
        }
    }

    pub fn library(coord: LibCoord, qualified_name: &str) -> Self {
        ItemRef {
            kind: ItemKind::LibraryClass,
            qualified_name: qualified_name.to_string(),
            lib_coord: Some(coord),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_qualified_name(&self.qualified_name)?;
        match (&self.kind, &self.lib_coord) {
            (ItemKind::LibraryClass, Some(coord)) => coord.validate(),
            (ItemKind::LibraryClass, None) => Err(Error::InvalidValue(format!(
                "library class `{}` lacks a coordinate",
                self.qualified_name
            ))),
            (_, Some(_)) => Err(Error::InvalidValue(format!(
                "source item `{}` carries a library coordinate",
                self.qualified_name
            ))),
            (_, None) => Ok(()),
        }
    }
}

impl fmt::Display for ItemRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lib_coord {
            Some(coord) => write!(
                f,
                "lib:{}:{}:{}",
                coord.group, coord.artifact, self.qualified_name
            ),
            None => write!(f, "src:{}", self.qualified_name),
        }
    }
}

/// Dotted identifier: non-empty segments, no whitespace, no path separators.
pub fn validate_qualified_name(name: &str) -> Result<()> {
    let bad = name.is_empty()
        || name.contains('/')
        || name.contains('\\')
        || name.contains(':')
        || name.chars().any(char::is_whitespace)
        || name.split('.').any(str::is_empty);
    if bad {
        return Err(Error::InvalidValue(format!(
            "invalid qualified name `{name}`"
        )));
    }
    Ok(())
}

/// Build lifecycle tasks in their fixed execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    GenerateSources,
    ProcessResources,
    Compile,
    TestCompile,
    Test,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::GenerateSources,
        TaskKind::ProcessResources,
        TaskKind::Compile,
        TaskKind::TestCompile,
        TaskKind::Test,
    ];

    /// Lifecycle phase name plugins attach to.
    pub fn phase(self) -> &'static str {
        match self {
            TaskKind::GenerateSources => "generate-sources",
            TaskKind::ProcessResources => "process-resources",
            TaskKind::Compile => "compile",
            TaskKind::TestCompile => "test-compile",
            TaskKind::Test => "test",
        }
    }
}

/// Output of hybrid backward tracing: the failure-relevant test sources,
/// application sources and library classes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureTrace {
    #[serde(rename = "T")]
    pub tests: BTreeSet<ItemRef>,
    #[serde(rename = "S")]
    pub sources: BTreeSet<ItemRef>,
    #[serde(rename = "L")]
    pub libraries: BTreeSet<ItemRef>,
}

impl FailureTrace {
    /// Adds each item to the set matching its kind.
    pub fn absorb<'a>(&mut self, items: impl IntoIterator<Item = &'a ItemRef>) {
        for item in items {
            let target = match item.kind {
                ItemKind::TestSource => &mut self.tests,
                ItemKind::AppSource | ItemKind::GeneratedSource => &mut self.sources,
                ItemKind::LibraryClass => &mut self.libraries,
            };
            target.insert(item.clone());
        }
    }

    pub fn merge(&mut self, other: &FailureTrace) {
        self.tests.extend(other.tests.iter().cloned());
        self.sources.extend(other.sources.iter().cloned());
        self.libraries.extend(other.libraries.iter().cloned());
    }

    pub fn len(&self) -> usize {
        self.tests.len() + self.sources.len() + self.libraries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, item: &ItemRef) -> bool {
        self.tests.contains(item) || self.sources.contains(item) || self.libraries.contains(item)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ItemRef> {
        self.tests
            .iter()
            .chain(&self.sources)
            .chain(&self.libraries)
    }

    pub fn contains_source(&self, id: &str) -> bool {
        self.tests
            .iter()
            .chain(&self.sources)
            .any(|i| i.qualified_name == id)
    }

    pub fn validate(&self, failed_test: &str) -> Result<()> {
        let kinds_ok = self.tests.iter().all(|i| i.kind == ItemKind::TestSource)
            && self
                .sources
                .iter()
                .all(|i| matches!(i.kind, ItemKind::AppSource | ItemKind::GeneratedSource))
            && self
                .libraries
                .iter()
                .all(|i| i.kind == ItemKind::LibraryClass);
        if !kinds_ok {
            return Err(Error::InvalidValue(
                "trace member filed under the wrong kind".into(),
            ));
        }
        if !self.tests.iter().any(|i| i.qualified_name == failed_test) {
            return Err(Error::InvalidValue(format!(
                "trace does not contain failed test `{failed_test}`"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResourceEventKind {
    FileRead,
    DirList,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceEvent {
    pub path: String,
    pub kind: ResourceEventKind,
    pub phase: TaskKind,
}

impl ResourceEvent {
    pub fn new(path: &str, kind: ResourceEventKind, phase: TaskKind) -> Result<Self> {
        let path = normalize_rel_path(path)?;
        Ok(ResourceEvent { path, kind, phase })
    }
}

/// Normalizes a workspace-relative path: forward slashes, no `.`/empty
/// segments; rejects `..` and absolute paths.
pub fn normalize_rel_path(path: &str) -> Result<String> {
    let unified = path.replace('\\', "/");
    if unified.starts_with('/') || unified.chars().nth(1) == Some(':') {
        return Err(Error::InvalidValue(format!("path `{path}` is absolute")));
    }
    let mut parts = Vec::new();
    for seg in unified.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                return Err(Error::InvalidValue(format!(
                    "path `{path}` escapes its root"
                )))
            }
            s => parts.push(s),
        }
    }
    if parts.is_empty() {
        return Err(Error::InvalidValue(format!("path `{path}` is empty")));
    }
    Ok(parts.join("/"))
}

/// Per-task observation reported by the backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildRecord {
    pub task: TaskKind,
    pub referenced: BTreeSet<ItemRef>,
    pub source_roots: Vec<String>,
    pub resource_events: Vec<ResourceEvent>,
    pub workspace_outputs: BTreeSet<String>,
    /// Outputs of annotation-processing generators, which must not be
    /// copied into a package as ordinary source.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub annotation_outputs: BTreeSet<String>,
}

impl BuildRecord {
    pub fn empty(task: TaskKind) -> Self {
        BuildRecord {
            task,
            referenced: BTreeSet::new(),
            source_roots: Vec::new(),
            resource_events: Vec::new(),
            workspace_outputs: BTreeSet::new(),
            annotation_outputs: BTreeSet::new(),
        }
    }

    pub(crate) fn add_source_root(&mut self, root: &str) {
        if !self.source_roots.iter().any(|r| r == root) {
            self.source_roots.push(root.to_string());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureStatus {
    Passed,
    Failed,
    BuildError,
}

/// What running a test produced. Failure type and message are compared
/// verbatim during validation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FailureOutcome {
    pub status: FailureStatus,
    pub failure_type: String,
    pub message: String,
}

impl FailureOutcome {
    pub fn passed() -> Self {
        FailureOutcome {
            status: FailureStatus::Passed,
            failure_type: String::new(),
            message: String::new(),
        }
    }

    pub fn failed(failure_type: &str, message: &str) -> Self {
        FailureOutcome {
            status: FailureStatus::Failed,
            failure_type: failure_type.to_string(),
            message: message.to_string(),
        }
    }

    pub fn build_error(failure_type: &str, message: &str) -> Self {
        FailureOutcome {
            status: FailureStatus::BuildError,
            failure_type: failure_type.to_string(),
            message: message.to_string(),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.status == FailureStatus::Failed
    }

    pub fn validate(&self) -> Result<()> {
        let empty = self.failure_type.is_empty() && self.message.is_empty();
        match self.status {
            FailureStatus::Passed if !empty => Err(Error::InvalidValue(
                "passed outcome carries failure text".into(),
            )),
            FailureStatus::Failed | FailureStatus::BuildError if self.failure_type.is_empty() => {
                Err(Error::InvalidValue(
                    "failed outcome without a failure type".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for FailureOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.status {
            FailureStatus::Passed => write!(f, "passed"),
            _ => write!(f, "{}: {}", self.failure_type, self.message),
        }
    }
}
