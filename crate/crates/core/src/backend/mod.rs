//! Build backends.
//!
//! Everything the tracer and the extractors learn about a project comes
//! through [`BuildBackend`]: parsing, configuration resolution and the five
//! lifecycle tasks. [`MiniBuild`] is the deterministic reference backend. It
//! keeps a project on disk in a small manifest (`project.mb.json`), compiles
//! sources into JSON "class images" under `target/`, and executes a test by
//! loading those images, so every observation is backed by real files.

mod archive;
mod config;
mod manifest;
mod minibuild;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{
    validate_qualified_name, BuildRecord, FailureOutcome, ItemKind, ItemRef, LibCoord, TaskKind,
};

pub use archive::{read_archive, write_archive, Repository};
pub use config::compute_effective_config;
pub(crate) use manifest::write_json;
pub use manifest::{parse_manifest, write_config_file, Manifest, MANIFEST_FILE};
pub use minibuild::{class_file_path, render_source, MiniBuild, BUILD_LOG};

/// Pluggable build backend. A real-build adapter implements the same six
/// operations.
pub trait BuildBackend {
    fn parse_manifest(&self, root: &Path) -> Result<ProjectModel>;

    fn compute_effective_config(&self, project: &ProjectModel) -> EffectiveConfig;

    fn run_generate_sources(&self, project: &ProjectModel, workspace: &Path)
        -> Result<BuildRecord>;

    fn run_process_resources(
        &self,
        project: &ProjectModel,
        workspace: &Path,
    ) -> Result<BuildRecord>;

    fn run_compile(
        &self,
        project: &ProjectModel,
        workspace: &Path,
        request: &BTreeSet<ItemRef>,
        task: TaskKind,
        config: &EffectiveConfig,
    ) -> Result<BuildRecord>;

    fn run_test(
        &self,
        project: &ProjectModel,
        workspace: &Path,
        test_id: &str,
        config: &EffectiveConfig,
    ) -> Result<(FailureOutcome, BuildRecord)>;
}

/// A reference as written in a manifest: `src:<qualified>` or
/// `lib:<group>:<artifact>:<Class>`. Library refs carry no version; the
/// classpath decides which version they bind to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ref {
    Source(String),
    Library {
        group: String,
        artifact: String,
        class: String,
    },
}

impl Ref {
    pub fn source(id: &str) -> Self {
        Ref::Source(id.to_string())
    }

    pub fn library(group: &str, artifact: &str, class: &str) -> Self {
        Ref::Library {
            group: group.into(),
            artifact: artifact.into(),
            class: class.into(),
        }
    }

    pub fn qualified_name(&self) -> &str {
        match self {
            Ref::Source(id) => id,
            Ref::Library { class, .. } => class,
        }
    }

    /// The manifest ref that points at `item`.
    pub fn to_item(item: &ItemRef) -> Self {
        match &item.lib_coord {
            Some(c) => Ref::library(&c.group, &c.artifact, &item.qualified_name),
            None => Ref::source(&item.qualified_name),
        }
    }
}

impl fmt::Display for Ref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ref::Source(id) => write!(f, "src:{id}"),
            Ref::Library {
                group,
                artifact,
                class,
            } => write!(f, "lib:{group}:{artifact}:{class}"),
        }
    }
}

impl FromStr for Ref {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidValue(format!("malformed ref `{s}`"));
        if let Some(id) = s.strip_prefix("src:") {
            validate_qualified_name(id).map_err(|_| bad())?;
            return Ok(Ref::source(id));
        }
        if let Some(rest) = s.strip_prefix("lib:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if let [group, artifact, class] = parts.as_slice() {
                if group.contains('.')
                    && !artifact.is_empty()
                    && validate_qualified_name(class).is_ok()
                {
                    return Ok(Ref::library(group, artifact, class));
                }
            }
        }
        Err(bad())
    }
}

impl Serialize for Ref {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ref {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeclaredFailure {
    pub failure_type: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceItem {
    pub id: String,
    #[serde(default)]
    pub static_refs: Vec<Ref>,
    #[serde(default)]
    pub dynamic_loads: Vec<Ref>,
    #[serde(default)]
    pub resource_reads: Vec<String>,
    /// Files the class writes under the classpath root when loaded.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resource_writes: Vec<String>,
    #[serde(default)]
    pub requires_plugin: Option<String>,
    #[serde(default)]
    pub failure: Option<DeclaredFailure>,
    #[serde(default)]
    pub message_from_resource: Option<String>,
    pub file_path: String,
}

impl SourceItem {
    pub fn new(id: &str, file_path: &str) -> Self {
        SourceItem {
            id: id.to_string(),
            static_refs: Vec::new(),
            dynamic_loads: Vec::new(),
            resource_reads: Vec::new(),
            resource_writes: Vec::new(),
            requires_plugin: None,
            failure: None,
            message_from_resource: None,
            file_path: file_path.to_string(),
        }
    }
}

/// `<root>/<pkg as dirs>/<Name>.src`
pub fn conventional_source_path(root: &str, id: &str) -> String {
    format!(
        "{}/{}.src",
        root.trim_end_matches('/'),
        id.replace('.', "/")
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryClass {
    pub name: String,
    #[serde(default)]
    pub loads: Vec<Ref>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Library {
    pub coord: LibCoord,
    pub classes: Vec<LibraryClass>,
    /// Workspace-relative archive. `None` means the archive is resolved
    /// from the artifact repository by coordinate.
    #[serde(default)]
    pub archive_path: Option<String>,
}

impl Library {
    pub fn class(&self, name: &str) -> Option<&LibraryClass> {
        self.classes.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeneratorKind {
    Template,
    AnnotationProcessing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub output_root: String,
    pub produces: Vec<SourceItem>,
    #[serde(default)]
    pub template_resources: Vec<String>,
    pub kind: GeneratorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    GenerateSources,
    ProcessResources,
    Compile,
    TestCompile,
    Test,
    Deploy,
    Verify,
}

impl Phase {
    pub fn of_task(task: TaskKind) -> Phase {
        match task {
            TaskKind::GenerateSources => Phase::GenerateSources,
            TaskKind::ProcessResources => Phase::ProcessResources,
            TaskKind::Compile => Phase::Compile,
            TaskKind::TestCompile => Phase::TestCompile,
            TaskKind::Test => Phase::Test,
        }
    }

    /// Phases that take part in building and running a test.
    pub fn is_lifecycle(self) -> bool {
        !matches!(self, Phase::Deploy | Phase::Verify)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PluginCategory {
    Build,
    Analysis,
}

/// A plugin setting: either a string leaf or a nested tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Value(String),
    Tree(BTreeMap<String, Setting>),
}

impl Setting {
    /// Visits every string leaf.
    pub fn for_each_value(&self, f: &mut impl FnMut(&str)) {
        match self {
            Setting::Value(v) => f(v),
            Setting::Tree(t) => t.values().for_each(|s| s.for_each_value(f)),
        }
    }

    pub fn map_values(&self, f: &mut impl FnMut(&str) -> String) -> Setting {
        match self {
            Setting::Value(v) => Setting::Value(f(v)),
            Setting::Tree(t) => Setting::Tree(
                t.iter()
                    .map(|(k, s)| (k.clone(), s.map_values(f)))
                    .collect(),
            ),
        }
    }
}

/// Recursively merges `child` into `parent`; leaves and type conflicts
/// resolve in favor of the child.
pub fn merge_settings(parent: &mut BTreeMap<String, Setting>, child: &BTreeMap<String, Setting>) {
    for (key, value) in child {
        match (parent.get_mut(key), value) {
            (Some(Setting::Tree(p)), Setting::Tree(c)) => merge_settings(p, c),
            _ => {
                parent.insert(key.clone(), value.clone());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PluginConfig {
    pub id: String,
    pub phases: BTreeSet<Phase>,
    pub category: PluginCategory,
    #[serde(default)]
    pub settings: BTreeMap<String, Setting>,
}

impl PluginConfig {
    pub fn attached_to(&self, phase: Phase) -> bool {
        self.phases.contains(&phase)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub coord: LibCoord,
    #[serde(default)]
    pub via: Option<LibCoord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigFile {
    /// Workspace-relative location; implied by where the file lives.
    #[serde(skip)]
    pub path: String,
    #[serde(default)]
    pub plugins: Vec<PluginConfig>,
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
    #[serde(default)]
    pub dependencies: Vec<Dependency>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectiveConfig {
    pub plugins: Vec<PluginConfig>,
    pub properties: BTreeMap<String, String>,
    pub mediated_dependencies: Vec<LibCoord>,
    /// `plugin:<id>`, `property:<key>` or `dependency:<group>:<artifact>`
    /// mapped to the config file that supplied the winning value.
    pub origin: BTreeMap<String, String>,
}

impl EffectiveConfig {
    pub fn plugin_attached(&self, id: &str, phase: Phase) -> bool {
        self.plugins
            .iter()
            .any(|p| p.id == id && p.attached_to(phase))
    }
}

/// A parsed and validated project.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectModel {
    pub name: String,
    pub group: String,
    pub app_sources: Vec<SourceItem>,
    pub test_sources: Vec<SourceItem>,
    pub libraries: Vec<Library>,
    pub resources: Vec<String>,
    pub generators: Vec<Generator>,
    pub config_files: Vec<ConfigFile>,
    /// Extra roots holding pre-generated sources (`src/gen` in packages).
    pub source_roots: Vec<String>,
    pub generated_sources: Vec<SourceItem>,
    pub root_dir: PathBuf,
}

/// Where a source item is declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceOrigin {
    App,
    Test,
    /// Product of `generators[index]`.
    Generator(usize),
    /// Listed in `generated_sources`.
    Pregenerated,
}

impl SourceOrigin {
    pub fn kind(self) -> ItemKind {
        match self {
            SourceOrigin::App => ItemKind::AppSource,
            SourceOrigin::Test => ItemKind::TestSource,
            SourceOrigin::Generator(_) | SourceOrigin::Pregenerated => ItemKind::GeneratedSource,
        }
    }
}

pub const APP_ROOT: &str = "src/main";
pub const TEST_ROOT: &str = "src/test";
pub const RESOURCE_ROOT: &str = "src/main/res";
pub const CLASSES_DIR: &str = "target/classes";
pub const TEST_CLASSES_DIR: &str = "target/test-classes";

impl ProjectModel {
    /// Every declared source item with where it comes from, in manifest order.
    pub fn sources(&self) -> impl Iterator<Item = (SourceOrigin, &SourceItem)> {
        let app = self.app_sources.iter().map(|i| (SourceOrigin::App, i));
        let test = self.test_sources.iter().map(|i| (SourceOrigin::Test, i));
        let pre = self
            .generated_sources
            .iter()
            .map(|i| (SourceOrigin::Pregenerated, i));
        let gen = self.generators.iter().enumerate().flat_map(|(idx, g)| {
            g.produces
                .iter()
                .map(move |i| (SourceOrigin::Generator(idx), i))
        });
        app.chain(test).chain(pre).chain(gen)
    }

    pub fn find_source(&self, id: &str) -> Option<(SourceOrigin, &SourceItem)> {
        self.sources().find(|(_, item)| item.id == id)
    }

    pub fn source_ref(&self, id: &str) -> Option<ItemRef> {
        self.find_source(id)
            .map(|(origin, item)| ItemRef::source(origin.kind(), &item.id))
    }

    /// Source root an item is compiled from.
    pub fn root_of(&self, origin: SourceOrigin, item: &SourceItem) -> String {
        match origin {
            SourceOrigin::App => APP_ROOT.to_string(),
            SourceOrigin::Test => TEST_ROOT.to_string(),
            SourceOrigin::Generator(idx) => self.generators[idx].output_root.clone(),
            SourceOrigin::Pregenerated => self
                .source_roots
                .iter()
                .find(|r| item.file_path.starts_with(&format!("{r}/")))
                .cloned()
                .unwrap_or_default(),
        }
    }

    pub fn library_by_key(&self, group: &str, artifact: &str) -> impl Iterator<Item = &Library> {
        let (g, a) = (group.to_string(), artifact.to_string());
        self.libraries
            .iter()
            .filter(move |l| l.coord.group == g && l.coord.artifact == a)
    }

    /// Declared sources of the given kinds whose file is present in the
    /// workspace: what a full build of those source sets would compile.
    pub fn sources_present(&self, workspace: &Path, kinds: &[ItemKind]) -> BTreeSet<ItemRef> {
        self.sources()
            .filter(|(origin, _)| kinds.contains(&origin.kind()))
            .filter(|(_, item)| workspace.join(&item.file_path).is_file())
            .map(|(origin, item)| ItemRef::source(origin.kind(), &item.id))
            .collect()
    }

    pub fn test(&self, id: &str) -> Option<&SourceItem> {
        self.test_sources.iter().find(|t| t.id == id)
    }
}
