use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    conventional_source_path, ConfigFile, Generator, Library, ProjectModel, Ref, SourceItem,
    SourceOrigin, APP_ROOT, RESOURCE_ROOT, TEST_ROOT,
};
use crate::error::{Error, IoContext, Result};
use crate::model::{normalize_rel_path, validate_qualified_name, ItemKind, LibCoord};

pub const MANIFEST_FILE: &str = "project.mb.json";

/// On-disk form of `project.mb.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub group: String,
    #[serde(default)]
    pub app_sources: Vec<SourceItem>,
    #[serde(default)]
    pub test_sources: Vec<SourceItem>,
    #[serde(default)]
    pub libraries: Vec<Library>,
    #[serde(default)]
    pub resources: Vec<String>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    pub config_files: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source_roots: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generated_sources: Vec<SourceItem>,
}

impl Manifest {
    /// Reads the manifest without any semantic checks.
    pub fn read(root: &Path) -> Result<Manifest> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).ctx(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| Error::ManifestSyntax {
            path: path.clone(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, root: &Path) -> Result<()> {
        write_json(&root.join(MANIFEST_FILE), self)
    }
}

impl From<&ProjectModel> for Manifest {
    fn from(p: &ProjectModel) -> Self {
        Manifest {
            name: p.name.clone(),
            group: p.group.clone(),
            app_sources: p.app_sources.clone(),
            test_sources: p.test_sources.clone(),
            libraries: p.libraries.clone(),
            resources: p.resources.clone(),
            generators: p.generators.clone(),
            config_files: p.config_files.iter().map(|c| c.path.clone()).collect(),
            source_roots: p.source_roots.clone(),
            generated_sources: p.generated_sources.clone(),
        }
    }
}

/// Pretty JSON with a trailing newline; the only serialization used for
/// files this crate emits.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).ctx(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).ctx(|| format!("writing {}", path.display()))
}

pub fn write_config_file(path: &Path, config: &ConfigFile) -> Result<()> {
    write_json(path, config)
}

fn semantic(msg: impl Into<String>) -> Error {
    Error::ManifestSemantic(msg.into())
}

/// Parses and validates the project rooted at `root`.
pub fn parse_manifest(root: &Path) -> Result<ProjectModel> {
    let root_dir = root
        .canonicalize()
        .ctx(|| format!("resolving {}", root.display()))?;
    let manifest = Manifest::read(&root_dir)?;

    if manifest.name.is_empty() || manifest.name.contains(['/', '\\']) {
        return Err(semantic(format!(
            "invalid project name `{}`",
            manifest.name
        )));
    }
    if !manifest.group.contains('.') || manifest.group.split('.').any(str::is_empty) {
        return Err(semantic(format!(
            "project group `{}` is not reverse-domain",
            manifest.group
        )));
    }
    if manifest.config_files.is_empty() {
        return Err(semantic("no config files declared"));
    }

    let mut config_files = Vec::with_capacity(manifest.config_files.len());
    for rel in &manifest.config_files {
        let rel = normalize_rel_path(rel).map_err(|e| semantic(e.to_string()))?;
        let path = root_dir.join(&rel);
        if !path.is_file() {
            return Err(semantic(format!("config file {rel} does not exist")));
        }
        let text = fs::read_to_string(&path).ctx(|| format!("reading {}", path.display()))?;
        let mut file: ConfigFile =
            serde_json::from_str(&text).map_err(|e| Error::ManifestSyntax {
                path: path.clone(),
                message: e.to_string(),
            })?;
        file.path = rel.clone();
        let mut ids = BTreeSet::new();
        for plugin in &file.plugins {
            if !ids.insert(plugin.id.as_str()) {
                return Err(semantic(format!(
                    "plugin {} declared twice in {rel}",
                    plugin.id
                )));
            }
            if plugin.phases.is_empty() {
                return Err(semantic(format!(
                    "plugin {} in {rel} has no phases",
                    plugin.id
                )));
            }
        }
        for dep in &file.dependencies {
            dep.coord.validate().map_err(|e| semantic(e.to_string()))?;
        }
        config_files.push(file);
    }

    let project = ProjectModel {
        name: manifest.name,
        group: manifest.group,
        app_sources: manifest.app_sources,
        test_sources: manifest.test_sources,
        libraries: manifest.libraries,
        resources: manifest.resources,
        generators: manifest.generators,
        config_files,
        source_roots: manifest.source_roots,
        generated_sources: manifest.generated_sources,
        root_dir,
    };
    validate_libraries(&project)?;
    validate_generators(&project)?;
    validate_sources(&project)?;
    validate_resources(&project)?;
    Ok(project)
}

fn validate_libraries(project: &ProjectModel) -> Result<()> {
    let mut coords = BTreeSet::new();
    for lib in &project.libraries {
        lib.coord.validate().map_err(|e| semantic(e.to_string()))?;
        if !coords.insert(&lib.coord) {
            return Err(semantic(format!("library {} declared twice", lib.coord)));
        }
        let mut names = BTreeSet::new();
        for class in &lib.classes {
            validate_qualified_name(&class.name).map_err(|e| semantic(e.to_string()))?;
            if !names.insert(class.name.as_str()) {
                return Err(semantic(format!(
                    "class {} listed twice in {}",
                    class.name, lib.coord
                )));
            }
            if let Some(bad) = class.loads.iter().find(|r| matches!(r, Ref::Source(_))) {
                return Err(semantic(format!(
                    "library class {} loads source item {bad}",
                    class.name
                )));
            }
        }
        if let Some(archive) = &lib.archive_path {
            let rel = normalize_rel_path(archive).map_err(|e| semantic(e.to_string()))?;
            if !project.root_dir.join(&rel).is_file() {
                return Err(semantic(format!(
                    "archive {rel} of {} does not exist",
                    lib.coord
                )));
            }
        }
    }
    Ok(())
}

fn validate_generators(project: &ProjectModel) -> Result<()> {
    for gen in &project.generators {
        let root = normalize_rel_path(&gen.output_root).map_err(|e| semantic(e.to_string()))?;
        if root != gen.output_root {
            return Err(semantic(format!(
                "generator root `{}` is not normalized",
                gen.output_root
            )));
        }
        if root == "src"
            || root.starts_with("src/")
            || root == "target"
            || root.starts_with("target/")
        {
            return Err(semantic(format!(
                "generator root {root} overlaps the src/ or target/ trees"
            )));
        }
        for tpl in &gen.template_resources {
            normalize_rel_path(tpl).map_err(|e| semantic(e.to_string()))?;
        }
    }
    for root in &project.source_roots {
        if normalize_rel_path(root).ok().as_deref() != Some(root.as_str()) {
            return Err(semantic(format!("source root `{root}` is not normalized")));
        }
    }
    Ok(())
}

fn validate_sources(project: &ProjectModel) -> Result<()> {
    let mut ids: BTreeMap<&str, ItemKind> = BTreeMap::new();
    for (origin, item) in project.sources() {
        validate_qualified_name(&item.id).map_err(|e| semantic(e.to_string()))?;
        if ids.insert(&item.id, origin.kind()).is_some() {
            return Err(semantic(format!("duplicate item id {}", item.id)));
        }
    }

    for (origin, item) in project.sources() {
        let expected = match origin {
            SourceOrigin::App => Some(conventional_source_path(APP_ROOT, &item.id)),
            SourceOrigin::Test => Some(conventional_source_path(TEST_ROOT, &item.id)),
            SourceOrigin::Generator(idx) => Some(conventional_source_path(
                &project.generators[idx].output_root,
                &item.id,
            )),
            SourceOrigin::Pregenerated => None,
        };
        match expected {
            Some(path) if path != item.file_path => {
                return Err(semantic(format!(
                    "{} should live at {path}, not {}",
                    item.id, item.file_path
                )));
            }
            None => {
                let root = project.root_of(origin, item);
                if root.is_empty() || root == APP_ROOT || root == TEST_ROOT {
                    return Err(semantic(format!(
                        "pre-generated {} lies outside the declared source roots",
                        item.id
                    )));
                }
                if conventional_source_path(&root, &item.id) != item.file_path {
                    return Err(semantic(format!(
                        "pre-generated {} has a non-conventional path",
                        item.id
                    )));
                }
            }
            _ => {}
        }

        if origin != SourceOrigin::Test
            && (item.failure.is_some() || item.message_from_resource.is_some())
        {
            return Err(semantic(format!(
                "{} declares a test failure but is not a test",
                item.id
            )));
        }
        for path in item
            .resource_reads
            .iter()
            .chain(&item.resource_writes)
            .chain(&item.message_from_resource)
        {
            normalize_rel_path(path).map_err(|e| semantic(format!("{}: {e}", item.id)))?;
        }

        for r in &item.static_refs {
            match r {
                Ref::Source(target) => match ids.get(target.as_str()) {
                    None => return Err(semantic(format!("{} references undeclared {r}", item.id))),
                    Some(ItemKind::TestSource) if origin != SourceOrigin::Test => {
                        return Err(semantic(format!(
                            "{} (non-test) references test source {target}",
                            item.id
                        )));
                    }
                    Some(_) => {}
                },
                Ref::Library {
                    group,
                    artifact,
                    class,
                } => {
                    let declared = project
                        .library_by_key(group, artifact)
                        .any(|l| l.class(class).is_some());
                    if !declared {
                        return Err(semantic(format!("{} references undeclared {r}", item.id)));
                    }
                }
            }
        }
    }
    Ok(())
}

fn validate_resources(project: &ProjectModel) -> Result<()> {
    let prefix = format!("{RESOURCE_ROOT}/");
    for res in &project.resources {
        let rel = normalize_rel_path(res).map_err(|e| semantic(e.to_string()))?;
        if !rel.starts_with(&prefix) {
            return Err(semantic(format!(
                "resource {rel} is outside {RESOURCE_ROOT}"
            )));
        }
        if !project.root_dir.join(&rel).is_file() {
            return Err(semantic(format!("resource {rel} does not exist")));
        }
    }
    Ok(())
}

/// Library declaration lookup used by callers that hold a coordinate.
pub(crate) fn find_library<'a>(project: &'a ProjectModel, coord: &LibCoord) -> Option<&'a Library> {
    project.libraries.iter().find(|l| &l.coord == coord)
}
