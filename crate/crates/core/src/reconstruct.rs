//! Assembles a reproduction package: a stand-alone project holding only the
//! traced sources, pruned libraries, sliced configuration, accessed
//! resources and generated code.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::{
    write_archive, write_config_file, Library, LibraryClass, Manifest, ProjectModel, Ref,
    SourceOrigin, APP_ROOT, RESOURCE_ROOT, TEST_ROOT,
};
use crate::configslice::ConfigDocument;
use crate::error::{Error, IoContext, Result};
use crate::fsutil::write_bytes;
use crate::gencode::{GeneratedCode, GEN_ROOT};
use crate::model::{is_internal, FailureOutcome, FailureTrace, LibCoord};
use crate::resources::{materialize_resources, ResourcePlan};

pub const EXPECTED_FILE: &str = "expected_failure.json";
pub const TRACE_FILE: &str = "trace.json";
pub const PLAN_FILE: &str = "resources.plan.json";
pub const CONFIG_FILE: &str = "config.mb.json";
pub const LIBS_DIR: &str = "libs";

/// Which enhancements a package is built with. Turning all of them off
/// leaves sources and dependencies only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReportOptions {
    pub dynamic: bool,
    pub config_slice: bool,
    pub resources: bool,
    pub gencode: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            dynamic: true,
            config_slice: true,
            resources: true,
            gencode: true,
        }
    }
}

impl ReportOptions {
    pub fn bare() -> Self {
        ReportOptions {
            dynamic: true,
            config_slice: false,
            resources: false,
            gencode: false,
        }
    }
}

/// Contents of `expected_failure.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub project: String,
    pub test_id: String,
    pub options: ReportOptions,
    pub expected: FailureOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunedLibrary {
    pub coord: LibCoord,
    pub kept_classes: Vec<String>,
    pub archive_path: String,
}

#[derive(Debug, Clone)]
pub struct ReproPackage {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub config: ConfigDocument,
    pub pruned_libraries: Vec<PrunedLibrary>,
    pub external_coords: Vec<LibCoord>,
    pub provenance: Provenance,
}

/// Lays out an empty project: the source, resource, generated-code and
/// library directories plus a stub manifest and configuration.
pub fn create_template(package_root: &Path, name: &str) -> Result<Vec<String>> {
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(Error::InvalidValue(format!(
            "invalid package name `{name}`"
        )));
    }
    if package_root.exists() {
        let mut entries =
            fs::read_dir(package_root).ctx(|| format!("reading {}", package_root.display()))?;
        if entries.next().is_some() {
            return Err(Error::io(
                format!("preparing {}", package_root.display()),
                std::io::Error::new(std::io::ErrorKind::AlreadyExists, "directory is not empty"),
            ));
        }
    }
    let dirs = [
        "src",
        APP_ROOT,
        TEST_ROOT,
        RESOURCE_ROOT,
        GEN_ROOT,
        LIBS_DIR,
    ];
    for dir in dirs {
        let path = package_root.join(dir);
        fs::create_dir_all(&path).ctx(|| format!("creating {}", path.display()))?;
    }
    let stub = Manifest {
        name: name.to_string(),
        group: "org.example".into(),
        app_sources: vec![],
        test_sources: vec![],
        libraries: vec![],
        resources: vec![],
        generators: vec![],
        config_files: vec![CONFIG_FILE.into()],
        source_roots: vec![],
        generated_sources: vec![],
    };
    stub.write(package_root)?;
    write_config_file(
        &package_root.join(CONFIG_FILE),
        &ConfigDocument::default_template().to_config_file(),
    )?;
    let mut created: Vec<String> = dirs.iter().map(|d| d.to_string()).collect();
    created.push(crate::backend::MANIFEST_FILE.into());
    created.push(CONFIG_FILE.into());
    Ok(created)
}

/// Copies the traced test and application source files, keeping their
/// paths. Generated sources are left to the generated-code extractor.
pub fn extract_source_files(
    trace: &FailureTrace,
    project: &ProjectModel,
    package_root: &Path,
) -> Result<Vec<String>> {
    let mut copied = Vec::new();
    for (origin, item) in project.sources() {
        if !matches!(origin, SourceOrigin::App | SourceOrigin::Test)
            || !trace.contains_source(&item.id)
        {
            continue;
        }
        let from = project.root_dir.join(&item.file_path);
        let bytes =
            fs::read(&from).map_err(|_| Error::MissingSourceFile(item.file_path.clone()))?;
        write_bytes(&package_root.join(&item.file_path), &bytes)?;
        copied.push(item.file_path.clone());
    }
    Ok(copied)
}

/// Classes of `lib` reachable from `seeds` through loads that stay inside
/// the library.
fn intra_library_closure(lib: &Library, seeds: &BTreeSet<String>) -> Vec<LibraryClass> {
    let mut seen: BTreeSet<String> = seeds.clone();
    let mut queue: VecDeque<String> = seeds.iter().cloned().collect();
    while let Some(name) = queue.pop_front() {
        let Some(class) = lib.class(&name) else {
            continue;
        };
        for load in &class.loads {
            if let Ref::Library {
                group,
                artifact,
                class,
            } = load
            {
                if *group == lib.coord.group
                    && *artifact == lib.coord.artifact
                    && seen.insert(class.clone())
                {
                    queue.push_back(class.clone());
                }
            }
        }
    }
    lib.classes
        .iter()
        .filter(|c| seen.contains(&c.name))
        .cloned()
        .collect()
}

pub fn archive_name(coord: &LibCoord) -> String {
    format!("{LIBS_DIR}/{}-{}.archive", coord.artifact, coord.version)
}

/// Prunes internal libraries down to their traced classes (plus what those
/// load inside the same library) and lists traced external libraries by
/// coordinate.
pub fn extract_pruned_libraries(
    trace: &FailureTrace,
    project: &ProjectModel,
    project_group: &str,
    package_root: &Path,
) -> Result<(Vec<PrunedLibrary>, Vec<LibCoord>)> {
    let mut pruned = Vec::new();
    let mut external = Vec::new();
    for item in &trace.libraries {
        let known = item
            .lib_coord
            .as_ref()
            .and_then(|c| project.libraries.iter().find(|l| &l.coord == c));
        if known.and_then(|l| l.class(&item.qualified_name)).is_none() {
            return Err(Error::UnknownLibraryClass(item.to_string()));
        }
    }
    for lib in &project.libraries {
        let traced: BTreeSet<String> = trace
            .libraries
            .iter()
            .filter(|i| i.lib_coord.as_ref() == Some(&lib.coord))
            .map(|i| i.qualified_name.clone())
            .collect();
        if traced.is_empty() {
            continue;
        }
        if !is_internal(&lib.coord, project_group) {
            external.push(lib.coord.clone());
            continue;
        }
        let kept = intra_library_closure(lib, &traced);
        let archive_path = archive_name(&lib.coord);
        write_archive(&package_root.join(&archive_path), &kept)?;
        pruned.push(PrunedLibrary {
            coord: lib.coord.clone(),
            kept_classes: kept.into_iter().map(|c| c.name).collect(),
            archive_path,
        });
    }
    Ok((pruned, external))
}

/// Everything the extractors produced for one failing test.
pub struct ReportInputs<'a> {
    pub project: &'a ProjectModel,
    pub test_id: &'a str,
    pub trace: &'a FailureTrace,
    pub outcome: &'a FailureOutcome,
    pub config: ConfigDocument,
    pub resource_plan: &'a ResourcePlan,
    pub generated: &'a GeneratedCode,
    /// Workspace in which the generated files exist.
    pub generated_workspace: &'a Path,
    pub options: ReportOptions,
    /// Serialized trace dump written as `trace.json`.
    pub trace_dump: serde_json::Value,
}

pub fn assemble_report(inputs: ReportInputs<'_>, package_root: &Path) -> Result<ReproPackage> {
    let project = inputs.project;
    create_template(package_root, &project.name)?;
    extract_source_files(inputs.trace, project, package_root)?;

    for copy in &inputs.generated.copies {
        let from = inputs.generated_workspace.join(&copy.from);
        let bytes = fs::read(&from).map_err(|_| Error::MissingGeneratedFile(copy.from.clone()))?;
        write_bytes(&package_root.join(&copy.item.file_path), &bytes)?;
    }
    for gen in &inputs.generated.carried {
        for tpl in &gen.template_resources {
            let from = project.root_dir.join(tpl);
            let bytes = fs::read(&from).ctx(|| format!("reading {}", from.display()))?;
            write_bytes(&package_root.join(tpl), &bytes)?;
        }
    }

    let (pruned, external) =
        extract_pruned_libraries(inputs.trace, project, &project.group, package_root)?;
    let resources = materialize_resources(inputs.resource_plan, &project.root_dir, package_root)?;

    let mut config = inputs.config;
    config.dependency_coords = project
        .libraries
        .iter()
        .map(|l| &l.coord)
        .filter(|c| pruned.iter().any(|p| &p.coord == *c) || external.contains(c))
        .cloned()
        .collect();
    write_config_file(&package_root.join(CONFIG_FILE), &config.to_config_file())?;

    let keep = |origin: SourceOrigin| {
        project
            .sources()
            .filter(|(o, item)| *o == origin && inputs.trace.contains_source(&item.id))
            .map(|(_, item)| item.clone())
            .collect::<Vec<_>>()
    };
    let mut libraries = Vec::new();
    for lib in &project.libraries {
        if let Some(p) = pruned.iter().find(|p| p.coord == lib.coord) {
            let classes = lib
                .classes
                .iter()
                .filter(|c| p.kept_classes.contains(&c.name))
                .cloned()
                .collect();
            libraries.push(Library {
                coord: lib.coord.clone(),
                classes,
                archive_path: Some(p.archive_path.clone()),
            });
        } else if external.contains(&lib.coord) {
            libraries.push(Library {
                archive_path: None,
                ..lib.clone()
            });
        }
    }
    let generated_sources: Vec<_> = inputs
        .generated
        .copies
        .iter()
        .map(|c| c.item.clone())
        .collect();
    let manifest = Manifest {
        name: project.name.clone(),
        group: project.group.clone(),
        app_sources: keep(SourceOrigin::App),
        test_sources: keep(SourceOrigin::Test),
        libraries,
        resources,
        generators: inputs.generated.carried.clone(),
        config_files: vec![CONFIG_FILE.into()],
        source_roots: if generated_sources.is_empty() {
            vec![]
        } else {
            vec![GEN_ROOT.into()]
        },
        generated_sources,
    };
    manifest.write(package_root)?;

    let provenance = Provenance {
        project: project.name.clone(),
        test_id: inputs.test_id.to_string(),
        options: inputs.options,
        expected: inputs.outcome.clone(),
    };
    crate::backend::write_json(&package_root.join(EXPECTED_FILE), &provenance)?;
    crate::backend::write_json(&package_root.join(TRACE_FILE), &inputs.trace_dump)?;
    crate::backend::write_json(&package_root.join(PLAN_FILE), inputs.resource_plan)?;

    Ok(ReproPackage {
        root: package_root.to_path_buf(),
        manifest,
        config,
        pruned_libraries: pruned,
        external_coords: external,
        provenance,
    })
}
