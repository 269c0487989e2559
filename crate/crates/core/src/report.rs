//! Package validation and reduction metrics.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{
    compute_effective_config, BuildBackend, ConfigFile, EffectiveConfig, Manifest, PluginConfig,
    MANIFEST_FILE, RESOURCE_ROOT,
};
use crate::error::{Error, IoContext, Result};
use crate::fsutil::{copy_project, list_files};
use crate::model::{is_internal, FailureOutcome, ItemKind, TaskKind};
use crate::reconstruct::{Provenance, EXPECTED_FILE};

pub const METRICS_FILE: &str = "report.metrics.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub valid: bool,
    pub original: FailureOutcome,
    pub reproduced: FailureOutcome,
    pub elapsed_ms: u64,
}

/// Exact comparison: both runs failed with the same type and message.
pub fn outcomes_match(original: &FailureOutcome, reproduced: &FailureOutcome) -> bool {
    original.is_failed() && reproduced.is_failed() && original == reproduced
}

fn corrupt(path: &Path, message: impl Into<String>) -> Error {
    Error::PackageCorrupt {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn read_provenance(package_root: &Path) -> Result<Provenance> {
    let path = package_root.join(EXPECTED_FILE);
    let text = fs::read_to_string(&path).map_err(|e| corrupt(&path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| corrupt(&path, e.to_string()))
}

/// Parses `root`, builds everything and runs `test_id`. Build errors are
/// reported as outcomes; only infrastructure failures are errors.
pub fn run_lifecycle(
    backend: &dyn BuildBackend,
    root: &Path,
    workspace: &Path,
    test_id: &str,
) -> Result<FailureOutcome> {
    let as_outcome = |e: Error| match e {
        Error::Io { .. } | Error::Json(_) => Err(e),
        other => Ok(FailureOutcome::build_error(
            other.kind_name(),
            &other.outcome_message(),
        )),
    };
    let project = match backend.parse_manifest(root) {
        Ok(p) => p,
        Err(e) => return as_outcome(e),
    };
    let config = backend.compute_effective_config(&project);
    let run = || -> Result<FailureOutcome> {
        backend.run_generate_sources(&project, workspace)?;
        backend.run_process_resources(&project, workspace)?;
        let app =
            project.sources_present(workspace, &[ItemKind::AppSource, ItemKind::GeneratedSource]);
        backend.run_compile(&project, workspace, &app, TaskKind::Compile, &config)?;
        let tests = project.sources_present(workspace, &[ItemKind::TestSource]);
        backend.run_compile(&project, workspace, &tests, TaskKind::TestCompile, &config)?;
        Ok(backend.run_test(&project, workspace, test_id, &config)?.0)
    };
    run().or_else(as_outcome)
}

/// Rebuilds the package in a private copy and compares the outcome with
/// the one recorded at creation time. The package itself is never touched.
pub fn validate_report(
    backend: &dyn BuildBackend,
    package_root: &Path,
    scratch: &Path,
) -> Result<ValidationResult> {
    let manifest = package_root.join(MANIFEST_FILE);
    if !manifest.is_file() {
        return Err(corrupt(&manifest, "missing manifest"));
    }
    let provenance = read_provenance(package_root)?;
    let started = Instant::now();
    let workspace = tempfile::tempdir_in(scratch)
        .ctx(|| format!("creating scratch in {}", scratch.display()))?;
    copy_project(package_root, workspace.path())?;
    let reproduced = run_lifecycle(
        backend,
        workspace.path(),
        workspace.path(),
        &provenance.test_id,
    )?;
    Ok(ValidationResult {
        valid: outcomes_match(&provenance.expected, &reproduced),
        original: provenance.expected,
        reproduced,
        elapsed_ms: started.elapsed().as_millis() as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetric {
    pub original_count: usize,
    pub kept_count: usize,
    pub percent_reduction: f64,
}

impl CategoryMetric {
    pub fn new(original: usize, kept: usize, valid: bool) -> Self {
        let percent_reduction = if !valid || original == 0 {
            0.0
        } else {
            (1.0 - kept as f64 / original as f64).clamp(0.0, 1.0)
        };
        CategoryMetric {
            original_count: original,
            kept_count: kept,
            percent_reduction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub internal_classes: CategoryMetric,
    pub source_classes: CategoryMetric,
    pub source_plus_internal: CategoryMetric,
    pub config_chars: CategoryMetric,
    pub resources: CategoryMetric,
}

/// Countable contents of a project or package directory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub internal_classes: usize,
    pub source_classes: usize,
    pub config_chars: usize,
    pub resources: usize,
}

/// Non-whitespace characters of the plugins and properties, serialized.
pub fn config_chars(plugins: &[PluginConfig], properties: &BTreeMap<String, String>) -> usize {
    #[derive(Serialize)]
    struct Counted<'a> {
        plugins: &'a [PluginConfig],
        properties: &'a BTreeMap<String, String>,
    }
    let text = serde_json::to_string(&Counted {
        plugins,
        properties,
    })
    .expect("configuration serializes");
    text.chars().filter(|c| !c.is_whitespace()).count()
}

/// Effective configuration of a directory's declared config files, read
/// without semantic checks.
fn lenient_effective_config(root: &Path, manifest: &Manifest) -> Result<EffectiveConfig> {
    let mut files = Vec::new();
    for rel in &manifest.config_files {
        let path = root.join(rel);
        let text = fs::read_to_string(&path).ctx(|| format!("reading {}", path.display()))?;
        let mut file: ConfigFile =
            serde_json::from_str(&text).map_err(|e| Error::ManifestSyntax {
                path: path.clone(),
                message: e.to_string(),
            })?;
        file.path = rel.clone();
        files.push(file);
    }
    let model = crate::backend::ProjectModel {
        name: manifest.name.clone(),
        group: manifest.group.clone(),
        app_sources: vec![],
        test_sources: vec![],
        libraries: vec![],
        resources: vec![],
        generators: vec![],
        config_files: files,
        source_roots: vec![],
        generated_sources: vec![],
        root_dir: root.to_path_buf(),
    };
    Ok(compute_effective_config(&model))
}

/// Counts a directory holding a project manifest. Library classes count as
/// internal when their group shares `project_group`'s organization.
pub fn count_items(root: &Path, project_group: &str) -> Result<Counts> {
    let manifest = Manifest::read(root)?;
    let internal_classes = manifest
        .libraries
        .iter()
        .filter(|l| is_internal(&l.coord, project_group))
        .map(|l| l.classes.len())
        .sum();
    let source_classes = manifest.app_sources.len()
        + manifest.test_sources.len()
        + manifest.generated_sources.len()
        + manifest
            .generators
            .iter()
            .map(|g| g.produces.len())
            .sum::<usize>();
    let cfg = lenient_effective_config(root, &manifest)?;
    Ok(Counts {
        internal_classes,
        source_classes,
        config_chars: config_chars(&cfg.plugins, &cfg.properties),
        resources: list_files(root, RESOURCE_ROOT)?.len(),
    })
}

pub fn compute_metrics(original: &Counts, kept: &Counts, valid: bool) -> Metrics {
    let m = |o, k| CategoryMetric::new(o, k, valid);
    Metrics {
        internal_classes: m(original.internal_classes, kept.internal_classes),
        source_classes: m(original.source_classes, kept.source_classes),
        source_plus_internal: m(
            original.source_classes + original.internal_classes,
            kept.source_classes + kept.internal_classes,
        ),
        config_chars: m(original.config_chars, kept.config_chars),
        resources: m(original.resources, kept.resources),
    }
}

/// `report.metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metrics: Metrics,
    pub validation: Option<ValidationResult>,
}
