//! End-to-end orchestration: trace a failing test, extract what it needs,
//! assemble the package, validate it and measure the reduction.

use std::path::{Path, PathBuf};

use crate::backend::{write_json, BuildBackend, MiniBuild, Repository, RESOURCE_ROOT};
use crate::configslice::{select_required_plugins, slice_config, ConfigDocument};
use crate::error::{Error, IoContext, Result};
use crate::gencode::{extract_generated_sources, trace_source_roots, GeneratedCode};
use crate::model::{is_internal, TaskKind};
use crate::reconstruct::{
    assemble_report, ReportInputs, ReportOptions, ReproPackage, EXPECTED_FILE,
};
use crate::report::{
    compute_metrics, count_items, validate_report, MetricsReport, ValidationResult, METRICS_FILE,
};
use crate::resources::{classify_resource_events, ResourcePlan};
use crate::tracer::{hybrid_backward_trace, TraceOptions, TraceResult};

/// Result of [`Pipeline::create`].
#[derive(Debug)]
pub struct Created {
    pub package: ReproPackage,
    pub trace: TraceResult,
    pub report: MetricsReport,
}

impl Created {
    pub fn valid(&self) -> bool {
        self.report.validation.as_ref().is_some_and(|v| v.valid)
    }
}

/// MiniBuild plus the places it keeps shared artifacts and scratch
/// workspaces.
#[derive(Debug, Clone)]
pub struct Pipeline {
    backend: MiniBuild,
    repository: Repository,
    workdir: PathBuf,
}

impl Pipeline {
    pub fn new(repository: Repository, workdir: impl Into<PathBuf>) -> Self {
        Pipeline {
            backend: MiniBuild::with_repository(repository.clone()),
            repository,
            workdir: workdir.into(),
        }
    }

    pub fn backend(&self) -> &MiniBuild {
        &self.backend
    }

    fn scratch(&self) -> Result<tempfile::TempDir> {
        std::fs::create_dir_all(&self.workdir)
            .ctx(|| format!("creating {}", self.workdir.display()))?;
        tempfile::Builder::new()
            .prefix("pexrep-")
            .tempdir_in(&self.workdir)
            .ctx(|| format!("creating scratch in {}", self.workdir.display()))
    }

    pub fn create(
        &self,
        project_dir: &Path,
        test_id: &str,
        out_dir: &Path,
        options: ReportOptions,
    ) -> Result<Created> {
        let project = self.backend.parse_manifest(project_dir)?;
        if project.test(test_id).is_none() {
            return Err(Error::UnknownTest(test_id.to_string()));
        }
        let config = self.backend.compute_effective_config(&project);
        let scratch = self.scratch()?;
        let traced = hybrid_backward_trace(
            &self.backend,
            &project,
            test_id,
            &config,
            TraceOptions {
                dynamic: options.dynamic,
            },
            scratch.path(),
        )?;

        // Traced public libraries stay referenced by coordinate; make sure
        // the repository can serve them.
        for lib in &project.libraries {
            let traced_lib = traced
                .trace
                .libraries
                .iter()
                .any(|i| i.lib_coord.as_ref() == Some(&lib.coord));
            if traced_lib && !is_internal(&lib.coord, &project.group) {
                if let Some(rel) = &lib.archive_path {
                    self.repository
                        .install(&lib.coord, &project.root_dir.join(rel))?;
                }
            }
        }

        let config_doc = if options.config_slice {
            slice_config(
                &config,
                &select_required_plugins(&config),
                &project.root_dir,
            )
        } else {
            ConfigDocument::default_template()
        };
        let resource_plan = if options.resources {
            let copied = traced
                .records_of(1, TaskKind::ProcessResources)
                .flat_map(|r| r.workspace_outputs.iter().cloned())
                .collect();
            classify_resource_events(
                &traced.test_record().resource_events,
                &copied,
                &project.root_dir,
                &traced.workspace,
            )?
        } else {
            ResourcePlan::default()
        };
        let generated = if options.gencode {
            let roots = trace_source_roots(traced.records.iter().map(|r| &r.record));
            extract_generated_sources(&project, &roots, &traced.trace, &traced.workspace)?
        } else {
            GeneratedCode::default()
        };

        let package = assemble_report(
            ReportInputs {
                project: &project,
                test_id,
                trace: &traced.trace,
                outcome: &traced.outcome,
                config: config_doc,
                resource_plan: &resource_plan,
                generated: &generated,
                generated_workspace: &traced.workspace,
                options,
                trace_dump: serde_json::to_value(traced.dump(test_id))?,
            },
            out_dir,
        )?;

        let validation = validate_report(&self.backend, out_dir, scratch.path())?;
        let original = count_items(project_dir, &project.group)?;
        let kept = count_items(out_dir, &project.group)?;
        let report = MetricsReport {
            metrics: compute_metrics(&original, &kept, validation.valid),
            validation: Some(validation),
        };
        write_json(&out_dir.join(METRICS_FILE), &report)?;
        Ok(Created {
            package,
            trace: traced,
            report,
        })
    }

    pub fn validate(&self, package_dir: &Path) -> Result<ValidationResult> {
        let scratch = self.scratch()?;
        validate_report(&self.backend, package_dir, scratch.path())
    }

    /// Metrics of `package_dir` against `project_dir`. A directory without
    /// a recorded failure is treated as an invalid package.
    pub fn metrics(&self, project_dir: &Path, package_dir: &Path) -> Result<MetricsReport> {
        let original_manifest = crate::backend::Manifest::read(project_dir)?;
        let validation = if package_dir.join(EXPECTED_FILE).is_file() {
            Some(self.validate(package_dir)?)
        } else {
            None
        };
        let valid = validation.as_ref().is_some_and(|v| v.valid);
        let original = count_items(project_dir, &original_manifest.group)?;
        let kept = count_items(package_dir, &original_manifest.group)?;
        Ok(MetricsReport {
            metrics: compute_metrics(&original, &kept, valid),
            validation,
        })
    }
}

/// Package-relative paths of every file in a resource tree; handy for
/// comparing packages.
pub fn resource_tree(root: &Path) -> Result<Vec<String>> {
    crate::fsutil::list_files(root, RESOURCE_ROOT)
}
