//! Generated code: found through the source roots compilation touched and
//! shipped as plain source, so a package never reruns template generators.

use std::collections::BTreeSet;
use std::path::Path;

use crate::backend::{
    conventional_source_path, Generator, GeneratorKind, ProjectModel, SourceItem, SourceOrigin,
    APP_ROOT, TEST_ROOT,
};
use crate::error::{Error, Result};
use crate::model::{BuildRecord, FailureTrace, TaskKind};

/// Root that copied generated sources live under in a package.
pub const GEN_ROOT: &str = "src/gen";

/// Deduplicated source roots of the compile records, in first-seen order.
pub fn trace_source_roots<'a>(records: impl IntoIterator<Item = &'a BuildRecord>) -> Vec<String> {
    let mut roots: Vec<String> = Vec::new();
    for record in records {
        if !matches!(record.task, TaskKind::Compile | TaskKind::TestCompile) {
            continue;
        }
        for root in &record.source_roots {
            if !roots.contains(root) {
                roots.push(root.clone());
            }
        }
    }
    roots
}

/// A traced generated file to copy into the package.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCopy {
    /// The item as declared in the package, with its new path.
    pub item: SourceItem,
    /// Workspace-relative location of the generated file.
    pub from: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeneratedCode {
    pub copies: Vec<GeneratedCopy>,
    /// Annotation processors carried into the package, restricted to the
    /// traced items they produce.
    pub carried: Vec<Generator>,
}

impl GeneratedCode {
    pub fn is_empty(&self) -> bool {
        self.copies.is_empty() && self.carried.is_empty()
    }
}

/// Selects the traced generated items. `workspace` is where GenerateSources
/// ran, so the generated files can be found there.
pub fn extract_generated_sources(
    project: &ProjectModel,
    roots: &[String],
    trace: &FailureTrace,
    workspace: &Path,
) -> Result<GeneratedCode> {
    let generated_roots: Vec<&String> = roots
        .iter()
        .filter(|r| *r != APP_ROOT && *r != TEST_ROOT)
        .collect();
    let under_root = |path: &str| {
        generated_roots
            .iter()
            .any(|r| path.starts_with(&format!("{r}/")))
    };
    let traced: BTreeSet<&str> = trace
        .sources
        .iter()
        .map(|i| i.qualified_name.as_str())
        .collect();

    let mut code = GeneratedCode::default();
    let mut carried: Vec<(usize, Vec<SourceItem>)> = Vec::new();
    for (origin, item) in project.sources() {
        if !traced.contains(item.id.as_str()) || !under_root(&item.file_path) {
            continue;
        }
        if !workspace.join(&item.file_path).is_file() {
            return Err(Error::MissingGeneratedFile(item.file_path.clone()));
        }
        match origin {
            SourceOrigin::Generator(idx)
                if project.generators[idx].kind == GeneratorKind::AnnotationProcessing =>
            {
                match carried.iter_mut().find(|(i, _)| *i == idx) {
                    Some((_, items)) => items.push(item.clone()),
                    None => carried.push((idx, vec![item.clone()])),
                }
            }
            _ => code.copies.push(GeneratedCopy {
                item: SourceItem {
                    file_path: conventional_source_path(GEN_ROOT, &item.id),
                    ..item.clone()
                },
                from: item.file_path.clone(),
            }),
        }
    }
    code.carried = carried
        .into_iter()
        .map(|(idx, produces)| Generator {
            produces,
            ..project.generators[idx].clone()
        })
        .collect();
    Ok(code)
}
