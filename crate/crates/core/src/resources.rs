//! Resource accesses observed during a test run, classified into what a
//! package must carry: files with content, empty stand-ins for files that
//! were only listed, and nothing for files the build itself produced.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::{CLASSES_DIR, RESOURCE_ROOT};
use crate::error::{IoContext, Result};
use crate::fsutil::write_bytes;
use crate::model::{ResourceEvent, ResourceEventKind};

/// Paths are relative to the resource root (`src/main/res` in a project,
/// `target/classes` at run time).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourcePlan {
    pub extract_with_content: BTreeSet<String>,
    pub dummy_empty: BTreeSet<String>,
    pub excluded_generated: BTreeSet<String>,
    /// Listed directories, recreated even when nothing inside is kept.
    #[serde(default)]
    pub retained_dirs: BTreeSet<String>,
}

impl ResourcePlan {
    pub fn is_empty(&self) -> bool {
        self.extract_with_content.is_empty()
            && self.dummy_empty.is_empty()
            && self.retained_dirs.is_empty()
    }
}

fn same_bytes(a: &Path, b: &Path) -> bool {
    match (fs::read(a), fs::read(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// Classifies test-time resource events.
///
/// `copied` holds the workspace paths ProcessResources produced,
/// `original_root` is the project the resources came from and `workspace`
/// the one the test ran in.
pub fn classify_resource_events(
    events: &[ResourceEvent],
    copied: &BTreeSet<String>,
    original_root: &Path,
    workspace: &Path,
) -> Result<ResourcePlan> {
    let prefix = format!("{CLASSES_DIR}/");
    let source_root = original_root.join(RESOURCE_ROOT);
    let mut plan = ResourcePlan::default();
    let mut listed = Vec::new();
    let mut read = BTreeSet::new();

    for event in events {
        let Some(rel) = event.path.strip_prefix(&prefix) else {
            continue;
        };
        let source = source_root.join(rel);
        let traceable = copied.contains(&event.path)
            && match event.kind {
                ResourceEventKind::FileRead => {
                    source.is_file() && same_bytes(&source, &workspace.join(&event.path))
                }
                ResourceEventKind::DirList => source.is_dir(),
            };
        if event.kind == ResourceEventKind::FileRead {
            read.insert(rel.to_string());
        }
        match (traceable, event.kind) {
            (false, _) => {
                plan.excluded_generated.insert(rel.to_string());
            }
            (true, ResourceEventKind::FileRead) => {
                plan.extract_with_content.insert(rel.to_string());
            }
            (true, ResourceEventKind::DirList) => {
                plan.retained_dirs.insert(rel.to_string());
                listed.push((rel.to_string(), source));
            }
        }
    }

    for (rel, dir) in listed {
        let mut children: Vec<_> = fs::read_dir(&dir)
            .ctx(|| format!("listing {}", dir.display()))?
            .collect::<std::io::Result<_>>()
            .ctx(|| format!("listing {}", dir.display()))?;
        children.sort_by_key(|e| e.file_name());
        for child in children {
            if !child
                .file_type()
                .ctx(|| format!("inspecting {}", child.path().display()))?
                .is_file()
            {
                continue;
            }
            let child_rel = format!("{rel}/{}", child.file_name().to_string_lossy());
            if !read.contains(&child_rel) {
                plan.dummy_empty.insert(child_rel);
            }
        }
    }
    plan.excluded_generated
        .retain(|p| !plan.extract_with_content.contains(p));
    Ok(plan)
}

/// Writes the planned resource tree into `package_root/src/main/res` and
/// returns the package-relative paths it created.
pub fn materialize_resources(
    plan: &ResourcePlan,
    original_root: &Path,
    package_root: &Path,
) -> Result<Vec<String>> {
    let mut created = Vec::new();
    let dest = |rel: &str| format!("{RESOURCE_ROOT}/{rel}");
    for rel in &plan.extract_with_content {
        let from = original_root.join(RESOURCE_ROOT).join(rel);
        let bytes = fs::read(&from).ctx(|| format!("reading {}", from.display()))?;
        write_bytes(&package_root.join(dest(rel)), &bytes)?;
        created.push(dest(rel));
    }
    for rel in &plan.dummy_empty {
        write_bytes(&package_root.join(dest(rel)), b"")?;
        created.push(dest(rel));
    }
    for rel in &plan.retained_dirs {
        let dir = package_root.join(dest(rel));
        fs::create_dir_all(&dir).ctx(|| format!("creating {}", dir.display()))?;
    }
    created.sort();
    Ok(created)
}
