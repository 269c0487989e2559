//! Small filesystem helpers shared by the pipeline stages.

use std::fs;
use std::path::Path;

use walkdir::WalkDir;

use crate::error::{Error, IoContext, Result};

/// Workspace-relative form of `path` with `/` separators.
pub(crate) fn rel_string(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

/// Copies the tree under `from` into `to`, skipping top-level entries for
/// which `skip` returns true.
pub(crate) fn copy_tree(from: &Path, to: &Path, skip: impl Fn(&str) -> bool) -> Result<()> {
    fs::create_dir_all(to).ctx(|| format!("creating {}", to.display()))?;
    let walker = WalkDir::new(from)
        .min_depth(1)
        .sort_by_file_name()
        .into_iter();
    let walker = walker.filter_entry(|e| e.depth() != 1 || !skip(&e.file_name().to_string_lossy()));
    for entry in walker {
        let entry =
            entry.map_err(|e| Error::io(format!("walking {}", from.display()), e.into()))?;
        let dest = to.join(
            entry
                .path()
                .strip_prefix(from)
                .expect("walk stays under root"),
        );
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dest).ctx(|| format!("creating {}", dest.display()))?;
        } else {
            fs::copy(entry.path(), &dest).ctx(|| format!("copying to {}", dest.display()))?;
        }
    }
    Ok(())
}

/// Copies a project, leaving build outputs behind.
pub(crate) fn copy_project(from: &Path, to: &Path) -> Result<()> {
    copy_tree(from, to, |name| name == "target")
}

/// Sorted workspace-relative paths of every file under `dir`.
pub(crate) fn list_files(root: &Path, dir: &str) -> Result<Vec<String>> {
    let base = root.join(dir);
    if !base.is_dir() {
        return Ok(Vec::new());
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(&base).sort_by_file_name() {
        let entry =
            entry.map_err(|e| Error::io(format!("walking {}", base.display()), e.into()))?;
        if entry.file_type().is_file() {
            files.push(rel_string(root, entry.path()));
        }
    }
    Ok(files)
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).ctx(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).ctx(|| format!("writing {}", path.display()))
}
