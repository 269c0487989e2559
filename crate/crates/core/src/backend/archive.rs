//! Library archives and the artifact repository.
//!
//! An archive is a zip with one stored entry per class, `<pkg>/<Name>.cls`,
//! holding the class as JSON. Entries are sorted and carry a fixed
//! timestamp and mode so identical class sets give identical bytes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use super::LibraryClass;
use crate::error::{Error, IoContext, Result};
use crate::model::LibCoord;

fn archive_err(path: &Path, e: impl ToString) -> Error {
    Error::Archive {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn entry_name(class: &str) -> String {
    format!("{}.cls", class.replace('.', "/"))
}

pub fn write_archive(path: &Path, classes: &[LibraryClass]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).ctx(|| format!("creating {}", parent.display()))?;
    }
    let mut sorted: Vec<&LibraryClass> = classes.iter().collect();
    sorted.sort_by_key(|c| entry_name(&c.name));

    let file = File::create(path).ctx(|| format!("creating {}", path.display()))?;
    let mut zip = ZipWriter::new(file);
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644);
    for class in sorted {
        zip.start_file(entry_name(&class.name), options)
            .map_err(|e| archive_err(path, e))?;
        let mut body = serde_json::to_string_pretty(class)?;
        body.push('\n');
        zip.write_all(body.as_bytes())
            .ctx(|| format!("writing {}", path.display()))?;
    }
    zip.finish().map_err(|e| archive_err(path, e))?;
    Ok(())
}

/// Reads every class of an archive, keyed by qualified name.
pub fn read_archive(path: &Path) -> Result<BTreeMap<String, LibraryClass>> {
    let file = File::open(path).ctx(|| format!("opening {}", path.display()))?;
    let mut zip = ZipArchive::new(file).map_err(|e| archive_err(path, e))?;
    let mut classes = BTreeMap::new();
    for i in 0..zip.len() {
        let mut entry = zip.by_index(i).map_err(|e| archive_err(path, e))?;
        if entry.is_dir() {
            continue;
        }
        let mut body = String::new();
        entry
            .read_to_string(&mut body)
            .ctx(|| format!("reading {}", path.display()))?;
        let class: LibraryClass = serde_json::from_str(&body).map_err(|e| archive_err(path, e))?;
        if entry.name() != entry_name(&class.name) {
            return Err(archive_err(
                path,
                format!("entry {} holds class {}", entry.name(), class.name),
            ));
        }
        classes.insert(class.name.clone(), class);
    }
    Ok(classes)
}

/// Stand-in for a public artifact repository: archives addressed by
/// coordinate under `<root>/<group>/<artifact>/<version>/`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repository {
    root: PathBuf,
}

impl Repository {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Repository { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, coord: &LibCoord) -> PathBuf {
        self.root
            .join(&coord.group)
            .join(&coord.artifact)
            .join(&coord.version)
            .join(format!("{}-{}.archive", coord.artifact, coord.version))
    }

    pub fn locate(&self, coord: &LibCoord) -> Option<PathBuf> {
        Some(self.path_of(coord)).filter(|p| p.is_file())
    }

    /// Publishes `archive` under `coord`. Publishing identical bytes again
    /// is a no-op.
    pub fn install(&self, coord: &LibCoord, archive: &Path) -> Result<PathBuf> {
        let dest = self.path_of(coord);
        let bytes = fs::read(archive).ctx(|| format!("reading {}", archive.display()))?;
        if fs::read(&dest).ok().as_deref() == Some(bytes.as_slice()) {
            return Ok(dest);
        }
        let parent = dest.parent().expect("repository path has a parent");
        fs::create_dir_all(parent).ctx(|| format!("creating {}", parent.display()))?;
        // Write-then-rename so concurrent installers never expose a torn file.
        let tmp = tempfile::NamedTempFile::new_in(parent)
            .ctx(|| format!("staging in {}", parent.display()))?;
        fs::write(tmp.path(), &bytes).ctx(|| format!("writing {}", tmp.path().display()))?;
        tmp.persist(&dest)
            .map_err(|e| Error::io(format!("publishing {}", dest.display()), e.error))?;
        Ok(dest)
    }
}
