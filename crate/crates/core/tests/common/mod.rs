#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pexrep::backend::Repository;
use pexrep::fixtures::Fixture;
use pexrep::Pipeline;

pub struct Env {
    pub dir: tempfile::TempDir,
    pub pipeline: Pipeline,
}

impl Env {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = Pipeline::new(
            Repository::new(dir.path().join("repo")),
            dir.path().join("work"),
        );
        Env { dir, pipeline }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, fx: &Fixture, name: &str) -> PathBuf {
        let root = self.path(name);
        fx.write(&root).unwrap();
        root
    }
}

/// Every file under `root` with its bytes, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.unwrap();
        if entry.file_type().is_file() {
            let rel = entry
                .path()
                .strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .replace('\\', "/");
            out.insert(rel, fs::read(entry.path()).unwrap());
        }
    }
    out
}
