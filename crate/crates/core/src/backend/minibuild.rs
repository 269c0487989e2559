use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use walkdir::WalkDir;

use super::archive::{read_archive, Repository};
use super::{
    config, manifest, BuildBackend, DeclaredFailure, EffectiveConfig, GeneratorKind, LibraryClass,
    Phase, ProjectModel, Ref, SourceItem, SourceOrigin, CLASSES_DIR, RESOURCE_ROOT,
    TEST_CLASSES_DIR,
};
use crate::error::{Error, IoContext, Result};
use crate::model::{
    normalize_rel_path, BuildRecord, FailureOutcome, ItemKind, ItemRef, LibCoord, ResourceEvent,
    ResourceEventKind, TaskKind,
};

pub const BUILD_LOG: &str = "target/build.log";

/// Deterministic reference backend.
#[derive(Debug, Clone, Default)]
pub struct MiniBuild {
    repository: Option<Repository>,
}

impl MiniBuild {
    pub fn new() -> Self {
        MiniBuild::default()
    }

    /// Libraries declared without a local archive resolve from `repository`.
    pub fn with_repository(repository: Repository) -> Self {
        MiniBuild {
            repository: Some(repository),
        }
    }

    pub fn repository(&self) -> Option<&Repository> {
        self.repository.as_ref()
    }
}

/// Compiled form of a source item, written to `target/**/<pkg>/<Name>.cls`.
/// Holds exactly what execution needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassImage {
    id: String,
    kind: ItemKind,
    dynamic_loads: Vec<Ref>,
    resource_reads: Vec<String>,
    #[serde(default)]
    resource_writes: Vec<String>,
    failure: Option<DeclaredFailure>,
    message_from_resource: Option<String>,
}

pub fn class_file_path(output_dir: &str, id: &str) -> String {
    format!("{output_dir}/{}.cls", id.replace('.', "/"))
}

/// Human-readable source text for an item. MiniBuild takes item semantics
/// from the manifest; the file's presence is what the compiler searches for.
pub fn render_source(item: &SourceItem) -> String {
    let mut out = format!("class {} {{\n", item.id);
    for r in &item.static_refs {
        out.push_str(&format!("    uses {r};\n"));
    }
    for r in &item.dynamic_loads {
        out.push_str(&format!("    loads {r};\n"));
    }
    for p in &item.resource_writes {
        out.push_str(&format!("    writes \"{p}\";\n"));
    }
    for p in &item.resource_reads {
        out.push_str(&format!("    reads \"{p}\";\n"));
    }
    if let Some(plugin) = &item.requires_plugin {
        out.push_str(&format!("    @requires({plugin})\n"));
    }
    if let Some(path) = &item.message_from_resource {
        out.push_str(&format!("    message from \"{path}\";\n"));
    }
    if let Some(f) = &item.failure {
        out.push_str(&format!("    fails {} {:?};\n", f.failure_type, f.message));
    }
    out.push_str("}\n");
    out
}

struct BuildLog {
    path: PathBuf,
}

impl BuildLog {
    fn open(workspace: &Path) -> Result<Self> {
        let path = workspace.join(BUILD_LOG);
        let dir = path.parent().expect("log lives under target/");
        fs::create_dir_all(dir).ctx(|| format!("creating {}", dir.display()))?;
        Ok(BuildLog { path })
    }

    fn event(&self, task: TaskKind, event: &str, payload: serde_json::Value) -> Result<()> {
        let line = json!({ "task": task, "event": event, "payload": payload });
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .ctx(|| format!("opening {}", self.path.display()))?;
        writeln!(file, "{line}").ctx(|| format!("appending to {}", self.path.display()))
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).ctx(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).ctx(|| format!("writing {}", path.display()))
}

/// Archive contents by class name; `None` when no archive could be found.
type ArchiveClasses = Option<BTreeMap<String, LibraryClass>>;

/// Libraries visible to compilation and execution: the declared libraries
/// whose exact coordinate survived dependency mediation.
struct Classpath {
    by_key: BTreeMap<(String, String), (LibCoord, ArchiveClasses)>,
}

impl Classpath {
    fn open(
        project: &ProjectModel,
        workspace: &Path,
        config: &EffectiveConfig,
        repository: Option<&Repository>,
    ) -> Classpath {
        let mut by_key = BTreeMap::new();
        for coord in &config.mediated_dependencies {
            let Some(lib) = manifest::find_library(project, coord) else {
                continue;
            };
            let archive = match &lib.archive_path {
                Some(rel) => Some(workspace.join(rel)).filter(|p| p.is_file()),
                None => repository.and_then(|r| r.locate(coord)),
            };
            // An unreadable archive behaves like an absent one: every class misses.
            let classes = archive.and_then(|p| read_archive(&p).ok());
            by_key.insert(
                (coord.group.clone(), coord.artifact.clone()),
                (coord.clone(), classes),
            );
        }
        Classpath { by_key }
    }

    fn resolve(
        &self,
        group: &str,
        artifact: &str,
        class: &str,
    ) -> Option<(ItemRef, &LibraryClass)> {
        let (coord, classes) = self
            .by_key
            .get(&(group.to_string(), artifact.to_string()))?;
        let found = classes.as_ref()?.get(class)?;
        Some((ItemRef::library(coord.clone(), class), found))
    }
}

impl BuildBackend for MiniBuild {
    fn parse_manifest(&self, root: &Path) -> Result<ProjectModel> {
        manifest::parse_manifest(root)
    }

    fn compute_effective_config(&self, project: &ProjectModel) -> EffectiveConfig {
        config::compute_effective_config(project)
    }

    fn run_generate_sources(
        &self,
        project: &ProjectModel,
        workspace: &Path,
    ) -> Result<BuildRecord> {
        let task = TaskKind::GenerateSources;
        let mut record = BuildRecord::empty(task);
        if project.generators.is_empty() {
            return Ok(record);
        }
        let log = BuildLog::open(workspace)?;
        for gen in &project.generators {
            let mut banner = String::new();
            for tpl in &gen.template_resources {
                let path = workspace.join(tpl);
                let text = fs::read_to_string(&path).map_err(|e| Error::GeneratorFailure {
                    root: gen.output_root.clone(),
                    message: format!("template {tpl}: {e}"),
                })?;
                record.resource_events.push(ResourceEvent::new(
                    tpl,
                    ResourceEventKind::FileRead,
                    task,
                )?);
                banner.push_str(&format!(
                    "// from {tpl}: {}\n",
                    text.lines().next().unwrap_or("")
                ));
            }
            for item in &gen.produces {
                let body = format!("{banner}{}", render_source(item));
                write_file(&workspace.join(&item.file_path), body.as_bytes())?;
                record.workspace_outputs.insert(item.file_path.clone());
                if gen.kind == GeneratorKind::AnnotationProcessing {
                    record.annotation_outputs.insert(item.file_path.clone());
                }
            }
            record.add_source_root(&gen.output_root);
            log.event(
                task,
                "generator_run",
                json!({ "output_root": gen.output_root, "kind": gen.kind, "produced": gen.produces.len() }),
            )?;
        }
        Ok(record)
    }

    fn run_process_resources(
        &self,
        _project: &ProjectModel,
        workspace: &Path,
    ) -> Result<BuildRecord> {
        let task = TaskKind::ProcessResources;
        let mut record = BuildRecord::empty(task);
        let classes = workspace.join(CLASSES_DIR);
        fs::create_dir_all(&classes).ctx(|| format!("creating {}", classes.display()))?;
        let res_root = workspace.join(RESOURCE_ROOT);
        if !res_root.is_dir() {
            return Ok(record);
        }
        let log = BuildLog::open(workspace)?;
        for entry in WalkDir::new(&res_root).min_depth(1).sort_by_file_name() {
            let entry = entry
                .map_err(|e| Error::io(format!("walking {}", res_root.display()), e.into()))?;
            let rel = entry
                .path()
                .strip_prefix(&res_root)
                .expect("walk stays under root");
            let rel = rel.to_string_lossy().replace('\\', "/");
            let dest = classes.join(&rel);
            if entry.file_type().is_dir() {
                fs::create_dir_all(&dest).ctx(|| format!("creating {}", dest.display()))?;
            } else {
                fs::copy(entry.path(), &dest).ctx(|| format!("copying to {}", dest.display()))?;
            }
            record
                .workspace_outputs
                .insert(format!("{CLASSES_DIR}/{rel}"));
        }
        log.event(
            task,
            "resources_copied",
            json!({ "count": record.workspace_outputs.len() }),
        )?;
        Ok(record)
    }

    fn run_compile(
        &self,
        project: &ProjectModel,
        workspace: &Path,
        request: &BTreeSet<ItemRef>,
        task: TaskKind,
        config: &EffectiveConfig,
    ) -> Result<BuildRecord> {
        let out_dir = match task {
            TaskKind::Compile => CLASSES_DIR,
            TaskKind::TestCompile => TEST_CLASSES_DIR,
            other => {
                return Err(Error::InvalidRequest(format!(
                    "{other:?} is not a compile task"
                )))
            }
        };
        if task == TaskKind::Compile {
            if let Some(test) = request.iter().find(|i| i.kind == ItemKind::TestSource) {
                return Err(Error::InvalidRequest(format!(
                    "Compile cannot build test source {}",
                    test.qualified_name
                )));
            }
        }
        let mut record = BuildRecord::empty(task);
        if request.is_empty() {
            return Ok(record);
        }
        let log = BuildLog::open(workspace)?;
        let classpath = Classpath::open(project, workspace, config, self.repository.as_ref());
        let phase = Phase::of_task(task);

        // Already-compiled classes satisfy a reference without recompiling
        // their sources, exactly like classes on a compiler's classpath.
        let precompiled = |id: &str| {
            let in_dir = |dir: &str| workspace.join(class_file_path(dir, id)).is_file();
            match task {
                TaskKind::TestCompile => in_dir(TEST_CLASSES_DIR) || in_dir(CLASSES_DIR),
                _ => in_dir(CLASSES_DIR),
            }
        };

        let mut queue: VecDeque<String> = VecDeque::new();
        let mut scheduled: BTreeSet<String> = BTreeSet::new();
        for item in request {
            if item.kind == ItemKind::LibraryClass {
                return Err(Error::InvalidRequest(format!(
                    "cannot compile library class {}",
                    item.qualified_name
                )));
            }
            if scheduled.insert(item.qualified_name.clone()) {
                queue.push_back(item.qualified_name.clone());
            }
        }

        while let Some(id) = queue.pop_front() {
            let Some((origin, item)) = project.find_source(&id) else {
                return Err(Error::UnresolvedRef {
                    item: id.clone(),
                    missing: id,
                });
            };
            if !workspace.join(&item.file_path).is_file() {
                return Err(Error::UnresolvedRef {
                    item: id.clone(),
                    missing: item.file_path.clone(),
                });
            }
            if let Some(plugin) = &item.requires_plugin {
                if !config.plugin_attached(plugin, phase) {
                    return Err(Error::PluginMissing {
                        item: id.clone(),
                        plugin: plugin.clone(),
                    });
                }
            }
            record
                .referenced
                .insert(ItemRef::source(origin.kind(), &id));
            record.add_source_root(&project.root_of(origin, item));

            for r in &item.static_refs {
                match r {
                    Ref::Source(target) => {
                        let visible = project.find_source(target).filter(|(o, _)| {
                            !(task == TaskKind::Compile && *o == SourceOrigin::Test)
                        });
                        let Some((target_origin, target_item)) = visible else {
                            return Err(Error::UnresolvedRef {
                                item: id.clone(),
                                missing: r.to_string(),
                            });
                        };
                        record
                            .referenced
                            .insert(ItemRef::source(target_origin.kind(), target));
                        if scheduled.contains(target) || precompiled(target) {
                            continue;
                        }
                        if !workspace.join(&target_item.file_path).is_file() {
                            return Err(Error::UnresolvedRef {
                                item: id.clone(),
                                missing: r.to_string(),
                            });
                        }
                        scheduled.insert(target.clone());
                        queue.push_back(target.clone());
                    }
                    Ref::Library {
                        group,
                        artifact,
                        class,
                    } => {
                        let Some((lib_ref, _)) = classpath.resolve(group, artifact, class) else {
                            return Err(Error::UnresolvedRef {
                                item: id.clone(),
                                missing: r.to_string(),
                            });
                        };
                        record.referenced.insert(lib_ref);
                    }
                }
            }

            let image = ClassImage {
                id: id.clone(),
                kind: origin.kind(),
                dynamic_loads: item.dynamic_loads.clone(),
                resource_reads: item.resource_reads.clone(),
                resource_writes: item.resource_writes.clone(),
                failure: item.failure.clone(),
                message_from_resource: item.message_from_resource.clone(),
            };
            let class_path = class_file_path(out_dir, &id);
            let mut body = serde_json::to_string_pretty(&image)?;
            body.push('\n');
            write_file(&workspace.join(&class_path), body.as_bytes())?;
            record.workspace_outputs.insert(class_path);
            log.event(task, "compiled", json!({ "item": id }))?;
        }
        log.event(task, "referenced", json!({ "items": record.referenced.iter().map(ToString::to_string).collect::<Vec<_>>() }))?;
        Ok(record)
    }

    fn run_test(
        &self,
        project: &ProjectModel,
        workspace: &Path,
        test_id: &str,
        config: &EffectiveConfig,
    ) -> Result<(FailureOutcome, BuildRecord)> {
        if project.test(test_id).is_none() {
            return Err(Error::UnknownTest(test_id.to_string()));
        }
        let log = BuildLog::open(workspace)?;
        let classpath = Classpath::open(project, workspace, config, self.repository.as_ref());
        let mut run = TestRun {
            workspace,
            classpath: &classpath,
            log: &log,
            record: BuildRecord::empty(TaskKind::Test),
        };
        let outcome = match run.execute(test_id) {
            Ok(outcome) => outcome,
            Err(Abort::Failure(outcome)) => outcome,
            Err(Abort::Io(e)) => return Err(e),
        };
        log.event(TaskKind::Test, "outcome", json!(outcome))?;
        Ok((outcome, run.record))
    }
}

enum Abort {
    Failure(FailureOutcome),
    Io(Error),
}

impl From<Error> for Abort {
    fn from(e: Error) -> Self {
        Abort::Io(e)
    }
}

struct TestRun<'a> {
    workspace: &'a Path,
    classpath: &'a Classpath,
    log: &'a BuildLog,
    record: BuildRecord,
}

impl TestRun<'_> {
    fn execute(&mut self, test_id: &str) -> Result<FailureOutcome, Abort> {
        let Some(image) = self.find_image(test_id)? else {
            return Err(Abort::Failure(FailureOutcome::failed(
                "ClassNotFound",
                test_id,
            )));
        };
        self.load_source(image.clone())?;
        let Some(failure) = &image.failure else {
            return Ok(FailureOutcome::passed());
        };
        let mut message = failure.message.clone();
        if let Some(path) = &image.message_from_resource {
            let full = self.read_resource(path)?;
            let text = fs::read_to_string(&full)
                .map_err(|e| Error::io(format!("reading {}", full.display()), e))?;
            message = text.lines().next().unwrap_or("").to_string();
        }
        Ok(FailureOutcome::failed(&failure.failure_type, &message))
    }

    fn find_image(&self, id: &str) -> Result<Option<ClassImage>> {
        for dir in [TEST_CLASSES_DIR, CLASSES_DIR] {
            let path = self.workspace.join(class_file_path(dir, id));
            if path.is_file() {
                let text =
                    fs::read_to_string(&path).ctx(|| format!("reading {}", path.display()))?;
                return Ok(Some(serde_json::from_str(&text)?));
            }
        }
        Ok(None)
    }

    fn load(&mut self, r: &Ref) -> Result<(), Abort> {
        match r {
            Ref::Source(id) => {
                if self
                    .record
                    .referenced
                    .iter()
                    .any(|i| i.lib_coord.is_none() && &i.qualified_name == id)
                {
                    return Ok(());
                }
                match self.find_image(id)? {
                    Some(image) => self.load_source(image),
                    None => Err(Abort::Failure(FailureOutcome::failed("ClassNotFound", id))),
                }
            }
            Ref::Library {
                group,
                artifact,
                class,
            } => {
                let Some((item, lib_class)) = self.classpath.resolve(group, artifact, class) else {
                    return Err(Abort::Failure(FailureOutcome::failed(
                        "ClassNotFound",
                        class,
                    )));
                };
                if !self.record.referenced.insert(item.clone()) {
                    return Ok(());
                }
                self.log.event(
                    TaskKind::Test,
                    "loaded",
                    json!({ "item": item.to_string() }),
                )?;
                for next in &lib_class.loads {
                    self.load(next)?;
                }
                Ok(())
            }
        }
    }

    fn load_source(&mut self, image: ClassImage) -> Result<(), Abort> {
        let item = ItemRef::source(image.kind, &image.id);
        if !self.record.referenced.insert(item.clone()) {
            return Ok(());
        }
        self.log.event(
            TaskKind::Test,
            "loaded",
            json!({ "item": item.to_string() }),
        )?;
        for path in &image.resource_writes {
            self.write_resource(&image.id, path)?;
        }
        for path in &image.resource_reads {
            self.read_resource(path)?;
        }
        for next in &image.dynamic_loads {
            self.load(next)?;
        }
        Ok(())
    }

    fn classpath_path(path: &str) -> Result<String> {
        Ok(format!("{CLASSES_DIR}/{}", normalize_rel_path(path)?))
    }

    fn read_resource(&mut self, path: &str) -> Result<PathBuf, Abort> {
        let rel = Self::classpath_path(path)?;
        let full = self.workspace.join(&rel);
        let kind = if full.is_dir() {
            ResourceEventKind::DirList
        } else if full.is_file() {
            ResourceEventKind::FileRead
        } else {
            return Err(Abort::Failure(FailureOutcome::failed(
                "ResourceNotFound",
                path,
            )));
        };
        self.record
            .resource_events
            .push(ResourceEvent::new(&rel, kind, TaskKind::Test)?);
        self.log.event(
            TaskKind::Test,
            "resource",
            json!({ "path": rel, "kind": kind }),
        )?;
        Ok(full)
    }

    fn write_resource(&mut self, writer: &str, path: &str) -> Result<(), Abort> {
        let rel = Self::classpath_path(path)?;
        let full = self.workspace.join(&rel);
        // Record created directories too so they classify as generated.
        let mut created = Vec::new();
        let mut dir = full.parent();
        while let Some(d) = dir {
            if d.exists() || !d.starts_with(self.workspace.join(CLASSES_DIR)) {
                break;
            }
            created.push(d.to_path_buf());
            dir = d.parent();
        }
        write_file(&full, format!("written by {writer}\n").as_bytes())?;
        for d in created {
            let rel_dir = d.strip_prefix(self.workspace).expect("under workspace");
            self.record
                .workspace_outputs
                .insert(rel_dir.to_string_lossy().replace('\\', "/"));
        }
        self.record.workspace_outputs.insert(rel);
        Ok(())
    }
}
