//! Ready-made MiniBuild projects: two small hand-written scenarios and a
//! seeded generator for randomized corpora.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::{
    conventional_source_path, render_source, write_archive, ConfigFile, DeclaredFailure,
    Dependency, Generator, GeneratorKind, Library, LibraryClass, Manifest, Phase, PluginCategory,
    PluginConfig, Ref, Setting, SourceItem, APP_ROOT, RESOURCE_ROOT, TEST_ROOT,
};
use crate::error::{IoContext, Result};
use crate::model::LibCoord;

/// Placeholder replaced by the absolute project root when a fixture is
/// written, so configurations carry machine-specific paths like real ones.
pub const ROOT_TOKEN: &str = "@ROOT@";

pub const PROJECT_GROUP: &str = "com.acme.app";

/// What a generated project was built to exercise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Traits {
    pub plugin_gated: bool,
    pub resource_message: bool,
    pub generators: bool,
    pub annotation: bool,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub manifest: Manifest,
    pub configs: Vec<ConfigFile>,
    /// Extra files (resources, templates) by workspace-relative path.
    pub files: BTreeMap<String, Vec<u8>>,
    /// Directories that must exist even when empty.
    pub dirs: BTreeSet<String>,
    pub failing_test: String,
    pub traits: Traits,
}

impl Fixture {
    fn new(name: &str, failing_test: &str) -> Self {
        Fixture {
            manifest: Manifest {
                name: name.to_string(),
                group: PROJECT_GROUP.to_string(),
                app_sources: vec![],
                test_sources: vec![],
                libraries: vec![],
                resources: vec![],
                generators: vec![],
                config_files: vec![],
                source_roots: vec![],
                generated_sources: vec![],
            },
            configs: vec![],
            files: BTreeMap::new(),
            dirs: BTreeSet::new(),
            failing_test: failing_test.to_string(),
            traits: Traits::default(),
        }
    }

    /// Number of source items plus library classes.
    pub fn item_count(&self) -> usize {
        let m = &self.manifest;
        m.app_sources.len()
            + m.test_sources.len()
            + m.generators.iter().map(|g| g.produces.len()).sum::<usize>()
            + m.libraries.iter().map(|l| l.classes.len()).sum::<usize>()
    }

    pub fn write(&self, root: &Path) -> Result<()> {
        fs::create_dir_all(root).ctx(|| format!("creating {}", root.display()))?;
        let abs = root
            .canonicalize()
            .ctx(|| format!("resolving {}", root.display()))?;
        let abs = abs.to_string_lossy();

        let mut manifest = self.manifest.clone();
        manifest.resources = self
            .files
            .keys()
            .filter(|p| p.starts_with(&format!("{RESOURCE_ROOT}/")))
            .cloned()
            .collect();
        manifest.config_files = self.configs.iter().map(|c| c.path.clone()).collect();
        manifest.write(root)?;

        for config in &self.configs {
            let text = serde_json::to_string_pretty(config)?.replace(ROOT_TOKEN, &abs);
            put(root, &config.path, format!("{text}\n").as_bytes())?;
        }
        for item in manifest.app_sources.iter().chain(&manifest.test_sources) {
            put(root, &item.file_path, render_source(item).as_bytes())?;
        }
        for lib in &manifest.libraries {
            if let Some(path) = &lib.archive_path {
                write_archive(&root.join(path), &lib.classes)?;
            }
        }
        for (path, bytes) in &self.files {
            put(root, path, bytes)?;
        }
        for dir in &self.dirs {
            let d = root.join(dir);
            fs::create_dir_all(&d).ctx(|| format!("creating {}", d.display()))?;
        }
        Ok(())
    }
}

fn put(root: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).ctx(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&path, bytes).ctx(|| format!("writing {}", path.display()))
}

fn app(id: &str) -> SourceItem {
    SourceItem::new(id, &conventional_source_path(APP_ROOT, id))
}

fn test(id: &str) -> SourceItem {
    SourceItem::new(id, &conventional_source_path(TEST_ROOT, id))
}

fn generated(root: &str, id: &str) -> SourceItem {
    SourceItem::new(id, &conventional_source_path(root, id))
}

fn src(id: &str) -> Ref {
    Ref::source(id)
}

fn failure(kind: &str, message: &str) -> Option<DeclaredFailure> {
    Some(DeclaredFailure {
        failure_type: kind.to_string(),
        message: message.to_string(),
    })
}

fn coord(group: &str, artifact: &str, version: &str) -> LibCoord {
    LibCoord::new(group, artifact, version).expect("fixture coordinates are valid")
}

fn library(coord: LibCoord, classes: Vec<LibraryClass>) -> Library {
    let archive = format!("libs/{}-{}.archive", coord.artifact, coord.version);
    Library {
        coord,
        classes,
        archive_path: Some(archive),
    }
}

fn plugin(
    id: &str,
    phases: &[Phase],
    category: PluginCategory,
    settings: &[(&str, &str)],
) -> PluginConfig {
    PluginConfig {
        id: id.to_string(),
        phases: phases.iter().copied().collect(),
        category,
        settings: settings
            .iter()
            .map(|(k, v)| (k.to_string(), Setting::Value(v.to_string())))
            .collect(),
    }
}

fn compiler_plugin() -> PluginConfig {
    plugin(
        "compiler",
        &[Phase::Compile, Phase::TestCompile],
        PluginCategory::Build,
        &[
            ("out", "${project.dir}/target"),
            ("release", "${java.release}"),
        ],
    )
}

fn direct(coord: &LibCoord) -> Dependency {
    Dependency {
        coord: coord.clone(),
        via: None,
    }
}

/// The three-task scenario: T1 statically uses A3, dynamically loads A2 and
/// an external logging class; A3 statically uses A5; A4 and the internal
/// class `util.U` are irrelevant.
pub fn fig3() -> Fixture {
    let mut fx = Fixture::new("fig3", "t.T1");
    let log = coord("org.apache.logging", "log", "1.0");
    let util = coord("com.acme", "util", "1.0");

    let mut t1 = test("t.T1");
    t1.static_refs = vec![src("app.A3")];
    t1.dynamic_loads = vec![
        src("app.A2"),
        Ref::library("org.apache.logging", "log", "log.Log"),
    ];
    t1.failure = failure("AssertFail", "expected 2 but was 3");
    fx.manifest.test_sources = vec![t1];

    let mut a3 = app("app.A3");
    a3.static_refs = vec![src("app.A5")];
    let mut a4 = app("app.A4");
    a4.static_refs = vec![src("app.A5"), Ref::library("com.acme", "util", "util.U")];
    fx.manifest.app_sources = vec![app("app.A2"), a3, a4, app("app.A5")];

    fx.manifest.libraries = vec![
        library(
            log.clone(),
            vec![LibraryClass {
                name: "log.Log".into(),
                loads: vec![],
            }],
        ),
        library(
            util.clone(),
            vec![LibraryClass {
                name: "util.U".into(),
                loads: vec![],
            }],
        ),
    ];

    let mut props = BTreeMap::new();
    props.insert("java.release".to_string(), "17".to_string());
    props.insert(
        "deploy.url".to_string(),
        "https://repo.acme.example/releases".to_string(),
    );
    props.insert(
        "checkstyle.config".to_string(),
        "acme_checks.xml".to_string(),
    );
    fx.configs = vec![ConfigFile {
        path: "config.mb.json".into(),
        plugins: vec![
            compiler_plugin(),
            plugin(
                "deployer",
                &[Phase::Deploy],
                PluginCategory::Build,
                &[("url", "${deploy.url}")],
            ),
            plugin(
                "checkstyle",
                &[Phase::Verify],
                PluginCategory::Analysis,
                &[("config", "${checkstyle.config}")],
            ),
        ],
        properties: props,
        dependencies: vec![direct(&log), direct(&util)],
    }];
    fx
}

/// The resource scenario: the test reads `data/data2.dat` (its failure
/// message comes from there), lists `form`, and a helper writes then reads
/// `out/out1.log`.
pub fn fig4() -> Fixture {
    let mut fx = Fixture::new("fig4", "t.ResourceTest");
    fx.traits.resource_message = true;

    let mut helper = app("app.Loader");
    helper.resource_writes = vec!["out/out1.log".into()];
    helper.resource_reads = vec!["form".into(), "out".into(), "out/out1.log".into()];
    let mut t = test("t.ResourceTest");
    t.resource_reads = vec!["data/data2.dat".into()];
    t.dynamic_loads = vec![src("app.Loader")];
    t.failure = failure("AssertFail", "placeholder");
    t.message_from_resource = Some("data/data2.dat".into());
    fx.manifest.app_sources = vec![helper];
    fx.manifest.test_sources = vec![t];

    let res = |p: &str| format!("{RESOURCE_ROOT}/{p}");
    fx.files
        .insert(res("data/data1.dat"), b"unused data 1\n".to_vec());
    fx.files.insert(
        res("data/data2.dat"),
        b"checksum mismatch in data2.dat\nsecond line\n".to_vec(),
    );
    fx.files
        .insert(res("form/form1.fm"), b"form one\n".to_vec());
    fx.files
        .insert(res("form/form2.fm"), b"form two\n".to_vec());

    let mut props = BTreeMap::new();
    props.insert("java.release".to_string(), "17".to_string());
    fx.configs = vec![ConfigFile {
        path: "config.mb.json".into(),
        plugins: vec![compiler_plugin()],
        properties: props,
        dependencies: vec![],
    }];
    fx
}

/// Knobs for [`random`].
#[derive(Debug, Clone, Copy)]
pub struct Profile {
    pub max_items: usize,
    /// Every traced member is necessary: no library-internal loads that a
    /// package would need to carry untraced, no annotation processing.
    pub tight: bool,
}

impl Default for Profile {
    fn default() -> Self {
        Profile {
            max_items: 40,
            tight: false,
        }
    }
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn range(&mut self, lo: usize, hi: usize) -> usize {
        if hi <= lo {
            lo
        } else {
            self.rng.gen_range(lo..=hi)
        }
    }

    fn pick<'a, T>(&mut self, items: &'a [T]) -> Option<&'a T> {
        items.choose(&mut self.rng)
    }

    fn sample<T: Clone>(&mut self, items: &[T], n: usize) -> Vec<T> {
        items
            .choose_multiple(&mut self.rng, n.min(items.len()))
            .cloned()
            .collect()
    }
}

fn push_unique(list: &mut Vec<Ref>, r: Ref) {
    if !list.contains(&r) {
        list.push(r);
    }
}

/// A seeded random project. Roughly 30% of seeds gate items behind a
/// plugin, 30% take the failure message from a resource and 20% generate
/// sources (half of those also via annotation processing).
pub fn random(seed: u64, profile: &Profile) -> Fixture {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut fx = Fixture::new(&format!("rand{seed}"), "t.T0");
    fx.traits = Traits {
        plugin_gated: g.chance(0.3),
        resource_message: g.chance(0.3),
        generators: g.chance(0.2),
        annotation: false,
    };
    fx.traits.annotation = fx.traits.generators && !profile.tight && g.chance(0.5);

    let budget = g.range(5, profile.max_items.max(5));
    let n_tests = g.range(1, (budget / 6).clamp(1, 3));
    let n_template = if fx.traits.generators {
        g.range(1, 3)
    } else {
        0
    };
    let n_anno = if fx.traits.annotation {
        g.range(1, 2)
    } else {
        0
    };
    let n_lib = g.range(0, budget / 4);
    let n_app = budget
        .saturating_sub(n_tests + n_template + n_anno + n_lib)
        .max(2);

    // Libraries: 1-3 archives, alternating internal / external owners.
    let n_libs = if n_lib == 0 {
        0
    } else {
        g.range(1, 3.min(n_lib))
    };
    let mut libraries: Vec<Library> = Vec::new();
    for l in 0..n_libs {
        let c = if (l + seed as usize).is_multiple_of(2) {
            coord(
                "com.acme.lib",
                &format!("core{l}"),
                &format!("1.{}", g.range(0, 9)),
            )
        } else {
            coord(&format!("org.ext{l}"), &format!("ext{l}"), "2.0")
        };
        libraries.push(library(c, vec![]));
    }
    for i in 0..n_lib {
        let l = i % n_libs;
        let pkg = libraries[l].coord.artifact.clone();
        libraries[l].classes.push(LibraryClass {
            name: format!("{pkg}.C{i}"),
            loads: vec![],
        });
    }
    let lib_refs: Vec<Ref> = libraries
        .iter()
        .flat_map(|l| {
            l.classes
                .iter()
                .map(|c| Ref::library(&l.coord.group, &l.coord.artifact, &c.name))
        })
        .collect();
    if !profile.tight {
        for class in libraries.iter_mut().flat_map(|l| l.classes.iter_mut()) {
            if g.chance(0.35) {
                if let Some(r) = g.pick(&lib_refs).cloned() {
                    if r.qualified_name() != class.name {
                        class.loads.push(r);
                    }
                }
            }
        }
    }

    let pkgs = ["app.core", "app.util", "app.io", "app.model"];
    let mut apps: Vec<SourceItem> = (0..n_app)
        .map(|i| app(&format!("{}.A{i}", pkgs[i % pkgs.len()])))
        .collect();
    let mut tests: Vec<SourceItem> = (0..n_tests).map(|i| test(&format!("t.T{i}"))).collect();
    let mut templates: Vec<SourceItem> = (0..n_template)
        .map(|i| generated("gen/parser", &format!("parser.G{i}")))
        .collect();
    let mut annos: Vec<SourceItem> = (0..n_anno)
        .map(|i| generated("gen/anno", &format!("anno.N{i}")))
        .collect();

    let app_refs: Vec<Ref> = apps.iter().map(|a| src(&a.id)).collect();
    let gen_refs: Vec<Ref> = templates.iter().chain(&annos).map(|a| src(&a.id)).collect();

    // Resources.
    let res = |p: &str| format!("{RESOURCE_ROOT}/{p}");
    let mut res_files: Vec<String> = Vec::new();
    for (dir, count) in [
        ("data", g.range(1, 4)),
        ("form", g.range(0, 3)),
        ("conf/nested", g.range(0, 2)),
    ] {
        for i in 0..count {
            let p = format!("{dir}/f{i}.dat");
            fx.files.insert(
                res(&p),
                format!("{dir} payload {i} seed {seed}\n").into_bytes(),
            );
            res_files.push(p);
        }
    }
    if g.chance(0.2) {
        fx.dirs.insert(res("empty"));
    }
    let res_dirs: Vec<String> = {
        let mut d: BTreeSet<String> = res_files
            .iter()
            .filter_map(|p| p.rsplit_once('/').map(|(d, _)| d.to_string()))
            .collect();
        d.insert("conf".into());
        d.into_iter()
            .filter(|d| res_files.iter().any(|f| f.starts_with(&format!("{d}/"))))
            .collect()
    };
    let overwrite = "conf/overwrite.properties";
    fx.files.insert(res(overwrite), b"mode=original\n".to_vec());

    let random_reads = |g: &mut Gen, item: &mut SourceItem, p: f64| {
        if g.chance(p) {
            if g.chance(0.25) && !res_dirs.is_empty() {
                let d = g.pick(&res_dirs).unwrap().clone();
                item.resource_reads.push(d);
            } else if let Some(f) = g.pick(&res_files) {
                item.resource_reads.push(f.clone());
            }
        }
    };

    // Application items: static refs within app/gen/lib, occasional dynamic loads.
    for item in apps.iter_mut() {
        for _ in 0..g.range(0, 2) {
            let pool = if g.chance(0.25) && !lib_refs.is_empty() {
                &lib_refs
            } else {
                &app_refs
            };
            if let Some(r) = g.pick(pool).cloned() {
                if r.qualified_name() != item.id {
                    push_unique(&mut item.static_refs, r);
                }
            }
        }
        if g.chance(0.3) {
            let pool = if g.chance(0.3) && !lib_refs.is_empty() {
                &lib_refs
            } else {
                &app_refs
            };
            if let Some(r) = g.pick(pool).cloned() {
                if r.qualified_name() != item.id {
                    push_unique(&mut item.dynamic_loads, r);
                }
            }
        }
        random_reads(&mut g, item, 0.15);
        if g.chance(0.1) {
            item.resource_writes.push(format!("out/{}.log", item.id));
            item.resource_reads.push(format!("out/{}.log", item.id));
        }
    }
    if g.chance(0.15) {
        let i = g.range(0, apps.len() - 1);
        apps[i].resource_writes.push(overwrite.into());
        apps[i].resource_reads.push(overwrite.into());
    }

    for item in templates.iter_mut().chain(annos.iter_mut()) {
        if let Some(r) = g.pick(&app_refs).cloned() {
            push_unique(&mut item.static_refs, r);
        }
        if g.chance(0.3) && !lib_refs.is_empty() {
            push_unique(&mut item.static_refs, g.pick(&lib_refs).cloned().unwrap());
        }
    }

    // The failing test: static use of some app items, dynamic loads of
    // others, usually a resource read.
    let mut t0 = tests[0].clone();
    let n = g.range(1, 3);
    for r in g.sample(&app_refs, n) {
        push_unique(&mut t0.static_refs, r);
    }
    for _ in 0..g.range(1, 3) {
        let pool = if g.chance(0.3) && !lib_refs.is_empty() {
            &lib_refs
        } else {
            &app_refs
        };
        if let Some(r) = g.pick(pool).cloned() {
            push_unique(&mut t0.dynamic_loads, r);
        }
    }
    random_reads(&mut g, &mut t0, 0.9);
    t0.failure = failure(
        "AssertFail",
        &format!("expected {} but was {}", g.range(0, 9), g.range(10, 99)),
    );
    if fx.traits.resource_message {
        let path = "data/message.txt";
        fx.files.insert(
            res(path),
            format!("boom at step {}\ntrailing detail\n", g.range(1, 999)).into_bytes(),
        );
        t0.message_from_resource = Some(path.into());
    }
    if tests.len() > 1 && g.chance(0.4) {
        push_unique(&mut t0.static_refs, src(&tests[1].id));
    }
    tests[0] = t0;
    for t in tests.iter_mut().skip(1) {
        if let Some(r) = g.pick(&app_refs).cloned() {
            push_unique(&mut t.static_refs, r);
        }
        if g.chance(0.5) {
            t.failure = failure("AssertFail", "unrelated");
        }
    }

    // Generated code reached from the failing test through an app item.
    if !gen_refs.is_empty() {
        let host = g
            .pick(&tests[0].static_refs.clone())
            .cloned()
            .filter(|r| matches!(r, Ref::Source(id) if id.starts_with("app.")));
        let host_id = match host {
            Some(r) => r.qualified_name().to_string(),
            None => apps[0].id.clone(),
        };
        if !tests[0].static_refs.contains(&src(&host_id)) {
            tests[0].static_refs.push(src(&host_id));
        }
        let host = apps.iter_mut().find(|a| a.id == host_id).unwrap();
        for r in gen_refs.iter().take(2) {
            push_unique(&mut host.static_refs, r.clone());
        }
        if let Some(last) = annos.first() {
            push_unique(&mut host.static_refs, src(&last.id));
        }
    }

    // Plugin-gated items: direct static targets of the failing test.
    if fx.traits.plugin_gated {
        let targets: Vec<String> = tests[0]
            .static_refs
            .iter()
            .filter_map(|r| match r {
                Ref::Source(id) if id.starts_with("app.") => Some(id.clone()),
                _ => None,
            })
            .collect();
        let n = g.range(1, 2);
        for id in g.sample(&targets, n) {
            apps.iter_mut()
                .find(|a| a.id == id)
                .unwrap()
                .requires_plugin = Some("codegen".into());
        }
        if g.chance(0.3) {
            tests[0].requires_plugin = Some("testkit".into());
        }
    }

    fx.manifest.app_sources = apps;
    fx.manifest.test_sources = tests;
    if !templates.is_empty() {
        fx.files.insert(
            "src/main/templates/grammar.tpl".into(),
            b"grammar Expr;\n".to_vec(),
        );
        fx.manifest.generators.push(Generator {
            output_root: "gen/parser".into(),
            produces: templates,
            template_resources: vec!["src/main/templates/grammar.tpl".into()],
            kind: GeneratorKind::Template,
        });
    }
    if !annos.is_empty() {
        fx.files.insert(
            "src/main/templates/anno.tpl".into(),
            b"@Generated processor\n".to_vec(),
        );
        fx.manifest.generators.push(Generator {
            output_root: "gen/anno".into(),
            produces: annos,
            template_resources: vec!["src/main/templates/anno.tpl".into()],
            kind: GeneratorKind::AnnotationProcessing,
        });
    }
    fx.manifest.libraries = libraries;
    fx.configs = random_configs(&mut g, &fx);
    fx
}

fn random_configs(g: &mut Gen, fx: &Fixture) -> Vec<ConfigFile> {
    let n_files = g.range(1, 3);
    let mut files: Vec<ConfigFile> = (0..n_files)
        .map(|i| ConfigFile {
            path: if i + 1 == n_files {
                "config.mb.json".into()
            } else {
                format!("build/parent{i}.mb.json")
            },
            plugins: vec![],
            properties: BTreeMap::new(),
            dependencies: vec![],
        })
        .collect();

    let mut all_props: BTreeMap<&str, String> = BTreeMap::new();
    all_props.insert("java.release", "17".into());
    all_props.insert("encoding", "UTF-8".into());
    all_props.insert("surefire.forks", format!("{}", g.range(1, 4)));
    all_props.insert("deploy.url", "https://repo.acme.example/releases".into());
    all_props.insert("checkstyle.rules", "acme_checks.xml".into());
    all_props.insert("team.email", "build-team@acme.example".into());
    all_props.insert("release.notes", format!("{ROOT_TOKEN}/docs/RELEASE.md"));
    for (key, value) in &all_props {
        let owner = g.range(0, n_files - 1);
        files[owner]
            .properties
            .insert(key.to_string(), value.clone());
        // Occasionally an earlier file declares a value a later one overrides.
        if owner > 0 && g.chance(0.3) {
            files[0]
                .properties
                .insert(key.to_string(), "parent-default".into());
        }
    }

    let mut plugins = vec![
        PluginConfig {
            settings: [
                (
                    "out".to_string(),
                    Setting::Value("${project.dir}/target".into()),
                ),
                (
                    "release".to_string(),
                    Setting::Value("${java.release}".into()),
                ),
                (
                    "basedir".to_string(),
                    Setting::Value(format!("{ROOT_TOKEN}/src/main")),
                ),
                (
                    "flags".to_string(),
                    Setting::Tree(
                        [("debug".to_string(), Setting::Value("true".into()))]
                            .into_iter()
                            .collect(),
                    ),
                ),
            ]
            .into_iter()
            .collect(),
            ..compiler_plugin()
        },
        plugin(
            "surefire",
            &[Phase::Test],
            PluginCategory::Build,
            &[
                ("forks", "${surefire.forks}"),
                ("reports", "${project.dir}/target/reports"),
            ],
        ),
        plugin(
            "resources",
            &[Phase::ProcessResources],
            PluginCategory::Build,
            &[("encoding", "${encoding}")],
        ),
        plugin(
            "deployer",
            &[Phase::Deploy],
            PluginCategory::Build,
            &[("url", "${deploy.url}"), ("home", ROOT_TOKEN)],
        ),
        plugin(
            "checkstyle",
            &[Phase::Verify],
            PluginCategory::Analysis,
            &[("rules", "${checkstyle.rules}")],
        ),
        plugin(
            "spotbugs",
            &[Phase::Compile],
            PluginCategory::Analysis,
            &[("effort", "max"), ("notify", "${team.email}")],
        ),
    ];
    if fx
        .manifest
        .app_sources
        .iter()
        .any(|a| a.requires_plugin.is_some())
    {
        plugins.push(plugin(
            "codegen",
            &[Phase::GenerateSources, Phase::Compile],
            PluginCategory::Build,
            &[("grammar", "${project.dir}/src/main/templates")],
        ));
    }
    if fx
        .manifest
        .test_sources
        .iter()
        .any(|t| t.requires_plugin.is_some())
    {
        plugins.push(plugin(
            "testkit",
            &[Phase::TestCompile],
            PluginCategory::Build,
            &[("mode", "strict")],
        ));
    }
    for p in plugins {
        let owner = g.range(0, n_files - 1);
        if owner > 0 && g.chance(0.4) {
            // Parent declares a partial version the child completes/overrides.
            let mut partial = p.clone();
            partial
                .settings
                .insert("inherited".into(), Setting::Value("from-parent".into()));
            files[0].plugins.push(partial);
        }
        files[owner].plugins.push(p);
    }

    for lib in &fx.manifest.libraries {
        let owner = g.range(0, n_files - 1);
        if g.chance(0.3) {
            // A stale version pulled in transitively; the direct declaration must win.
            let stale = LibCoord {
                version: "0.1-stale".into(),
                ..lib.coord.clone()
            };
            let via = coord("org.transitive", "bundle", "3.0");
            files[0].dependencies.push(Dependency {
                coord: stale,
                via: Some(via),
            });
        }
        files[owner].dependencies.push(direct(&lib.coord));
    }
    files
}
