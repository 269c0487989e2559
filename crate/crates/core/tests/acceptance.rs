//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use common::{oracle, snapshot, Env};
use pexrep::backend::{read_archive, Manifest};
use pexrep::fixtures::{self, Fixture, Profile};
use pexrep::model::{is_internal, ItemRef, LibCoord};
use pexrep::reconstruct::{Provenance, EXPECTED_FILE};
use pexrep::report::METRICS_FILE;
use pexrep::ReportOptions;

const CORPUS_SIZE: u64 = 200;
const CORPUS_BASE_SEED: u64 = 1_000;
const TIGHT_COUNT: u64 = 25;
const TIGHT_BASE_SEED: u64 = 50_000;
const FIG3_BUDGET: Duration = Duration::from_secs(1);
const CORPUS_BUDGET: Duration = Duration::from_secs(120);
const ORACLE_MAX_ITEMS: usize = 12;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Outcome {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(detail)) => Outcome {
            name,
            pass: true,
            detail,
        },
        Ok(Err(detail)) => Outcome {
            name,
            pass: false,
            detail,
        },
        Err(p) => {
            let detail = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome {
                name,
                pass: false,
                detail: format!("panicked: {detail}"),
            }
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn golden_fig3() -> Result<String, String> {
    let env = Env::new();
    let project = env.write(&fixtures::fig3(), "fig3");
    let out = env.path("pkg");
    let started = Instant::now();
    let created = env
        .pipeline
        .create(&project, "t.T1", &out, ReportOptions::default())
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();

    let t = &created.trace.trace;
    let ids = |set: &std::collections::BTreeSet<ItemRef>| {
        set.iter()
            .map(|i| i.qualified_name.clone())
            .collect::<Vec<_>>()
    };
    ensure(ids(&t.tests) == ["t.T1"], || {
        format!("T = {:?}", ids(&t.tests))
    })?;
    ensure(ids(&t.sources) == ["app.A2", "app.A3", "app.A5"], || {
        format!("S = {:?}", ids(&t.sources))
    })?;
    let log = ItemRef::library(
        LibCoord::new("org.apache.logging", "log", "1.0").unwrap(),
        "log.Log",
    );
    ensure(t.libraries == [log].into(), || {
        format!("L = {:?}", ids(&t.libraries))
    })?;

    let files = snapshot(&out);
    ensure(!files.keys().any(|p| p.contains("A4")), || {
        "A4 leaked into the package".into()
    })?;
    let manifest = Manifest::read(&out).map_err(|e| e.to_string())?;
    let has_u = manifest
        .libraries
        .iter()
        .any(|l| l.classes.iter().any(|c| c.name == "util.U"));
    ensure(
        !has_u && !out.join("libs/util-1.0.archive").exists(),
        || "util.U leaked into the package".into(),
    )?;
    ensure(created.valid(), || {
        format!("invalid: {:?}", created.report.validation)
    })?;
    ensure(elapsed < FIG3_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "trace exact, A4/util.U pruned, valid, {} ms",
        elapsed.as_millis()
    ))
}

fn golden_fig4() -> Result<String, String> {
    let env = Env::new();
    let project = env.write(&fixtures::fig4(), "fig4");
    let out = env.path("pkg");
    let created = env
        .pipeline
        .create(&project, "t.ResourceTest", &out, ReportOptions::default())
        .map_err(|e| e.to_string())?;
    let tree: BTreeMap<String, Vec<u8>> = snapshot(&out)
        .into_iter()
        .filter(|(p, _)| p.starts_with("src/main/res/"))
        .collect();
    let original = fs::read(project.join("src/main/res/data/data2.dat")).unwrap();
    let expected: BTreeMap<String, Vec<u8>> = [
        ("src/main/res/data/data2.dat".to_string(), original),
        ("src/main/res/form/form1.fm".to_string(), vec![]),
        ("src/main/res/form/form2.fm".to_string(), vec![]),
    ]
    .into();
    ensure(tree == expected, || {
        format!("resource tree {:?}", tree.keys().collect::<Vec<_>>())
    })?;
    let res = out.join("src/main/res");
    ensure(
        !res.join("data/data1.dat").exists() && !res.join("out").exists(),
        || "data1 or out/ present".into(),
    )?;
    ensure(created.valid(), || {
        format!("invalid: {:?}", created.report.validation)
    })?;
    Ok("resource tree exact".into())
}

struct CorpusRun {
    seed: u64,
    fixture: Fixture,
    valid: BTreeMap<&'static str, bool>,
    full_trace: pexrep::model::FailureTrace,
    full_pkg: std::path::PathBuf,
    spi: (usize, usize, f64),
}

fn variants() -> Vec<(&'static str, ReportOptions)> {
    let full = ReportOptions::default();
    vec![
        ("full", full),
        (
            "no-dynamic",
            ReportOptions {
                dynamic: false,
                ..full
            },
        ),
        (
            "no-config-slice",
            ReportOptions {
                config_slice: false,
                ..full
            },
        ),
        (
            "no-resources",
            ReportOptions {
                resources: false,
                ..full
            },
        ),
        (
            "no-gencode",
            ReportOptions {
                gencode: false,
                ..full
            },
        ),
        ("bare", ReportOptions::bare()),
    ]
}

fn run_corpus(env: &Env) -> Vec<CorpusRun> {
    (0..CORPUS_SIZE)
        .into_par_iter()
        .map(|i| {
            let seed = CORPUS_BASE_SEED + i;
            let fixture = fixtures::random(seed, &Profile::default());
            let project = env.write(&fixture, &format!("corpus/p{seed}"));
            let mut valid = BTreeMap::new();
            let mut full = None;
            for (name, options) in variants() {
                let out = env.path(&format!("corpus/p{seed}-{name}"));
                let created = env
                    .pipeline
                    .create(&project, &fixture.failing_test, &out, options)
                    .unwrap_or_else(|e| panic!("seed {seed} {name}: {e}"));
                valid.insert(name, created.valid());
                if name == "full" {
                    let m = created.report.metrics.source_plus_internal;
                    full = Some((
                        created.trace.trace.clone(),
                        out,
                        (m.original_count, m.kept_count, m.percent_reduction),
                    ));
                }
            }
            let (full_trace, full_pkg, spi) = full.unwrap();
            CorpusRun {
                seed,
                fixture,
                valid,
                full_trace,
                full_pkg,
                spi,
            }
        })
        .collect()
}

fn corpus_reproduction(runs: &[CorpusRun], elapsed: Duration) -> Result<String, String> {
    let failed: Vec<u64> = runs
        .iter()
        .filter(|r| !r.valid["full"])
        .map(|r| r.seed)
        .collect();
    let count =
        |f: fn(&fixtures::Traits) -> bool| runs.iter().filter(|r| f(&r.fixture.traits)).count();
    let max_items = runs
        .iter()
        .map(|r| r.fixture.item_count())
        .max()
        .unwrap_or(0);
    ensure(runs.len() >= 200, || {
        format!("only {} projects", runs.len())
    })?;
    ensure(max_items <= 40, || {
        format!("project with {max_items} items")
    })?;
    ensure(failed.is_empty(), || {
        format!("invalid packages for seeds {failed:?}")
    })?;
    ensure(elapsed < CORPUS_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{}/{} valid; plugin-gated {}, resource-message {}, generators {} (annotation {}); {:.1} s for all variants",
        runs.len() - failed.len(),
        runs.len(),
        count(|t| t.plugin_gated),
        count(|t| t.resource_message),
        count(|t| t.generators),
        count(|t| t.annotation),
        elapsed.as_secs_f64()
    ))
}

fn oracle_equivalence(runs: &[CorpusRun]) -> Result<String, String> {
    let small: Vec<&CorpusRun> = runs
        .iter()
        .filter(|r| r.fixture.item_count() <= ORACLE_MAX_ITEMS)
        .collect();
    ensure(!small.is_empty(), || {
        "no small projects in the corpus".into()
    })?;
    for run in &small {
        let expected =
            oracle::expected_trace(&run.fixture.manifest, &run.fixture.failing_test, true);
        ensure(expected == run.full_trace, || {
            format!(
                "seed {}: tracer {:?} vs oracle {:?}",
                run.seed, run.full_trace, expected
            )
        })?;
    }
    Ok(format!(
        "{} projects with <= {ORACLE_MAX_ITEMS} items match exactly",
        small.len()
    ))
}

fn rate(runs: &[&CorpusRun], variant: &str) -> f64 {
    if runs.is_empty() {
        return 0.0;
    }
    runs.iter().filter(|r| r.valid[variant]).count() as f64 / runs.len() as f64
}

fn ablation_ordering(runs: &[CorpusRun]) -> Result<String, String> {
    let all: Vec<&CorpusRun> = runs.iter().collect();
    let names: Vec<&str> = variants().iter().map(|(n, _)| *n).collect();
    let rates: BTreeMap<&str, f64> = names.iter().map(|n| (*n, rate(&all, n))).collect();
    for n in &names {
        ensure(rates["full"] >= rates[n], || {
            format!("full {} < {n} {}", rates["full"], rates[n])
        })?;
        ensure(rates["bare"] <= rates[n], || {
            format!("bare {} > {n} {}", rates["bare"], rates[n])
        })?;
    }

    let dynamic_stratum: Vec<&CorpusRun> = runs
        .iter()
        .filter(|r| {
            oracle::expected_trace(&r.fixture.manifest, &r.fixture.failing_test, false)
                != r.full_trace
        })
        .collect();
    let plugin_stratum: Vec<&CorpusRun> = runs
        .iter()
        .filter(|r| r.fixture.traits.plugin_gated)
        .collect();
    let resource_stratum: Vec<&CorpusRun> = runs
        .iter()
        .filter(|r| r.fixture.traits.resource_message)
        .collect();
    for (variant, stratum) in [
        ("no-dynamic", &dynamic_stratum),
        ("no-config-slice", &plugin_stratum),
        ("no-resources", &resource_stratum),
    ] {
        ensure(!stratum.is_empty(), || {
            format!("empty stratum for {variant}")
        })?;
        let (full, ablated) = (rate(stratum, "full"), rate(stratum, variant));
        ensure(full > ablated, || {
            format!("{variant} on its stratum: full {full} vs {ablated}")
        })?;
    }
    let summary: Vec<String> = names
        .iter()
        .map(|n| format!("{n} {:.1}%", 100.0 * rates[n]))
        .collect();
    Ok(format!(
        "{}; strata dyn {} ({:.1}%), cfg {} ({:.1}%), res {} ({:.1}%)",
        summary.join(", "),
        dynamic_stratum.len(),
        100.0 * rate(&dynamic_stratum, "no-dynamic"),
        plugin_stratum.len(),
        100.0 * rate(&plugin_stratum, "no-config-slice"),
        resource_stratum.len(),
        100.0 * rate(&resource_stratum, "no-resources"),
    ))
}

/// Countable items of a package found by walking its files: source files
/// plus classes inside internal-library archives.
fn walk_count(pkg: &Path, group: &str) -> usize {
    let files = snapshot(pkg);
    let sources = files
        .keys()
        .filter(|p| p.starts_with("src/") && p.ends_with(".src"))
        .count();
    let manifest = Manifest::read(pkg).unwrap();
    // Annotation products are regenerated, not shipped as files.
    let regenerated: usize = manifest.generators.iter().map(|g| g.produces.len()).sum();
    let internal: usize = files
        .keys()
        .filter(|p| p.starts_with("libs/") && p.ends_with(".archive"))
        .map(|p| {
            let lib = manifest
                .libraries
                .iter()
                .find(|l| l.archive_path.as_deref() == Some(p.as_str()))
                .unwrap();
            if is_internal(&lib.coord, group) {
                read_archive(&pkg.join(p)).unwrap().len()
            } else {
                0
            }
        })
        .sum();
    sources + regenerated + internal
}

fn pruning_nontrivial(runs: &[CorpusRun]) -> Result<String, String> {
    let mut total = 0.0;
    for run in runs {
        let (original, kept, reduction) = run.spi;
        let m = &run.fixture.manifest;
        let fixture_original = m.app_sources.len()
            + m.test_sources.len()
            + m.generators.iter().map(|g| g.produces.len()).sum::<usize>()
            + m.libraries
                .iter()
                .filter(|l| is_internal(&l.coord, &m.group))
                .map(|l| l.classes.len())
                .sum::<usize>();
        let walked = walk_count(&run.full_pkg, &m.group);
        ensure(original == fixture_original, || {
            format!(
                "seed {}: original {original} vs {fixture_original}",
                run.seed
            )
        })?;
        ensure(kept == walked, || {
            format!("seed {}: kept {kept} vs walked {walked}", run.seed)
        })?;
        let formula = 1.0 - walked as f64 / fixture_original as f64;
        ensure(reduction == formula, || {
            format!(
                "seed {}: reduction {reduction} vs formula {formula}",
                run.seed
            )
        })?;
        total += reduction;
    }
    let mean = total / runs.len() as f64;
    ensure(mean > 0.0, || "mean reduction is zero".into())?;
    Ok(format!(
        "mean source+internal reduction {:.2}%, formula exact on {} packages",
        100.0 * mean,
        runs.len()
    ))
}

fn necessity() -> Result<String, String> {
    let env = Env::new();
    let tight = Profile {
        tight: true,
        ..Profile::default()
    };
    let mut deletions = 0;
    for i in 0..TIGHT_COUNT {
        let seed = TIGHT_BASE_SEED + i;
        let fx = fixtures::random(seed, &tight);
        let project = env.write(&fx, &format!("tight/p{seed}"));
        let pkg = env.path(&format!("tight/p{seed}-pkg"));
        let created = env
            .pipeline
            .create(&project, &fx.failing_test, &pkg, ReportOptions::default())
            .map_err(|e| e.to_string())?;
        ensure(created.valid(), || format!("seed {seed}: baseline invalid"))?;
        let manifest = Manifest::read(&pkg).unwrap();

        let files: Vec<String> = manifest
            .app_sources
            .iter()
            .chain(&manifest.test_sources)
            .chain(&manifest.generated_sources)
            .map(|s| s.file_path.clone())
            .collect();
        for file in files {
            let copy = env.path(&format!("tight/p{seed}-del"));
            let _ = fs::remove_dir_all(&copy);
            copy_dir(&pkg, &copy);
            fs::remove_file(copy.join(&file)).unwrap();
            let v = env.pipeline.validate(&copy).map_err(|e| e.to_string())?;
            let kind = v.reproduced.failure_type.as_str();
            ensure(
                !v.valid && matches!(kind, "ClassNotFound" | "UnresolvedRef"),
                || format!("seed {seed}: deleting {file} gave {}", v.reproduced),
            )?;
            deletions += 1;
        }
        for lib in created.package.pruned_libraries.iter() {
            for class in &lib.kept_classes {
                let copy = env.path(&format!("tight/p{seed}-del"));
                let _ = fs::remove_dir_all(&copy);
                copy_dir(&pkg, &copy);
                let archive = copy.join(&lib.archive_path);
                let remaining: Vec<_> = read_archive(&archive)
                    .unwrap()
                    .into_values()
                    .filter(|c| &c.name != class)
                    .collect();
                pexrep::backend::write_archive(&archive, &remaining).unwrap();
                let v = env.pipeline.validate(&copy).map_err(|e| e.to_string())?;
                let kind = v.reproduced.failure_type.as_str();
                ensure(
                    !v.valid && matches!(kind, "ClassNotFound" | "UnresolvedRef"),
                    || format!("seed {seed}: deleting class {class} gave {}", v.reproduced),
                )?;
                deletions += 1;
            }
        }
    }
    Ok(format!(
        "{deletions} single deletions across {TIGHT_COUNT} tight fixtures all invalidate"
    ))
}

fn copy_dir(from: &Path, to: &Path) {
    for (rel, bytes) in snapshot(from) {
        let dest = to.join(rel);
        fs::create_dir_all(dest.parent().unwrap()).unwrap();
        fs::write(dest, bytes).unwrap();
    }
}

fn validator_strictness() -> Result<String, String> {
    let env = Env::new();
    let project = env.write(&fixtures::fig3(), "fig3");
    let pkg = env.path("pkg");
    env.pipeline
        .create(&project, "t.T1", &pkg, ReportOptions::default())
        .map_err(|e| e.to_string())?;
    let path = pkg.join(EXPECTED_FILE);
    let mut provenance: Provenance =
        serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let mut chars: Vec<char> = provenance.expected.message.chars().collect();
    chars[0] = if chars[0] == 'x' { 'y' } else { 'x' };
    provenance.expected.message = chars.into_iter().collect();
    fs::write(&path, serde_json::to_string_pretty(&provenance).unwrap()).unwrap();

    let v = env.pipeline.validate(&pkg).map_err(|e| e.to_string())?;
    ensure(!v.valid, || "mutated message still validates".into())?;
    let report = env
        .pipeline
        .metrics(&project, &pkg)
        .map_err(|e| e.to_string())?;
    let m = report.metrics;
    let all = [
        m.internal_classes,
        m.source_classes,
        m.source_plus_internal,
        m.config_chars,
        m.resources,
    ];
    ensure(all.iter().all(|c| c.percent_reduction == 0.0), || {
        format!("non-zero reductions {m:?}")
    })?;
    ensure(m.source_plus_internal.original_count == 6, || {
        "counts missing".into()
    })?;
    Ok("one-character change rejected, all reductions 0".into())
}

fn determinism() -> Result<String, String> {
    let env = Env::new();
    let mut checked = 0;
    for (name, fx) in [
        ("fig3", fixtures::fig3()),
        ("fig4", fixtures::fig4()),
        ("rand", fixtures::random(7, &Profile::default())),
    ] {
        let project = env.write(&fx, name);
        let mut snaps = Vec::new();
        for run in 0..2 {
            let out = env.path(&format!("{name}-{run}"));
            env.pipeline
                .create(&project, &fx.failing_test, &out, ReportOptions::default())
                .map_err(|e| e.to_string())?;
            let mut snap = snapshot(&out);
            let mut metrics: serde_json::Value =
                serde_json::from_slice(&snap[METRICS_FILE]).unwrap();
            metrics["validation"]["elapsed_ms"] = serde_json::Value::Null;
            snap.insert(METRICS_FILE.into(), serde_json::to_vec(&metrics).unwrap());
            snaps.push(snap);
        }
        ensure(snaps[0] == snaps[1], || format!("{name}: packages differ"))?;
        checked += snaps[0].len();
    }
    Ok(format!(
        "{checked} files byte-identical across repeated runs"
    ))
}

fn main() {
    let mut results = vec![
        check("golden-fig3", golden_fig3),
        check("golden-fig4", golden_fig4),
    ];

    let env = Env::new();
    let started = Instant::now();
    let runs = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run_corpus(&env)));
    let elapsed = started.elapsed();
    match &runs {
        Ok(runs) => {
            results.push(check("randomized-corpus", || {
                corpus_reproduction(runs, elapsed)
            }));
            results.push(check("oracle-equivalence", || oracle_equivalence(runs)));
        }
        Err(_) => {
            for name in ["randomized-corpus", "oracle-equivalence"] {
                results.push(Outcome {
                    name,
                    pass: false,
                    detail: "corpus run panicked".into(),
                });
            }
        }
    }
    results.push(check("necessity", necessity));
    match &runs {
        Ok(runs) => {
            results.push(check("ablation-ordering", || ablation_ordering(runs)));
            results.push(check("pruning-nontrivial", || pruning_nontrivial(runs)));
        }
        Err(_) => {
            for name in ["ablation-ordering", "pruning-nontrivial"] {
                results.push(Outcome {
                    name,
                    pass: false,
                    detail: "corpus run panicked".into(),
                });
            }
        }
    }
    results.push(check("validator-strictness", validator_strictness));
    results.push(check("determinism", determinism));

    for r in &results {
        println!(
            "{} {}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
