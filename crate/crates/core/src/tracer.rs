//! Hybrid backward failure tracing.
//!
//! Three rounds of builds narrow a project down to the items a failing test
//! needs. Round 1 runs the test and records every class it loads. Round 2
//! recompiles only the traced tests against the round-1 application classes,
//! which reveals the tests' static references. Round 3 compiles the traced
//! application sources from scratch, which reveals their static closure.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::backend::{BuildBackend, EffectiveConfig, ProjectModel, TEST_CLASSES_DIR};
use crate::error::{Error, IoContext, Result};
use crate::fsutil::copy_project;
use crate::model::{
    BuildRecord, FailureOutcome, FailureStatus, FailureTrace, ItemKind, ItemRef, TaskKind,
};

fn partition(record: &BuildRecord) -> FailureTrace {
    let mut trace = FailureTrace::default();
    trace.absorb(&record.referenced);
    trace
}

/// Splits the classes a test run loaded into tests, sources and libraries.
pub fn dynamic_tracer(record: &BuildRecord) -> Result<FailureTrace> {
    if record.task != TaskKind::Test {
        return Err(Error::WrongTask {
            expected: "Test",
            found: record.task,
        });
    }
    Ok(partition(record))
}

/// Splits the items a compile task resolved.
pub fn static_analyzer(record: &BuildRecord) -> Result<FailureTrace> {
    if !matches!(record.task, TaskKind::Compile | TaskKind::TestCompile) {
        return Err(Error::WrongTask {
            expected: "Compile or TestCompile",
            found: record.task,
        });
    }
    Ok(partition(record))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    /// Seed rounds 2 and 3 from the test run. When false only the failing
    /// test seeds the static rounds.
    pub dynamic: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { dynamic: true }
    }
}

/// A backend record tagged with the round that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub round: u8,
    pub record: BuildRecord,
}

#[derive(Debug, Clone)]
pub struct TraceResult {
    pub trace: FailureTrace,
    /// Outcome of the round-1 test run: the failure to reproduce.
    pub outcome: FailureOutcome,
    pub records: Vec<RoundRecord>,
    /// Compile passes round 3 needed to stop discovering sources.
    pub round3_passes: usize,
    /// Round-1 workspace, kept for resource classification.
    pub workspace: PathBuf,
}

impl TraceResult {
    pub fn records_of(&self, round: u8, task: TaskKind) -> impl Iterator<Item = &BuildRecord> {
        self.records
            .iter()
            .filter(move |r| r.round == round && r.record.task == task)
            .map(|r| &r.record)
    }

    pub fn test_record(&self) -> &BuildRecord {
        self.records_of(1, TaskKind::Test)
            .next()
            .expect("round 1 always runs the test")
    }
}

fn in_round<T>(round: u8, result: Result<T>) -> Result<T> {
    result.map_err(|e| Error::BackendFailure {
        round,
        source: Box::new(e),
    })
}

/// Runs the three tracing rounds in workspaces created under `scratch`.
pub fn hybrid_backward_trace(
    backend: &dyn BuildBackend,
    project: &ProjectModel,
    test_id: &str,
    config: &EffectiveConfig,
    options: TraceOptions,
    scratch: &Path,
) -> Result<TraceResult> {
    if project.test(test_id).is_none() {
        return Err(Error::UnknownTest(test_id.to_string()));
    }
    let mut records = Vec::new();

    // Round 1: full build, then run the test.
    let ws1 = scratch.join("round1");
    copy_project(&project.root_dir, &ws1)?;
    let outcome = in_round(
        1,
        (|| {
            let mut push = |r: BuildRecord| {
                records.push(RoundRecord {
                    round: 1,
                    record: r,
                })
            };
            push(backend.run_generate_sources(project, &ws1)?);
            push(backend.run_process_resources(project, &ws1)?);
            let app =
                project.sources_present(&ws1, &[ItemKind::AppSource, ItemKind::GeneratedSource]);
            push(backend.run_compile(project, &ws1, &app, TaskKind::Compile, config)?);
            let tests = project.sources_present(&ws1, &[ItemKind::TestSource]);
            push(backend.run_compile(project, &ws1, &tests, TaskKind::TestCompile, config)?);
            let (outcome, record) = backend.run_test(project, &ws1, test_id, config)?;
            push(record);
            Ok(outcome)
        })(),
    )?;
    if outcome.status == FailureStatus::Passed {
        return Err(Error::TestPassed(test_id.to_string()));
    }

    let mut trace = FailureTrace::default();
    if options.dynamic {
        let r1 = &records.last().expect("test record").record;
        trace.merge(&dynamic_tracer(r1)?);
    } else {
        trace
            .tests
            .insert(ItemRef::source(ItemKind::TestSource, test_id));
    }

    // Round 2: recompile the traced tests against the round-1 app classes.
    let test_classes = ws1.join(TEST_CLASSES_DIR);
    if test_classes.exists() {
        fs::remove_dir_all(&test_classes).ctx(|| format!("removing {}", test_classes.display()))?;
    }
    let r2 = in_round(
        2,
        backend.run_compile(project, &ws1, &trace.tests, TaskKind::TestCompile, config),
    )?;
    trace.merge(&static_analyzer(&r2)?);
    records.push(RoundRecord {
        round: 2,
        record: r2,
    });

    // Round 3: compile the traced sources in fresh workspaces until no new
    // source turns up.
    let mut passes = 0;
    loop {
        passes += 1;
        let ws3 = scratch.join(format!("round3-{passes}"));
        copy_project(&project.root_dir, &ws3)?;
        let generated = in_round(3, backend.run_generate_sources(project, &ws3))?;
        records.push(RoundRecord {
            round: 3,
            record: generated,
        });
        let request = trace.sources.clone();
        let r3 = in_round(
            3,
            backend.run_compile(project, &ws3, &request, TaskKind::Compile, config),
        )?;
        let found = static_analyzer(&r3)?;
        records.push(RoundRecord {
            round: 3,
            record: r3,
        });
        let before: BTreeSet<ItemRef> = trace.sources.clone();
        trace.merge(&found);
        fs::remove_dir_all(&ws3).ctx(|| format!("removing {}", ws3.display()))?;
        if trace.sources == before {
            break;
        }
    }

    Ok(TraceResult {
        trace,
        outcome,
        records,
        round3_passes: passes,
        workspace: ws1,
    })
}

/// Per-round summary written to `trace.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RoundSummary {
    pub round: u8,
    pub task: TaskKind,
    pub referenced: usize,
    pub source_roots: Vec<String>,
    pub resource_events: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceDump<'a> {
    pub test_id: &'a str,
    pub outcome: &'a FailureOutcome,
    pub trace: &'a FailureTrace,
    pub round3_passes: usize,
    pub rounds: Vec<RoundSummary>,
}

impl TraceResult {
    pub fn dump<'a>(&'a self, test_id: &'a str) -> TraceDump<'a> {
        TraceDump {
            test_id,
            outcome: &self.outcome,
            trace: &self.trace,
            round3_passes: self.round3_passes,
            rounds: self
                .records
                .iter()
                .map(|r| RoundSummary {
                    round: r.round,
                    task: r.record.task,
                    referenced: r.record.referenced.len(),
                    source_roots: r.record.source_roots.clone(),
                    resource_events: r.record.resource_events.len(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LibCoord;
    use proptest::prelude::*;

    fn record(task: TaskKind, items: &[ItemRef]) -> BuildRecord {
        let mut r = BuildRecord::empty(task);
        r.referenced.extend(items.iter().cloned());
        r
    }

    fn t(id: &str) -> ItemRef {
        ItemRef::source(ItemKind::TestSource, id)
    }

    fn a(id: &str) -> ItemRef {
        ItemRef::source(ItemKind::AppSource, id)
    }

    fn log() -> ItemRef {
        ItemRef::library(
            LibCoord::new("org.apache.logging", "log", "1.0").unwrap(),
            "log.Log",
        )
    }

    #[test]
    fn dynamic_partition_of_fig3_run() {
        let trace =
            dynamic_tracer(&record(TaskKind::Test, &[t("t.T1"), a("app.A2"), log()])).unwrap();
        assert_eq!(trace.tests, [t("t.T1")].into());
        assert_eq!(trace.sources, [a("app.A2")].into());
        assert_eq!(trace.libraries, [log()].into());
    }

    #[test]
    fn isolated_test_partition() {
        let trace = dynamic_tracer(&record(TaskKind::Test, &[t("t.T1")])).unwrap();
        assert_eq!(trace.tests.len(), 1);
        assert!(trace.sources.is_empty() && trace.libraries.is_empty());
    }

    #[test]
    fn static_rounds_add_sources() {
        let r2 = static_analyzer(&record(
            TaskKind::TestCompile,
            &[t("t.T1"), a("app.A3"), a("app.A2")],
        ))
        .unwrap();
        assert!(r2.sources.contains(&a("app.A3")));
        let r3 = static_analyzer(&record(TaskKind::Compile, &[a("app.A3"), a("app.A5")])).unwrap();
        assert!(r3.sources.contains(&a("app.A5")));
        assert!(r3.tests.is_empty());
    }

    #[test]
    fn wrong_task_is_rejected() {
        assert!(matches!(
            static_analyzer(&record(TaskKind::Test, &[])),
            Err(Error::WrongTask { .. })
        ));
        assert!(matches!(
            dynamic_tracer(&record(TaskKind::Compile, &[])),
            Err(Error::WrongTask { .. })
        ));
    }

    fn arb_item() -> impl Strategy<Value = ItemRef> {
        (0..4u8, 0..20u8).prop_map(|(k, n)| match k {
            0 => t(&format!("t.T{n}")),
            1 => a(&format!("app.A{n}")),
            2 => ItemRef::source(ItemKind::GeneratedSource, &format!("gen.G{n}")),
            _ => ItemRef::library(
                LibCoord::new("org.x", "x", "1").unwrap(),
                &format!("x.C{n}"),
            ),
        })
    }

    proptest! {
        #[test]
        fn partition_matches_filter_by_kind(items in proptest::collection::btree_set(arb_item(), 0..30)) {
            let items: Vec<ItemRef> = items.into_iter().collect();
            let trace = dynamic_tracer(&record(TaskKind::Test, &items)).unwrap();
            let of = |f: fn(ItemKind) -> bool| -> BTreeSet<ItemRef> {
                items.iter().filter(|i| f(i.kind)).cloned().collect()
            };
            prop_assert_eq!(&trace.tests, &of(|k| k == ItemKind::TestSource));
            prop_assert_eq!(&trace.sources, &of(|k| matches!(k, ItemKind::AppSource | ItemKind::GeneratedSource)));
            prop_assert_eq!(&trace.libraries, &of(|k| k == ItemKind::LibraryClass));
            prop_assert_eq!(trace.len(), items.len());
        }
    }
}
