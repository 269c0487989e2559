//! Reference answers computed straight from a manifest, without running any
//! build: plain graph reachability over the declared references.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use pexrep::backend::{Manifest, Ref, SourceItem};
use pexrep::model::{FailureTrace, ItemKind, ItemRef};

struct Graph<'a> {
    sources: BTreeMap<&'a str, (ItemKind, &'a SourceItem)>,
    manifest: &'a Manifest,
}

impl<'a> Graph<'a> {
    fn new(m: &'a Manifest) -> Self {
        let mut sources = BTreeMap::new();
        for s in &m.app_sources {
            sources.insert(s.id.as_str(), (ItemKind::AppSource, s));
        }
        for s in &m.test_sources {
            sources.insert(s.id.as_str(), (ItemKind::TestSource, s));
        }
        for s in m
            .generators
            .iter()
            .flat_map(|g| &g.produces)
            .chain(&m.generated_sources)
        {
            sources.insert(s.id.as_str(), (ItemKind::GeneratedSource, s));
        }
        Graph {
            sources,
            manifest: m,
        }
    }

    fn item(&self, r: &Ref) -> ItemRef {
        match r {
            Ref::Source(id) => ItemRef::source(self.sources[id.as_str()].0, id),
            Ref::Library {
                group,
                artifact,
                class,
            } => {
                let lib = self
                    .manifest
                    .libraries
                    .iter()
                    .find(|l| &l.coord.group == group && &l.coord.artifact == artifact)
                    .expect("declared library");
                ItemRef::library(lib.coord.clone(), class)
            }
        }
    }

    fn lib_loads(&self, r: &Ref) -> Vec<Ref> {
        let Ref::Library {
            group,
            artifact,
            class,
        } = r
        else {
            return vec![];
        };
        self.manifest
            .libraries
            .iter()
            .filter(|l| &l.coord.group == group && &l.coord.artifact == artifact)
            .flat_map(|l| l.classes.iter().filter(|c| &c.name == class))
            .flat_map(|c| c.loads.clone())
            .collect()
    }
}

/// Classes loaded when `test` runs: closure over dynamic loads.
pub fn dynamic_closure(m: &Manifest, test: &str) -> BTreeSet<ItemRef> {
    let g = Graph::new(m);
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([Ref::source(test)]);
    while let Some(r) = queue.pop_front() {
        if !seen.insert(g.item(&r)) {
            continue;
        }
        match &r {
            Ref::Source(id) => queue.extend(g.sources[id.as_str()].1.dynamic_loads.iter().cloned()),
            lib => queue.extend(g.lib_loads(lib)),
        }
    }
    seen
}

/// Static references reachable from `seeds`, expanding only through
/// sources for which `expand` holds. Seeds are included.
fn static_closure(
    g: &Graph,
    seeds: &BTreeSet<ItemRef>,
    expand: impl Fn(ItemKind) -> bool,
) -> BTreeSet<ItemRef> {
    let mut seen: BTreeSet<ItemRef> = BTreeSet::new();
    let mut queue: VecDeque<ItemRef> = seeds.iter().cloned().collect();
    while let Some(item) = queue.pop_front() {
        if !seen.insert(item.clone()) || item.kind == ItemKind::LibraryClass {
            continue;
        }
        if !expand(item.kind) && !seeds.contains(&item) {
            continue;
        }
        for r in &g.sources[item.qualified_name.as_str()].1.static_refs {
            queue.push_back(g.item(r));
        }
    }
    seen
}

/// Expected trace: the dynamic closure from `test`, then the static
/// closure of its tests (stopping at application classes), then the static
/// closure of every application or generated source found so far.
/// With `dynamic` off, the test alone seeds the static phases.
pub fn expected_trace(m: &Manifest, test: &str, dynamic: bool) -> FailureTrace {
    let g = Graph::new(m);
    let seed: BTreeSet<ItemRef> = if dynamic {
        dynamic_closure(m, test)
    } else {
        [ItemRef::source(ItemKind::TestSource, test)].into()
    };

    let tests: BTreeSet<ItemRef> = seed
        .iter()
        .filter(|i| i.kind == ItemKind::TestSource)
        .cloned()
        .collect();
    let phase2 = static_closure(&g, &tests, |k| k == ItemKind::TestSource);

    let mut all: BTreeSet<ItemRef> = seed.union(&phase2).cloned().collect();
    let apps: BTreeSet<ItemRef> = all
        .iter()
        .filter(|i| matches!(i.kind, ItemKind::AppSource | ItemKind::GeneratedSource))
        .cloned()
        .collect();
    all.extend(static_closure(&g, &apps, |k| k != ItemKind::TestSource));

    let mut trace = FailureTrace::default();
    trace.absorb(&all);
    trace
}

/// What compiling `request` from scratch should resolve: the request plus
/// every static reference reachable through sources.
pub fn compile_closure(m: &Manifest, request: &BTreeSet<ItemRef>) -> BTreeSet<ItemRef> {
    let g = Graph::new(m);
    static_closure(&g, request, |_| true)
}
