//! Build-configuration slicing: keep the plugins the failing test's build
//! needs, the properties they use, and nothing machine-specific.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::{
    ConfigFile, Dependency, EffectiveConfig, Phase, PluginCategory, PluginConfig, Setting,
};
use crate::model::LibCoord;

pub const PROJECT_DIR_PLACEHOLDER: &str = "${project.dir}";

/// The configuration emitted into a package.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigDocument {
    pub plugins: Vec<PluginConfig>,
    pub properties: BTreeMap<String, String>,
    pub dependency_coords: Vec<LibCoord>,
    /// `(before, after)` for every value a rewrite changed.
    pub rewrites_applied: Vec<(String, String)>,
}

impl ConfigDocument {
    pub fn to_config_file(&self) -> ConfigFile {
        ConfigFile {
            path: "config.mb.json".into(),
            plugins: self.plugins.clone(),
            properties: self.properties.clone(),
            dependencies: self
                .dependency_coords
                .iter()
                .map(|c| Dependency {
                    coord: c.clone(),
                    via: None,
                })
                .collect(),
        }
    }

    /// The configuration a fresh project template starts with.
    pub fn default_template() -> Self {
        let mut settings = BTreeMap::new();
        settings.insert("out".to_string(), Setting::Value("./target".into()));
        ConfigDocument {
            plugins: vec![PluginConfig {
                id: "compiler".into(),
                phases: [Phase::Compile, Phase::TestCompile].into_iter().collect(),
                category: PluginCategory::Build,
                settings,
            }],
            ..ConfigDocument::default()
        }
    }
}

const REQUIRED_PHASES: [Phase; 5] = [
    Phase::GenerateSources,
    Phase::ProcessResources,
    Phase::Compile,
    Phase::TestCompile,
    Phase::Test,
];

pub fn select_required_plugins(cfg: &EffectiveConfig) -> Vec<PluginConfig> {
    cfg.plugins
        .iter()
        .filter(|p| p.category == PluginCategory::Build)
        .filter(|p| REQUIRED_PHASES.iter().any(|ph| p.attached_to(*ph)))
        .cloned()
        .collect()
}

/// Evaluates a path query such as `plugins[id=compiler]/settings` against
/// a JSON tree. Each step names an object key and may filter an array by
/// `[field=value]`.
pub fn query<'a>(tree: &'a Value, path: &str) -> Option<&'a Value> {
    let mut node = tree;
    for step in path.split('/').filter(|s| !s.is_empty()) {
        let (key, filter) = match step.split_once('[') {
            Some((key, rest)) => (key, Some(rest.strip_suffix(']')?.split_once('=')?)),
            None => (step, None),
        };
        node = node.get(key)?;
        if let Some((field, wanted)) = filter {
            node = node
                .as_array()?
                .iter()
                .find(|el| el.get(field).and_then(Value::as_str) == Some(wanted))?;
        }
    }
    Some(node)
}

/// Every `${key}` token in `text`.
pub fn property_tokens(text: &str) -> Vec<&str> {
    let mut keys = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        let after = &rest[start + 2..];
        let Some(end) = after.find('}') else { break };
        keys.push(&after[..end]);
        rest = &after[end + 1..];
    }
    keys
}

pub fn slice_config(
    cfg: &EffectiveConfig,
    selected: &[PluginConfig],
    original_root: &Path,
) -> ConfigDocument {
    let tree = serde_json::to_value(cfg).expect("configuration serializes");
    let root = original_root.to_string_lossy().to_string();
    let mut rewrites = Vec::new();
    let mut rewrite = |value: &str| -> String {
        let mut out = value.to_string();
        if !root.is_empty() {
            out = out.replace(&root, ".");
        }
        out = out.replace(PROJECT_DIR_PLACEHOLDER, ".");
        if out != value {
            rewrites.push((value.to_string(), out.clone()));
        }
        out
    };

    let mut plugins = Vec::with_capacity(selected.len());
    for plugin in selected {
        let settings: BTreeMap<String, Setting> =
            query(&tree, &format!("plugins[id={}]/settings", plugin.id))
                .and_then(|v| serde_json::from_value(v.clone()).ok())
                .unwrap_or_else(|| plugin.settings.clone());
        let settings = settings
            .iter()
            .map(|(k, s)| (k.clone(), s.map_values(&mut rewrite)))
            .collect();
        plugins.push(PluginConfig {
            settings,
            ..plugin.clone()
        });
    }

    // Properties used by the kept settings, following references between
    // properties.
    let mut wanted: Vec<String> = Vec::new();
    for plugin in selected {
        for setting in plugin.settings.values() {
            setting.for_each_value(&mut |v| {
                wanted.extend(property_tokens(v).into_iter().map(String::from))
            });
        }
    }
    let mut kept = BTreeSet::new();
    while let Some(key) = wanted.pop() {
        if let Some(value) = cfg.properties.get(&key) {
            if kept.insert(key) {
                wanted.extend(property_tokens(value).into_iter().map(String::from));
            }
        }
    }
    let properties = kept
        .into_iter()
        .map(|k| {
            let v = rewrite(&cfg.properties[&k]);
            (k, v)
        })
        .collect();

    ConfigDocument {
        plugins,
        properties,
        dependency_coords: Vec::new(),
        rewrites_applied: rewrites,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::compute_effective_config;
    use proptest::prelude::*;

    fn plugin(
        id: &str,
        phases: &[Phase],
        category: PluginCategory,
        settings: &[(&str, &str)],
    ) -> PluginConfig {
        PluginConfig {
            id: id.into(),
            phases: phases.iter().copied().collect(),
            category,
            settings: settings
                .iter()
                .map(|(k, v)| (k.to_string(), Setting::Value(v.to_string())))
                .collect(),
        }
    }

    fn config(plugins: Vec<PluginConfig>, props: &[(&str, &str)]) -> EffectiveConfig {
        EffectiveConfig {
            plugins,
            properties: props
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            mediated_dependencies: vec![],
            origin: BTreeMap::new(),
        }
    }

    fn fig_plugins() -> Vec<PluginConfig> {
        vec![
            plugin(
                "compiler",
                &[Phase::Compile, Phase::TestCompile],
                PluginCategory::Build,
                &[("out", "${project.dir}/target")],
            ),
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
                &[],
            ),
        ]
    }

    #[test]
    fn keeps_only_lifecycle_build_plugins() {
        let kept = select_required_plugins(&config(fig_plugins(), &[]));
        assert_eq!(
            kept.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(),
            ["compiler"]
        );
        assert!(select_required_plugins(&config(vec![], &[])).is_empty());
    }

    #[test]
    fn analysis_category_dominates_phase() {
        let cfg = config(
            vec![plugin(
                "spotbugs",
                &[Phase::Compile],
                PluginCategory::Analysis,
                &[],
            )],
            &[],
        );
        assert!(select_required_plugins(&cfg).is_empty());
    }

    #[test]
    fn project_dir_placeholder_is_rewritten() {
        let cfg = config(fig_plugins(), &[]);
        let doc = slice_config(
            &cfg,
            &select_required_plugins(&cfg),
            Path::new("/home/dev/proj"),
        );
        assert_eq!(
            doc.plugins[0].settings["out"],
            Setting::Value("./target".into())
        );
        assert_eq!(
            doc.rewrites_applied,
            vec![("${project.dir}/target".to_string(), "./target".to_string())]
        );
    }

    #[test]
    fn absolute_root_is_rewritten() {
        let cfg = config(
            vec![plugin(
                "compiler",
                &[Phase::Compile],
                PluginCategory::Build,
                &[("base", "/home/dev/proj/src/main")],
            )],
            &[],
        );
        let doc = slice_config(&cfg, &cfg.plugins, Path::new("/home/dev/proj"));
        assert_eq!(
            doc.plugins[0].settings["base"],
            Setting::Value("./src/main".into())
        );
    }

    #[test]
    fn empty_selection_gives_empty_document() {
        let cfg = config(fig_plugins(), &[("deploy.url", "x")]);
        let doc = slice_config(&cfg, &[], Path::new("/r"));
        assert!(doc.plugins.is_empty() && doc.properties.is_empty());
    }

    #[test]
    fn properties_follow_references_transitively() {
        let cfg = config(
            vec![plugin(
                "compiler",
                &[Phase::Compile],
                PluginCategory::Build,
                &[("release", "${java.release}")],
            )],
            &[
                ("java.release", "${java.base}"),
                ("java.base", "17"),
                ("deploy.url", "x"),
            ],
        );
        let doc = slice_config(&cfg, &cfg.plugins, Path::new("/r"));
        assert_eq!(
            doc.properties.keys().collect::<Vec<_>>(),
            ["java.base", "java.release"]
        );
    }

    #[test]
    fn query_walks_filters() {
        let tree = serde_json::json!({"plugins": [{"id": "a", "settings": {"x": "1"}}, {"id": "b", "settings": {"x": "2"}}]});
        assert_eq!(
            query(&tree, "plugins[id=b]/settings/x"),
            Some(&Value::String("2".into()))
        );
        assert_eq!(query(&tree, "plugins[id=c]/settings"), None);
        assert_eq!(query(&tree, "plugins[id=a"), None);
    }

    #[test]
    fn slicing_is_idempotent_on_fixture_configs() {
        for seed in 0..20 {
            let fx = crate::fixtures::random(seed, &crate::fixtures::Profile::default());
            let dir = tempfile::tempdir().unwrap();
            fx.write(dir.path()).unwrap();
            let project = crate::backend::parse_manifest(dir.path()).unwrap();
            let cfg = compute_effective_config(&project);
            let once = slice_config(&cfg, &select_required_plugins(&cfg), &project.root_dir);
            let as_cfg = config(once.plugins.clone(), &[]);
            let as_cfg = EffectiveConfig {
                properties: once.properties.clone(),
                ..as_cfg
            };
            let twice = slice_config(
                &as_cfg,
                &select_required_plugins(&as_cfg),
                Path::new("/elsewhere"),
            );
            assert_eq!(
                (&once.plugins, &once.properties),
                (&twice.plugins, &twice.properties)
            );
            assert!(twice.rewrites_applied.is_empty());
        }
    }

    fn chars(plugins: &[PluginConfig], properties: &BTreeMap<String, String>) -> usize {
        let text = serde_json::to_string(
            &serde_json::json!({"plugins": plugins, "properties": properties}),
        )
        .unwrap();
        text.chars().filter(|c| !c.is_whitespace()).count()
    }

    proptest! {
        #[test]
        fn dropped_properties_shrink_the_config(seed in 0u64..10_000) {
            let fx = crate::fixtures::random(seed, &crate::fixtures::Profile::default());
            let files: Vec<ConfigFile> = fx.configs.clone();
            let project = crate::backend::ProjectModel {
                name: "p".into(), group: "com.acme.app".into(), app_sources: vec![], test_sources: vec![],
                libraries: vec![], resources: vec![], generators: vec![], config_files: files,
                source_roots: vec![], generated_sources: vec![], root_dir: "/r".into(),
            };
            let cfg = compute_effective_config(&project);
            let doc = slice_config(&cfg, &select_required_plugins(&cfg), Path::new("/r"));
            // Keep-everything emitter: all plugins and properties verbatim.
            prop_assert!(chars(&doc.plugins, &doc.properties) < chars(&cfg.plugins, &cfg.properties));
            for p in &doc.plugins {
                prop_assert!(p.phases.iter().any(|ph| REQUIRED_PHASES.contains(ph)));
                let mut leaked = false;
                p.settings.values().for_each(|s| s.for_each_value(&mut |v| leaked |= v.contains(PROJECT_DIR_PLACEHOLDER)));
                prop_assert!(!leaked);
            }
        }
    }
}
