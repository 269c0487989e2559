//! Effective configuration: the parent-first merge of every config file,
//! with dependency versions mediated by nearest definition.

use std::collections::{BTreeMap, BTreeSet};

use super::{merge_settings, ConfigFile, Dependency, EffectiveConfig, PluginConfig, ProjectModel};
use crate::model::LibCoord;

pub fn compute_effective_config(project: &ProjectModel) -> EffectiveConfig {
    merge_config_files(&project.config_files)
}

pub(crate) fn merge_config_files(files: &[ConfigFile]) -> EffectiveConfig {
    let mut plugins: Vec<PluginConfig> = Vec::new();
    let mut properties = BTreeMap::new();
    let mut origin = BTreeMap::new();

    for file in files {
        for plugin in &file.plugins {
            match plugins.iter_mut().find(|p| p.id == plugin.id) {
                Some(existing) => {
                    existing.phases = plugin.phases.clone();
                    existing.category = plugin.category;
                    merge_settings(&mut existing.settings, &plugin.settings);
                }
                None => plugins.push(plugin.clone()),
            }
            origin.insert(format!("plugin:{}", plugin.id), file.path.clone());
        }
        for (key, value) in &file.properties {
            properties.insert(key.clone(), value.clone());
            origin.insert(format!("property:{key}"), file.path.clone());
        }
    }

    let declarations: Vec<(&Dependency, &str)> = files
        .iter()
        .flat_map(|f| f.dependencies.iter().map(move |d| (d, f.path.as_str())))
        .collect();
    let mut winners: Vec<(usize, usize)> = Vec::new(); // (declaration index, depth)
    for (idx, (dep, _)) in declarations.iter().enumerate() {
        let depth = chain_depth(dep, &declarations, &mut BTreeSet::new());
        match winners
            .iter_mut()
            .find(|(w, _)| declarations[*w].0.coord.key() == dep.coord.key())
        {
            // Strictly shorter chains win; equal depth keeps the earlier declaration.
            Some(slot) if depth < slot.1 => *slot = (idx, depth),
            Some(_) => {}
            None => winners.push((idx, depth)),
        }
    }
    let mut mediated = Vec::with_capacity(winners.len());
    for (idx, _) in winners {
        let (dep, path) = declarations[idx];
        origin.insert(
            format!("dependency:{}:{}", dep.coord.group, dep.coord.artifact),
            path.to_string(),
        );
        mediated.push(dep.coord.clone());
    }

    EffectiveConfig {
        plugins,
        properties,
        mediated_dependencies: mediated,
        origin,
    }
}

/// Length of the `via` chain leading to `dep`. A `via` coordinate that is
/// itself declared through another `via` extends the chain.
fn chain_depth(
    dep: &Dependency,
    all: &[(&Dependency, &str)],
    seen: &mut BTreeSet<LibCoord>,
) -> usize {
    let Some(via) = &dep.via else { return 0 };
    if !seen.insert(via.clone()) {
        return 1;
    }
    let parent = all
        .iter()
        .filter(|(d, _)| &d.coord == via)
        .map(|(d, _)| chain_depth(d, all, seen))
        .min()
        .unwrap_or(0);
    1 + parent
}
