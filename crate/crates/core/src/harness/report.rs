use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{HarnessError, TrainRunResult};
use crate::model::display_plural;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub model: String,
    pub component: String,
    pub best_map50: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub mean_map50: f64,
    /// Mean over components of each run's total training time.
    pub mean_seconds: f64,
    pub sum_seconds: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component: String,
    pub mean_map50: f64,
    pub mean_seconds: f64,
    pub cells: usize,
}

/// Model × component grid of finished runs with row and column means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Row order: first appearance in the input.
    pub models: Vec<String>,
    pub components: Vec<String>,
    pub cells: Vec<ComparisonCell>,
    pub per_model: Vec<ModelSummary>,
    pub per_component: Vec<ComponentSummary>,
    /// Mean of the per-model means.
    pub overall_by_model: f64,
    /// Mean of the per-component means.
    pub overall_by_component: f64,
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.filter(|s| seen.insert(*s)).map(str::to_string).collect()
}

// Sums in key order so the means do not depend on input order.
fn mean_of(values: &mut [(String, String, f64)]) -> f64 {
    values.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    values.iter().map(|v| v.2).sum::<f64>() / values.len() as f64
}

fn mean_sorted(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn compare(results: &[TrainRunResult]) -> Result<ComparisonReport, HarnessError> {
    if results.is_empty() {
        return Err(HarnessError::NoResults);
    }
    let mut keys = HashSet::new();
    for r in results {
        if !keys.insert((r.model_name.as_str(), r.component_name.as_str())) {
            return Err(HarnessError::DuplicateCell {
                model: r.model_name.clone(),
                component: r.component_name.clone(),
            });
        }
    }
    let cells: Vec<ComparisonCell> = results
        .iter()
        .map(|r| ComparisonCell {
            model: r.model_name.clone(),
            component: r.component_name.clone(),
            best_map50: r.best_map50,
            total_seconds: r.total_seconds,
        })
        .collect();
    let models = first_seen(cells.iter().map(|c| c.model.as_str()));
    let components = first_seen(cells.iter().map(|c| c.component.as_str()));

    let collect = |pick: &dyn Fn(&ComparisonCell) -> bool, val: &dyn Fn(&ComparisonCell) -> f64| {
        cells.iter().filter(|c| pick(c)).map(|c| (c.model.clone(), c.component.clone(), val(c))).collect::<Vec<_>>()
    };

    let per_model: Vec<ModelSummary> = models
        .iter()
        .map(|m| {
            let mut maps = collect(&|c| &c.model == m, &|c| c.best_map50);
            let mut secs = collect(&|c| &c.model == m, &|c| c.total_seconds);
            let mean_seconds = mean_of(&mut secs);
            ModelSummary {
                model: m.clone(),
                mean_map50: mean_of(&mut maps),
                mean_seconds,
                sum_seconds: secs.iter().map(|s| s.2).sum(),
                cells: secs.len(),
            }
        })
        .collect();
    let per_component: Vec<ComponentSummary> = components
        .iter()
        .map(|k| {
            let mut maps = collect(&|c| &c.component == k, &|c| c.best_map50);
            let mut secs = collect(&|c| &c.component == k, &|c| c.total_seconds);
            ComponentSummary {
                component: k.clone(),
                mean_map50: mean_of(&mut maps),
                mean_seconds: mean_of(&mut secs),
                cells: maps.len(),
            }
        })
        .collect();
    let overall_by_model = mean_sorted(&mut per_model.iter().map(|m| m.mean_map50).collect::<Vec<_>>());
    let overall_by_component = mean_sorted(&mut per_component.iter().map(|c| c.mean_map50).collect::<Vec<_>>());

    Ok(ComparisonReport { models, components, cells, per_model, per_component, overall_by_model, overall_by_component })
}

impl ComparisonReport {
    pub fn cell(&self, model: &str, component: &str) -> Option<&ComparisonCell> {
        self.cells.iter().find(|c| c.model == model && c.component == component)
    }

    /// Per-model table: average mAP@50 and average training time.
    pub fn render_model_table(&self) -> String {
        let mut out = String::from("Model\tAverage mAP@50\tAverage Efficiency (Total Training Time) (s)\n");
        for m in &self.per_model {
            let _ = writeln!(out, "{}\t{:.3}\t{:.2}", m.model, m.mean_map50, m.mean_seconds);
        }
        out
    }

    /// Per-component table of mAP@50 averaged over models.
    pub fn render_component_table(&self) -> String {
        let mut out = String::from("Component\tAverage mAP@50\n");
        for c in &self.per_component {
            let _ = writeln!(out, "{}\t{:.3}", display_plural(&c.component), c.mean_map50);
        }
        out
    }

    /// Training seconds for every model × component cell.
    pub fn render_time_grid(&self) -> String {
        let mut out = String::from("Model");
        for c in &self.components {
            let _ = write!(out, "\t{}", display_plural(c));
        }
        out.push('\n');
        for m in &self.models {
            out.push_str(m);
            for c in &self.components {
                match self.cell(m, c) {
                    Some(cell) => {
                        let _ = write!(out, "\t{:.2}", cell.total_seconds);
                    }
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn render_all(&self) -> String {
        format!(
            "{}\n{}\n{}\nOverall mAP@50: {:.3} (mean of model means), {:.3} (mean of component means)\n",
            self.render_model_table(),
            self.render_component_table(),
            self.render_time_grid(),
            self.overall_by_model,
            self.overall_by_component
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
