//! Report tables: performance per dataset, attack potency, and resilience.
//!
//! Scores print with four decimals, percentages with one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluate::LowResourceScore;
use crate::metrics::{summarize_with, MetricError, RelativeFormula, RobustnessSummary, ScoreMatrix};
use crate::records::{DatasetKey, EvalSet};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("score matrix is empty")]
    EmptyMatrix,
    #[error("no low-resource scores")]
    EmptyLowResource,
    #[error("incomplete matrix: {0}")]
    Incomplete(#[from] MetricError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    #[default]
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for Style {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Style::Text),
            "csv" => Ok(Style::Csv),
            "json" => Ok(Style::Json),
            other => Err(format!("unknown report style `{other}`")),
        }
    }
}

/// Which tables to emit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableSelection {
    #[default]
    All,
    Performance,
    Robustness,
}

impl std::str::FromStr for TableSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(TableSelection::All),
            "performance" => Ok(TableSelection::Performance),
            "robustness" => Ok(TableSelection::Robustness),
            other => Err(format!("unknown table `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn render_text(&self, out: &mut String) {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.chars().count());
            }
        }
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        let _ = writeln!(out, "{}", self.title);
        line(&self.header, out);
        let total: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
        let _ = writeln!(out, "{}", "-".repeat(total));
        for row in &self.rows {
            line(row, out);
        }
    }

    fn render_csv(&self, out: &mut String) -> Result<(), ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        let _ = writeln!(out, "# {}", self.title);
        out.push_str(&String::from_utf8_lossy(&bytes));
        Ok(())
    }
}

fn score(v: f64) -> String {
    format!("{v:.4}")
}

fn percent(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

fn eval_sets(matrix: &ScoreMatrix) -> Vec<EvalSet> {
    std::iter::once(EvalSet::Test)
        .chain(matrix.attacks().into_iter().map(EvalSet::Attack))
        .collect()
}

/// Per-dataset F1 macro for every system and eval set, with an `Avg.` row.
pub fn performance_table(matrix: &ScoreMatrix) -> Result<Table, ReportError> {
    let systems = matrix.systems();
    let sets = eval_sets(matrix);
    let mut header = vec!["dataset".to_string()];
    for s in &systems {
        for e in &sets {
            header.push(format!("{s} {}", e.as_str()));
        }
    }
    let datasets: BTreeSet<DatasetKey> = matrix.per_dataset().iter().map(|d| d.dataset).collect();
    let lookup: BTreeMap<(&str, EvalSet, DatasetKey), f64> = matrix
        .per_dataset()
        .iter()
        .map(|d| ((d.system.as_str(), d.eval_set, d.dataset), d.score))
        .collect();
    let mut rows = Vec::new();
    for d in datasets {
        let mut row = vec![d.to_string()];
        for s in &systems {
            for e in &sets {
                row.push(
                    lookup
                        .get(&(s.as_str(), *e, d))
                        .map_or_else(|| "-".to_string(), |v| score(*v)),
                );
            }
        }
        rows.push(row);
    }
    let mut avg = vec!["Avg.".to_string()];
    for s in &systems {
        for e in &sets {
            avg.push(score(matrix.score(s, *e)?));
        }
    }
    rows.push(avg);
    Ok(Table {
        title: "Performance (F1 macro)".into(),
        header,
        rows,
    })
}

/// Attacks ranked by raw potency.
pub fn potency_table(summary: &RobustnessSummary) -> Table {
    let mut attacks = summary.attacks.clone();
    attacks.sort_by(|a, b| b.raw_potency.total_cmp(&a.raw_potency));
    Table {
        title: "Potency".into(),
        header: ["attack", "raw potency (%)", "correctness", "potency (%)"]
            .map(String::from)
            .to_vec(),
        rows: attacks
            .iter()
            .map(|a| {
                vec![
                    a.attack.as_str().to_string(),
                    percent(a.raw_potency),
                    score(a.correctness),
                    percent(a.potency),
                ]
            })
            .collect(),
    }
}

pub fn resilience_table(summary: &RobustnessSummary) -> Table {
    let attacks: Vec<_> = summary.attacks.iter().map(|a| a.attack).collect();
    let mut header: Vec<String> = ["system", "resilience (%)", "resilience_rel (%)"]
        .map(String::from)
        .to_vec();
    header.extend(attacks.iter().map(|a| format!("rel {} (%)", a.as_str())));
    let rows = summary
        .systems
        .iter()
        .map(|s| {
            let mut row = vec![s.system.clone(), percent(s.resilience), percent(s.resilience_rel)];
            row.extend(attacks.iter().map(|a| percent(s.resilience_rel_per_attack[a])));
            row
        })
        .collect();
    Table {
        title: "Resilience".into(),
        header,
        rows,
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    performance: Option<&'a ScoreMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    robustness: Option<&'a RobustnessSummary>,
}

/// Renders the selected tables for a complete matrix.
pub fn render_report(
    matrix: &ScoreMatrix,
    style: Style,
    tables: TableSelection,
    formula: RelativeFormula,
) -> Result<String, ReportError> {
    if matrix.is_empty() {
        return Err(ReportError::EmptyMatrix);
    }
    let summary = summarize_with(matrix, formula)?;
    let want_perf = tables != TableSelection::Robustness;
    let want_rob = tables != TableSelection::Performance;
    if style == Style::Json {
        let doc = JsonReport {
            performance: want_perf.then_some(matrix),
            robustness: want_rob.then_some(&summary),
        };
        return Ok(serde_json::to_string_pretty(&doc)? + "\n");
    }
    let mut list = Vec::new();
    if want_perf {
        list.push(performance_table(matrix)?);
    }
    if want_rob {
        list.push(potency_table(&summary));
        list.push(resilience_table(&summary));
    }
    render_tables(&list, style)
}

fn render_tables(tables: &[Table], style: Style) -> Result<String, ReportError> {
    let mut out = String::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match style {
            Style::Text => t.render_text(&mut out),
            Style::Csv => t.render_csv(&mut out)?,
            Style::Json => unreachable!(),
        }
    }
    Ok(out)
}

/// Scores per system and ratio, one column per dataset plus `Avg.`.
pub fn low_resource_table(scores: &[LowResourceScore]) -> Result<Table, ReportError> {
    if scores.is_empty() {
        return Err(ReportError::EmptyLowResource);
    }
    let datasets: BTreeSet<DatasetKey> = scores.iter().map(|s| s.dataset).collect();
    let mut grid: BTreeMap<(String, u64), BTreeMap<DatasetKey, f64>> = BTreeMap::new();
    for s in scores {
        grid.entry((s.system.clone(), (s.ratio * 1000.0).round() as u64))
            .or_default()
            .insert(s.dataset, s.score);
    }
    let mut header = vec!["system".to_string(), "ratio (%)".to_string()];
    header.extend(datasets.iter().map(|d| d.to_string()));
    header.push("Avg.".into());
    let rows = grid
        .into_iter()
        .map(|((system, permille), cells)| {
            let mut row = vec![system, format!("{:.0}", permille as f64 / 10.0)];
            row.extend(
                datasets
                    .iter()
                    .map(|d| cells.get(d).map_or_else(|| "-".to_string(), |v| score(*v))),
            );
            row.push(score(cells.values().sum::<f64>() / cells.len() as f64));
            row
        })
        .collect();
    Ok(Table {
        title: "Low-resource (F1 macro)".into(),
        header,
        rows,
    })
}

pub fn render_low_resource(scores: &[LowResourceScore], style: Style) -> Result<String, ReportError> {
    if style == Style::Json {
        if scores.is_empty() {
            return Err(ReportError::EmptyLowResource);
        }
        return Ok(serde_json::to_string_pretty(scores)? + "\n");
    }
    render_tables(&[low_resource_table(scores)?], style)
}
