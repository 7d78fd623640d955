//! CSV and markdown renderings of the analysis tables, plus readers for the intermediate
//! files that let each stage run on its own.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dimred::{Reduced2D, Reducer};
use crate::error::{Error, Result};
use crate::features::display_name;
use crate::gradients::{null_r2_threshold, ApccAverageTable, FeatureGradient, GradientField};
use crate::stats::{ApccTable, MiTable};

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn md_cell(v: Option<f64>, decimals: usize) -> String {
    v.map(|x| format!("{x:.decimals$}"))
        .unwrap_or_else(|| "-".into())
}

fn md_header(corner: &str, columns: &[String]) -> String {
    let mut out = format!("| {corner} |");
    for c in columns {
        out.push_str(&format!(" {c} |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(columns.len()));
    out.push('\n');
    out
}

/// `dim,<task>...`
pub fn write_mi_csv(table: &MiTable, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["dim".to_string()];
    header.extend(table.tasks.iter().cloned());
    w.write_record(&header)?;
    for (dim, row) in table.values.iter().enumerate() {
        let mut rec = vec![dim.to_string()];
        rec.extend(row.iter().map(|v| cell(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Embedding dims as rows, tasks as columns, bits to two decimals.
pub fn mi_markdown(table: &MiTable) -> String {
    let mut out = md_header("", &table.tasks);
    for (dim, row) in table.values.iter().enumerate() {
        out.push_str(&format!("| {dim} |"));
        for v in row {
            out.push_str(&format!(" {} |", md_cell(*v, 2)));
        }
        out.push('\n');
    }
    out
}

/// `feature,<task>...,selected` over every feature column.
pub fn write_apcc_csv(
    table: &ApccTable,
    selected: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["feature".to_string()];
    header.extend(table.tasks.iter().cloned());
    header.push("selected".into());
    w.write_record(&header)?;
    for (name, row) in table.features.iter().zip(&table.values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|a| a.value.to_string()));
        rec.push(selected.contains(name).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `apcc_table.csv` back into a table and its selection column.
pub fn read_apcc_csv(path: impl AsRef<Path>) -> Result<(ApccTable, Vec<String>)> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "feature" || &header[header.len() - 1] != "selected" {
        return Err(Error::format(
            path,
            "APCC header must be feature,<tasks>,selected",
        ));
    }
    let tasks: Vec<String> = header
        .iter()
        .skip(1)
        .take(header.len() - 2)
        .map(str::to_string)
        .collect();
    let (mut features, mut values, mut selected) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let row = (1..=tasks.len())
            .map(|i| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| Error::format(path, format!("bad APCC '{}'", &rec[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        if &rec[rec.len() - 1] == "true" {
            selected.push(rec[0].to_string());
        }
        features.push(rec[0].to_string());
        values.push(row);
    }
    Ok((ApccTable::from_values(features, tasks, values), selected))
}

/// Selected features only, display names, two decimals.
pub fn apcc_markdown(table: &ApccTable, features: &[String]) -> String {
    let mut out = md_header("APCC", &table.tasks);
    for name in features {
        let Some(f) = table.features.iter().position(|x| x == name) else {
            continue;
        };
        out.push_str(&format!("| {} |", display_name(name)));
        for a in &table.values[f] {
            out.push_str(&format!(" {:.2} |", a.value));
        }
        out.push('\n');
    }
    out
}

/// `task,<reducer>...`
pub fn write_average_csv(table: &ApccAverageTable, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["task".to_string()];
    header.extend(table.reducers.iter().map(|r| r.key().to_string()));
    w.write_record(&header)?;
    for (task, row) in table.tasks.iter().zip(&table.values) {
        let mut rec = vec![task.clone()];
        rec.extend(row.iter().map(|v| cell(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Tasks as rows, reducers as columns, three decimals.
pub fn average_markdown(table: &ApccAverageTable) -> String {
    let labels: Vec<String> = table
        .reducers
        .iter()
        .map(|r| r.label().to_string())
        .collect();
    let mut out = md_header("APCC", &labels);
    for (task, row) in table.tasks.iter().zip(&table.values) {
        out.push_str(&format!("| {task} |"));
        for v in row {
            out.push_str(&format!(" {} |", md_cell(*v, 3)));
        }
        out.push('\n');
    }
    out
}

pub const GRADIENT_HEADER: [&str; 8] = [
    "task", "reducer", "feature", "gx", "gy", "dir_x", "dir_y", "apcc",
];

pub fn write_gradients_csv(fields: &[GradientField], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(GRADIENT_HEADER)?;
    for f in fields {
        for g in &f.gradients {
            w.write_record([
                f.task.clone(),
                f.reducer.key().to_string(),
                g.feature.clone(),
                g.gradient[0].to_string(),
                g.gradient[1].to_string(),
                g.direction[0].to_string(),
                g.direction[1].to_string(),
                g.apcc.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads gradient fields grouped by (task, reducer) in file order. The low-confidence flag
/// is not stored; it is recomputed from `n_points` for each task when given.
pub fn read_gradients_csv(
    path: impl AsRef<Path>,
    n_points: &BTreeMap<String, usize>,
) -> Result<Vec<GradientField>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(GRADIENT_HEADER) {
        return Err(Error::format(
            path,
            format!("gradient header must be {}", GRADIENT_HEADER.join(",")),
        ));
    }
    let mut fields: Vec<GradientField> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::format(path, format!("bad number '{}'", &rec[i])))
        };
        let reducer: Reducer = rec[1].parse()?;
        let apcc = num(7)?;
        let low_confidence = n_points
            .get(&rec[0])
            .is_some_and(|&n| apcc * apcc < null_r2_threshold(n));
        let g = FeatureGradient {
            feature: rec[2].to_string(),
            gradient: [num(3)?, num(4)?],
            direction: [num(5)?, num(6)?],
            apcc,
            low_confidence,
        };
        match fields
            .iter_mut()
            .find(|f| f.task == rec[0] && f.reducer == reducer)
        {
            Some(f) => f.gradients.push(g),
            None => fields.push(GradientField {
                task: rec[0].to_string(),
                reducer,
                gradients: vec![g],
            }),
        }
    }
    Ok(fields)
}

/// A reduced task with its row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedView {
    pub task: String,
    pub ids: Vec<String>,
    pub styles: Vec<String>,
    pub reduced: Reduced2D,
}

/// Reducer provenance stored next to each reduced CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSidecar {
    pub task: String,
    pub reducer: Reducer,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
    pub n_points: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_trace: Vec<f64>,
}

/// Replaces characters that do not belong in a file name.
pub fn file_stem_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn reduced_csv_path(dir: &Path, task: &str, reducer: Reducer) -> PathBuf {
    dir.join(format!(
        "reduced_{}_{}.csv",
        file_stem_safe(task),
        reducer.key()
    ))
}

pub fn figure_path(dir: &Path, task: &str, reducer: Reducer) -> PathBuf {
    dir.join(format!(
        "fig_gradients_{}_{}.svg",
        file_stem_safe(task),
        reducer.key()
    ))
}

/// `utterance_id,style,x,y` plus a `.json` sidecar with the reducer provenance.
pub fn write_reduced(view: &ReducedView, dir: &Path) -> Result<PathBuf> {
    let path = reduced_csv_path(dir, &view.task, view.reduced.reducer);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["utterance_id", "style", "x", "y"])?;
    for ((id, style), p) in view.ids.iter().zip(&view.styles).zip(&view.reduced.coords) {
        w.write_record([
            id.clone(),
            style.clone(),
            p[0].to_string(),
            p[1].to_string(),
        ])?;
    }
    w.flush()?;
    let sidecar = ReducedSidecar {
        task: view.task.clone(),
        reducer: view.reduced.reducer,
        seed: view.reduced.seed,
        params: view.reduced.params.clone(),
        n_points: view.reduced.len(),
        loss_trace: view.reduced.loss_trace.clone(),
    };
    std::fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(&sidecar)? + "\n",
    )?;
    Ok(path)
}

pub fn read_reduced(path: impl AsRef<Path>) -> Result<ReducedView> {
    let path = path.as_ref();
    let sidecar: ReducedSidecar =
        serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(["utterance_id", "style", "x", "y"]) {
        return Err(Error::format(
            path,
            "reduced header must be utterance_id,style,x,y",
        ));
    }
    let (mut ids, mut styles, mut coords) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::format(path, format!("bad coordinate '{}'", &rec[i])))
        };
        coords.push([num(2)?, num(3)?]);
        ids.push(rec[0].to_string());
        styles.push(rec[1].to_string());
    }
    if coords.len() != sidecar.n_points {
        return Err(Error::Consistency(format!(
            "{} has {} rows, its sidecar records {}",
            path.display(),
            coords.len(),
            sidecar.n_points
        )));
    }
    Ok(ReducedView {
        task: sidecar.task,
        ids,
        styles,
        reduced: Reduced2D {
            coords,
            reducer: sidecar.reducer,
            seed: sidecar.seed,
            params: sidecar.params,
            loss_trace: sidecar.loss_trace,
        },
    })
}
