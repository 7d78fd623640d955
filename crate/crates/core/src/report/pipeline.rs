//! The analysis pipeline: MI, probing, feature selection, reductions and gradient fields,
//! plus the files and report that record them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dimred::{reduce, ReduceConfig, Reducer};
use crate::embeddings::{join, EmbeddingSet, JoinedDataset};
use crate::error::{Error, Result};
use crate::features::{display_name, FeatureTable};
use crate::gradients::{apcc_average_table, gradient_field, ApccAverageTable, GradientField};
use crate::stats::{
    apcc_table, mi_table, select_features, ApccTable, MiTable, DEFAULT_APCC_THRESHOLD,
    DEFAULT_MI_NEIGHBORS,
};

use super::extract::CorpusSummary;
use super::svg::{contact_sheet, render_svg};
use super::tables::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub mi_k: usize,
    pub apcc_threshold: f64,
    pub reducers: Vec<Reducer>,
    pub reduce: ReduceConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            mi_k: DEFAULT_MI_NEIGHBORS,
            apcc_threshold: DEFAULT_APCC_THRESHOLD,
            reducers: Reducer::ALL.to_vec(),
            reduce: ReduceConfig::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reducers.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one reducer is required".into(),
            ));
        }
        let mut seen = self.reducers.clone();
        seen.sort_by_key(|r| r.key());
        seen.dedup();
        if seen.len() != self.reducers.len() {
            return Err(Error::InvalidParameter("reducer listed twice".into()));
        }
        if !(self.apcc_threshold.is_finite() && (0.0..1.0).contains(&self.apcc_threshold)) {
            return Err(Error::InvalidParameter(format!(
                "APCC threshold {} must lie in [0, 1)",
                self.apcc_threshold
            )));
        }
        if self.mi_k == 0 {
            return Err(Error::InvalidParameter(
                "MI neighbour count must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub datasets: Vec<JoinedDataset>,
    pub mi: MiTable,
    pub apcc: ApccTable,
    pub selected: Vec<String>,
    pub views: Vec<ReducedView>,
    /// Empty when no feature was selected.
    pub fields: Vec<GradientField>,
    /// All cells empty when no feature was selected.
    pub averages: ApccAverageTable,
    pub summary: Option<CorpusSummary>,
}

impl Analysis {
    pub fn tasks(&self) -> Vec<String> {
        self.datasets.iter().map(|d| d.task.clone()).collect()
    }

    pub fn field(&self, task: &str, reducer: Reducer) -> Option<&GradientField> {
        self.fields
            .iter()
            .find(|f| f.task == task && f.reducer == reducer)
    }
}

/// Joins every embedding set with the features; task names must be unique.
pub fn join_all(
    features: &FeatureTable,
    embeddings: &[EmbeddingSet],
) -> Result<Vec<JoinedDataset>> {
    if embeddings.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one embedding set is required".into(),
        ));
    }
    let mut datasets: Vec<JoinedDataset> = Vec::with_capacity(embeddings.len());
    for emb in embeddings {
        if datasets.iter().any(|d| d.task == emb.task) {
            return Err(Error::InvalidParameter(format!(
                "task '{}' given twice",
                emb.task
            )));
        }
        datasets.push(join(emb, features)?);
    }
    Ok(datasets)
}

/// Every (task, reducer) reduction, tasks outermost.
pub fn reduce_all(
    datasets: &[JoinedDataset],
    reducers: &[Reducer],
    config: &ReduceConfig,
) -> Result<Vec<ReducedView>> {
    let mut views = Vec::with_capacity(datasets.len() * reducers.len());
    for d in datasets {
        for &r in reducers {
            log::info!("reducing '{}' with {}", d.task, r.label());
            views.push(ReducedView {
                task: d.task.clone(),
                ids: d.ids.clone(),
                styles: d.styles.clone(),
                reduced: reduce(&d.embeddings, r, config)?,
            });
        }
    }
    Ok(views)
}

/// Gradient fields for every view whose task is among `datasets`.
pub fn fields_for(
    views: &[ReducedView],
    datasets: &[JoinedDataset],
    selected: &[String],
) -> Result<Vec<GradientField>> {
    if selected.is_empty() {
        return Ok(Vec::new());
    }
    views
        .iter()
        .map(|v| {
            let d = datasets.iter().find(|d| d.task == v.task).ok_or_else(|| {
                Error::Consistency(format!("no dataset for reduced task '{}'", v.task))
            })?;
            if d.ids != v.ids {
                return Err(Error::Consistency(format!(
                    "reduced rows of '{}' ({}) do not match its dataset",
                    v.task, v.reduced.reducer
                )));
            }
            gradient_field(&v.reduced, d, selected)
        })
        .collect()
}

pub fn run_analysis(
    features: &FeatureTable,
    embeddings: &[EmbeddingSet],
    config: &AnalysisConfig,
) -> Result<Analysis> {
    config.validate()?;
    let datasets = join_all(features, embeddings)?;
    log::info!("mutual information over {} tasks", datasets.len());
    let mi = mi_table(&datasets, config.mi_k, config.reduce.seed)?;
    let apcc = apcc_table(&datasets)?;
    let selected = select_features(&apcc, config.apcc_threshold);
    let views = reduce_all(&datasets, &config.reducers, &config.reduce)?;
    if selected.is_empty() {
        log::warn!("gradient stage skipped; figures are scatter only");
    }
    let fields = fields_for(&views, &datasets, &selected)?;
    let tasks: Vec<String> = datasets.iter().map(|d| d.task.clone()).collect();
    let averages = apcc_average_table(&fields, &tasks, &config.reducers)?;
    Ok(Analysis {
        datasets,
        mi,
        apcc,
        selected,
        views,
        fields,
        averages,
        summary: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl InputFile {
    pub fn hash(role: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = std::fs::read(path)?;
        let digest = Sha256::digest(&data);
        Ok(InputFile {
            role: role.into(),
            path: path.to_path_buf(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            bytes: data.len() as u64,
        })
    }
}

/// Everything needed to regenerate the outputs: tool version, configuration, thread count
/// and content hashes of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub config: AnalysisConfig,
    pub inputs: Vec<InputFile>,
}

impl Provenance {
    pub fn new(config: &AnalysisConfig, inputs: Vec<InputFile>) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: config.reduce.seed,
            threads: rayon::current_num_threads(),
            config: config.clone(),
            inputs,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Renders one figure per view plus the contact sheet and returns the written paths.
pub fn write_figures(
    views: &[ReducedView],
    fields: &[GradientField],
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let mut tasks: Vec<&str> = Vec::new();
    let mut reducers: Vec<Reducer> = Vec::new();
    for v in views {
        if !tasks.contains(&v.task.as_str()) {
            tasks.push(&v.task);
        }
        if !reducers.contains(&v.reduced.reducer) {
            reducers.push(v.reduced.reducer);
        }
    }
    let mut panels = Vec::with_capacity(views.len());
    let mut paths = Vec::with_capacity(views.len() + 1);
    for v in views {
        let field = fields
            .iter()
            .find(|f| f.task == v.task && f.reducer == v.reduced.reducer);
        let doc = render_svg(v, field);
        let path = figure_path(out, &v.task, v.reduced.reducer);
        std::fs::write(&path, &doc)?;
        paths.push(path);
        let row = tasks.iter().position(|t| *t == v.task).unwrap_or(0);
        let col = reducers
            .iter()
            .position(|r| *r == v.reduced.reducer)
            .unwrap_or(0);
        panels.push((row, col, doc));
    }
    let sheet = out.join("contact_sheet.svg");
    std::fs::write(&sheet, contact_sheet(&panels))?;
    paths.push(sheet);
    Ok(paths)
}

/// Writes every table, reduction, figure, the markdown report and the provenance block.
pub fn write_analysis(
    analysis: &Analysis,
    provenance: &Provenance,
    out_dir: impl AsRef<Path>,
) -> Result<()> {
    let out = out_dir.as_ref();
    std::fs::create_dir_all(out)?;
    write_mi_csv(&analysis.mi, out.join("mi_table.csv"))?;
    write_apcc_csv(
        &analysis.apcc,
        &analysis.selected,
        out.join("apcc_table.csv"),
    )?;
    write_average_csv(&analysis.averages, out.join("apcc_avg.csv"))?;
    write_gradients_csv(&analysis.fields, out.join("gradients.csv"))?;
    for v in &analysis.views {
        write_reduced(v, out)?;
    }
    write_figures(&analysis.views, &analysis.fields, out)?;
    if let Some(summary) = &analysis.summary {
        summary.write_csv(out.join("corpus_summary.csv"))?;
    }
    std::fs::write(out.join("report.md"), report_markdown(analysis, provenance))?;
    provenance.write(out.join("provenance.json"))?;
    Ok(())
}

pub fn report_markdown(analysis: &Analysis, provenance: &Provenance) -> String {
    let mut md = String::from("# Latent space analysis\n\n");
    if let Some(summary) = &analysis.summary {
        md.push_str("## Corpus\n\nDurations in minutes before and after trimming silence, and utterance counts.\n\n");
        md.push_str(&summary.to_markdown());
        md.push('\n');
    }
    md.push_str("## Mutual information\n\nMutual information in bits between each embedding dimension and the style label.\n\n");
    md.push_str(&mi_markdown(&analysis.mi));
    md.push_str(&format!(
        "\n## Feature probes\n\nAPCC of the best linear fit from the embedding to each feature. Selected features exceed {} in every latent space.\n\n",
        provenance.config.apcc_threshold
    ));
    if analysis.selected.is_empty() {
        md.push_str("No feature was selected; gradient fields were not computed.\n\n");
    } else {
        md.push_str(&apcc_markdown(&analysis.apcc, &analysis.selected));
        md.push('\n');
    }
    md.push_str("## Mean APCC in two dimensions\n\nMean APCC of the selected features regressed on each 2-D reduction.\n\n");
    md.push_str(&average_markdown(&analysis.averages));
    md.push_str("\n## Figures\n\n");
    for v in &analysis.views {
        let name = figure_path(Path::new(""), &v.task, v.reduced.reducer);
        md.push_str(&format!(
            "- {} {}: `{}`\n",
            v.task,
            v.reduced.reducer.label(),
            name.display()
        ));
    }
    md.push_str("- all panels: `contact_sheet.svg`\n");
    md.push_str("\n## All feature probes\n\n");
    md.push_str(&full_apcc_markdown(&analysis.apcc, &analysis.selected));
    md.push_str(&format!(
        "\n## Provenance\n\n{} {}, seed {}, {} threads. Full configuration and input hashes in `provenance.json`.\n",
        provenance.tool, provenance.version, provenance.seed, provenance.threads
    ));
    md
}

fn full_apcc_markdown(table: &ApccTable, selected: &[String]) -> String {
    let mut out = String::from("| Feature |");
    for t in &table.tasks {
        out.push_str(&format!(" {t} |"));
    }
    out.push_str(" Selected |\n|---|");
    out.push_str(&"---|".repeat(table.tasks.len() + 1));
    out.push('\n');
    for (name, row) in table.features.iter().zip(&table.values) {
        out.push_str(&format!("| {} |", display_name(name)));
        for a in row {
            out.push_str(&format!(" {:.2} |", a.value));
        }
        out.push_str(if selected.contains(name) {
            " yes |\n"
        } else {
            " |\n"
        });
    }
    out
}
