//! Pipeline orchestration and the tables, figures and report it writes.

pub mod extract;
pub mod pipeline;
pub mod svg;
pub mod tables;

pub use extract::{extract_corpus, CorpusSummary, ExtractOutcome, StyleSummary, MAX_FAILURE_SHARE};
pub use pipeline::{
    fields_for, join_all, reduce_all, report_markdown, run_analysis, write_analysis, write_figures,
    Analysis, AnalysisConfig, InputFile, Provenance,
};
pub use svg::{contact_sheet, render_svg};
pub use tables::*;
