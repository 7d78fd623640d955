//! Manifest-driven feature extraction with the per-style corpus summary.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{load_wav, trim_silence, ManifestEntry};
use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, FeatureTable};

/// Largest tolerated share of unreadable or unusable files.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSummary {
    pub style: String,
    /// Minutes of audio as recorded.
    pub duration_min: f64,
    /// Minutes left after trimming leading and trailing silence.
    pub trimmed_min: f64,
    pub n_utts: usize,
}

/// Per-style durations and counts, styles in order of first appearance in the manifest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub styles: Vec<StyleSummary>,
}

impl CorpusSummary {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["style", "duration_min", "trimmed_duration_min", "n_utts"])?;
        for s in &self.styles {
            w.write_record([
                s.style.clone(),
                s.duration_min.to_string(),
                s.trimmed_min.to_string(),
                s.n_utts.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let mut styles = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::format(path, "summary rows need 4 fields"));
            }
            let num = |i: usize| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| Error::format(path, format!("bad number '{}'", &rec[i])))
            };
            styles.push(StyleSummary {
                style: rec[0].to_string(),
                duration_min: num(1)?,
                trimmed_min: num(2)?,
                n_utts: rec[3]
                    .parse()
                    .map_err(|_| Error::format(path, format!("bad count '{}'", &rec[3])))?,
            });
        }
        Ok(CorpusSummary { styles })
    }

    /// Table with columns Duration, Trimmed duration, n utts.
    pub fn to_markdown(&self) -> String {
        let mut out =
            String::from("| | Duration | Trimmed duration | n utts |\n|---|---|---|---|\n");
        for s in &self.styles {
            out.push_str(&format!(
                "| {} | {:.2} | {:.2} | {} |\n",
                s.style, s.duration_min, s.trimmed_min, s.n_utts
            ));
        }
        out
    }
}

#[derive(Debug)]
pub struct ExtractOutcome {
    pub table: FeatureTable,
    pub summary: CorpusSummary,
    /// Utterance id and reason for every file that produced no feature row.
    pub failures: Vec<(String, String)>,
}

impl ExtractOutcome {
    pub fn failure_share(&self) -> f64 {
        let total = self.table.len() + self.failures.len();
        if total == 0 {
            0.0
        } else {
            self.failures.len() as f64 / total as f64
        }
    }

    /// Writes `features.csv`, `corpus_summary.csv` and, when anything failed,
    /// `extract_failures.csv`.
    pub fn write(&self, out_dir: impl AsRef<Path>) -> Result<()> {
        let out = out_dir.as_ref();
        std::fs::create_dir_all(out)?;
        self.table.write_csv(out.join("features.csv"))?;
        self.summary.write_csv(out.join("corpus_summary.csv"))?;
        let failures = out.join("extract_failures.csv");
        if self.failures.is_empty() {
            if failures.exists() {
                std::fs::remove_file(failures)?;
            }
        } else {
            let mut w = csv::Writer::from_path(failures)?;
            w.write_record(["utterance_id", "reason"])?;
            for (id, reason) in &self.failures {
                w.write_record([id, reason])?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

struct Analysed {
    duration: f64,
    trimmed: f64,
    features: Result<crate::features::FeatureVector>,
}

/// Loads and analyses every manifest entry in parallel. Unreadable and unusable files are
/// collected rather than fatal; more than 10% of them is a validation error.
pub fn extract_corpus(
    entries: &[ManifestEntry],
    extractor: &FeatureExtractor,
) -> Result<ExtractOutcome> {
    let analysed: Vec<Result<Analysed>> = entries
        .par_iter()
        .map(|e| {
            let mut clip = load_wav(&e.wav_path)?;
            clip.id = e.utterance_id.clone();
            let trimmed = match extractor.silence_db {
                Some(db) => match trim_silence(&clip, db) {
                    Ok(t) => t.duration(),
                    Err(Error::EmptyClip(_)) => 0.0,
                    Err(err) => return Err(err),
                },
                None => clip.duration(),
            };
            Ok(Analysed {
                duration: clip.duration(),
                trimmed,
                features: extractor.extract(&clip),
            })
        })
        .collect();

    let mut table = FeatureTable::canonical();
    let mut failures = Vec::new();
    let mut summary = CorpusSummary::default();
    for (entry, result) in entries.iter().zip(analysed) {
        let a = match result {
            Ok(a) => a,
            Err(e) => {
                log::warn!("{}: {e}", entry.wav_path.display());
                failures.push((entry.utterance_id.clone(), e.to_string()));
                continue;
            }
        };
        let idx = match summary.styles.iter().position(|s| s.style == entry.style) {
            Some(i) => i,
            None => {
                summary.styles.push(StyleSummary {
                    style: entry.style.clone(),
                    duration_min: 0.0,
                    trimmed_min: 0.0,
                    n_utts: 0,
                });
                summary.styles.len() - 1
            }
        };
        let s = &mut summary.styles[idx];
        s.duration_min += a.duration / 60.0;
        s.trimmed_min += a.trimmed / 60.0;
        s.n_utts += 1;
        match a.features {
            Ok(v) => table.push_vector(&entry.utterance_id, &entry.style, v)?,
            Err(e) => {
                log::warn!("{}: {e}", entry.utterance_id);
                failures.push((entry.utterance_id.clone(), e.to_string()));
            }
        }
    }
    let outcome = ExtractOutcome {
        table,
        summary,
        failures,
    };
    if outcome.failure_share() > MAX_FAILURE_SHARE {
        return Err(Error::Validation(format!(
            "{} of {} files could not be analysed (limit {:.0}%)",
            outcome.failures.len(),
            entries.len(),
            MAX_FAILURE_SHARE * 100.0
        )));
    }
    Ok(outcome)
}
