use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use styleprobe::audio::read_manifest;
use styleprobe::dimred::{reduce as reduce_one, Reduced2D, Reducer};
use styleprobe::embeddings::{join, load_embeddings, EmbeddingSet};
use styleprobe::features::{FeatureExtractor, FeatureTable};
use styleprobe::gradients::{apcc_average_table, gradient_field};
use styleprobe::report::{
    extract_corpus, read_apcc_csv, read_gradients_csv, read_reduced, reduce_all, run_analysis,
    write_analysis, write_average_csv, write_figures, write_gradients_csv, write_reduced,
    CorpusSummary, InputFile, Provenance, ReducedView,
};
use styleprobe::stats::select_features;
use styleprobe::synth::{write_corpus, SynthSpec};
use styleprobe::{Error, Result};

use crate::args::{AnalyzeArgs, ExtractArgs, GradientsArgs, ReduceArgs, RenderArgs, SynthArgs};

/// Fails with an I/O error naming the path when an input file is missing.
fn require(path: &Path) -> Result<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )
        .into())
    }
}

fn load_all(pairs: &[(String, PathBuf)]) -> Result<Vec<EmbeddingSet>> {
    pairs
        .iter()
        .map(|(task, path)| load_embeddings(require(path)?, task))
        .collect()
}

fn push_unique<T: PartialEq + Clone>(list: &mut Vec<T>, item: &T) {
    if !list.contains(item) {
        list.push(item.clone());
    }
}

pub fn extract(args: &ExtractArgs, out: &Path) -> Result<()> {
    let entries = read_manifest(require(&args.manifest)?)?;
    let outcome = extract_corpus(&entries, &FeatureExtractor::default())?;
    outcome.write(out)?;
    log::info!(
        "{} utterances extracted, {} failed, {} styles",
        outcome.table.len(),
        outcome.failures.len(),
        outcome.summary.styles.len()
    );
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs, out: &Path, seed: Option<u64>) -> Result<()> {
    let config = args.config(seed);
    config.validate()?;
    std::fs::create_dir_all(out)?;
    let mut inputs = Vec::new();
    let (features, summary) = match (&args.manifest, &args.features) {
        (Some(manifest), _) => {
            inputs.push(InputFile::hash("manifest", require(manifest)?)?);
            let outcome = extract_corpus(&read_manifest(manifest)?, &FeatureExtractor::default())?;
            outcome.write(out)?;
            (outcome.table, Some(outcome.summary))
        }
        (None, Some(path)) => {
            inputs.push(InputFile::hash("features", require(path)?)?);
            let sibling = path
                .parent()
                .unwrap_or(Path::new(""))
                .join("corpus_summary.csv");
            let summary = match &args.corpus_summary {
                Some(p) => Some(CorpusSummary::read_csv(p)?),
                None if sibling.is_file() => Some(CorpusSummary::read_csv(&sibling)?),
                None => None,
            };
            (FeatureTable::read_csv(path)?, summary)
        }
        (None, None) => {
            return Err(Error::InvalidParameter(
                "either features or a manifest is required".into(),
            ))
        }
    };
    for (task, path) in &args.embeddings {
        inputs.push(InputFile::hash(
            format!("embeddings:{task}"),
            require(path)?,
        )?);
    }
    let embeddings = load_all(&args.embeddings)?;
    let mut analysis = run_analysis(&features, &embeddings, &config)?;
    analysis.summary = summary;
    log::info!("{} features selected", analysis.selected.len());
    write_analysis(&analysis, &Provenance::new(&config, inputs), out)
}

pub fn reduce(args: &ReduceArgs, out: &Path, seed: Option<u64>) -> Result<()> {
    let config = args.reduce.config(seed);
    std::fs::create_dir_all(out)?;
    let embeddings = load_all(&args.embeddings)?;
    let views = match &args.features {
        Some(path) => {
            let features = FeatureTable::read_csv(require(path)?)?;
            let datasets = embeddings
                .iter()
                .map(|e| join(e, &features))
                .collect::<Result<Vec<_>>>()?;
            reduce_all(&datasets, &args.reduce.reducers, &config)?
        }
        None => {
            let mut views = Vec::new();
            for e in &embeddings {
                let x = e.matrix();
                for &r in &args.reduce.reducers {
                    views.push(ReducedView {
                        task: e.task.clone(),
                        ids: e.ids().to_vec(),
                        styles: e.styles().to_vec(),
                        reduced: reduce_one(&x, r, &config)?,
                    });
                }
            }
            views
        }
    };
    for v in &views {
        write_reduced(v, out)?;
    }
    Ok(())
}

pub fn gradients(args: &GradientsArgs, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let features = FeatureTable::read_csv(require(&args.features)?)?;
    let selected = if !args.select.is_empty() {
        args.select.clone()
    } else if let Some(path) = &args.apcc_table {
        let (table, stored) = read_apcc_csv(require(path)?)?;
        if stored.is_empty() {
            log::warn!(
                "{} selects no feature; trying every feature above zero",
                path.display()
            );
            select_features(&table, 0.0)
        } else {
            stored
        }
    } else {
        return Err(Error::InvalidParameter(
            "name the features with --select or give --apcc-table".into(),
        ));
    };
    if selected.is_empty() {
        return Err(Error::Validation("no feature to fit".into()));
    }
    let (mut tasks, mut reducers): (Vec<String>, Vec<Reducer>) = (Vec::new(), Vec::new());
    let mut fields = Vec::new();
    for path in &args.reduced {
        let view = read_reduced(require(path)?)?;
        push_unique(&mut tasks, &view.task);
        push_unique(&mut reducers, &view.reduced.reducer);
        // joining on the coordinates aligns the rows with the feature table
        let mut coords = EmbeddingSet::new(view.task.clone(), 2);
        for ((id, style), p) in view.ids.iter().zip(&view.styles).zip(&view.reduced.coords) {
            coords.push(id.clone(), style.clone(), p.to_vec())?;
        }
        let data = join(&coords, &features)?;
        let aligned = Reduced2D {
            coords: (0..data.len())
                .map(|i| [data.embeddings[(i, 0)], data.embeddings[(i, 1)]])
                .collect(),
            ..view.reduced.clone()
        };
        fields.push(gradient_field(&aligned, &data, &selected)?);
    }
    write_gradients_csv(&fields, out.join("gradients.csv"))?;
    write_average_csv(
        &apcc_average_table(&fields, &tasks, &reducers)?,
        out.join("apcc_avg.csv"),
    )
}

pub fn render(args: &RenderArgs, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let views = args
        .reduced
        .iter()
        .map(|p| read_reduced(require(p)?))
        .collect::<Result<Vec<_>>>()?;
    let fields = match &args.gradients {
        Some(path) => {
            let n_points: BTreeMap<String, usize> = views
                .iter()
                .map(|v| (v.task.clone(), v.reduced.len()))
                .collect();
            read_gradients_csv(require(path)?, &n_points)?
        }
        None => Vec::new(),
    };
    let written = write_figures(&views, &fields, out)?;
    log::info!("{} figures written", written.len());
    Ok(())
}

pub fn synth(args: &SynthArgs, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => SynthSpec::load(require(path)?)?,
        None => SynthSpec::default(),
    };
    if let Some(n) = args.n_per_style {
        spec.n_per_style = n;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    let files = write_corpus(&spec, out)?;
    log::info!(
        "{} utterances, manifest {}, {} embedding sets",
        spec.n_utterances(),
        files.manifest.display(),
        files.embeddings.len()
    );
    Ok(())
}
