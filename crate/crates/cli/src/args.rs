use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use styleprobe::dimred::{ReduceConfig, Reducer};
use styleprobe::report::AnalysisConfig;
use styleprobe::stats::{DEFAULT_APCC_THRESHOLD, DEFAULT_MI_NEIGHBORS};

#[derive(Debug, Parser)]
#[command(
    name = "styleprobe",
    version,
    about = "Relate expressive-speech latent spaces to acoustic features"
)]
pub struct Cli {
    /// Directory for every output file.
    #[arg(long, global = true, env = "STYLEPROBE_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,

    /// Seed for reducers, MI jitter and corpus synthesis.
    #[arg(long, global = true, env = "STYLEPROBE_SEED")]
    pub seed: Option<u64>,

    /// Worker threads; outputs are reproducible for a fixed count.
    #[arg(long, global = true, env = "STYLEPROBE_THREADS")]
    pub threads: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true, env = "STYLEPROBE_VERBOSE")]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn log_level(&self) -> &'static str {
        if self.verbose {
            "info"
        } else {
            "warn"
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract acoustic features and the corpus summary from a manifest.
    Extract(ExtractArgs),
    /// Run the full analysis: MI, probes, selection, reductions, gradients, figures, report.
    Analyze(AnalyzeArgs),
    /// Reduce embeddings to two dimensions.
    Reduce(ReduceArgs),
    /// Fit feature gradients on stored reductions.
    Gradients(GradientsArgs),
    /// Draw figures from stored reductions and gradients.
    Render(RenderArgs),
    /// Generate a synthetic corpus with planted structure.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// CSV with columns utterance_id,wav_path,style.
    #[arg(long, env = "STYLEPROBE_MANIFEST")]
    pub manifest: PathBuf,
}

/// `<task>=<path>`
pub fn parse_task_path(s: &str) -> Result<(String, PathBuf), String> {
    let (task, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected <task>=<path>, got '{s}'"))?;
    if task.is_empty() || path.is_empty() {
        return Err(format!("expected <task>=<path>, got '{s}'"));
    }
    Ok((task.to_string(), PathBuf::from(path)))
}

#[derive(Debug, Clone, Args)]
pub struct ReducerArgs {
    #[arg(
        long,
        env = "STYLEPROBE_REDUCERS",
        value_delimiter = ',',
        default_value = "pca,tsne,umap"
    )]
    pub reducers: Vec<Reducer>,

    #[arg(long, env = "STYLEPROBE_PERPLEXITY")]
    pub perplexity: Option<f64>,

    #[arg(long, env = "STYLEPROBE_TSNE_ITER")]
    pub tsne_iter: Option<usize>,

    #[arg(long, env = "STYLEPROBE_N_NEIGHBORS")]
    pub n_neighbors: Option<usize>,

    #[arg(long, env = "STYLEPROBE_MIN_DIST")]
    pub min_dist: Option<f64>,

    #[arg(long, env = "STYLEPROBE_UMAP_EPOCHS")]
    pub umap_epochs: Option<usize>,
}

impl ReducerArgs {
    pub fn config(&self, seed: Option<u64>) -> ReduceConfig {
        let mut c = ReduceConfig::default();
        if let Some(s) = seed {
            c.seed = s;
        }
        if let Some(p) = self.perplexity {
            c.tsne.perplexity = p;
        }
        if let Some(n) = self.tsne_iter {
            c.tsne.n_iter = n;
        }
        if let Some(k) = self.n_neighbors {
            c.umap.n_neighbors = k;
        }
        if let Some(d) = self.min_dist {
            c.umap.min_dist = d;
        }
        if let Some(e) = self.umap_epochs {
            c.umap.n_epochs = e;
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Feature CSV from `extract`.
    #[arg(
        long,
        env = "STYLEPROBE_FEATURES",
        conflicts_with = "manifest",
        required_unless_present = "manifest"
    )]
    pub features: Option<PathBuf>,

    /// Extract features from this manifest first.
    #[arg(long, env = "STYLEPROBE_MANIFEST")]
    pub manifest: Option<PathBuf>,

    /// Embedding file per task, as <task>=<path>; repeatable.
    #[arg(long, env = "STYLEPROBE_EMBEDDINGS", value_delimiter = ';', value_parser = parse_task_path, required = true)]
    pub embeddings: Vec<(String, PathBuf)>,

    /// Corpus summary for the report; defaults to corpus_summary.csv beside the features.
    #[arg(long, env = "STYLEPROBE_CORPUS_SUMMARY")]
    pub corpus_summary: Option<PathBuf>,

    #[arg(long, env = "STYLEPROBE_MI_K", default_value_t = DEFAULT_MI_NEIGHBORS)]
    pub mi_k: usize,

    #[arg(long, env = "STYLEPROBE_APCC_THRESHOLD", default_value_t = DEFAULT_APCC_THRESHOLD)]
    pub apcc_threshold: f64,

    #[command(flatten)]
    pub reduce: ReducerArgs,
}

impl AnalyzeArgs {
    pub fn config(&self, seed: Option<u64>) -> AnalysisConfig {
        AnalysisConfig {
            mi_k: self.mi_k,
            apcc_threshold: self.apcc_threshold,
            reducers: self.reduce.reducers.clone(),
            reduce: self.reduce.config(seed),
        }
    }
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Embedding file per task, as <task>=<path>; repeatable.
    #[arg(long, env = "STYLEPROBE_EMBEDDINGS", value_delimiter = ';', value_parser = parse_task_path, required = true)]
    pub embeddings: Vec<(String, PathBuf)>,

    /// Keep only utterances with a complete feature row, as `analyze` does.
    #[arg(long, env = "STYLEPROBE_FEATURES")]
    pub features: Option<PathBuf>,

    #[command(flatten)]
    pub reduce: ReducerArgs,
}

#[derive(Debug, Args)]
pub struct GradientsArgs {
    #[arg(long, env = "STYLEPROBE_FEATURES")]
    pub features: PathBuf,

    /// Reduced coordinate CSVs from `reduce` or `analyze`.
    #[arg(long, env = "STYLEPROBE_REDUCED", value_delimiter = ';', required = true, num_args = 1..)]
    pub reduced: Vec<PathBuf>,

    /// Probe table whose selection column names the features to fit.
    #[arg(long, env = "STYLEPROBE_APCC_TABLE", conflicts_with = "select")]
    pub apcc_table: Option<PathBuf>,

    /// Features to fit, overriding any probe table.
    #[arg(long, env = "STYLEPROBE_SELECT", value_delimiter = ',')]
    pub select: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Reduced coordinate CSVs from `reduce` or `analyze`.
    #[arg(long, env = "STYLEPROBE_REDUCED", value_delimiter = ';', required = true, num_args = 1..)]
    pub reduced: Vec<PathBuf>,

    /// Gradient CSV from `gradients` or `analyze`; scatter only when absent.
    #[arg(long, env = "STYLEPROBE_GRADIENTS")]
    pub gradients: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML (or JSON) corpus specification; defaults apply to anything omitted.
    #[arg(long, env = "STYLEPROBE_SPEC")]
    pub spec: Option<PathBuf>,

    #[arg(long, env = "STYLEPROBE_N_PER_STYLE")]
    pub n_per_style: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn task_path_pairs() {
        assert_eq!(
            parse_task_path("Style=a/b.csv").unwrap(),
            ("Style".into(), PathBuf::from("a/b.csv"))
        );
        assert!(parse_task_path("nopath").is_err());
        assert!(parse_task_path("=x").is_err());
    }

    #[test]
    fn reducer_list_and_overrides() {
        let cli = Cli::try_parse_from([
            "styleprobe",
            "--seed",
            "9",
            "analyze",
            "--features",
            "f.csv",
            "--embeddings",
            "A=a.csv",
            "--embeddings",
            "B=b.csv",
            "--reducers",
            "pca,t-sne",
            "--perplexity",
            "12",
        ])
        .unwrap();
        let Command::Analyze(a) = &cli.command else {
            panic!()
        };
        let c = a.config(cli.seed);
        assert_eq!(c.reducers, vec![Reducer::Pca, Reducer::Tsne]);
        assert_eq!(c.reduce.seed, 9);
        assert_eq!(c.reduce.tsne.perplexity, 12.0);
        assert_eq!(a.embeddings.len(), 2);
    }
}
