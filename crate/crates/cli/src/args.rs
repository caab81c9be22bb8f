use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use clonesig::clustering::{Algorithm, Weighting};
use clonesig::fingerprint::Fingerprint;
use clonesig::pipeline::PipelineConfig;
use clonesig::similarity::TextMode;

/// Cluster packages by shared code fragments, derive signatures and scan
/// corpora for them.
#[derive(Debug, Parser)]
#[command(name = "clonesig", version, about, long_about = None)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory holding every stage artifact.
    #[arg(long, short = 'o', global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, short = 'j', global = true)]
    pub jobs: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(long, short = 'v', global = true, action = ArgAction::Count)]
    pub verbose: u8,
    /// Only warnings and errors.
    #[arg(long, short = 'q', global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and fingerprint every package of a corpus.
    Ingest(IngestArgs),
    /// Package distance matrix from the ingested corpus.
    Distances(DistancesArgs),
    /// Cluster the distance matrix.
    Cluster(ClusterArgs),
    /// Compare clusterings against a reference clustering.
    Eval(EvalArgs),
    /// Derive one signature per cluster.
    Sign(SignArgs),
    /// Inspect and edit signatures.
    Refine(RefineArgs),
    /// Match a corpus against signatures.
    Scan(ScanArgs),
    /// Ingest, distances, cluster and sign in one go.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Corpus directory, one subdirectory per package.
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub parse: ParseArgs,
}

#[derive(Debug, Default, Args)]
pub struct ParseArgs {
    /// Functions with fewer syntax tree nodes are ignored.
    #[arg(long)]
    pub min_node_count: Option<usize>,
    /// Skip files larger than this.
    #[arg(long)]
    pub max_file_bytes: Option<u64>,
    /// Source file extensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub extensions: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct DistancesArgs {
    /// Use a fuzzy text ratio instead of tree edit distance
    /// (simple, partial, token_sort, token_set).
    #[arg(long, value_name = "MODE")]
    pub text: Option<TextMode>,
    /// Size ratio above which a function pair uses the size difference
    /// (0 disables).
    #[arg(long)]
    pub size_ratio_guard: Option<f64>,
    /// Largest exact edit distance table per function pair (0 disables).
    #[arg(long)]
    pub max_pair_cells: Option<u64>,
}

#[derive(Debug, Default, Args)]
pub struct ClusterArgs {
    /// mcl, ccomp, clique or dbscan.
    #[arg(long)]
    pub algo: Option<Algorithm>,
    /// Largest distance that links two packages.
    #[arg(long)]
    pub tau: Option<u32>,
    /// binary or inverse.
    #[arg(long)]
    pub weighting: Option<Weighting>,
    /// MCL expansion power
    #[arg(long)]
    pub expansion: Option<u32>,
    /// MCL inflation exponent; larger values give smaller clusters
    #[arg(long)]
    pub inflation: Option<f64>,
    /// MCL drops matrix entries below this after each step
    #[arg(long)]
    pub prune_threshold: Option<f64>,
    /// MCL iteration limit
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// DBSCAN neighbourhood radius
    #[arg(long)]
    pub eps: Option<u32>,
    /// DBSCAN core point threshold, counting the point itself
    #[arg(long)]
    pub min_pts: Option<usize>,
    /// Fail when clique enumeration finds more cliques than this
    #[arg(long)]
    pub max_cliques: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reference clustering in clusters.json layout.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Evaluate every algorithm, not just the configured one.
    #[arg(long)]
    pub all: bool,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub cluster: ClusterArgs,
}

#[derive(Debug, Args)]
pub struct SignArgs {
    /// Benign corpus; its fingerprints never enter a signature.
    #[arg(long)]
    pub benign: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Signature file (default: signatures.json in the output directory).
    #[arg(long)]
    pub signatures: Option<PathBuf>,
    /// Scan report used by --top (default: scan.report.jsonl in the output directory).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Show the N fingerprints of each signature matching the most packages.
    #[arg(long, value_name = "N")]
    pub top: Option<usize>,
    /// Remove a fingerprint from a signature.
    #[arg(long, value_name = "CLUSTER:FINGERPRINT")]
    pub remove: Vec<String>,
    /// Reason recorded in the refinement log.
    #[arg(long, default_value = "manual refinement")]
    pub reason: String,
    /// Add a manual signature named manual:LABEL from --package.
    #[arg(long, value_name = "LABEL", requires = "package")]
    pub manual: Option<String>,
    /// Package directory for --manual.
    #[arg(long, value_name = "DIR")]
    pub package: Option<PathBuf>,
    /// Restrict --manual to these fingerprints (default: every function).
    #[arg(long = "fingerprint", value_name = "HEX")]
    pub fingerprints: Vec<Fingerprint>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Corpus to scan, one subdirectory per package.
    pub corpus: PathBuf,
    /// Signature file (default: signatures.json in the output directory).
    #[arg(long)]
    pub signatures: Option<PathBuf>,
    /// Report file (default: scan.report.jsonl in the output directory).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-package timeout in seconds.
    #[arg(long, value_name = "SECS")]
    pub timeout: Option<u64>,
    #[command(flatten)]
    pub parse: ParseArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Corpus directory, one subdirectory per package.
    pub corpus: Option<PathBuf>,
    /// Benign corpus; its fingerprints never enter a signature.
    #[arg(long)]
    pub benign: Option<PathBuf>,
    /// Rerun every stage even when its artifact exists.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub parse: ParseArgs,
    #[command(flatten)]
    pub cluster: ClusterArgs,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl GlobalArgs {
    pub fn apply(&self, config: &mut PipelineConfig) {
        set(&mut config.output_dir, self.output_dir.clone());
        if self.jobs.is_some() {
            config.jobs = self.jobs;
        }
    }
}

impl ParseArgs {
    pub fn apply(&self, config: &mut PipelineConfig) {
        set(&mut config.min_node_count, self.min_node_count);
        set(&mut config.max_file_bytes, self.max_file_bytes);
        set(&mut config.extensions, self.extensions.clone());
    }
}

impl DistancesArgs {
    pub fn apply(&self, config: &mut PipelineConfig) {
        set(&mut config.distance.size_ratio_guard, self.size_ratio_guard);
        set(&mut config.distance.max_pair_cells, self.max_pair_cells);
    }
}

impl ClusterArgs {
    pub fn apply(&self, config: &mut PipelineConfig) {
        let c = &mut config.cluster;
        set(&mut c.algorithm, self.algo);
        set(&mut c.tau, self.tau);
        set(&mut c.weighting, self.weighting);
        set(&mut c.expansion, self.expansion);
        set(&mut c.inflation, self.inflation);
        set(&mut c.prune_threshold, self.prune_threshold);
        set(&mut c.max_iterations, self.max_iterations);
        set(&mut c.eps, self.eps);
        set(&mut c.min_pts, self.min_pts);
        set(&mut c.max_cliques, self.max_cliques);
    }
}
