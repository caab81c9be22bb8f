use std::collections::BTreeSet;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clonesig::clustering::{Algorithm, ClusteringArtifact};
use clonesig::corpus::ingest_package;
use clonesig::evaluation::{render_table, EvaluationRow};
use clonesig::fingerprint::{fingerprint_package, Fingerprint};
use clonesig::pipeline::{
    benign_corpus, compute_distances, compute_text_distances, embed_corpus, evaluation_rows, load_index,
    package_id_of, read_json_file, read_signatures, run_pipeline, sign, summarize, Artifacts, Embedding,
    PipelineConfig, CLUSTERS_FILE, DISTANCES_FILE, EMBEDDING_FILE, EVAL_FILE, INDEX_FILE, SCAN_REPORT_FILE,
    SIGNATURES_FILE,
};
use clonesig::scanner::{read_report, scan_corpus_to, FingerprintIndex};
use clonesig::signature::{manual_signature, top_matching, BenignCorpus, SignatureSet};

use crate::args::{
    ClusterArgs, Command, DistancesArgs, EvalArgs, IngestArgs, RefineArgs, RunArgs, ScanArgs, SignArgs,
};

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    MatchesFound,
}

pub fn execute(command: &Command, config: &mut PipelineConfig) -> Result<Outcome> {
    match command {
        Command::Ingest(a) => ingest(a, config),
        Command::Distances(a) => distances(a, config),
        Command::Cluster(a) => cluster(a, config),
        Command::Eval(a) => eval(a, config),
        Command::Sign(a) => sign_cmd(a, config),
        Command::Refine(a) => refine(a, config),
        Command::Scan(a) => scan(a, config),
        Command::Run(a) => run(a, config),
    }
    .map(|matched| if matched { Outcome::MatchesFound } else { Outcome::Clean })
}

fn artifacts(config: &PipelineConfig) -> Artifacts {
    Artifacts::new(&config.output_dir)
}

fn validated(config: &PipelineConfig) -> Result<()> {
    config.validate().context("invalid configuration")
}

fn ingest(a: &IngestArgs, config: &mut PipelineConfig) -> Result<bool> {
    a.parse.apply(config);
    if a.corpus.is_some() {
        config.corpus = a.corpus.clone();
    }
    validated(config)?;
    let corpus = config.corpus.as_deref().context("no corpus given (argument or `corpus` in the config)")?;
    let embedding = embed_corpus(corpus, &config.adapter(), config.min_node_count, config.max_file_bytes)?;
    artifacts(config).write_json(EMBEDDING_FILE, &embedding)?;
    let functions: usize = embedding.packages.iter().map(|p| p.fingerprints.records.len()).sum();
    let files: usize = embedding.packages.iter().map(|p| p.files_parsed).sum();
    let failures: usize = embedding.packages.iter().map(|p| p.parse_failures).sum();
    println!(
        "ingested {} packages: {files} files, {functions} function units, {failures} parse failures, {} packages skipped",
        embedding.packages.len(),
        embedding.diagnostics.len()
    );
    Ok(false)
}

fn load_embedding(config: &PipelineConfig) -> Result<Embedding> {
    artifacts(config)
        .read_json(EMBEDDING_FILE)
        .context("run `clonesig ingest` first")
}

fn distances(a: &DistancesArgs, config: &mut PipelineConfig) -> Result<bool> {
    a.apply(config);
    validated(config)?;
    let embedding = load_embedding(config)?;
    let (matrix, diagnostics) = match a.text {
        Some(mode) => compute_text_distances(&embedding, &config.adapter(), config.max_file_bytes, mode)?,
        None => compute_distances(&embedding, &config.distance_options())?,
    };
    for d in &diagnostics {
        log::warn!("{d}");
    }
    artifacts(config).write_distances(&matrix)?;
    println!("{} packages, {} pairs", matrix.len(), matrix.len() * matrix.len().saturating_sub(1) / 2);
    Ok(false)
}

fn cluster(a: &ClusterArgs, config: &mut PipelineConfig) -> Result<bool> {
    a.apply(config);
    validated(config)?;
    let out = artifacts(config);
    let matrix = out.read_distances().context("run `clonesig distances` first")?;
    let spec = config.cluster.spec();
    let artifact = spec.run(&matrix)?;
    if artifact.converged == Some(false) {
        log::warn!("mcl did not converge within {} iterations", config.cluster.max_iterations);
    }
    out.write_json(CLUSTERS_FILE, &artifact)?;
    let sizes: Vec<usize> = artifact.clusters.iter().map(Vec::len).collect();
    println!("{}: {} clusters {sizes:?}, {} noise", spec.describe(), sizes.len(), artifact.noise.len());
    Ok(false)
}

fn eval(a: &EvalArgs, config: &mut PipelineConfig) -> Result<bool> {
    a.cluster.apply(config);
    if a.reference.is_some() {
        config.reference = a.reference.clone();
    }
    validated(config)?;
    let reference_path = config.reference.as_deref().context("no reference clustering (--reference)")?;
    let reference: ClusteringArtifact = read_json_file(reference_path)?;
    let out = artifacts(config);
    let matrix = out.read_distances().context("run `clonesig distances` first")?;
    let algorithms: Vec<Algorithm> = if a.all { Algorithm::ALL.to_vec() } else { vec![config.cluster.algorithm] };
    let mut rows: Vec<EvaluationRow> = evaluation_rows(&matrix, &reference, &config.cluster, &algorithms)?;
    let table = render_table(&mut rows);
    out.write_json(EVAL_FILE, &rows)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        print!("{table}");
    }
    Ok(false)
}

fn sign_cmd(a: &SignArgs, config: &mut PipelineConfig) -> Result<bool> {
    if a.benign.is_some() {
        config.benign = a.benign.clone();
    }
    validated(config)?;
    let out = artifacts(config);
    let embedding = load_embedding(config)?;
    let clusters: ClusteringArtifact = out.read_json(CLUSTERS_FILE).context("run `clonesig cluster` first")?;
    let benign = match &config.benign {
        Some(dir) => benign_corpus(dir, &config.adapter(), config.min_node_count, config.max_file_bytes)?,
        None => {
            log::warn!("no benign corpus: common library code may end up in signatures");
            BenignCorpus::empty()
        }
    };
    let set = sign(&clusters, &embedding, &benign)?;
    out.write_signatures(&set)?;
    print_signatures(&set);
    Ok(false)
}

fn print_signatures(set: &SignatureSet) {
    for sig in &set.signatures {
        let note = sig.diagnostics.last().map(|d| format!(" ({d})")).unwrap_or_default();
        println!("{:<24} {:>6} fingerprints{note}", sig.cluster_id, sig.len());
    }
    println!("{} signatures, {} fingerprints", set.signatures.len(), set.total_fingerprints());
}

fn signatures_path(explicit: Option<&Path>, config: &PipelineConfig) -> PathBuf {
    explicit.map_or_else(|| artifacts(config).path(SIGNATURES_FILE), Path::to_path_buf)
}

fn save_signatures(path: &Path, set: &SignatureSet) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let file = fs::File::create(&tmp).with_context(|| format!("cannot write {}", tmp.display()))?;
    let mut w = BufWriter::new(file);
    set.to_writer(&mut w)?;
    w.flush()?;
    drop(w);
    fs::rename(&tmp, path)?;
    FingerprintIndex::build(set)?.save(&path.with_file_name(INDEX_FILE))?;
    Ok(())
}

fn parse_removal(spec: &str) -> Result<(String, Fingerprint)> {
    let (cluster, hex) = spec
        .rsplit_once(':')
        .with_context(|| format!("--remove expects CLUSTER:FINGERPRINT, got {spec:?}"))?;
    Ok((cluster.to_string(), hex.parse()?))
}

fn refine(a: &RefineArgs, config: &mut PipelineConfig) -> Result<bool> {
    validated(config)?;
    let path = signatures_path(a.signatures.as_deref(), config);
    let mut set = read_signatures(&path)?;
    let mut changed = false;

    let mut removals: Vec<(String, BTreeSet<Fingerprint>)> = Vec::new();
    for spec in &a.remove {
        let (cluster, fp) = parse_removal(spec)?;
        match removals.iter_mut().find(|(c, _)| *c == cluster) {
            Some((_, fps)) => {
                fps.insert(fp);
            }
            None => removals.push((cluster, BTreeSet::from([fp]))),
        }
    }
    for (cluster, fps) in &removals {
        let before = set.get(cluster).map_or(0, |s| s.len());
        let sig = set.remove(cluster, fps, &a.reason)?;
        println!("{cluster}: removed {} of {} requested fingerprints", before - sig.len(), fps.len());
        for entry in sig.refinement_log.iter().rev().take(fps.len()).filter(|e| !e.removed) {
            log::warn!("{cluster}: {} was not in the signature", entry.fingerprint);
        }
        changed = true;
    }

    if let Some(label) = &a.manual {
        let dir = a.package.as_deref().context("--manual needs --package")?;
        let id = package_id_of(dir).context("package path has no directory name")?;
        let adapter = config.adapter();
        let pkg = ingest_package(dir, &id, &adapter, config.max_file_bytes)?;
        let fps = fingerprint_package(&pkg, &adapter, config.min_node_count);
        let wanted: BTreeSet<Fingerprint> = a.fingerprints.iter().copied().collect();
        let records: Vec<_> = fps
            .records
            .iter()
            .filter(|r| fps.is_matchable(r) && (wanted.is_empty() || wanted.contains(&r.fingerprint)))
            .cloned()
            .collect();
        let found: BTreeSet<Fingerprint> = records.iter().map(|r| r.fingerprint).collect();
        for missing in wanted.difference(&found) {
            log::warn!("{missing} not found among the functions of {id}");
        }
        let sig = manual_signature(label, &records)?;
        let name = sig.cluster_id.clone();
        for d in set.insert_manual(sig)? {
            log::warn!("{d}");
        }
        println!("{name}: {} fingerprints", set.get(&name).map_or(0, |s| s.len()));
        changed = true;
    }

    if changed {
        set.validate()?;
        save_signatures(&path, &set)?;
    }

    if let Some(n) = a.top {
        let report_path = a
            .report
            .clone()
            .unwrap_or_else(|| artifacts(config).path(SCAN_REPORT_FILE));
        let file = fs::File::open(&report_path)
            .with_context(|| format!("cannot open scan report {}", report_path.display()))?;
        let records = read_report(BufReader::new(file))?;
        for ranking in top_matching(&set, &records, n) {
            println!("{}", ranking.cluster_id);
            for r in &ranking.top {
                println!("  {}  {:>6} packages {:>8} records", r.fingerprint, r.packages, r.records);
            }
        }
    } else if !changed {
        print_signatures(&set);
    }
    Ok(false)
}

fn scan(a: &ScanArgs, config: &mut PipelineConfig) -> Result<bool> {
    a.parse.apply(config);
    if let Some(secs) = a.timeout {
        config.scan.package_timeout_secs = secs;
    }
    validated(config)?;
    let sig_path = signatures_path(a.signatures.as_deref(), config);
    let set = read_signatures(&sig_path)?;
    let idx = load_index(&sig_path, &set)?;
    let report_path = a.report.clone().unwrap_or_else(|| artifacts(config).path(SCAN_REPORT_FILE));
    if let Some(parent) = report_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let file = fs::File::create(&report_path).with_context(|| format!("cannot write {}", report_path.display()))?;
    let mut w = BufWriter::new(file);
    let stats = scan_corpus_to(&a.corpus, &idx, &config.adapter(), &config.scan_options(), &mut w)?;
    drop(w);
    for d in &stats.diagnostics {
        log::debug!("{d}");
    }
    let records = read_report(BufReader::new(fs::File::open(&report_path)?))?;
    if records.len() != stats.records {
        bail!("report {} holds {} records, expected {}", report_path.display(), records.len(), stats.records);
    }
    print!("{}", summarize(&records, Some(&stats), &set));
    println!("report: {}", report_path.display());
    Ok(!records.is_empty())
}

fn run(a: &RunArgs, config: &mut PipelineConfig) -> Result<bool> {
    a.parse.apply(config);
    a.cluster.apply(config);
    if a.corpus.is_some() {
        config.corpus = a.corpus.clone();
    }
    if a.benign.is_some() {
        config.benign = a.benign.clone();
    }
    let summary = run_pipeline(config, a.force)?;
    if !summary.skipped.is_empty() {
        println!("reused: {}", summary.skipped.join(", "));
    }
    println!("ran: {}", if summary.ran.is_empty() { "nothing".to_string() } else { summary.ran.join(", ") });
    println!(
        "{} clusters, {} signatures, {} fingerprints in {}",
        summary.clusters,
        summary.signatures,
        summary.signature_fingerprints,
        config.output_dir.join(SIGNATURES_FILE).display()
    );
    if config.output_dir.join(DISTANCES_FILE).is_file() {
        log::debug!("distances in {}", config.output_dir.join(DISTANCES_FILE).display());
    }
    Ok(false)
}
