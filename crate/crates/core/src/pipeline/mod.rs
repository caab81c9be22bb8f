//! Stage artifacts and the end-to-end run.
//!
//! Stages and the files they leave in the output directory:
//!
//! | stage      | artifact                           |
//! |------------|------------------------------------|
//! | ingest     | `embedding.json`                   |
//! | distances  | `distances.csv`                    |
//! | cluster    | `clusters.json`                    |
//! | sign       | `signatures.json`, `signatures.idx`|
//! | scan       | `scan.report.jsonl`                |
//! | eval       | `eval.json`                        |
//!
//! Each stage reads only the artifacts of earlier stages, so a run can be
//! resumed from any point.

mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{Algorithm, ClusteringArtifact, ClusteringError};
use crate::corpus::{
    decode_package_dir, encode_package_id, ingest_package, list_packages, CorpusError, FunctionUnit, NodeKind,
    ParserAdapter, SyntaxTree,
};
use crate::evaluation::{evaluate, with_universe, EvaluationError, EvaluationRow};
use crate::fingerprint::{extract_package_units, fingerprint_package, fingerprint_units, PackageFingerprints};
use crate::scanner::{FingerprintIndex, IndexError, MatchRecord, ScanStats};
use crate::signature::{derive_signatures, BenignCorpus, SignatureError, SignatureSet};
use crate::similarity::{
    distance_matrix, text_package_distance, DistanceMatrix, DistanceOptions, MatrixError, PackageAsts, TedTree,
    TextMode, UnitTree,
};
use crate::Diagnostic;

pub use config::{ClusterConfig, ConfigError, DistanceConfig, PipelineConfig, ScanConfig};

pub const EMBEDDING_FILE: &str = "embedding.json";
pub const DISTANCES_FILE: &str = "distances.csv";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const SIGNATURES_FILE: &str = "signatures.json";
pub const INDEX_FILE: &str = "signatures.idx";
pub const SCAN_REPORT_FILE: &str = "scan.report.jsonl";
pub const EVAL_FILE: &str = "eval.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Signature(#[from] SignatureError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Missing(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> PipelineError + '_ {
    move |source| PipelineError::Json {
        path: path.to_path_buf(),
        source,
    }
}

/// Syntax tree of one function unit in preorder: vocabulary index of each
/// node and the size of the subtree it roots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddedTree {
    pub kinds: Vec<u16>,
    pub subtree_lens: Vec<u32>,
}

impl EmbeddedTree {
    pub fn from_tree(tree: &SyntaxTree) -> Self {
        Self {
            kinds: tree.preorder_kinds().iter().map(|k| k.index()).collect(),
            subtree_lens: tree.subtree_lens(),
        }
    }

    pub fn to_tree(&self) -> Result<SyntaxTree, String> {
        let kinds = self
            .kinds
            .iter()
            .map(|&k| NodeKind::from_index(k).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        SyntaxTree::from_preorder(&kinds, &self.subtree_lens).map_err(|e| e.to_string())
    }
}

/// One package after ingest: fingerprint records plus, at the same
/// positions, the unit trees used for distances.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddedPackage {
    pub fingerprints: PackageFingerprints,
    pub trees: Vec<EmbeddedTree>,
    pub files_parsed: usize,
    pub parse_failures: usize,
}

impl EmbeddedPackage {
    pub fn from_units(package_id: &str, units: &[FunctionUnit], min_node_count: usize) -> Self {
        Self {
            fingerprints: fingerprint_units(package_id, units, min_node_count),
            trees: units.iter().map(|u| EmbeddedTree::from_tree(&u.tree)).collect(),
            files_parsed: 0,
            parse_failures: 0,
        }
    }

    pub fn package_id(&self) -> &str {
        &self.fingerprints.package_id
    }

    /// Units at or above the node-count threshold, ready for distances.
    pub fn asts(&self) -> Result<PackageAsts, String> {
        let fps = &self.fingerprints;
        let mut units = Vec::new();
        for (record, tree) in fps.records.iter().zip(&self.trees) {
            if fps.is_matchable(record) {
                units.push(UnitTree::new(record.fingerprint, TedTree::from_tree(&tree.to_tree()?)));
            }
        }
        Ok(PackageAsts {
            package_id: fps.package_id.clone(),
            units,
        })
    }
}

/// The `embedding.json` document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub corpus_root: PathBuf,
    pub min_node_count: usize,
    pub packages: Vec<EmbeddedPackage>,
    /// Packages that could not be ingested.
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

impl Embedding {
    pub fn fingerprints(&self) -> BTreeMap<String, PackageFingerprints> {
        self.packages
            .iter()
            .map(|p| (p.package_id().to_string(), p.fingerprints.clone()))
            .collect()
    }

    pub fn package_ids(&self) -> Vec<&str> {
        self.packages.iter().map(EmbeddedPackage::package_id).collect()
    }
}

/// Ingests, parses and fingerprints every package of a corpus.
pub fn embed_corpus(
    corpus_root: &Path,
    adapter: &dyn ParserAdapter,
    min_node_count: usize,
    max_file_bytes: u64,
) -> Result<Embedding, PipelineError> {
    let listed = list_packages(corpus_root)?;
    let results = crate::par::map_collect(&listed, |(id, path)| {
        let pkg = ingest_package(path, id, adapter, max_file_bytes)?;
        let units = extract_package_units(&pkg, adapter, None);
        let mut embedded = EmbeddedPackage::from_units(id, &units.units, min_node_count);
        embedded.files_parsed = units.files_parsed;
        embedded.parse_failures = units.parse_failures;
        embedded.fingerprints.diagnostics = units.diagnostics;
        Ok::<_, CorpusError>(embedded)
    });
    let mut packages = Vec::new();
    let mut diagnostics = Vec::new();
    for ((id, _), result) in listed.iter().zip(results) {
        match result {
            Ok(p) => packages.push(p),
            Err(err) => {
                log::warn!("skipping {id}: {err}");
                diagnostics.push(Diagnostic::new(id, err.to_string()));
            }
        }
    }
    Ok(Embedding {
        corpus_root: corpus_root.to_path_buf(),
        min_node_count,
        packages,
        diagnostics,
    })
}

/// Minimum edit distance matrix over the embedded packages.
pub fn compute_distances(
    embedding: &Embedding,
    opts: &DistanceOptions,
) -> Result<(DistanceMatrix, Vec<Diagnostic>), PipelineError> {
    let asts = embedding
        .packages
        .iter()
        .map(|p| p.asts().map_err(|e| PipelineError::Missing(format!("{}: bad tree: {e}", p.package_id()))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(distance_matrix(&asts, opts))
}

/// Text-ratio distance matrix: function source is re-read from the corpus
/// the embedding was built from.
pub fn compute_text_distances(
    embedding: &Embedding,
    adapter: &dyn ParserAdapter,
    max_file_bytes: u64,
    mode: TextMode,
) -> Result<(DistanceMatrix, Vec<Diagnostic>), PipelineError> {
    let ids = embedding.package_ids();
    let texts = crate::par::map_collect(&ids, |id| {
        let dir = embedding.corpus_root.join(encode_package_id(id));
        let pkg = ingest_package(&dir, id, adapter, max_file_bytes)?;
        let mut out = Vec::new();
        for file in &pkg.files {
            let Ok(ast) = adapter.parse(file) else { continue };
            for unit in crate::corpus::extract_functions(&ast, id) {
                if unit.node_count() >= embedding.min_node_count {
                    let span = unit.span;
                    out.push(file.content.get(span.start as usize..span.end as usize).unwrap_or("").to_string());
                }
            }
        }
        Ok::<_, CorpusError>(out)
    });
    let mut kept_ids = Vec::new();
    let mut kept = Vec::new();
    let mut diagnostics = Vec::new();
    for (id, t) in ids.iter().zip(texts) {
        let t = t?;
        if t.is_empty() {
            diagnostics.push(Diagnostic::new(*id, "no function units; excluded from the distance matrix"));
        } else {
            kept_ids.push(id.to_string());
            kept.push(t);
        }
    }
    let matrix = DistanceMatrix::compute(kept_ids, |i, j| {
        text_package_distance(&kept[i], &kept[j], mode).expect("kept packages have text")
    });
    Ok((matrix, diagnostics))
}

/// Fingerprints of every package of a benign corpus.
pub fn benign_corpus(
    root: &Path,
    adapter: &dyn ParserAdapter,
    min_node_count: usize,
    max_file_bytes: u64,
) -> Result<BenignCorpus, PipelineError> {
    let listed = list_packages(root)?;
    let fps = crate::par::map_collect(&listed, |(id, path)| {
        ingest_package(path, id, adapter, max_file_bytes).map(|pkg| fingerprint_package(&pkg, adapter, min_node_count))
    });
    let mut all = Vec::new();
    for ((id, _), f) in listed.iter().zip(fps) {
        match f {
            Ok(f) => all.push(f),
            Err(err) => log::warn!("benign package {id} skipped: {err}"),
        }
    }
    Ok(BenignCorpus::from_packages(&all))
}

/// Signatures for the clusters of `clusters`.
pub fn sign(
    clusters: &ClusteringArtifact,
    embedding: &Embedding,
    benign: &BenignCorpus,
) -> Result<SignatureSet, PipelineError> {
    let clustering = clusters.clustering()?;
    Ok(derive_signatures(&clustering, &embedding.fingerprints(), benign)?)
}

/// Fixed artifact locations inside an output directory.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    pub fn ensure_dir(&self) -> Result<(), PipelineError> {
        fs::create_dir_all(&self.dir).map_err(io_err(&self.dir))
    }

    fn write_atomic(&self, name: &str, write: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> Result<(), PipelineError> {
        self.ensure_dir()?;
        let path = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        write(&mut w).and_then(|_| w.flush()).map_err(io_err(&tmp))?;
        drop(w);
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), PipelineError> {
        self.write_atomic(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::from)?;
            w.write_all(b"\n")
        })
    }

    pub fn read_json<T: for<'de> Deserialize<'de>>(&self, name: &str) -> Result<T, PipelineError> {
        read_json_file(&self.path(name))
    }

    pub fn write_distances(&self, m: &DistanceMatrix) -> Result<(), PipelineError> {
        self.write_atomic(DISTANCES_FILE, |w| {
            m.write_csv(w).map_err(|e| io::Error::other(e.to_string()))
        })
    }

    pub fn read_distances(&self) -> Result<DistanceMatrix, PipelineError> {
        let path = self.path(DISTANCES_FILE);
        let f = fs::File::open(&path).map_err(io_err(&path))?;
        Ok(DistanceMatrix::read_csv(BufReader::new(f))?)
    }

    pub fn write_signatures(&self, set: &SignatureSet) -> Result<(), PipelineError> {
        self.write_atomic(SIGNATURES_FILE, |w| set.to_writer(w).map_err(|e| io::Error::other(e.to_string())))?;
        FingerprintIndex::build(set)?.save(&self.path(INDEX_FILE))?;
        Ok(())
    }

    pub fn read_signatures(&self) -> Result<SignatureSet, PipelineError> {
        read_signatures(&self.path(SIGNATURES_FILE))
    }
}

pub fn read_json_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(f)).map_err(json_err(path))
}

pub fn read_signatures(path: &Path) -> Result<SignatureSet, PipelineError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    Ok(SignatureSet::from_reader(BufReader::new(f))?)
}

/// Loads the index next to a signature file when it is present and agrees
/// with the signatures, otherwise builds it in memory.
pub fn load_index(signatures: &Path, set: &SignatureSet) -> Result<FingerprintIndex, PipelineError> {
    let built = FingerprintIndex::build(set)?;
    let idx_path = signatures.with_file_name(INDEX_FILE);
    if idx_path.is_file() {
        match FingerprintIndex::open(&idx_path) {
            Ok(idx) if idx.source_set() == built.source_set() => return Ok(idx),
            Ok(_) => log::warn!("{} is stale; using the signature file", idx_path.display()),
            Err(err) => log::warn!("{}: {err}; using the signature file", idx_path.display()),
        }
    }
    Ok(built)
}

/// What `run_pipeline` did.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub ran: Vec<&'static str>,
    pub skipped: Vec<&'static str>,
    pub clusters: usize,
    pub signatures: usize,
    pub signature_fingerprints: usize,
}

/// Runs ingest, distances, cluster and sign. A stage whose artifact already
/// exists is skipped unless `force` is set; once a stage runs, every later
/// stage runs too.
pub fn run_pipeline(config: &PipelineConfig, force: bool) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let out = Artifacts::new(&config.output_dir);
    out.ensure_dir()?;
    let adapter = config.adapter();
    let mut summary = RunSummary::default();
    let mut dirty = force;

    let embedding: Embedding = if !dirty && out.exists(EMBEDDING_FILE) {
        log::info!("ingest: {} exists, skipping", EMBEDDING_FILE);
        summary.skipped.push("ingest");
        out.read_json(EMBEDDING_FILE)?
    } else {
        let corpus = config
            .corpus
            .as_deref()
            .ok_or_else(|| PipelineError::Config(ConfigError::Invalid {
                field: "corpus",
                reason: "required to run the ingest stage".into(),
            }))?;
        let e = embed_corpus(corpus, &adapter, config.min_node_count, config.max_file_bytes)?;
        log::info!("ingest: {} packages", e.packages.len());
        out.write_json(EMBEDDING_FILE, &e)?;
        summary.ran.push("ingest");
        dirty = true;
        e
    };

    let matrix = if !dirty && out.exists(DISTANCES_FILE) {
        log::info!("distances: {} exists, skipping", DISTANCES_FILE);
        summary.skipped.push("distances");
        out.read_distances()?
    } else {
        let (m, diags) = compute_distances(&embedding, &config.distance_options())?;
        for d in diags {
            log::warn!("{d}");
        }
        out.write_distances(&m)?;
        summary.ran.push("distances");
        dirty = true;
        m
    };

    let clusters: ClusteringArtifact = if !dirty && out.exists(CLUSTERS_FILE) {
        log::info!("cluster: {} exists, skipping", CLUSTERS_FILE);
        summary.skipped.push("cluster");
        out.read_json(CLUSTERS_FILE)?
    } else {
        let art = config.cluster.spec().run(&matrix)?;
        if art.converged == Some(false) {
            log::warn!("cluster: mcl did not converge");
        }
        out.write_json(CLUSTERS_FILE, &art)?;
        summary.ran.push("cluster");
        dirty = true;
        art
    };
    summary.clusters = clusters.clusters.len();

    let set = if !dirty && out.exists(SIGNATURES_FILE) {
        log::info!("sign: {} exists, skipping", SIGNATURES_FILE);
        summary.skipped.push("sign");
        out.read_signatures()?
    } else {
        let benign = match &config.benign {
            Some(dir) => benign_corpus(dir, &adapter, config.min_node_count, config.max_file_bytes)?,
            None => BenignCorpus::empty(),
        };
        let set = sign(&clusters, &embedding, &benign)?;
        out.write_signatures(&set)?;
        summary.ran.push("sign");
        set
    };
    summary.signatures = set.signatures.len();
    summary.signature_fingerprints = set.total_fingerprints();
    Ok(summary)
}

/// Evaluation rows for each algorithm on `matrix` against `reference`.
/// Packages missing from the matrix count as noise.
pub fn evaluation_rows(
    matrix: &DistanceMatrix,
    reference: &ClusteringArtifact,
    config: &ClusterConfig,
    algorithms: &[Algorithm],
) -> Result<Vec<EvaluationRow>, PipelineError> {
    let reference = reference.clustering()?;
    let mut universe: BTreeSet<&str> = reference.universe();
    universe.extend(matrix.package_ids().iter().map(String::as_str));
    let reference = with_universe(&reference, universe.iter().copied());
    let mut rows = Vec::new();
    for &algo in algorithms {
        let spec = config.spec_for(algo);
        let auto = with_universe(&spec.run(matrix)?.clustering()?, universe.iter().copied());
        let report = evaluate(&auto, &reference)?;
        let params = spec.describe();
        let params = params.strip_prefix(algo.as_str()).unwrap_or(&params).trim();
        rows.push(EvaluationRow::new(algo.as_str(), params, &auto, &report));
    }
    Ok(rows)
}

/// Per-cluster match counts, top matched packages and failure counts.
pub fn summarize(records: &[MatchRecord], stats: Option<&ScanStats>, sigset: &SignatureSet) -> String {
    let mut out = String::new();
    if let Some(s) = stats {
        let _ = writeln!(
            out,
            "scanned {} packages ({} files, {} functions) in {:.1}s; {} parse failures, {} skipped",
            s.packages_scanned,
            s.files,
            s.functions,
            s.elapsed_ms as f64 / 1000.0,
            s.parse_failures,
            s.packages_skipped
        );
    }
    if records.is_empty() {
        let _ = writeln!(out, "0 matches");
        return out;
    }
    let mut per_cluster: BTreeMap<&str, (usize, BTreeSet<&str>)> = BTreeMap::new();
    let mut per_package: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        let e = per_cluster.entry(&r.cluster_id).or_default();
        e.0 += 1;
        e.1.insert(&r.package_id);
        *per_package.entry(&r.package_id).or_default() += 1;
    }
    let _ = writeln!(
        out,
        "{} matches in {} packages",
        records.len(),
        per_package.len()
    );
    let _ = writeln!(out, "{:<24} {:>10} {:>10} {:>10}", "cluster", "signature", "matches", "packages");
    for sig in &sigset.signatures {
        if let Some((n, pkgs)) = per_cluster.get(sig.cluster_id.as_str()) {
            let _ = writeln!(out, "{:<24} {:>10} {:>10} {:>10}", sig.cluster_id, sig.len(), n, pkgs.len());
        }
    }
    for (cluster, (n, pkgs)) in &per_cluster {
        if sigset.get(cluster).is_none() {
            let _ = writeln!(out, "{:<24} {:>10} {:>10} {:>10}", cluster, "?", n, pkgs.len());
        }
    }
    let mut top: Vec<(&str, usize)> = per_package.into_iter().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let _ = writeln!(out, "top packages:");
    for (pkg, n) in top.iter().take(10) {
        let _ = writeln!(out, "  {pkg} ({n})");
    }
    out
}

/// Package directory name in a corpus for an id, for callers building
/// corpora on disk.
pub fn package_dir(corpus_root: &Path, id: &str) -> PathBuf {
    corpus_root.join(encode_package_id(id))
}

/// Package id of a corpus subdirectory.
pub fn package_id_of(dir: &Path) -> Option<String> {
    dir.file_name().map(|n| decode_package_dir(&n.to_string_lossy()))
}
