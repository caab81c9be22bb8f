//! Matching packages against signatures.
//!
//! A package matches a cluster when at least one of its fingerprints is in
//! the cluster's signature. Corpus scans stream one JSON object per match.

mod index;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ingest_package, list_packages, CorpusError, ParserAdapter, Span, DEFAULT_MAX_FILE_BYTES};
use crate::fingerprint::{extract_package_units, fingerprint_units, Fingerprint, PackageFingerprints, DEFAULT_MIN_NODE_COUNT};
use crate::Diagnostic;

pub use index::{FingerprintIndex, IndexError};

pub const DEFAULT_PACKAGE_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Error)]
pub enum ScanError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("writing scan report: {0}")]
    Io(#[from] io::Error),
    #[error("scan report line {line}: {source}")]
    Report {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// One function of a scanned package whose fingerprint is in a signature.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub package_id: String,
    pub source_ref: String,
    pub span: Span,
    pub fingerprint: Fingerprint,
    pub cluster_id: String,
    /// UTC, RFC 3339.
    pub scanned_at: String,
}

/// One record per matchable function whose fingerprint is indexed.
pub fn match_package(fps: &PackageFingerprints, idx: &FingerprintIndex, scanned_at: &str) -> Vec<MatchRecord> {
    fps.records
        .iter()
        .filter(|r| fps.is_matchable(r))
        .filter_map(|r| {
            idx.lookup(&r.fingerprint).map(|cluster| MatchRecord {
                package_id: r.package_id.clone(),
                source_ref: r.source_ref.clone(),
                span: r.span,
                fingerprint: r.fingerprint,
                cluster_id: cluster.to_string(),
                scanned_at: scanned_at.to_string(),
            })
        })
        .collect()
}

/// Clusters matched by at least one record.
pub fn verdicts<'a>(records: impl IntoIterator<Item = &'a MatchRecord>) -> BTreeSet<&'a str> {
    records.into_iter().map(|r| r.cluster_id.as_str()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanOptions {
    pub min_node_count: usize,
    pub max_file_bytes: u64,
    /// Packages still parsing after this long are skipped.
    pub package_timeout: Duration,
    /// Packages processed in parallel between two report flushes.
    pub chunk_size: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            min_node_count: DEFAULT_MIN_NODE_COUNT,
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
            package_timeout: DEFAULT_PACKAGE_TIMEOUT,
            chunk_size: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterMatches {
    /// Matching function records.
    pub records: usize,
    /// Distinct matching packages.
    pub packages: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanStats {
    /// Package directories visited.
    pub packages_scanned: usize,
    /// Packages with at least one match.
    pub packages_matched: usize,
    /// Packages that could not be read, had no source, or timed out.
    pub packages_skipped: usize,
    pub files: usize,
    pub functions: usize,
    pub parse_failures: usize,
    pub records: usize,
    pub per_cluster: BTreeMap<String, ClusterMatches>,
    pub elapsed_ms: u64,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub records: Vec<MatchRecord>,
    pub stats: ScanStats,
}

struct PackageScan {
    records: Vec<MatchRecord>,
    files: usize,
    functions: usize,
    parse_failures: usize,
    skipped: bool,
    diagnostics: Vec<Diagnostic>,
}

fn scan_package(
    id: &str,
    path: &Path,
    idx: &FingerprintIndex,
    adapter: &dyn ParserAdapter,
    opts: &ScanOptions,
) -> PackageScan {
    let mut out = PackageScan {
        records: Vec::new(),
        files: 0,
        functions: 0,
        parse_failures: 0,
        skipped: false,
        diagnostics: Vec::new(),
    };
    let deadline = Instant::now() + opts.package_timeout;
    let pkg = match ingest_package(path, id, adapter, opts.max_file_bytes) {
        Ok(pkg) => pkg,
        Err(err) => {
            out.skipped = true;
            out.diagnostics.push(Diagnostic::new(id, err.to_string()));
            return out;
        }
    };
    out.files = pkg.files.len();
    let units = extract_package_units(&pkg, adapter, Some(deadline));
    out.functions = units.units.len();
    out.parse_failures = units.parse_failures;
    out.diagnostics = units.diagnostics;
    if units.timed_out {
        out.skipped = true;
        return out;
    }
    let fps = fingerprint_units(id, &units.units, opts.min_node_count);
    let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    out.records = match_package(&fps, idx, &now);
    out
}

/// Scans every package below `corpus_root`, passing records to `emit` in
/// package order as each chunk completes.
pub fn scan_corpus_with<F>(
    corpus_root: &Path,
    idx: &FingerprintIndex,
    adapter: &dyn ParserAdapter,
    opts: &ScanOptions,
    mut emit: F,
) -> Result<ScanStats, ScanError>
where
    F: FnMut(&MatchRecord) -> io::Result<()>,
{
    let started = Instant::now();
    let packages = list_packages(corpus_root)?;
    let mut stats = ScanStats::default();
    let mut matched_packages: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for chunk in packages.chunks(opts.chunk_size.max(1)) {
        let results = crate::par::map_collect(chunk, |(id, path)| scan_package(id, path, idx, adapter, opts));
        for result in results {
            stats.packages_scanned += 1;
            stats.packages_skipped += usize::from(result.skipped);
            stats.files += result.files;
            stats.functions += result.functions;
            stats.parse_failures += result.parse_failures;
            stats.records += result.records.len();
            stats.packages_matched += usize::from(!result.records.is_empty());
            stats.diagnostics.extend(result.diagnostics);
            for r in &result.records {
                stats.per_cluster.entry(r.cluster_id.clone()).or_default().records += 1;
                matched_packages
                    .entry(r.cluster_id.clone())
                    .or_default()
                    .insert(r.package_id.clone());
                emit(r)?;
            }
        }
        log::debug!("scanned {}/{} packages", stats.packages_scanned, packages.len());
    }
    for (cluster, pkgs) in matched_packages {
        stats.per_cluster.entry(cluster).or_default().packages = pkgs.len();
    }
    stats.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(stats)
}

/// Scans a corpus and keeps all records in memory.
pub fn scan_corpus(
    corpus_root: &Path,
    idx: &FingerprintIndex,
    adapter: &dyn ParserAdapter,
    opts: &ScanOptions,
) -> Result<ScanReport, ScanError> {
    let mut records = Vec::new();
    let stats = scan_corpus_with(corpus_root, idx, adapter, opts, |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok(ScanReport { records, stats })
}

/// Scans a corpus, writing one JSON line per record to `out` and flushing
/// after every chunk so an interrupted scan keeps what it found.
pub fn scan_corpus_to<W: Write>(
    corpus_root: &Path,
    idx: &FingerprintIndex,
    adapter: &dyn ParserAdapter,
    opts: &ScanOptions,
    out: &mut W,
) -> Result<ScanStats, ScanError> {
    let mut pending = 0usize;
    let stats = scan_corpus_with(corpus_root, idx, adapter, opts, |r| {
        serde_json::to_writer(&mut *out, r).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
        pending += 1;
        if pending >= opts.chunk_size {
            pending = 0;
            out.flush()?;
        }
        Ok(())
    })?;
    out.flush()?;
    Ok(stats)
}

/// Reads a JSON-lines report. Blank lines are ignored.
pub fn read_report<R: BufRead>(reader: R) -> Result<Vec<MatchRecord>, ScanError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| ScanError::Report { line: i + 1, source })?);
    }
    Ok(out)
}
