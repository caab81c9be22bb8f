//! Cluster signatures.
//!
//! A fingerprint is characteristic for a cluster when it occurs in no
//! package of another cluster, occurs in at least two packages of the
//! cluster, and does not occur in the benign corpus. The characteristic
//! fingerprints of a cluster form its signature.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clustering::Clustering;
use crate::corpus::Span;
use crate::fingerprint::{Fingerprint, FingerprintRecord, PackageFingerprints};
use crate::scanner::MatchRecord;
use crate::Diagnostic;

pub const FORMAT_VERSION: u32 = 1;
/// Prefix of the cluster id of hand-made signatures.
pub const MANUAL_PREFIX: &str = "manual:";

#[derive(Debug, Error)]
pub enum SignatureError {
    #[error("clustering has no clusters")]
    EmptyClustering,
    #[error("no fingerprints for clustered package {0}")]
    MissingFingerprints(String),
    #[error("a manual signature needs at least one fingerprint record")]
    NoRecords,
    #[error("every fingerprint of {0} already belongs to another signature")]
    AllConflicting(String),
    #[error("signature {0} already exists")]
    DuplicateCluster(String),
    #[error("no signature named {0}")]
    UnknownCluster(String),
    #[error("fingerprint {fingerprint} is in both {first} and {second}")]
    Overlap {
        fingerprint: Fingerprint,
        first: String,
        second: String,
    },
    #[error("unsupported signature format version {0}")]
    Version(u32),
    #[error("signature file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Where a signature fingerprint was seen.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub package_id: String,
    pub source_ref: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementEntry {
    pub fingerprint: Fingerprint,
    pub reason: String,
    /// UTC, RFC 3339.
    pub timestamp: String,
    /// False when the fingerprint was not in the signature.
    pub removed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub cluster_id: String,
    pub fingerprints: BTreeSet<Fingerprint>,
    pub provenance: BTreeMap<Fingerprint, Vec<Provenance>>,
    #[serde(default)]
    pub refinement_log: Vec<RefinementEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl Signature {
    fn new(cluster_id: String) -> Self {
        Self {
            cluster_id,
            fingerprints: BTreeSet::new(),
            provenance: BTreeMap::new(),
            refinement_log: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.fingerprints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fingerprints.is_empty()
    }

    pub fn is_manual(&self) -> bool {
        self.cluster_id.starts_with(MANUAL_PREFIX)
    }

    /// Distinct packages a fingerprint was derived from.
    pub fn provenance_packages(&self, fp: &Fingerprint) -> BTreeSet<&str> {
        self.provenance
            .get(fp)
            .into_iter()
            .flatten()
            .map(|p| p.package_id.as_str())
            .collect()
    }
}

/// Fingerprints of the benign reference packages.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenignCorpus {
    /// SHA-256 over the sorted fingerprints, hex encoded.
    pub corpus_id: String,
    pub fingerprints: BTreeSet<Fingerprint>,
}

impl BenignCorpus {
    pub fn new(fingerprints: BTreeSet<Fingerprint>) -> Self {
        let mut hasher = Sha256::new();
        for fp in &fingerprints {
            hasher.update(fp.as_bytes());
        }
        Self {
            corpus_id: hex::encode(hasher.finalize()),
            fingerprints,
        }
    }

    /// The union of the matchable fingerprints of `packages`.
    pub fn from_packages<'a>(packages: impl IntoIterator<Item = &'a PackageFingerprints>) -> Self {
        Self::new(packages.into_iter().flat_map(|p| p.distinct.iter().copied()).collect())
    }

    pub fn empty() -> Self {
        Self::new(BTreeSet::new())
    }

    pub fn contains(&self, fp: &Fingerprint) -> bool {
        self.fingerprints.contains(fp)
    }
}

/// The `signatures.json` document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureSet {
    pub format_version: u32,
    pub benign_corpus_id: String,
    /// UTC, RFC 3339.
    pub generated_at: String,
    pub signatures: Vec<Signature>,
}

impl SignatureSet {
    pub fn new(benign_corpus_id: String, signatures: Vec<Signature>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            benign_corpus_id,
            generated_at: now(),
            signatures,
        }
    }

    pub fn total_fingerprints(&self) -> usize {
        self.signatures.iter().map(Signature::len).sum()
    }

    pub fn get(&self, cluster_id: &str) -> Option<&Signature> {
        self.signatures.iter().find(|s| s.cluster_id == cluster_id)
    }

    /// Owner of every signature fingerprint. Fails on the first fingerprint
    /// claimed by two signatures.
    pub fn owners(&self) -> Result<BTreeMap<Fingerprint, &str>, SignatureError> {
        let mut owners: BTreeMap<Fingerprint, &str> = BTreeMap::new();
        for sig in &self.signatures {
            for fp in &sig.fingerprints {
                if let Some(first) = owners.insert(*fp, &sig.cluster_id) {
                    return Err(SignatureError::Overlap {
                        fingerprint: *fp,
                        first: first.to_string(),
                        second: sig.cluster_id.clone(),
                    });
                }
            }
        }
        Ok(owners)
    }

    pub fn validate(&self) -> Result<(), SignatureError> {
        if self.format_version != FORMAT_VERSION {
            return Err(SignatureError::Version(self.format_version));
        }
        let mut ids = BTreeSet::new();
        for sig in &self.signatures {
            if !ids.insert(&sig.cluster_id) {
                return Err(SignatureError::DuplicateCluster(sig.cluster_id.clone()));
            }
        }
        self.owners().map(|_| ())
    }

    /// Adds a manual signature, dropping fingerprints that other signatures
    /// already hold. Returns one diagnostic per dropped fingerprint.
    pub fn insert_manual(&mut self, mut sig: Signature) -> Result<Vec<Diagnostic>, SignatureError> {
        if self.get(&sig.cluster_id).is_some() {
            return Err(SignatureError::DuplicateCluster(sig.cluster_id));
        }
        let owners = self.owners()?;
        let mut diagnostics = Vec::new();
        let conflicting: Vec<Fingerprint> = sig.fingerprints.iter().filter(|fp| owners.contains_key(fp)).copied().collect();
        for fp in &conflicting {
            diagnostics.push(Diagnostic::new(
                &sig.cluster_id,
                format!("fingerprint {fp} already belongs to {}; not added", owners[fp]),
            ));
            sig.fingerprints.remove(fp);
            sig.provenance.remove(fp);
        }
        if sig.fingerprints.is_empty() {
            return Err(SignatureError::AllConflicting(sig.cluster_id));
        }
        self.signatures.push(sig);
        Ok(diagnostics)
    }

    /// Replaces the named signature with `remove_fingerprints` applied.
    pub fn remove(&mut self, cluster_id: &str, fps: &BTreeSet<Fingerprint>, reason: &str) -> Result<&Signature, SignatureError> {
        let pos = self
            .signatures
            .iter()
            .position(|s| s.cluster_id == cluster_id)
            .ok_or_else(|| SignatureError::UnknownCluster(cluster_id.to_string()))?;
        self.signatures[pos] = remove_fingerprints(&self.signatures[pos], fps, reason);
        Ok(&self.signatures[pos])
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, SignatureError> {
        let set: Self = serde_json::from_reader(reader)?;
        set.validate()?;
        Ok(set)
    }

    pub fn to_writer<W: Write>(&self, mut writer: W) -> Result<(), SignatureError> {
        serde_json::to_writer_pretty(&mut writer, self)?;
        writer.write_all(b"\n").map_err(serde_json::Error::io)?;
        Ok(())
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Selects the characteristic fingerprints of every cluster. Noise packages
/// take no part. Sub-threshold records never contribute.
pub fn derive_signatures(
    clustering: &Clustering,
    fps: &BTreeMap<String, PackageFingerprints>,
    benign: &BenignCorpus,
) -> Result<SignatureSet, SignatureError> {
    if clustering.clusters.is_empty() {
        return Err(SignatureError::EmptyClustering);
    }
    // fingerprint -> cluster -> packages
    let mut seen: BTreeMap<Fingerprint, BTreeMap<usize, BTreeSet<&str>>> = BTreeMap::new();
    for (c, members) in clustering.clusters.iter().enumerate() {
        for id in members {
            let pkg = fps.get(id).ok_or_else(|| SignatureError::MissingFingerprints(id.clone()))?;
            for fp in &pkg.distinct {
                seen.entry(*fp).or_default().entry(c).or_default().insert(id);
            }
        }
    }
    let mut signatures: Vec<Signature> = clustering.cluster_ids().into_iter().map(Signature::new).collect();
    for (fp, clusters) in &seen {
        if clusters.len() != 1 || benign.contains(fp) {
            continue;
        }
        let (&c, packages) = clusters.iter().next().expect("one cluster");
        if packages.len() < 2 {
            continue;
        }
        signatures[c].fingerprints.insert(*fp);
    }
    for (c, sig) in signatures.iter_mut().enumerate() {
        for id in &clustering.clusters[c] {
            for r in fps[id].records.iter().filter(|r| fps[id].is_matchable(r) && sig.fingerprints.contains(&r.fingerprint)) {
                sig.provenance.entry(r.fingerprint).or_default().push(provenance_of(r));
            }
        }
        for entries in sig.provenance.values_mut() {
            entries.sort();
        }
        if sig.is_empty() {
            sig.diagnostics.push("cluster yielded no characteristic fingerprints".into());
        }
    }
    Ok(SignatureSet::new(benign.corpus_id.clone(), signatures))
}

fn provenance_of(r: &FingerprintRecord) -> Provenance {
    Provenance {
        package_id: r.package_id.clone(),
        source_ref: r.source_ref.clone(),
        span: r.span,
    }
}

/// A pseudo-cluster signature from hand-picked records, named
/// `manual:<label>`.
pub fn manual_signature(label: &str, records: &[FingerprintRecord]) -> Result<Signature, SignatureError> {
    if records.is_empty() {
        return Err(SignatureError::NoRecords);
    }
    let mut sig = Signature::new(format!("{MANUAL_PREFIX}{label}"));
    for r in records {
        sig.fingerprints.insert(r.fingerprint);
        sig.provenance.entry(r.fingerprint).or_default().push(provenance_of(r));
    }
    for entries in sig.provenance.values_mut() {
        entries.sort();
        entries.dedup();
    }
    Ok(sig)
}

/// Returns `sig` without `fps`. Every requested fingerprint is logged, with
/// `removed = false` when it was not present.
pub fn remove_fingerprints(sig: &Signature, fps: &BTreeSet<Fingerprint>, reason: &str) -> Signature {
    let mut out = sig.clone();
    let timestamp = now();
    for fp in fps {
        let removed = out.fingerprints.remove(fp);
        out.provenance.remove(fp);
        out.refinement_log.push(RefinementEntry {
            fingerprint: *fp,
            reason: reason.to_string(),
            timestamp: timestamp.clone(),
            removed,
        });
    }
    if out.is_empty() && !sig.is_empty() {
        out.diagnostics.push("all fingerprints removed by refinement".into());
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FingerprintRank {
    pub fingerprint: Fingerprint,
    /// Distinct packages matched by the fingerprint.
    pub packages: usize,
    /// Matched function records.
    pub records: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterRanking {
    pub cluster_id: String,
    pub top: Vec<FingerprintRank>,
}

/// The `n` fingerprints of each signature matching the most distinct
/// packages in `records`, ties broken by fingerprint. Fingerprints without
/// matches rank last with count 0.
pub fn top_matching<'a>(
    sigset: &SignatureSet,
    records: impl IntoIterator<Item = &'a MatchRecord>,
    n: usize,
) -> Vec<ClusterRanking> {
    let mut hits: BTreeMap<Fingerprint, (BTreeSet<&str>, usize)> = BTreeMap::new();
    for r in records {
        let e = hits.entry(r.fingerprint).or_default();
        e.0.insert(r.package_id.as_str());
        e.1 += 1;
    }
    sigset
        .signatures
        .iter()
        .map(|sig| {
            let mut ranks: Vec<FingerprintRank> = sig
                .fingerprints
                .iter()
                .map(|fp| {
                    let (packages, records) = hits.get(fp).map_or((0, 0), |(p, r)| (p.len(), *r));
                    FingerprintRank {
                        fingerprint: *fp,
                        packages,
                        records,
                    }
                })
                .collect();
            ranks.sort_by(|a, b| b.packages.cmp(&a.packages).then_with(|| a.fingerprint.cmp(&b.fingerprint)));
            ranks.truncate(n);
            ClusterRanking {
                cluster_id: sig.cluster_id.clone(),
                top: ranks,
            }
        })
        .collect()
}
