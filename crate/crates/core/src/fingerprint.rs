//! Structural fingerprints of function units.
//!
//! The digest of a node is `SHA-256(label ‖ 0x00 ‖ digest(child_1) ‖ digest(child_2) ‖ …)`
//! where the label is the node kind's UTF-8 name and child digests are the
//! raw 32 bytes in source order. A leaf hashes `label ‖ 0x00`. Identifier
//! names, literal values and operators are not part of any label, so renames
//! and literal edits keep the fingerprint while any structural change breaks it.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{
    extract_functions, AstNode, FunctionOrigin, FunctionUnit, NodeId, Package, ParserAdapter, Span,
    SyntaxTree,
};
use crate::Diagnostic;

pub const DEFAULT_MIN_NODE_COUNT: usize = 5;

/// A 32-byte SHA-256 digest, written as 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", self.to_hex())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid fingerprint `{0}`: expected 64 lowercase hex characters")]
pub struct FingerprintParseError(pub String);

impl FromStr for Fingerprint {
    type Err = FingerprintParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(FingerprintParseError(s.to_string()));
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| FingerprintParseError(s.to_string()))?;
        Ok(Self(out))
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// t(v): the node's kind name and nothing else.
pub fn node_label(node: &AstNode) -> &'static str {
    node.kind.name()
}

/// Digests of every node of `tree`, indexed by node id.
pub fn subtree_digests(tree: &SyntaxTree) -> Vec<Fingerprint> {
    let mut digests = vec![Fingerprint([0; 32]); tree.len()];
    // Reverse preorder visits children before parents.
    for id in (0..tree.len()).rev() {
        digests[id] = combine(node_label(tree.node(id)), tree.children(id).map(|c| &digests[c]));
    }
    digests
}

/// Merkle hash of the subtree rooted at `id`.
pub fn hash_node(tree: &SyntaxTree, id: NodeId) -> Fingerprint {
    let range = tree.subtree_range(id);
    let mut digests = vec![Fingerprint([0; 32]); range.len()];
    for node in range.clone().rev() {
        let local = node - range.start;
        let digest = combine(
            node_label(tree.node(node)),
            tree.children(node).map(|c| &digests[c - range.start]),
        );
        digests[local] = digest;
    }
    digests[0]
}

fn combine<'a>(label: &str, children: impl Iterator<Item = &'a Fingerprint>) -> Fingerprint {
    let mut hasher = Sha256::new();
    hasher.update(label.as_bytes());
    hasher.update([0u8]);
    for child in children {
        hasher.update(child.0);
    }
    Fingerprint(hasher.finalize().into())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintRecord {
    pub fingerprint: Fingerprint,
    pub package_id: String,
    pub source_ref: String,
    pub span: Span,
    pub origin: FunctionOrigin,
    pub node_count: usize,
}

/// Fingerprint of the unit's root node, with the unit's provenance attached.
pub fn fingerprint_function(unit: &FunctionUnit) -> FingerprintRecord {
    FingerprintRecord {
        fingerprint: hash_node(&unit.tree, unit.tree.root()),
        package_id: unit.package_id.clone(),
        source_ref: unit.source_ref.clone(),
        span: unit.span,
        origin: unit.origin,
        node_count: unit.node_count(),
    }
}

/// All fingerprints of one package.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageFingerprints {
    pub package_id: String,
    /// Records below this node count are kept but never match.
    pub min_node_count: usize,
    pub records: Vec<FingerprintRecord>,
    /// Deduplicated fingerprints of the records at or above `min_node_count`.
    pub distinct: BTreeSet<Fingerprint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
}

impl PackageFingerprints {
    pub fn from_records(package_id: &str, min_node_count: usize, records: Vec<FingerprintRecord>) -> Self {
        let distinct = records
            .iter()
            .filter(|r| r.node_count >= min_node_count)
            .map(|r| r.fingerprint)
            .collect();
        Self {
            package_id: package_id.to_string(),
            min_node_count,
            records,
            distinct,
            diagnostics: Vec::new(),
        }
    }

    pub fn is_matchable(&self, record: &FingerprintRecord) -> bool {
        record.node_count >= self.min_node_count
    }
}

/// Parse results of one package: its function units plus what went wrong.
#[derive(Clone, Debug, Default)]
pub struct PackageUnits {
    pub package_id: String,
    pub units: Vec<FunctionUnit>,
    pub files_parsed: usize,
    pub parse_failures: usize,
    pub diagnostics: Vec<Diagnostic>,
    /// Set when a deadline cut processing short.
    pub timed_out: bool,
}

/// Parses every file of `pkg` and extracts its units. Unparseable files are
/// recorded as diagnostics. Stops early once `deadline` has passed.
pub fn extract_package_units(
    pkg: &Package,
    adapter: &dyn ParserAdapter,
    deadline: Option<Instant>,
) -> PackageUnits {
    let mut out = PackageUnits {
        package_id: pkg.id.clone(),
        diagnostics: pkg.diagnostics.clone(),
        ..PackageUnits::default()
    };
    for file in &pkg.files {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            out.timed_out = true;
            out.diagnostics.push(Diagnostic::new(&pkg.id, "package timeout exceeded"));
            break;
        }
        match adapter.parse(file) {
            Ok(ast) => {
                out.files_parsed += 1;
                out.units.extend(extract_functions(&ast, &pkg.id));
            }
            Err(err) => {
                out.parse_failures += 1;
                out.diagnostics
                    .push(Diagnostic::new(format!("{}/{}", pkg.id, err.path), err.to_string()));
            }
        }
    }
    out
}

pub fn fingerprint_units(package_id: &str, units: &[FunctionUnit], min_node_count: usize) -> PackageFingerprints {
    let records = units.iter().map(fingerprint_function).collect();
    PackageFingerprints::from_records(package_id, min_node_count, records)
}

/// Parses, extracts and fingerprints a whole package.
pub fn fingerprint_package(
    pkg: &Package,
    adapter: &dyn ParserAdapter,
    min_node_count: usize,
) -> PackageFingerprints {
    let units = extract_package_units(pkg, adapter, None);
    let mut fps = fingerprint_units(&pkg.id, &units.units, min_node_count);
    fps.diagnostics = units.diagnostics;
    if units.files_parsed == 0 {
        fps.diagnostics
            .push(Diagnostic::new(&pkg.id, "no parseable source files"));
    }
    fps
}
