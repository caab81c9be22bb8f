//! Clone-based signature generation for software packages.
//!
//! The toolkit embeds packages as the syntax trees of their functions,
//! measures package distance as the smallest tree edit distance between any
//! two functions, clusters packages with the Markov cluster algorithm (plus
//! several baselines), and derives a signature per cluster from structural
//! fingerprints that are characteristic for it. Signatures are then matched
//! against whole package corpora.
//!
//! Stages map onto modules:
//!
//! * [`corpus`]: ingest packages from disk, parse JavaScript, extract function units.
//! * [`fingerprint`]: recursive SHA-256 hashing of function syntax trees.
//! * [`similarity`]: Zhang-Shasha tree edit distance, package distance matrix, text baselines.
//! * [`clustering`]: affinity graphs, MCL, connected components, maximal cliques, DBSCAN.
//! * [`evaluation`]: pairwise precision / recall / F1 between clusterings.
//! * [`signature`]: characteristic fingerprint selection and refinement.
//! * [`scanner`]: persistent fingerprint index and corpus scans.
//! * [`pipeline`]: configuration, stage artifacts and the end-to-end run.

pub mod clustering;
pub mod corpus;
pub mod evaluation;
pub mod fingerprint;
pub mod pipeline;
pub mod scanner;
pub mod signature;
pub mod similarity;

mod diagnostic;
mod par;

pub use diagnostic::Diagnostic;
