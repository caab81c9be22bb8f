//! Package distances.
//!
//! The distance between two packages is the smallest tree edit distance
//! between any function of one and any function of the other. Text ratios
//! over function source are kept as an evaluation baseline.

mod matrix;
mod ted;
mod text;

use crate::corpus::FunctionUnit;
use crate::fingerprint::{hash_node, Fingerprint};
use crate::Diagnostic;

pub use matrix::{DistanceMatrix, MatrixError};
pub use ted::{histogram_lower_bound, ted, TedTree};
pub use text::{text_package_distance, text_ratio, TextMode};

/// Default bound on the node-count ratio of a function pair before the
/// exact DP is replaced by the size lower bound.
pub const DEFAULT_SIZE_RATIO_GUARD: f64 = 10.0;
/// Default bound on `|a| * |b|` for one exact DP.
pub const DEFAULT_MAX_PAIR_CELLS: u64 = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceOptions {
    /// Pairs whose larger/smaller node-count ratio exceeds this skip the DP
    /// and use the size difference instead. `None` disables the guard.
    pub size_ratio_guard: Option<f64>,
    /// Pairs whose DP table would exceed this many cells use the histogram
    /// lower bound instead. `None` disables the guard.
    pub max_pair_cells: Option<u64>,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            size_ratio_guard: Some(DEFAULT_SIZE_RATIO_GUARD),
            max_pair_cells: Some(DEFAULT_MAX_PAIR_CELLS),
        }
    }
}

impl DistanceOptions {
    /// Exact distances for every pair.
    pub fn exact() -> Self {
        Self {
            size_ratio_guard: None,
            max_pair_cells: None,
        }
    }
}

/// One function prepared for distance computation.
#[derive(Clone, Debug)]
pub struct UnitTree {
    pub fingerprint: Fingerprint,
    pub tree: TedTree,
    histogram: Vec<(u32, u32)>,
}

impl UnitTree {
    pub fn new(fingerprint: Fingerprint, tree: TedTree) -> Self {
        let histogram = tree.label_histogram();
        Self {
            fingerprint,
            tree,
            histogram,
        }
    }

    pub fn from_unit(unit: &FunctionUnit) -> Self {
        Self::new(hash_node(&unit.tree, 0), TedTree::from_tree(&unit.tree))
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }
}

/// The function trees of one package.
#[derive(Clone, Debug)]
pub struct PackageAsts {
    pub package_id: String,
    pub units: Vec<UnitTree>,
}

impl PackageAsts {
    /// Keeps units with at least `min_node_count` nodes.
    pub fn from_units(package_id: &str, units: &[FunctionUnit], min_node_count: usize) -> Self {
        Self {
            package_id: package_id.to_string(),
            units: units
                .iter()
                .filter(|u| u.node_count() >= min_node_count)
                .map(UnitTree::from_unit)
                .collect(),
        }
    }
}

/// Distance of one function pair under the guards in `opts`.
pub fn unit_distance(a: &UnitTree, b: &UnitTree, opts: &DistanceOptions) -> u32 {
    if a.fingerprint == b.fingerprint {
        return 0;
    }
    let (n, m) = (a.len() as u64, b.len() as u64);
    if let Some(ratio) = opts.size_ratio_guard {
        if n.max(m) as f64 > ratio * n.min(m) as f64 {
            return n.abs_diff(m) as u32;
        }
    }
    if opts.max_pair_cells.is_some_and(|cap| n * m > cap) {
        return histogram_lower_bound(&a.histogram, &b.histogram);
    }
    ted(&a.tree, &b.tree)
}

/// Minimum edit distance over all cross-package function pairs, or `None`
/// when either package has no units. Pairs sharing a fingerprint yield 0
/// without running the DP.
pub fn package_distance(a: &PackageAsts, b: &PackageAsts, opts: &DistanceOptions) -> Option<u32> {
    if a.units.is_empty() || b.units.is_empty() {
        return None;
    }
    let shared = a
        .units
        .iter()
        .any(|ua| b.units.iter().any(|ub| ua.fingerprint == ub.fingerprint));
    if shared {
        return Some(0);
    }
    // Visit pairs by increasing lower bound so the search can stop as soon as
    // no remaining pair can beat the best distance found.
    let mut pairs: Vec<(u32, usize, usize)> = Vec::with_capacity(a.units.len() * b.units.len());
    for (i, ua) in a.units.iter().enumerate() {
        for (j, ub) in b.units.iter().enumerate() {
            pairs.push((histogram_lower_bound(&ua.histogram, &ub.histogram), i, j));
        }
    }
    pairs.sort_unstable();
    let mut best = u32::MAX;
    for (bound, i, j) in pairs {
        if bound >= best {
            break;
        }
        best = best.min(unit_distance(&a.units[i], &b.units[j], opts));
    }
    Some(best)
}

/// All-pairs package distances. Packages without units are left out and
/// reported in the returned diagnostics.
pub fn distance_matrix(packages: &[PackageAsts], opts: &DistanceOptions) -> (DistanceMatrix, Vec<Diagnostic>) {
    let mut diagnostics = Vec::new();
    let kept: Vec<&PackageAsts> = packages
        .iter()
        .filter(|p| {
            let keep = !p.units.is_empty();
            if !keep {
                diagnostics.push(Diagnostic::new(
                    &p.package_id,
                    "no function units; excluded from the distance matrix",
                ));
            }
            keep
        })
        .collect();
    let ids = kept.iter().map(|p| p.package_id.clone()).collect();
    let matrix = DistanceMatrix::compute(ids, |i, j| {
        package_distance(kept[i], kept[j], opts).expect("excluded packages have units")
    });
    (matrix, diagnostics)
}
