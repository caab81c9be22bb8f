//! Zhang-Shasha tree edit distance with unit costs.

use crate::corpus::SyntaxTree;

/// A tree prepared for the keyroot dynamic program: labels in postorder,
/// the postorder index of each node's leftmost leaf descendant, and the
/// keyroots in ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TedTree {
    labels: Vec<u32>,
    leftmost_leaf: Vec<usize>,
    keyroots: Vec<usize>,
}

impl TedTree {
    pub fn from_tree(tree: &SyntaxTree) -> Self {
        let postorder = tree.postorder();
        let labels = postorder
            .iter()
            .map(|&id| u32::from(tree.node(id).kind.index()))
            .collect();
        let mut post_index = vec![0usize; tree.len()];
        for (i, &id) in postorder.iter().enumerate() {
            post_index[id] = i;
        }
        // In preorder layout the leftmost leaf of `id` is the last node of
        // the first-child chain; its postorder index is the subtree's first.
        let leftmost_leaf = postorder
            .iter()
            .map(|&id| {
                let mut leaf = id;
                while let Some(first) = tree.children(leaf).next() {
                    leaf = first;
                }
                post_index[leaf]
            })
            .collect();
        Self::from_parts(labels, leftmost_leaf)
    }

    /// Builds from postorder labels and leftmost-leaf indices.
    pub fn from_parts(labels: Vec<u32>, leftmost_leaf: Vec<usize>) -> Self {
        assert_eq!(labels.len(), leftmost_leaf.len());
        assert!(!labels.is_empty(), "tree edit distance needs a non-empty tree");
        let n = labels.len();
        // A keyroot is the highest-numbered node for its leftmost leaf.
        let mut last_with_leaf = vec![usize::MAX; n];
        for (i, &l) in leftmost_leaf.iter().enumerate() {
            assert!(l <= i, "leftmost leaf must precede its node");
            last_with_leaf[l] = i;
        }
        let mut keyroots: Vec<usize> = last_with_leaf.into_iter().filter(|&k| k != usize::MAX).collect();
        keyroots.sort_unstable();
        Self {
            labels,
            leftmost_leaf,
            keyroots,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn postorder_labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn leftmost_leaf(&self) -> &[usize] {
        &self.leftmost_leaf
    }

    pub fn keyroots(&self) -> &[usize] {
        &self.keyroots
    }

    /// Label counts, sorted by label; used for a cheap lower bound.
    pub fn label_histogram(&self) -> Vec<(u32, u32)> {
        let mut labels = self.labels.clone();
        labels.sort_unstable();
        let mut out: Vec<(u32, u32)> = Vec::new();
        for l in labels {
            match out.last_mut() {
                Some((last, count)) if *last == l => *count += 1,
                _ => out.push((l, 1)),
            }
        }
        out
    }
}

/// Lower bound on the edit distance from label histograms. With `d`
/// deletions, `i` insertions and `r` relabels the histogram L1 distance is at
/// most `d + i + 2r`, and `d + i ≥ |n − m|`, so `ted ≥ (L1 + |n − m|) / 2`.
pub fn histogram_lower_bound(a: &[(u32, u32)], b: &[(u32, u32)]) -> u32 {
    let (mut i, mut j, mut l1) = (0, 0, 0u32);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(la, ca)), Some(&(lb, cb))) if la == lb => {
                l1 += ca.abs_diff(cb);
                i += 1;
                j += 1;
            }
            (Some(&(la, ca)), Some(&(lb, _))) if la < lb => {
                l1 += ca;
                i += 1;
            }
            (Some(&(_, ca)), None) => {
                l1 += ca;
                i += 1;
            }
            (_, Some(&(_, cb))) => {
                l1 += cb;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    let n: u32 = a.iter().map(|&(_, c)| c).sum();
    let m: u32 = b.iter().map(|&(_, c)| c).sum();
    (l1 + n.abs_diff(m)).div_ceil(2)
}

/// Minimum number of unit-cost insertions, deletions and relabels turning
/// `a` into `b`.
pub fn ted(a: &TedTree, b: &TedTree) -> u32 {
    let n = a.len();
    let m = b.len();
    let mut tree_dist = vec![0u32; n * m];
    // Forest distance buffer reused across keyroot pairs.
    let mut forest = vec![0u32; (n + 1) * (m + 1)];
    for &i in &a.keyroots {
        for &j in &b.keyroots {
            forest_distance(a, b, i, j, &mut tree_dist, &mut forest);
        }
    }
    tree_dist[(n - 1) * m + (m - 1)]
}

fn forest_distance(a: &TedTree, b: &TedTree, i: usize, j: usize, tree_dist: &mut [u32], forest: &mut [u32]) {
    let m = b.len();
    let li = a.leftmost_leaf[i];
    let lj = b.leftmost_leaf[j];
    let rows = i - li + 2;
    let cols = j - lj + 2;
    // forest[x * cols + y]: distance between a[li..li+x) and b[lj..lj+y).
    let at = |x: usize, y: usize| x * cols + y;
    forest[at(0, 0)] = 0;
    for x in 1..rows {
        forest[at(x, 0)] = forest[at(x - 1, 0)] + 1;
    }
    for y in 1..cols {
        forest[at(0, y)] = forest[at(0, y - 1)] + 1;
    }
    for x in 1..rows {
        let node_a = li + x - 1;
        let la = a.leftmost_leaf[node_a];
        for y in 1..cols {
            let node_b = lj + y - 1;
            let lb = b.leftmost_leaf[node_b];
            let delete = forest[at(x - 1, y)] + 1;
            let insert = forest[at(x, y - 1)] + 1;
            if la == li && lb == lj {
                let relabel = forest[at(x - 1, y - 1)] + u32::from(a.labels[node_a] != b.labels[node_b]);
                let d = delete.min(insert).min(relabel);
                forest[at(x, y)] = d;
                tree_dist[node_a * m + node_b] = d;
            } else {
                let px = la - li;
                let py = lb - lj;
                let subtree = forest[at(px, py)] + tree_dist[node_a * m + node_b];
                forest[at(x, y)] = delete.min(insert).min(subtree);
            }
        }
    }
}
