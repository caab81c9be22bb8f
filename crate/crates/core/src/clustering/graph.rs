use serde::{Deserialize, Serialize};

use super::{Clustering, ClusteringError};
use crate::similarity::DistanceMatrix;

/// Default cap on the number of maximal cliques enumerated.
pub const DEFAULT_MAX_CLIQUES: usize = 100_000;

/// How a distance at or below the threshold becomes an edge weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every edge weighs 1.
    #[default]
    Binary,
    /// Edge weight `1 / (1 + d)`.
    Inverse,
}

impl std::str::FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Self::Binary),
            "inverse" => Ok(Self::Inverse),
            _ => Err(format!("unknown weighting {s:?}; expected binary or inverse")),
        }
    }
}

/// Undirected weighted graph over packages, without self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityGraph {
    pub node_ids: Vec<String>,
    /// Neighbours of each node with edge weights, sorted by neighbour.
    pub adjacency: Vec<Vec<(usize, f64)>>,
    pub threshold: u32,
}

impl AffinityGraph {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().map(|&(j, _)| j)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search_by_key(&j, |&(k, _)| k).is_ok()
    }

    /// Builds a graph from an explicit edge list. Panics on out-of-range
    /// endpoints.
    pub fn from_edges(node_ids: Vec<String>, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); node_ids.len()];
        for &(i, j) in edges {
            if i != j {
                adjacency[i].push((j, 1.0));
                adjacency[j].push((i, 1.0));
            }
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(j, _)| j);
            row.dedup_by_key(|&mut (j, _)| j);
        }
        Self {
            node_ids,
            adjacency,
            threshold: 0,
        }
    }
}

/// Connects packages whose distance is at most `tau`.
pub fn build_graph(d: &DistanceMatrix, tau: u32, weighting: Weighting) -> AffinityGraph {
    let n = d.len();
    let adjacency = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && d.get(i, j) <= tau)
                .map(|j| {
                    let w = match weighting {
                        Weighting::Binary => 1.0,
                        Weighting::Inverse => 1.0 / (1.0 + f64::from(d.get(i, j))),
                    };
                    (j, w)
                })
                .collect()
        })
        .collect();
    AffinityGraph {
        node_ids: d.package_ids().to_vec(),
        adjacency,
        threshold: tau,
    }
}

pub fn connected_components(g: &AffinityGraph) -> Clustering {
    let mut component = vec![usize::MAX; g.len()];
    let mut groups = Vec::new();
    for start in 0..g.len() {
        if component[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![start];
        component[start] = id;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for w in g.neighbours(v) {
                if component[w] == usize::MAX {
                    component[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        groups.push(members);
    }
    Clustering::from_groups(&g.node_ids, groups)
}

/// Each node joins its largest maximal clique; ties go to the clique whose
/// sorted member list is lexicographically smallest. Nodes whose chosen
/// clique ends up holding only themselves are noise.
pub fn maximal_cliques(g: &AffinityGraph, max_cliques: usize) -> Result<Clustering, ClusteringError> {
    let cliques = enumerate_cliques(g, max_cliques)?;
    let mut best: Vec<Option<usize>> = vec![None; g.len()];
    for (c, members) in cliques.iter().enumerate() {
        for &v in members {
            let better = match best[v] {
                None => true,
                Some(b) => {
                    let current = &cliques[b];
                    members.len() > current.len() || (members.len() == current.len() && members < current)
                }
            };
            if better {
                best[v] = Some(c);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); cliques.len()];
    for (v, b) in best.iter().enumerate() {
        if let Some(c) = b {
            groups[*c].push(v);
        }
    }
    Ok(Clustering::from_groups(&g.node_ids, groups))
}

/// Bron-Kerbosch with Tomita pivoting. Each clique is returned sorted.
fn enumerate_cliques(g: &AffinityGraph, max_cliques: usize) -> Result<Vec<Vec<usize>>, ClusteringError> {
    let neighbours: Vec<Vec<usize>> = (0..g.len()).map(|i| g.neighbours(i).collect()).collect();
    let mut out = Vec::new();
    // Explicit stack of (R, P, X) frames, processed depth-first.
    let mut stack: Vec<(Vec<usize>, Vec<usize>, Vec<usize>)> = vec![(Vec::new(), (0..g.len()).collect(), Vec::new())];
    while let Some((r, mut p, mut x)) = stack.pop() {
        if p.is_empty() {
            if x.is_empty() {
                let mut clique = r;
                clique.sort_unstable();
                out.push(clique);
                if out.len() > max_cliques {
                    return Err(ClusteringError::TooManyCliques(max_cliques));
                }
            }
            continue;
        }
        let pivot = p
            .iter()
            .chain(&x)
            .copied()
            .max_by_key(|&u| (intersect(&p, &neighbours[u]).len(), std::cmp::Reverse(u)))
            .expect("p is non-empty");
        let candidates: Vec<usize> = p.iter().copied().filter(|v| neighbours[pivot].binary_search(v).is_err()).collect();
        let mut frames = Vec::with_capacity(candidates.len());
        for v in candidates {
            let mut r2 = r.clone();
            r2.push(v);
            frames.push((r2, intersect(&p, &neighbours[v]), intersect(&x, &neighbours[v])));
            p.retain(|&u| u != v);
            let pos = x.binary_search(&v).unwrap_or_else(|e| e);
            x.insert(pos, v);
        }
        // Reverse so the first candidate is expanded first.
        stack.extend(frames.into_iter().rev());
    }
    Ok(out)
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("n{i}")).collect()
    }

    fn names(v: &[usize]) -> Vec<String> {
        v.iter().map(|i| format!("n{i}")).collect()
    }

    fn complete(n: usize) -> AffinityGraph {
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        AffinityGraph::from_edges(ids(n), &edges)
    }

    #[test]
    fn thresholding() {
        let zeros = DistanceMatrix::from_rows(ids(3), &[vec![0; 3], vec![0; 3], vec![0; 3]]);
        assert_eq!(build_graph(&zeros, 0, Weighting::Binary).edge_count(), 3);

        let mut rows = vec![vec![50; 4]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 0;
        }
        rows[0][1] = 0;
        rows[1][0] = 0;
        rows[2][3] = 1;
        rows[3][2] = 1;
        let m = DistanceMatrix::from_rows(ids(4), &rows);
        let g = build_graph(&m, 1, Weighting::Binary);
        assert_eq!(g.edge_count(), 2);
        assert!(g.has_edge(0, 1) && g.has_edge(2, 3));
        assert_eq!(build_graph(&m, 0, Weighting::Binary).edge_count(), 1);

        let inv = build_graph(&m, 1, Weighting::Inverse);
        assert_eq!(inv.adjacency[2], vec![(3, 0.5)]);
        assert_eq!(inv.adjacency[0], vec![(1, 1.0)]);
    }

    #[test]
    fn components() {
        let g = AffinityGraph::from_edges(ids(4), &[(0, 1), (2, 3)]);
        assert_eq!(connected_components(&g).clusters.len(), 2);
        let path = AffinityGraph::from_edges(ids(5), &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(connected_components(&path).clusters, vec![names(&[0, 1, 2, 3, 4])]);
        let lonely = AffinityGraph::from_edges(ids(3), &[]);
        assert_eq!(connected_components(&lonely).noise.len(), 3);
    }

    #[test]
    fn cliques_triangle_with_pendant() {
        let g = AffinityGraph::from_edges(ids(4), &[(0, 1), (1, 2), (0, 2), (2, 3)]);
        let c = maximal_cliques(&g, 100).unwrap();
        assert_eq!(c.clusters, vec![names(&[0, 1, 2])]);
        assert_eq!(c.noise, names(&[3]));
    }

    #[test]
    fn cliques_equal_size_tie_goes_to_lowest_members() {
        // Two triangles sharing node 2: {0,1,2} wins node 2.
        let g = AffinityGraph::from_edges(ids(5), &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]);
        let c = maximal_cliques(&g, 100).unwrap();
        assert_eq!(c.clusters, vec![names(&[0, 1, 2]), names(&[3, 4])]);
    }

    #[test]
    fn cliques_trivial_graphs_and_cap() {
        assert_eq!(maximal_cliques(&complete(6), 100).unwrap().clusters, vec![names(&[0, 1, 2, 3, 4, 5])]);
        let empty = AffinityGraph::from_edges(ids(4), &[]);
        assert_eq!(maximal_cliques(&empty, 100).unwrap().noise.len(), 4);
        // A perfect matching complement on 8 nodes has 2^4 maximal cliques.
        let edges: Vec<_> = (0..8)
            .flat_map(|i| (i + 1..8).map(move |j| (i, j)))
            .filter(|&(i, j)| !(i % 2 == 0 && j == i + 1))
            .collect();
        let g = AffinityGraph::from_edges(ids(8), &edges);
        assert_eq!(enumerate_cliques(&g, 100).unwrap().len(), 16);
        assert_eq!(maximal_cliques(&g, 15), Err(ClusteringError::TooManyCliques(15)));
    }
}
