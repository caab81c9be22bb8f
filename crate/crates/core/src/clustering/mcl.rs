//! Markov cluster algorithm on sparse column-stochastic matrices.

use serde::{Deserialize, Serialize};

use super::{AffinityGraph, Clustering, ClusteringError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MclParams {
    /// Matrix power applied in each expansion step.
    pub expansion: u32,
    /// Elementwise power applied in each inflation step.
    pub inflation: f64,
    /// Entries below this are dropped after inflation.
    pub prune_threshold: f64,
    pub max_iterations: usize,
    /// Iteration stops once no entry moves by this much or more.
    pub convergence_epsilon: f64,
}

impl Default for MclParams {
    fn default() -> Self {
        Self {
            expansion: 2,
            inflation: 2.0,
            prune_threshold: 1e-5,
            max_iterations: 100,
            convergence_epsilon: 1e-8,
        }
    }
}

impl MclParams {
    pub fn validate(&self) -> Result<(), ClusteringError> {
        let invalid = |name, reason: &str| {
            Err(ClusteringError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.expansion < 2 {
            return invalid("expansion", "must be at least 2");
        }
        if !(self.inflation > 1.0 && self.inflation.is_finite()) {
            return invalid("inflation", "must be a finite number greater than 1");
        }
        if !(0.0..1.0).contains(&self.prune_threshold) {
            return invalid("prune_threshold", "must be in [0, 1)");
        }
        if self.max_iterations == 0 {
            return invalid("max_iterations", "must be positive");
        }
        if !(self.convergence_epsilon > 0.0) {
            return invalid("convergence_epsilon", "must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MclOutcome {
    pub clustering: Clustering,
    /// False when `max_iterations` was reached first; the clustering is read
    /// off the last iterate anyway.
    pub converged: bool,
    pub iterations: usize,
}

/// Sparse columns: `cols[j]` lists `(row, value)` sorted by row.
type Columns = Vec<Vec<(usize, f64)>>;

pub fn mcl(g: &AffinityGraph, p: &MclParams) -> Result<MclOutcome, ClusteringError> {
    p.validate()?;
    if g.is_empty() {
        return Err(ClusteringError::EmptyGraph);
    }
    let mut m: Columns = (0..g.len())
        .map(|j| {
            let mut col: Vec<(usize, f64)> = g.adjacency[j].clone();
            let pos = col.partition_point(|&(i, _)| i < j);
            col.insert(pos, (j, 1.0));
            normalize(&mut col);
            col
        })
        .collect();

    let mut converged = false;
    let mut iterations = 0;
    while iterations < p.max_iterations {
        iterations += 1;
        let next = iterate(&m, p);
        let change = max_change(&m, &next);
        m = next;
        if change < p.convergence_epsilon {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("mcl did not converge within {} iterations", p.max_iterations);
    }
    Ok(MclOutcome {
        clustering: read_clusters(g, &m),
        converged,
        iterations,
    })
}

fn iterate(m: &Columns, p: &MclParams) -> Columns {
    let n = m.len();
    let columns: Vec<usize> = (0..n).collect();
    crate::par::map_collect(&columns, |&j| {
        let mut col = m[j].clone();
        let mut acc = vec![0.0f64; n];
        let mut touched: Vec<usize> = Vec::new();
        for _ in 1..p.expansion {
            for &(k, b) in &col {
                for &(i, a) in &m[k] {
                    if acc[i] == 0.0 {
                        touched.push(i);
                    }
                    acc[i] += a * b;
                }
            }
            touched.sort_unstable();
            col = touched.iter().map(|&i| (i, std::mem::take(&mut acc[i]))).collect();
            touched.clear();
        }
        for (_, v) in &mut col {
            *v = v.powf(p.inflation);
        }
        normalize(&mut col);
        col.retain(|&(_, v)| v >= p.prune_threshold);
        normalize(&mut col);
        col
    })
}

fn normalize(col: &mut [(usize, f64)]) {
    let sum: f64 = col.iter().map(|&(_, v)| v).sum();
    if sum > 0.0 {
        for (_, v) in col {
            *v /= sum;
        }
    }
}

fn max_change(a: &Columns, b: &Columns) -> f64 {
    let mut worst = 0.0f64;
    for (ca, cb) in a.iter().zip(b) {
        let (mut i, mut j) = (0, 0);
        while i < ca.len() || j < cb.len() {
            let diff = match (ca.get(i), cb.get(j)) {
                (Some(&(ra, va)), Some(&(rb, vb))) if ra == rb => {
                    i += 1;
                    j += 1;
                    (va - vb).abs()
                }
                (Some(&(ra, va)), Some(&(rb, _))) if ra < rb => {
                    i += 1;
                    va
                }
                (Some(&(_, va)), None) => {
                    i += 1;
                    va
                }
                (_, Some(&(_, vb))) => {
                    j += 1;
                    vb
                }
                (None, None) => unreachable!(),
            };
            worst = worst.max(diff);
        }
    }
    worst
}

/// Clusters are the row supports of attractors (nodes with positive
/// diagonal). A node in several supports goes to the largest one, ties to
/// the support with the lexicographically smallest member list.
fn read_clusters(g: &AffinityGraph, m: &Columns) -> Clustering {
    let n = m.len();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, col) in m.iter().enumerate() {
        for &(i, v) in col {
            if v > 0.0 {
                rows[i].push(j);
            }
        }
    }
    let mut supports: Vec<Vec<usize>> = (0..n).filter(|&i| rows[i].binary_search(&i).is_ok()).map(|i| rows[i].clone()).collect();
    supports.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    supports.dedup();
    let mut owner = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); supports.len()];
    for (s, members) in supports.iter().enumerate() {
        for &v in members {
            if owner[v] == usize::MAX {
                owner[v] = s;
                groups[s].push(v);
            }
        }
    }
    Clustering::from_groups(&g.node_ids, groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("n{i:02}")).collect()
    }

    fn clique_edges(nodes: std::ops::Range<usize>) -> Vec<(usize, usize)> {
        let v: Vec<usize> = nodes.collect();
        let mut out = Vec::new();
        for (a, &i) in v.iter().enumerate() {
            for &j in &v[a + 1..] {
                out.push((i, j));
            }
        }
        out
    }

    fn sizes(c: &Clustering) -> Vec<usize> {
        let mut s: Vec<usize> = c.clusters.iter().map(Vec::len).collect();
        s.sort_unstable();
        s
    }

    /// Plain dense iteration in f64 with no pruning, run to a tight fixpoint.
    fn dense_reference(n: usize, edges: &[(usize, usize)], e: u32, r: f64) -> Vec<Vec<usize>> {
        let mut m = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            m[i][i] = 1.0;
        }
        for &(i, j) in edges {
            m[i][j] = 1.0;
            m[j][i] = 1.0;
        }
        let norm = |m: &mut Vec<Vec<f64>>| {
            for j in 0..n {
                let s: f64 = (0..n).map(|i| m[i][j]).sum();
                for row in m.iter_mut() {
                    row[j] /= s;
                }
            }
        };
        norm(&mut m);
        for _ in 0..1000 {
            let mut p = m.clone();
            for _ in 1..e {
                let mut q = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for k in 0..n {
                        for j in 0..n {
                            q[i][j] += p[i][k] * m[k][j];
                        }
                    }
                }
                p = q;
            }
            for row in p.iter_mut() {
                for v in row.iter_mut() {
                    *v = v.powf(r);
                }
            }
            norm(&mut p);
            let delta = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (p[i][j] - m[i][j]).abs()).fold(0.0, f64::max);
            m = p;
            if delta < 1e-14 {
                break;
            }
        }
        let mut clusters: Vec<Vec<usize>> = (0..n)
            .filter(|&i| m[i][i] > 1e-9)
            .map(|i| (0..n).filter(|&j| m[i][j] > 1e-9).collect())
            .collect();
        clusters.sort();
        clusters.dedup();
        clusters
    }

    #[test]
    fn disjoint_triangles() {
        let mut edges = clique_edges(0..3);
        edges.extend(clique_edges(3..6));
        let out = mcl(&AffinityGraph::from_edges(ids(6), &edges), &MclParams::default()).unwrap();
        assert!(out.converged);
        assert_eq!(sizes(&out.clustering), [3, 3]);
    }

    #[test]
    fn complete_graph_is_one_cluster() {
        let out = mcl(&AffinityGraph::from_edges(ids(5), &clique_edges(0..5)), &MclParams::default()).unwrap();
        assert_eq!(out.clustering.clusters, vec![ids(5)]);
    }

    #[test]
    fn barbell_matches_dense_reference() {
        let mut edges = clique_edges(0..5);
        edges.extend(clique_edges(5..10));
        edges.push((4, 5));
        let reference = dense_reference(10, &edges, 2, 2.0);
        assert_eq!(reference, vec![(0..5).collect::<Vec<_>>(), (5..10).collect()]);
        let out = mcl(&AffinityGraph::from_edges(ids(10), &edges), &MclParams::default()).unwrap();
        let got: Vec<Vec<usize>> = out
            .clustering
            .clusters
            .iter()
            .map(|c| c.iter().map(|id| id[1..].parse().unwrap()).collect())
            .collect();
        assert_eq!(got, reference);
    }

    #[test]
    fn isolated_nodes_are_noise() {
        let out = mcl(&AffinityGraph::from_edges(ids(3), &[(0, 1)]), &MclParams::default()).unwrap();
        assert_eq!(out.clustering.clusters, vec![ids(2)]);
        assert_eq!(out.clustering.noise, vec!["n02".to_string()]);
    }

    #[test]
    fn columns_stay_stochastic() {
        let mut edges = clique_edges(0..4);
        edges.extend([(3, 4), (4, 5), (5, 6), (6, 4)]);
        let g = AffinityGraph::from_edges(ids(7), &edges);
        let p = MclParams::default();
        let mut m: Columns = (0..7)
            .map(|j| {
                let mut c = g.adjacency[j].clone();
                c.push((j, 1.0));
                c.sort_by_key(|&(i, _)| i);
                normalize(&mut c);
                c
            })
            .collect();
        for _ in 0..10 {
            m = iterate(&m, &p);
            for col in &m {
                let s: f64 = col.iter().map(|&(_, v)| v).sum();
                assert!((s - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn non_convergence_is_flagged() {
        let mut edges = clique_edges(0..5);
        edges.extend(clique_edges(5..10));
        edges.push((4, 5));
        let p = MclParams {
            max_iterations: 1,
            ..MclParams::default()
        };
        let out = mcl(&AffinityGraph::from_edges(ids(10), &edges), &p).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn parameters_are_validated() {
        let g = AffinityGraph::from_edges(ids(2), &[(0, 1)]);
        let bad = MclParams {
            inflation: 1.0,
            ..MclParams::default()
        };
        assert!(matches!(mcl(&g, &bad), Err(ClusteringError::InvalidParameter { name: "inflation", .. })));
        let empty = AffinityGraph::from_edges(vec![], &[]);
        assert_eq!(mcl(&empty, &MclParams::default()), Err(ClusteringError::EmptyGraph));
    }
}
