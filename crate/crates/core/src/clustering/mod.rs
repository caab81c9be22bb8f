//! Affinity graphs and package clusterings.
//!
//! All algorithms report clusters of at least two packages; packages left
//! alone are noise. Output is canonical: members sorted by id, clusters
//! sorted by their first member, so equal partitions compare equal.

mod dbscan;
mod graph;
mod mcl;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::similarity::DistanceMatrix;

pub use dbscan::dbscan;
pub use graph::{build_graph, connected_components, maximal_cliques, AffinityGraph, Weighting, DEFAULT_MAX_CLIQUES};
pub use mcl::{mcl, MclOutcome, MclParams};

#[derive(Debug, Error, PartialEq)]
pub enum ClusteringError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("more than {0} maximal cliques; raise the cap or lower tau")]
    TooManyCliques(usize),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("package {0} appears more than once")]
    DuplicateMember(String),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
}

/// A partition of package ids into clusters and noise.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<Vec<String>>,
    pub noise: Vec<String>,
}

impl Clustering {
    /// Canonicalizes and checks disjointness. Singleton clusters are kept as
    /// given; use [`Clustering::from_groups`] to demote them to noise.
    pub fn new(clusters: Vec<Vec<String>>, noise: Vec<String>) -> Result<Self, ClusteringError> {
        let mut seen = BTreeSet::new();
        for (i, c) in clusters.iter().enumerate() {
            if c.is_empty() {
                return Err(ClusteringError::EmptyCluster(i));
            }
        }
        for id in clusters.iter().flatten().chain(&noise) {
            if !seen.insert(id.as_str()) {
                return Err(ClusteringError::DuplicateMember(id.clone()));
            }
        }
        let mut clusters: Vec<Vec<String>> = clusters
            .into_iter()
            .map(|mut c| {
                c.sort();
                c
            })
            .collect();
        clusters.sort();
        let mut noise = noise;
        noise.sort();
        Ok(Self { clusters, noise })
    }

    /// Builds from groups of node indices into `ids`; groups of one become
    /// noise, as do ids in no group.
    pub(crate) fn from_groups(ids: &[String], groups: Vec<Vec<usize>>) -> Self {
        let mut covered = vec![false; ids.len()];
        let mut clusters = Vec::new();
        let mut noise = Vec::new();
        for g in groups {
            for &i in &g {
                debug_assert!(!covered[i], "groups must be disjoint");
                covered[i] = true;
            }
            if g.len() >= 2 {
                clusters.push(g.iter().map(|&i| ids[i].clone()).collect());
            } else {
                noise.extend(g.iter().map(|&i| ids[i].clone()));
            }
        }
        noise.extend(ids.iter().zip(&covered).filter(|(_, &c)| !c).map(|(id, _)| id.clone()));
        Self::new(clusters, noise).expect("groups over distinct ids are disjoint")
    }

    /// Clusters package ids by label; `None` labels are noise.
    pub fn from_labels<'a, I>(labels: I) -> Result<Self, ClusteringError>
    where
        I: IntoIterator<Item = (&'a str, Option<&'a str>)>,
    {
        let mut by_label: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        let mut noise = Vec::new();
        for (id, label) in labels {
            match label {
                Some(l) => by_label.entry(l).or_default().push(id.to_string()),
                None => noise.push(id.to_string()),
            }
        }
        Self::new(by_label.into_values().collect(), noise)
    }

    /// Every id, clustered or not, in sorted order.
    pub fn universe(&self) -> BTreeSet<&str> {
        self.clusters.iter().flatten().chain(&self.noise).map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum::<usize>() + self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the cluster holding each clustered id.
    pub fn assignment(&self) -> HashMap<&str, usize> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(c, members)| members.iter().map(move |id| (id.as_str(), c)))
            .collect()
    }

    /// Stable cluster identifiers, `cluster-000`, `cluster-001`, ...
    pub fn cluster_ids(&self) -> Vec<String> {
        (0..self.clusters.len()).map(|i| format!("cluster-{i:03}")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Mcl,
    Ccomp,
    Clique,
    Dbscan,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::Mcl, Self::Ccomp, Self::Clique, Self::Dbscan];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mcl => "mcl",
            Self::Ccomp => "ccomp",
            Self::Clique => "clique",
            Self::Dbscan => "dbscan",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown clustering algorithm {s:?}; expected mcl, ccomp, clique or dbscan"))
    }
}

/// One clustering configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ClusterSpec {
    Mcl {
        tau: u32,
        weighting: Weighting,
        #[serde(flatten)]
        params: MclParams,
    },
    Ccomp {
        tau: u32,
    },
    Clique {
        tau: u32,
        max_cliques: usize,
    },
    Dbscan {
        eps: u32,
        min_pts: usize,
    },
}

impl ClusterSpec {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Self::Mcl { .. } => Algorithm::Mcl,
            Self::Ccomp { .. } => Algorithm::Ccomp,
            Self::Clique { .. } => Algorithm::Clique,
            Self::Dbscan { .. } => Algorithm::Dbscan,
        }
    }

    /// Parameters without the algorithm tag, as a JSON object.
    pub fn params(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut value = match serde_json::to_value(self).expect("spec serializes") {
            serde_json::Value::Object(m) => m,
            _ => unreachable!("tagged enum serializes to an object"),
        };
        value.remove("algorithm");
        value
    }

    /// Short human-readable form, e.g. `mcl tau=1 e=2 r=2`.
    pub fn describe(&self) -> String {
        match self {
            Self::Mcl { tau, weighting, params } => format!(
                "mcl tau={tau} e={} r={}{}",
                params.expansion,
                params.inflation,
                if *weighting == Weighting::Inverse { " inverse" } else { "" }
            ),
            Self::Ccomp { tau } => format!("ccomp tau={tau}"),
            Self::Clique { tau, .. } => format!("clique tau={tau}"),
            Self::Dbscan { eps, min_pts } => format!("dbscan eps={eps} min_pts={min_pts}"),
        }
    }

    /// Clusters the packages of `matrix`.
    pub fn run(&self, matrix: &DistanceMatrix) -> Result<ClusteringArtifact, ClusteringError> {
        let (clustering, converged) = match self {
            Self::Mcl { tau, weighting, params } => {
                let out = mcl(&build_graph(matrix, *tau, *weighting), params)?;
                (out.clustering, Some(out.converged))
            }
            Self::Ccomp { tau } => (connected_components(&build_graph(matrix, *tau, Weighting::Binary)), None),
            Self::Clique { tau, max_cliques } => (
                maximal_cliques(&build_graph(matrix, *tau, Weighting::Binary), *max_cliques)?,
                None,
            ),
            Self::Dbscan { eps, min_pts } => (dbscan(matrix, *eps, *min_pts)?, None),
        };
        Ok(ClusteringArtifact {
            algorithm: self.algorithm(),
            params: self.params(),
            converged,
            clusters: clustering.clusters,
            noise: clustering.noise,
        })
    }
}

/// The `clusters.json` document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringArtifact {
    pub algorithm: Algorithm,
    pub params: serde_json::Map<String, serde_json::Value>,
    /// MCL only: whether the iteration converged before the limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    pub clusters: Vec<Vec<String>>,
    pub noise: Vec<String>,
}

impl ClusteringArtifact {
    /// The clustering, re-validated.
    pub fn clustering(&self) -> Result<Clustering, ClusteringError> {
        Clustering::new(self.clusters.clone(), self.noise.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn clustering_is_canonical() {
        let a = Clustering::new(vec![s(&["d", "c"]), s(&["b", "a"])], s(&["z", "e"])).unwrap();
        let b = Clustering::new(vec![s(&["a", "b"]), s(&["c", "d"])], s(&["e", "z"])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.clusters[0], s(&["a", "b"]));
        assert_eq!(a.len(), 6);
    }

    #[test]
    fn overlapping_clusters_are_rejected() {
        assert_eq!(
            Clustering::new(vec![s(&["a", "b"]), s(&["b", "c"])], vec![]),
            Err(ClusteringError::DuplicateMember("b".into()))
        );
        assert!(Clustering::new(vec![vec![]], vec![]).is_err());
    }

    #[test]
    fn from_groups_demotes_singletons() {
        let ids = s(&["a", "b", "c", "d"]);
        let c = Clustering::from_groups(&ids, vec![vec![0, 2], vec![1]]);
        assert_eq!(c.clusters, vec![s(&["a", "c"])]);
        assert_eq!(c.noise, s(&["b", "d"]));
    }

    #[test]
    fn artifact_round_trip() {
        let m = DistanceMatrix::from_rows(s(&["a", "b", "c"]), &[vec![0, 1, 9], vec![1, 0, 9], vec![9, 9, 0]]);
        let spec = ClusterSpec::Mcl {
            tau: 1,
            weighting: Weighting::Binary,
            params: MclParams::default(),
        };
        let art = spec.run(&m).unwrap();
        assert_eq!(art.clusters, vec![s(&["a", "b"])]);
        assert_eq!(art.noise, s(&["c"]));
        let json = serde_json::to_string(&art).unwrap();
        assert!(json.starts_with(r#"{"algorithm":"mcl","params":{"convergence_epsilon":1e-8,"expansion":2,"#));
        assert!(json.contains(r#""tau":1,"weighting":"binary"}"#));
        let back: ClusteringArtifact = serde_json::from_str(&json).unwrap();
        assert_eq!(back, art);
        let spec_back: ClusterSpec = serde_json::from_value(serde_json::Value::Object({
            let mut p = art.params.clone();
            p.insert("algorithm".into(), "mcl".into());
            p
        }))
        .unwrap();
        assert_eq!(spec_back, spec);
    }

    #[test]
    fn all_algorithms_agree_on_separated_blocks() {
        let ids = s(&["a", "b", "c", "x", "y"]);
        let mut rows = vec![vec![50; 5]; 5];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 0;
        }
        for (i, j) in [(0, 1), (0, 2), (1, 2), (3, 4)] {
            rows[i][j] = 1;
            rows[j][i] = 1;
        }
        let m = DistanceMatrix::from_rows(ids, &rows);
        let specs = [
            ClusterSpec::Mcl { tau: 1, weighting: Weighting::Binary, params: MclParams::default() },
            ClusterSpec::Ccomp { tau: 1 },
            ClusterSpec::Clique { tau: 1, max_cliques: 100 },
            ClusterSpec::Dbscan { eps: 1, min_pts: 2 },
        ];
        for spec in specs {
            let c = spec.run(&m).unwrap().clustering().unwrap();
            assert_eq!(c.clusters, vec![s(&["a", "b", "c"]), s(&["x", "y"])], "{}", spec.describe());
        }
    }
}
