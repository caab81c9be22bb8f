//! Pairwise comparison of clusterings.
//!
//! Every unordered pair of packages is classified by whether the automated
//! and the reference clustering put it in the same cluster. Noise packages
//! count as singleton clusters.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::Clustering;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvaluationError {
    #[error(
        "clusterings cover different packages: only automated {only_auto:?}, only reference {only_reference:?}"
    )]
    UniverseMismatch {
        only_auto: Vec<String>,
        only_reference: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseConfusion {
    /// Same cluster in both.
    pub tp: u64,
    /// Different clusters in both.
    pub tn: u64,
    /// Same cluster only in the automated clustering.
    pub fp: u64,
    /// Same cluster only in the reference.
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl PairwiseConfusion {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: PairwiseConfusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    /// Cluster sizes, largest first. Noise is not included.
    pub sizes: Vec<usize>,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
}

/// Counts agreeing and disagreeing pairs between two clusterings of the same
/// packages.
pub fn pairwise_confusion(auto: &Clustering, reference: &Clustering) -> Result<PairwiseConfusion, EvaluationError> {
    let ua = auto.universe();
    let ur = reference.universe();
    if ua != ur {
        return Err(EvaluationError::UniverseMismatch {
            only_auto: ua.difference(&ur).map(|s| s.to_string()).collect(),
            only_reference: ur.difference(&ua).map(|s| s.to_string()).collect(),
        });
    }
    let a = labels(auto);
    let r = labels(reference);
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for id in &ua {
        let (x, y) = (a[id], r[id]);
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let pairs = |k: u64| k * k.saturating_sub(1) / 2;
    let tp: u64 = cells.values().map(|&k| pairs(k)).sum();
    let same_auto: u64 = rows.values().map(|&k| pairs(k)).sum();
    let same_reference: u64 = cols.values().map(|&k| pairs(k)).sum();
    let total = pairs(ua.len() as u64);
    Ok(PairwiseConfusion {
        tp,
        fp: same_auto - tp,
        fn_: same_reference - tp,
        tn: total + tp - same_auto - same_reference,
    })
}

/// Cluster label per id, noise getting fresh singleton labels.
fn labels(c: &Clustering) -> HashMap<&str, usize> {
    let mut out = c.assignment();
    for (k, id) in c.noise.iter().enumerate() {
        out.insert(id.as_str(), c.clusters.len() + k);
    }
    out
}

/// Precision is 1 when nothing was predicted together, recall is 1 when the
/// reference puts nothing together, F1 is 0 when both are 0.
pub fn precision_recall_f1(c: PairwiseConfusion) -> MetricsReport {
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MetricsReport {
        precision,
        recall,
        f1,
        confusion: c,
    }
}

pub fn evaluate(auto: &Clustering, reference: &Clustering) -> Result<MetricsReport, EvaluationError> {
    pairwise_confusion(auto, reference).map(precision_recall_f1)
}

pub fn cluster_size_stats(c: &Clustering) -> SizeStats {
    let mut sizes: Vec<usize> = c.clusters.iter().map(Vec::len).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    if sizes.is_empty() {
        return SizeStats {
            sizes,
            mean: 0.0,
            variance: 0.0,
        };
    }
    let n = sizes.len() as f64;
    let mean = sizes.iter().sum::<usize>() as f64 / n;
    let variance = sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / n;
    SizeStats { sizes, mean, variance }
}

/// Adds ids of `universe` missing from `c` as noise.
pub fn with_universe<'a>(c: &Clustering, universe: impl IntoIterator<Item = &'a str>) -> Clustering {
    let have = c.universe();
    let extra: BTreeSet<&str> = universe.into_iter().filter(|id| !have.contains(id)).collect();
    let mut noise = c.noise.clone();
    noise.extend(extra.into_iter().map(str::to_string));
    Clustering::new(c.clusters.clone(), noise).expect("added ids are new")
}

/// One row of an evaluation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub algorithm: String,
    pub params: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub clusters: usize,
    pub noise: usize,
}

impl EvaluationRow {
    pub fn new(algorithm: &str, params: &str, auto: &Clustering, report: &MetricsReport) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            params: params.to_string(),
            precision: report.precision,
            recall: report.recall,
            f1: report.f1,
            clusters: auto.clusters.len(),
            noise: auto.noise.len(),
        }
    }
}

/// Sorts rows by F1, best first, and renders a fixed-width table.
pub fn render_table(rows: &mut [EvaluationRow]) -> String {
    rows.sort_by(|a, b| b.f1.total_cmp(&a.f1).then_with(|| a.algorithm.cmp(&b.algorithm)));
    let pw = rows.iter().map(|r| r.params.len()).max().unwrap_or(0).max("params".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<pw$} {:>9} {:>9} {:>9} {:>8} {:>6}",
        "algorithm", "params", "precision", "recall", "f1", "clusters", "noise"
    );
    for r in rows.iter() {
        let _ = writeln!(
            out,
            "{:<10} {:<pw$} {:>9.4} {:>9.4} {:>9.4} {:>8} {:>6}",
            r.algorithm, r.params, r.precision, r.recall, r.f1, r.clusters, r.noise
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(clusters: &[&[&str]], noise: &[&str]) -> Clustering {
        Clustering::new(
            clusters.iter().map(|m| m.iter().map(|s| s.to_string()).collect()).collect(),
            noise.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_clusterings() {
        let a = c(&[&["a", "b"], &["c", "d", "e"]], &["f"]);
        let conf = pairwise_confusion(&a, &a).unwrap();
        assert_eq!((conf.fp, conf.fn_, conf.tp), (0, 0, 4));
        assert_eq!(conf.total(), 15);
        let m = precision_recall_f1(conf);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn merge_of_reference_clusters() {
        let reference = c(&[&["A", "B"]], &["C"]);
        let auto = c(&[&["A", "B", "C"]], &[]);
        let conf = pairwise_confusion(&auto, &reference).unwrap();
        assert_eq!(conf, PairwiseConfusion { tp: 1, tn: 0, fp: 2, fn_: 0 });
        let m = precision_recall_f1(conf);
        assert!((m.precision - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_singletons_against_one_cluster() {
        let reference = c(&[&["a", "b", "c", "d"]], &[]);
        let auto = c(&[], &["a", "b", "c", "d"]);
        let conf = pairwise_confusion(&auto, &reference).unwrap();
        assert_eq!(conf, PairwiseConfusion { tp: 0, tn: 0, fp: 0, fn_: 6 });
        let m = precision_recall_f1(conf);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 0.0, 0.0));
    }

    #[test]
    fn mismatched_universes_are_reported() {
        let err = pairwise_confusion(&c(&[&["a", "b"]], &[]), &c(&[&["a", "c"]], &[])).unwrap_err();
        assert_eq!(
            err,
            EvaluationError::UniverseMismatch {
                only_auto: vec!["b".into()],
                only_reference: vec!["c".into()],
            }
        );
    }

    #[test]
    fn published_mcl_row_is_consistent() {
        let (p, r): (f64, f64) = (0.9747, 0.9958);
        assert!((2.0 * p * r / (p + r) - 0.9851).abs() < 5e-5);
    }

    #[test]
    fn size_statistics() {
        assert_eq!(cluster_size_stats(&c(&[&["a", "b"], &["c", "d"]], &["e"])).variance, 0.0);
        assert_eq!(cluster_size_stats(&c(&[&["a"], &["b", "c", "d"]], &[])).variance, 1.0);
        let ids: Vec<String> = (0..97).map(|i| format!("p{i:02}")).collect();
        let mut clusters = Vec::new();
        let mut start = 0;
        for size in [38, 36, 14, 3, 2, 2, 2] {
            clusters.push(ids[start..start + size].to_vec());
            start += size;
        }
        let stats = cluster_size_stats(&Clustering::new(clusters, vec![]).unwrap());
        assert_eq!(stats.sizes, [38, 36, 14, 3, 2, 2, 2]);
        assert!((stats.variance - 230.4082).abs() < 5e-5);
    }

    #[test]
    fn missing_ids_become_noise() {
        let a = with_universe(&c(&[&["a", "b"]], &[]), ["a", "b", "z"]);
        assert_eq!(a.noise, ["z"]);
    }

    #[test]
    fn table_is_sorted_by_f1() {
        let auto = c(&[&["a", "b"]], &[]);
        let good = EvaluationRow::new("mcl", "e=2 r=2", &auto, &precision_recall_f1(PairwiseConfusion { tp: 1, ..Default::default() }));
        let bad = EvaluationRow::new("ccomp", "", &auto, &precision_recall_f1(PairwiseConfusion { fp: 1, ..Default::default() }));
        let text = render_table(&mut [bad, good]);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].starts_with("mcl"));
        assert!(lines[2].starts_with("ccomp"));
    }
}
