use super::{Clustering, ClusteringError};
use crate::similarity::DistanceMatrix;

/// Density clustering on precomputed distances. A point's neighbourhood
/// includes itself, so `min_pts = 2` makes any point with one neighbour
/// within `eps` a core point. Points are scanned in matrix order and a
/// border point joins the first cluster that reaches it.
pub fn dbscan(d: &DistanceMatrix, eps: u32, min_pts: usize) -> Result<Clustering, ClusteringError> {
    if min_pts == 0 {
        return Err(ClusteringError::InvalidParameter {
            name: "min_pts",
            reason: "must be positive".into(),
        });
    }
    let n = d.len();
    let neighbourhood = |i: usize| (0..n).filter(move |&j| d.get(i, j) <= eps);
    let core: Vec<bool> = (0..n).map(|i| neighbourhood(i).count() >= min_pts).collect();
    let mut label = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX || !core[start] {
            continue;
        }
        let id = groups.len();
        let mut members = vec![start];
        label[start] = id;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            if !core[p] {
                continue;
            }
            for q in neighbourhood(p) {
                if label[q] == usize::MAX {
                    label[q] = id;
                    members.push(q);
                    queue.push_back(q);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    Ok(Clustering::from_groups(d.package_ids(), groups))
}
