//! Optimal one-dimensional K-means over I/O phase lengths, elbow selection of
//! the cluster count and merging of freshly clustered batches into existing
//! clusters.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ClusterError;
use crate::model::AppId;

/// Default upper bound on the number of clusters.
pub const DEFAULT_MAX_CLUSTERS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClusterId(pub u32);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cluster{}", self.0)
    }
}

/// Hands out fresh cluster identifiers.
#[derive(Debug, Clone, Default)]
pub struct IdGen {
    next: u32,
}

impl IdGen {
    pub fn next_id(&mut self) -> ClusterId {
        let id = ClusterId(self.next);
        self.next += 1;
        id
    }
}

/// An application as seen by the clustering code: its identifier and the
/// length of its I/O phase in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub app: AppId,
    pub length: f64,
}

/// A non-empty group of applications with similar I/O lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: ClusterId,
    members: Vec<Member>,
}

impl Cluster {
    /// Returns `None` for an empty member list.
    pub fn new(id: ClusterId, members: Vec<Member>) -> Option<Self> {
        if members.is_empty() {
            None
        } else {
            Some(Self { id, members })
        }
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Mean member length.
    pub fn centroid(&self) -> f64 {
        if self.members.is_empty() {
            return 0.0;
        }
        self.members.iter().map(|m| m.length).sum::<f64>() / self.members.len() as f64
    }

    /// The cluster's discretization quantum: the mean I/O time of its members.
    /// Member lengths are I/O times, so this coincides with the centroid.
    pub fn time_unit(&self) -> f64 {
        self.centroid()
    }

    pub fn min_length(&self) -> f64 {
        self.members.iter().map(|m| m.length).fold(f64::INFINITY, f64::min)
    }

    pub fn max_length(&self) -> f64 {
        self.members
            .iter()
            .map(|m| m.length)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, app: AppId) -> bool {
        self.members.iter().any(|m| m.app == app)
    }

    pub fn push(&mut self, member: Member) {
        self.members.push(member);
    }

    /// Removes an application. The cluster may become empty; callers delete
    /// empty clusters.
    pub fn remove(&mut self, app: AppId) -> Option<Member> {
        let pos = self.members.iter().position(|m| m.app == app)?;
        Some(self.members.remove(pos))
    }

    pub fn absorb(&mut self, other: Cluster) {
        self.members.extend(other.members);
    }

    /// Splits at the largest gap between consecutive sorted member lengths.
    /// Both halves get fresh identifiers. Returns `None` when every member has
    /// the same length.
    pub fn split_at_largest_gap(&self, ids: &mut IdGen) -> Option<(Cluster, Cluster)> {
        let mut sorted = self.members.clone();
        sorted.sort_by(|a, b| a.length.total_cmp(&b.length));
        let mut best = 0;
        let mut best_gap = 0.0;
        for i in 0..sorted.len().saturating_sub(1) {
            let gap = sorted[i + 1].length - sorted[i].length;
            if gap > best_gap {
                best_gap = gap;
                best = i;
            }
        }
        if best_gap <= 0.0 {
            return None;
        }
        let upper = sorted.split_off(best + 1);
        Some((
            Cluster {
                id: ids.next_id(),
                members: sorted,
            },
            Cluster {
                id: ids.next_id(),
                members: upper,
            },
        ))
    }
}

/// Prefix sums of values and squared values over sorted lengths, for O(1)
/// within-range sums of squared deviations.
///
/// Values are shifted by their mean before summing, which does not change any
/// deviation but keeps the sums small.
#[derive(Debug, Clone)]
pub struct PrefixSums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl PrefixSums {
    pub fn new(sorted: &[f64]) -> Self {
        let shift = if sorted.is_empty() {
            0.0
        } else {
            sorted.iter().sum::<f64>() / sorted.len() as f64
        };
        let mut sum = Vec::with_capacity(sorted.len() + 1);
        let mut sum_sq = Vec::with_capacity(sorted.len() + 1);
        sum.push(0.0);
        sum_sq.push(0.0);
        for &x in sorted {
            let v = x - shift;
            sum.push(sum.last().unwrap() + v);
            sum_sq.push(sum_sq.last().unwrap() + v * v);
        }
        Self { sum, sum_sq }
    }

    pub fn len(&self) -> usize {
        self.sum.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of squared distances to the mean over the 1-based inclusive range
    /// `j..=i`.
    pub fn within_ss(&self, j: usize, i: usize) -> Result<f64, ClusterError> {
        let n = self.len();
        if j == 0 || j > i || i > n {
            return Err(ClusterError::RangeOutOfBounds { j, i, n });
        }
        Ok(self.range_ss(j, i))
    }

    fn range_ss(&self, j: usize, i: usize) -> f64 {
        let count = (i - j + 1) as f64;
        let s = self.sum[i] - self.sum[j - 1];
        let sq = self.sum_sq[i] - self.sum_sq[j - 1];
        (sq - s * s / count).max(0.0)
    }
}

/// The dynamic-programming tables: `cost[i][m]` is the minimum wss of the
/// first `i` sorted lengths in `m` clusters and `split[i][m]` the 1-based
/// index of the first element of the last cluster in that optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct DpTables {
    pub cost: Vec<Vec<f64>>,
    pub split: Vec<Vec<usize>>,
}

/// The optimal partition for one cluster count.
#[derive(Debug, Clone, PartialEq)]
pub struct KPartition {
    pub wss: f64,
    /// 0-based start index (into the sorted lengths) of every cluster.
    pub starts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// Input lengths in non-descending order.
    pub sorted: Vec<f64>,
    /// `order[r]` is the input index of the `r`-th smallest length.
    pub order: Vec<usize>,
    pub tables: DpTables,
    /// Optimal partitions for `K = 1..=k_max`, at index `K - 1`.
    pub per_k: Vec<KPartition>,
    pub chosen_k: usize,
}

impl ClusteringResult {
    pub fn wss_curve(&self) -> Vec<f64> {
        self.per_k.iter().map(|p| p.wss).collect()
    }

    /// Cluster label of every element of the sorted input.
    pub fn sorted_labels(&self, k: usize) -> Vec<usize> {
        let starts = &self.per_k[k - 1].starts;
        let mut labels = vec![0; self.sorted.len()];
        for (c, &start) in starts.iter().enumerate() {
            let end = starts.get(c + 1).copied().unwrap_or(self.sorted.len());
            labels[start..end].iter_mut().for_each(|l| *l = c);
        }
        labels
    }

    /// Input indices of each cluster for `k` clusters, clusters in ascending
    /// length order.
    pub fn groups(&self, k: usize) -> Vec<Vec<usize>> {
        let labels = self.sorted_labels(k);
        let mut groups = vec![Vec::new(); k];
        for (rank, &label) in labels.iter().enumerate() {
            groups[label].push(self.order[rank]);
        }
        groups
    }
}

/// Optimal 1-D K-means for every `K` up to `k_max` in `O(n² K)` time.
/// Ties in the recurrence keep the smallest split index.
pub fn kmeans_1d_dp(lengths: &[f64], k_max: usize) -> Result<ClusteringResult, ClusterError> {
    let n = lengths.len();
    if n == 0 {
        return Err(ClusterError::EmptyInput);
    }
    if let Some(&bad) = lengths.iter().find(|x| !x.is_finite()) {
        return Err(ClusterError::NonFinite(bad));
    }
    if k_max == 0 || k_max > n {
        return Err(ClusterError::InvalidClusterCount { k: k_max, n });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lengths[a].total_cmp(&lengths[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| lengths[i]).collect();
    let prefix = PrefixSums::new(&sorted);

    let mut cost = vec![vec![0.0; k_max + 1]; n + 1];
    let mut split = vec![vec![0usize; k_max + 1]; n + 1];
    for i in 1..=n {
        for m in 1..=k_max.min(i) {
            let mut best = f64::INFINITY;
            let mut best_j = m;
            // column 0 is zero-filled but only D[0][0] is a real clustering,
            // so a single cluster must start at the first element
            let last_j = if m == 1 { 1 } else { i };
            for j in m..=last_j {
                let candidate = cost[j - 1][m - 1] + prefix.range_ss(j, i);
                if candidate < best {
                    best = candidate;
                    best_j = j;
                }
            }
            cost[i][m] = best;
            split[i][m] = best_j;
        }
        // more clusters than elements: each element alone, zero cost
    }

    let per_k = (1..=k_max)
        .map(|k| {
            let mut starts = Vec::with_capacity(k);
            let mut i = n;
            for m in (1..=k).rev() {
                let j = split[i][m];
                starts.push(j - 1);
                i = j - 1;
            }
            starts.reverse();
            KPartition {
                wss: cost[n][k],
                starts,
            }
        })
        .collect::<Vec<_>>();
    let wss: Vec<f64> = per_k.iter().map(|p| p.wss).collect();
    let chosen_k = elbow_select(&wss)?;

    Ok(ClusteringResult {
        sorted,
        order,
        tables: DpTables { cost, split },
        per_k,
        chosen_k,
    })
}

/// Picks `K` at the largest second difference of the wss curve
/// (`wss[0]` is `K = 1`). Ties go to the smaller `K`; a flat curve gives 1.
pub fn elbow_select(wss: &[f64]) -> Result<usize, ClusterError> {
    match wss.len() {
        0 => Err(ClusterError::EmptyCurve),
        1 => Ok(1),
        2 => Ok(if wss[1] < wss[0] { 2 } else { 1 }),
        len => {
            let drop = wss[0] - wss[len - 1];
            if drop <= 1e-12 * wss[0].abs().max(1.0) {
                return Ok(1);
            }
            let mut best_k = 2;
            let mut best = f64::NEG_INFINITY;
            for k in 2..len {
                let second = (wss[k - 2] - wss[k - 1]) - (wss[k - 1] - wss[k]);
                if second > best {
                    best = second;
                    best_k = k;
                }
            }
            Ok(best_k)
        }
    }
}

/// Clusters a batch of applications by I/O length with the elbow-selected
/// cluster count (at most `max_clusters`). Clusters come out in ascending
/// length order with fresh identifiers.
pub fn cluster_batch(
    members: &[Member],
    max_clusters: usize,
    ids: &mut IdGen,
) -> Result<Vec<Cluster>, ClusterError> {
    let lengths: Vec<f64> = members.iter().map(|m| m.length).collect();
    let k_max = max_clusters.clamp(1, lengths.len().max(1));
    let result = kmeans_1d_dp(&lengths, k_max)?;
    Ok(result
        .groups(result.chosen_k)
        .into_iter()
        .map(|group| Cluster {
            id: ids.next_id(),
            members: group.into_iter().map(|i| members[i]).collect(),
        })
        .collect())
}

fn closest(target: f64, centroids: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in centroids.iter().enumerate() {
        if (c - target).abs() < (centroids[best] - target).abs() {
            best = i;
        }
    }
    best
}

/// Merges freshly clustered `new` clusters into `existing` ones. The smaller
/// side is folded into the closest cluster (by centroid) of the larger side;
/// with equal counts the existing clusters fold into the new ones. Merged
/// clusters keep the receiving side's identifiers.
pub fn merge_clusters(new: Vec<Cluster>, existing: Vec<Cluster>) -> Vec<Cluster> {
    if new.is_empty() {
        return existing;
    }
    if existing.is_empty() {
        return new;
    }
    let (donors, mut receivers) = if new.len() < existing.len() {
        (new, existing)
    } else {
        (existing, new)
    };
    let centroids: Vec<f64> = receivers.iter().map(Cluster::centroid).collect();
    for donor in donors {
        let target = closest(donor.centroid(), &centroids);
        receivers[target].absorb(donor);
    }
    receivers
}

/// How an arriving group of applications is absorbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchAction {
    /// Insert each application into its closest cluster.
    Insert,
    /// Cluster the group and merge the result into the existing clusters.
    ClusterAndMerge,
}

pub fn batch_policy(batch_size: usize, existing: &[Cluster]) -> BatchAction {
    if existing.is_empty() {
        return if batch_size <= 1 {
            BatchAction::Insert
        } else {
            BatchAction::ClusterAndMerge
        };
    }
    let mean = existing.iter().map(Cluster::len).sum::<usize>() as f64 / existing.len() as f64;
    if batch_size as f64 <= mean {
        BatchAction::Insert
    } else {
        BatchAction::ClusterAndMerge
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn members(lengths: &[f64]) -> Vec<Member> {
        lengths
            .iter()
            .enumerate()
            .map(|(i, &length)| Member {
                app: AppId(i as u32),
                length,
            })
            .collect()
    }

    fn cluster(ids: &mut IdGen, lengths: &[f64], first_app: u32) -> Cluster {
        let ms = lengths
            .iter()
            .enumerate()
            .map(|(i, &length)| Member {
                app: AppId(first_app + i as u32),
                length,
            })
            .collect();
        Cluster::new(ids.next_id(), ms).unwrap()
    }

    #[test]
    fn within_ss_examples() {
        let p = PrefixSums::new(&[1.0, 2.0, 10.0, 11.0]);
        assert!((p.within_ss(1, 2).unwrap() - 0.5).abs() < 1e-12);
        assert!((p.within_ss(1, 4).unwrap() - 82.0).abs() < 1e-12);
        let single = PrefixSums::new(&[5.0]);
        assert_eq!(single.within_ss(1, 1).unwrap(), 0.0);
        assert!(p.within_ss(0, 1).is_err());
        assert!(p.within_ss(3, 2).is_err());
        assert!(p.within_ss(1, 5).is_err());
    }

    #[test]
    fn dp_examples() {
        let r = kmeans_1d_dp(&[1.0, 2.0, 10.0, 11.0], 2).unwrap();
        assert!((r.per_k[1].wss - 1.0).abs() < 1e-12);
        assert_eq!(r.groups(2), vec![vec![0, 1], vec![2, 3]]);
        assert!((r.per_k[0].wss - 82.0).abs() < 1e-12);
        let r = kmeans_1d_dp(&[5.0, 9.0], 2).unwrap();
        assert_eq!(r.per_k[1].wss, 0.0);
    }

    #[test]
    fn dp_tables_shape_and_first_column() {
        let xs = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let r = kmeans_1d_dp(&xs, 3).unwrap();
        assert_eq!(r.tables.cost.len(), xs.len() + 1);
        assert_eq!(r.tables.cost[0].len(), 4);
        let prefix = PrefixSums::new(&r.sorted);
        for i in 1..=xs.len() {
            assert!((r.tables.cost[i][1] - prefix.within_ss(1, i).unwrap()).abs() < 1e-9);
            for m in 1..3 {
                assert!(r.tables.cost[i][m + 1] <= r.tables.cost[i][m] + 1e-12);
            }
        }
    }

    #[test]
    fn dp_maps_back_to_input_order() {
        let r = kmeans_1d_dp(&[11.0, 1.0, 10.0, 2.0], 2).unwrap();
        assert_eq!(r.groups(2), vec![vec![1, 3], vec![2, 0]]);
    }

    #[test]
    fn dp_rejects_bad_input() {
        assert_eq!(kmeans_1d_dp(&[], 1), Err(ClusterError::EmptyInput));
        assert!(kmeans_1d_dp(&[1.0], 2).is_err());
        assert!(kmeans_1d_dp(&[1.0], 0).is_err());
        assert!(kmeans_1d_dp(&[f64::NAN], 1).is_err());
    }

    #[test]
    fn elbow_examples() {
        assert_eq!(elbow_select(&[82.0, 1.0, 0.5, 0.4]).unwrap(), 2);
        assert_eq!(elbow_select(&[0.0]).unwrap(), 1);
        assert_eq!(elbow_select(&[10.0, 10.0, 10.0]).unwrap(), 1);
        assert_eq!(elbow_select(&[10.0, 2.0]).unwrap(), 2);
        assert_eq!(elbow_select(&[10.0, 10.0]).unwrap(), 1);
        assert!(elbow_select(&[]).is_err());
    }

    #[test]
    fn merge_examples() {
        let mut ids = IdGen::default();
        let existing = vec![cluster(&mut ids, &[9.0, 11.0], 0), cluster(&mut ids, &[100.0], 10)];
        assert_eq!(merge_clusters(Vec::new(), existing.clone()), existing);

        let new = vec![cluster(&mut ids, &[15.0], 20)];
        let merged = merge_clusters(new, existing.clone());
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].id, existing[0].id);
        assert!(merged[0].contains(AppId(20)));
        assert!((merged[0].centroid() - 35.0 / 3.0).abs() < 1e-12);

        let new = vec![
            cluster(&mut ids, &[1.0], 30),
            cluster(&mut ids, &[12.0], 31),
            cluster(&mut ids, &[90.0], 32),
        ];
        let new_ids: Vec<_> = new.iter().map(|c| c.id).collect();
        let merged = merge_clusters(new, existing);
        assert_eq!(merged.len(), 3);
        assert_eq!(merged.iter().map(|c| c.id).collect::<Vec<_>>(), new_ids);
        assert!(merged[1].contains(AppId(0)) && merged[1].contains(AppId(1)));
        assert!(merged[2].contains(AppId(10)));
        assert_eq!(merged[0].len(), 1);
    }

    #[test]
    fn batch_policy_examples() {
        let mut ids = IdGen::default();
        let existing = vec![
            cluster(&mut ids, &[1.0; 4], 0),
            cluster(&mut ids, &[5.0; 6], 10),
        ];
        assert_eq!(batch_policy(2, &existing), BatchAction::Insert);
        assert_eq!(batch_policy(5, &existing), BatchAction::Insert);
        assert_eq!(batch_policy(8, &existing), BatchAction::ClusterAndMerge);
        assert_eq!(batch_policy(1, &[]), BatchAction::Insert);
        assert_eq!(batch_policy(3, &[]), BatchAction::ClusterAndMerge);
    }

    #[test]
    fn split_examples() {
        let mut ids = IdGen::default();
        let c = cluster(&mut ids, &[10.0, 20.0, 12.0], 0);
        let (lo, hi) = c.split_at_largest_gap(&mut ids).unwrap();
        assert_eq!(lo.members().iter().map(|m| m.length).collect::<Vec<_>>(), vec![10.0, 12.0]);
        assert_eq!(hi.members().iter().map(|m| m.length).collect::<Vec<_>>(), vec![20.0]);
        assert_ne!(lo.id, c.id);
        assert_ne!(hi.id, c.id);
        let flat = cluster(&mut ids, &[5.0, 5.0, 5.0], 0);
        assert!(flat.split_at_largest_gap(&mut ids).is_none());
    }

    #[test]
    fn cluster_batch_three_groups() {
        let mut ids = IdGen::default();
        let ms = members(&[20.0, 25.0, 25.0, 125.0, 140.0, 234.0, 280.0]);
        let clusters = cluster_batch(&ms, 1, &mut ids).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].len(), 7);
    }

    #[test]
    fn remove_member() {
        let mut ids = IdGen::default();
        let mut c = cluster(&mut ids, &[4.0, 4.0], 0);
        assert!(c.remove(AppId(0)).is_some());
        assert_eq!(c.centroid(), 4.0);
        assert!(c.remove(AppId(0)).is_none());
        c.remove(AppId(1));
        assert!(c.is_empty());
    }
}
