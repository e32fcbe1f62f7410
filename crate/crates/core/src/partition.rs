//! Proportional partitioning of PFS bandwidth and burst-buffer capacity by
//! each cluster's expected I/O load.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterId;
use crate::error::PartitionError;
use crate::model::SystemConfig;

/// `EIO_k = Σ P_i B_i` over `(P_i, B_i)` pairs.
pub fn expected_load(members: &[(f64, u32)]) -> f64 {
    members.iter().map(|&(p, b)| p * b as f64).sum()
}

/// A cluster's expected load, the input of the partitioner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterLoad {
    pub id: ClusterId,
    pub expected_load: f64,
    /// Centroid of the cluster, used to place occupancy of clusters that
    /// disappeared without successors.
    pub centroid: f64,
}

/// The slice of PFS bandwidth and buffer capacity owned by one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub cluster: ClusterId,
    pub expected_load: f64,
    /// `U_k = EIO_k / TEIO`.
    pub share: f64,
    /// `floor(U_k S)` GB.
    pub buffer_capacity: u32,
    /// `floor(U_k B)` GB/s.
    pub drain_budget: u32,
    /// Buffered GB, never above `buffer_capacity`.
    pub occupancy: f64,
    /// Buffered GB carried over a repartition beyond the new capacity. Drained
    /// first; no buffer writes are admitted while positive.
    pub drain_debt: f64,
}

impl Partition {
    /// Every byte held by this partition, occupancy plus debt.
    pub fn buffered(&self) -> f64 {
        self.occupancy + self.drain_debt
    }

    pub fn admits_writes(&self) -> bool {
        self.drain_debt <= 0.0
    }

    /// Puts `amount` GB into the partition, spilling into debt above capacity.
    pub fn deposit(&mut self, amount: f64) {
        let total = self.buffered() + amount;
        let cap = self.buffer_capacity as f64;
        self.occupancy = total.min(cap);
        self.drain_debt = (total - cap).max(0.0);
    }

    /// Removes up to `amount` GB, debt first. Returns what was removed.
    pub fn withdraw(&mut self, amount: f64) -> f64 {
        let from_debt = amount.min(self.drain_debt);
        self.drain_debt -= from_debt;
        let from_occ = (amount - from_debt).min(self.occupancy);
        self.occupancy -= from_occ;
        from_debt + from_occ
    }
}

/// Result of a (re)partitioning.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionLayout {
    pub partitions: Vec<Partition>,
    /// Set when `TEIO >= B`. The run continues; the probabilistic scheduler
    /// throttles transfers.
    pub overloaded: bool,
}

pub fn compute_shares(
    clusters: &[ClusterLoad],
    system: &SystemConfig,
) -> Result<PartitionLayout, PartitionError> {
    let total: f64 = clusters.iter().map(|c| c.expected_load).sum();
    if !(total > 0.0) {
        return Err(PartitionError::NoLoad);
    }
    let overloaded = total >= system.pfs_bandwidth as f64;
    if overloaded {
        log::warn!(
            "expected load {total:.3} GB/s reaches PFS bandwidth {} GB/s",
            system.pfs_bandwidth
        );
    }
    let mut partitions: Vec<Partition> = clusters
        .iter()
        .map(|c| {
            let share = c.expected_load / total;
            Partition {
                cluster: c.id,
                expected_load: c.expected_load,
                share,
                buffer_capacity: floor_share(share, system.buffer_size),
                drain_budget: floor_share(share, system.pfs_bandwidth),
                occupancy: 0.0,
                drain_debt: 0.0,
            }
        })
        .collect();
    ensure_drain_floor(&mut partitions);
    Ok(PartitionLayout {
        partitions,
        overloaded,
    })
}

/// A zero drain budget would leave a cluster unable to transfer or drain at
/// all, so every partition with load gets at least 1 GB/s, taken from the
/// largest budget. The total stays within `B`.
fn ensure_drain_floor(partitions: &mut [Partition]) {
    for i in 0..partitions.len() {
        if partitions[i].drain_budget > 0 || partitions[i].expected_load <= 0.0 {
            continue;
        }
        let donor = (0..partitions.len())
            .max_by_key(|&j| (partitions[j].drain_budget, std::cmp::Reverse(j)))
            .expect("non-empty");
        if partitions[donor].drain_budget > 1 {
            partitions[donor].drain_budget -= 1;
            partitions[i].drain_budget = 1;
        }
    }
}

fn floor_share(share: f64, amount: u32) -> u32 {
    // guard against 0.9999999 * 300 style round-off on exact shares
    let v = share * amount as f64;
    let rounded = v.round();
    if (v - rounded).abs() < 1e-9 {
        rounded as u32
    } else {
        v.floor() as u32
    }
}

/// Successors of clusters that do not survive a layout change under their
/// own identifier. An entry with several successors is a split.
pub type Lineage = BTreeMap<ClusterId, Vec<ClusterId>>;

/// Recomputes shares for `clusters` and carries every old partition's
/// buffered bytes to its successors.
///
/// A cluster whose identifier survives keeps its bytes; otherwise `lineage`
/// names its successors and a split divides the bytes in proportion to the
/// successors' expected loads. An old partition holding no bytes needs no
/// successor. Bytes beyond a new capacity become drain debt.
pub fn repartition(
    old: &[Partition],
    clusters: &[ClusterLoad],
    lineage: &Lineage,
    system: &SystemConfig,
) -> Result<PartitionLayout, PartitionError> {
    let mut layout = compute_shares(clusters, system)?;
    let index: BTreeMap<ClusterId, usize> = layout
        .partitions
        .iter()
        .enumerate()
        .map(|(i, p)| (p.cluster, i))
        .collect();
    let mut carried = vec![0.0; layout.partitions.len()];
    for part in old {
        let bytes = part.buffered();
        if let Some(&i) = index.get(&part.cluster) {
            carried[i] += bytes;
            continue;
        }
        if bytes <= 0.0 {
            continue;
        }
        let successors: Vec<usize> = lineage
            .get(&part.cluster)
            .map(|ids| ids.iter().filter_map(|id| index.get(id).copied()).collect())
            .unwrap_or_default();
        if successors.is_empty() {
            return Err(PartitionError::Unattributable(part.cluster));
        }
        let weight: f64 = successors
            .iter()
            .map(|&i| layout.partitions[i].expected_load)
            .sum();
        // the last successor takes the remainder so no byte is lost to rounding
        let mut left = bytes;
        for (n, &i) in successors.iter().enumerate() {
            let amount = if n + 1 == successors.len() {
                left
            } else {
                bytes * layout.partitions[i].expected_load / weight
            };
            carried[i] += amount;
            left -= amount;
        }
    }
    for (part, bytes) in layout.partitions.iter_mut().zip(carried) {
        part.deposit(bytes);
    }
    Ok(layout)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loads(eios: &[f64]) -> Vec<ClusterLoad> {
        eios.iter()
            .enumerate()
            .map(|(i, &e)| ClusterLoad {
                id: ClusterId(i as u32),
                expected_load: e,
                centroid: i as f64,
            })
            .collect()
    }

    #[test]
    fn expected_load_examples() {
        let p_eap = 20.0 / 5671.0;
        let p_lap = 25.0 / 12682.0;
        let eio = expected_load(&[(p_eap, 160), (p_lap, 80)]);
        assert!((eio - 0.722).abs() < 1e-3);
        assert_eq!(expected_load(&[]), 0.0);
        assert_eq!(expected_load(&[(1.0, 50)]), 50.0);
    }

    #[test]
    fn shares_examples() {
        let system = SystemConfig::default();
        let l = compute_shares(&loads(&[1.0, 3.0]), &system).unwrap();
        let p = &l.partitions;
        assert_eq!((p[0].share, p[1].share), (0.25, 0.75));
        assert_eq!((p[0].buffer_capacity, p[1].buffer_capacity), (75, 225));
        assert_eq!((p[0].drain_budget, p[1].drain_budget), (25, 75));
        assert!(!l.overloaded);

        let one = compute_shares(&loads(&[0.3]), &system).unwrap();
        assert_eq!(one.partitions[0].share, 1.0);
        assert_eq!(one.partitions[0].buffer_capacity, 300);
        assert_eq!(one.partitions[0].drain_budget, 100);

        let l = compute_shares(&loads(&[0.722, 2.99]), &system).unwrap();
        assert!((l.partitions[0].share - 0.1945).abs() < 1e-4);
        assert!((l.partitions[1].share - 0.8055).abs() < 1e-4);

        assert_eq!(compute_shares(&loads(&[0.0, 0.0]), &system), Err(PartitionError::NoLoad));
        assert!(compute_shares(&loads(&[60.0, 50.0]), &system).unwrap().overloaded);
    }

    #[test]
    fn floor_never_overallocates() {
        let system = SystemConfig::default();
        let l = compute_shares(&loads(&[1.0, 1.0, 1.0]), &system).unwrap();
        let cap: u32 = l.partitions.iter().map(|p| p.buffer_capacity).sum();
        let drain: u32 = l.partitions.iter().map(|p| p.drain_budget).sum();
        assert_eq!((cap, drain), (300, 99));
    }

    #[test]
    fn tiny_share_still_drains() {
        let system = SystemConfig::default();
        let l = compute_shares(&loads(&[0.1, 30.0]), &system).unwrap();
        assert_eq!(l.partitions[0].drain_budget, 1);
        assert_eq!(l.partitions[1].drain_budget, 98);
        assert_eq!(l.partitions[0].buffer_capacity, 0);
    }

    #[test]
    fn repartition_identity() {
        let system = SystemConfig::default();
        let mut old = compute_shares(&loads(&[1.0, 3.0]), &system).unwrap().partitions;
        old[0].occupancy = 12.5;
        let new = repartition(&old, &loads(&[1.0, 3.0]), &Lineage::new(), &system).unwrap();
        assert_eq!(new.partitions, old);
    }

    #[test]
    fn repartition_split_divides_by_load() {
        let system = SystemConfig::default();
        let mut old = compute_shares(&loads(&[2.0]), &system).unwrap().partitions;
        old[0].occupancy = 10.0;
        let new_loads = vec![
            ClusterLoad { id: ClusterId(7), expected_load: 1.0, centroid: 1.0 },
            ClusterLoad { id: ClusterId(8), expected_load: 1.0, centroid: 2.0 },
        ];
        let lineage = Lineage::from([(ClusterId(0), vec![ClusterId(7), ClusterId(8)])]);
        let new = repartition(&old, &new_loads, &lineage, &system).unwrap();
        assert_eq!(new.partitions[0].occupancy, 5.0);
        assert_eq!(new.partitions[1].occupancy, 5.0);
    }

    #[test]
    fn repartition_turns_excess_into_debt() {
        let system = SystemConfig::default();
        let mut old = compute_shares(&loads(&[1.0, 1.0]), &system).unwrap().partitions;
        old[0].occupancy = 140.0;
        // cluster 0 shrinks to a 10% share: 30 GB capacity
        let new = repartition(&old, &loads(&[1.0, 9.0]), &Lineage::new(), &system).unwrap();
        let p = &new.partitions[0];
        assert_eq!(p.buffer_capacity, 30);
        assert_eq!(p.occupancy, 30.0);
        assert_eq!(p.drain_debt, 110.0);
        assert!(!p.admits_writes());
        let total: f64 = new.partitions.iter().map(Partition::buffered).sum();
        assert_eq!(total, 140.0);
    }

    #[test]
    fn repartition_rejects_orphans() {
        let system = SystemConfig::default();
        let mut old = compute_shares(&loads(&[1.0, 1.0]), &system).unwrap().partitions;
        old[1].occupancy = 3.0;
        let err = repartition(&old, &loads(&[1.0]), &Lineage::new(), &system).unwrap_err();
        assert_eq!(err, PartitionError::Unattributable(ClusterId(1)));
        // an empty orphan needs no successor
        old[1].occupancy = 0.0;
        assert!(repartition(&old, &loads(&[1.0]), &Lineage::new(), &system).is_ok());
    }

    #[test]
    fn withdraw_takes_debt_first() {
        let mut p = Partition {
            cluster: ClusterId(0),
            expected_load: 1.0,
            share: 1.0,
            buffer_capacity: 10,
            drain_budget: 5,
            occupancy: 10.0,
            drain_debt: 4.0,
        };
        assert_eq!(p.withdraw(6.0), 6.0);
        assert_eq!((p.occupancy, p.drain_debt), (8.0, 0.0));
        assert_eq!(p.withdraw(100.0), 8.0);
        assert_eq!(p.buffered(), 0.0);
    }
}
