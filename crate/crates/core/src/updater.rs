//! Absorbing applications that join or leave after the initial clustering.
//!
//! Three strategies are provided:
//!
//! * simple thresholding tracks a running centroid per cluster and splits a
//!   cluster once the centroid has drifted far enough relative to the
//!   cluster's frozen length range;
//! * distribution thresholding compares a histogram of I/O lengths against a
//!   baseline with the Jensen-Shannon divergence every `K_C` insertions;
//! * online K-means opens new centers with probability proportional to the
//!   squared distance to the closest center, doubling the facility cost at
//!   the end of every epoch.
//!
//! All of them mutate a `Vec<Cluster>` in place and report the structural
//! change so the caller can repartition the burst buffer.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{Cluster, ClusterId, IdGen, Member, DEFAULT_MAX_CLUSTERS};
use crate::error::UpdaterError;
use crate::model::AppId;

pub const DEFAULT_DRIFT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_BIN_COUNT: usize = 20;

/// A cluster replaced by its two halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitDirective {
    pub original: ClusterId,
    pub lower: ClusterId,
    pub upper: ClusterId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InsertOutcome {
    /// Cluster holding the new application after the update.
    pub cluster: ClusterId,
    pub split: Option<SplitDirective>,
    /// Cluster opened for a new online K-means center.
    pub created: Option<ClusterId>,
    /// Empty cluster whose center was retired.
    pub retired: Option<ClusterId>,
}

impl InsertOutcome {
    fn plain(cluster: ClusterId) -> Self {
        Self {
            cluster,
            split: None,
            created: None,
            retired: None,
        }
    }

    /// Whether the set of clusters changed, which calls for repartitioning.
    pub fn layout_changed(&self) -> bool {
        self.split.is_some() || self.created.is_some() || self.retired.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Removal {
    pub cluster: ClusterId,
    pub member: Member,
    /// The cluster became empty and was deleted.
    pub deleted: bool,
}

/// Index of the cluster whose centroid is closest to `length`; ties go to the
/// earlier cluster.
pub fn closest_cluster(clusters: &[Cluster], length: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in clusters.iter().enumerate() {
        let d = (c.centroid() - length).abs();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Removes an application from whichever cluster holds it and deletes the
/// cluster if it becomes empty. Shares are left alone.
pub fn remove_application(
    clusters: &mut Vec<Cluster>,
    app: AppId,
) -> Result<Removal, UpdaterError> {
    let idx = clusters
        .iter()
        .position(|c| c.contains(app))
        .ok_or(UpdaterError::UnknownApplication(app))?;
    let cluster = clusters[idx].id;
    let member = clusters[idx].remove(app).expect("membership checked above");
    let deleted = clusters[idx].is_empty();
    if deleted {
        clusters.remove(idx);
    }
    Ok(Removal {
        cluster,
        member,
        deleted,
    })
}

/// Replaces `clusters[idx]` by its halves split at the largest member gap.
fn split_in_place(
    clusters: &mut Vec<Cluster>,
    idx: usize,
    ids: &mut IdGen,
) -> Option<SplitDirective> {
    let (lower, upper) = clusters[idx].split_at_largest_gap(ids)?;
    let directive = SplitDirective {
        original: clusters[idx].id,
        lower: lower.id,
        upper: upper.id,
    };
    clusters[idx] = lower;
    clusters.insert(idx + 1, upper);
    Some(directive)
}

fn cluster_of(clusters: &[Cluster], id: ClusterId) -> Option<usize> {
    clusters.iter().position(|c| c.id == id)
}

// ---------------------------------------------------------------------------
// simple thresholding

#[derive(Debug, Clone, PartialEq)]
struct Baseline {
    base: f64,
    cumulative: f64,
    min: f64,
    max: f64,
    count: usize,
}

impl Baseline {
    fn freeze(cluster: &Cluster) -> Self {
        let c = cluster.centroid();
        Self {
            base: c,
            cumulative: c,
            min: cluster.min_length(),
            max: cluster.max_length(),
            count: cluster.len(),
        }
    }

    fn ratio(&self) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            (self.cumulative - self.base).abs() / range
        } else {
            0.0
        }
    }
}

/// Running-centroid drift detection per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleThresholdState {
    baselines: BTreeMap<ClusterId, Baseline>,
    threshold: f64,
    max_clusters: usize,
}

impl SimpleThresholdState {
    pub fn new(clusters: &[Cluster], threshold: f64, max_clusters: usize) -> Self {
        let mut state = Self {
            baselines: BTreeMap::new(),
            threshold,
            max_clusters,
        };
        state.rebase(clusters);
        state
    }

    /// Freezes base centroids and ranges for every cluster.
    pub fn rebase(&mut self, clusters: &[Cluster]) {
        self.baselines = clusters.iter().map(|c| (c.id, Baseline::freeze(c))).collect();
    }

    /// The cumulative centroid of a cluster.
    pub fn cumulative_centroid(&self, id: ClusterId) -> Option<f64> {
        self.baselines.get(&id).map(|b| b.cumulative)
    }

    /// `|ĉ - c| / (max - min)` with the range frozen at the last clustering;
    /// zero for a degenerate range.
    pub fn change_ratio(&self, id: ClusterId) -> Option<f64> {
        self.baselines.get(&id).map(Baseline::ratio)
    }

    pub fn insert(
        &mut self,
        clusters: &mut Vec<Cluster>,
        member: Member,
        ids: &mut IdGen,
    ) -> Result<InsertOutcome, UpdaterError> {
        let idx = closest_cluster(clusters, member.length).ok_or(UpdaterError::NoClusters)?;
        let id = clusters[idx].id;
        let baseline = self
            .baselines
            .entry(id)
            .or_insert_with(|| Baseline::freeze(&clusters[idx]));
        baseline.cumulative = (baseline.cumulative * baseline.count as f64 + member.length)
            / (baseline.count + 1) as f64;
        baseline.count += 1;
        clusters[idx].push(member);

        if baseline.ratio() >= self.threshold && clusters[idx].len() > self.max_clusters {
            if let Some(split) = split_in_place(clusters, idx, ids) {
                self.baselines.remove(&split.original);
                for half in &clusters[idx..=idx + 1] {
                    self.baselines.insert(half.id, Baseline::freeze(half));
                }
                let holder = if clusters[idx].contains(member.app) {
                    split.lower
                } else {
                    split.upper
                };
                return Ok(InsertOutcome {
                    split: Some(split),
                    ..InsertOutcome::plain(holder)
                });
            }
        }
        Ok(InsertOutcome::plain(id))
    }

    /// Exits leave the running centroid untouched.
    pub fn forget(&mut self, id: ClusterId) {
        self.baselines.remove(&id);
    }
}

// ---------------------------------------------------------------------------
// distribution thresholding

/// Counts of I/O lengths over fixed-width bins. Lengths outside the range
/// fall into the edge bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    lo: f64,
    width: f64,
    counts: Vec<f64>,
}

impl Histogram {
    /// `bins` equal-width bins spanning `lo..=hi`. A degenerate range gets a
    /// unit bin width.
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        Self {
            lo,
            width,
            counts: vec![0.0; bins],
        }
    }

    pub fn from_counts(lo: f64, width: f64, counts: Vec<f64>) -> Self {
        Self { lo, width, counts }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn bin_of(&self, length: f64) -> usize {
        let raw = ((length - self.lo) / self.width).floor();
        raw.clamp(0.0, (self.counts.len() - 1) as f64) as usize
    }

    pub fn add(&mut self, length: f64) {
        let b = self.bin_of(length);
        self.counts[b] += 1.0;
    }

    pub fn remove(&mut self, length: f64) {
        let b = self.bin_of(length);
        self.counts[b] = (self.counts[b] - 1.0).max(0.0);
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Counts normalized to probabilities; all zeros when empty.
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total();
        if total > 0.0 {
            self.counts.iter().map(|c| c / total).collect()
        } else {
            vec![0.0; self.counts.len()]
        }
    }

    pub fn probability_at(&self, length: f64) -> f64 {
        let total = self.total();
        if total > 0.0 {
            self.counts[self.bin_of(length)] / total
        } else {
            0.0
        }
    }

    fn same_layout(&self, other: &Histogram) -> bool {
        self.counts.len() == other.counts.len()
            && self.lo.to_bits() == other.lo.to_bits()
            && self.width.to_bits() == other.width.to_bits()
    }
}

fn kl_term(p: f64, m: f64) -> f64 {
    if p > 0.0 {
        p * (p / m).ln()
    } else {
        0.0
    }
}

/// Jensen-Shannon divergence (nats) of two probability vectors of equal
/// length, normalizing each first.
pub fn js_divergence_probs(p: &[f64], q: &[f64]) -> Result<f64, UpdaterError> {
    if p.len() != q.len() {
        return Err(UpdaterError::MismatchedBins);
    }
    let ps: f64 = p.iter().sum();
    let qs: f64 = q.iter().sum();
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let a = if ps > 0.0 { a / ps } else { 0.0 };
        let b = if qs > 0.0 { b / qs } else { 0.0 };
        let m = 0.5 * (a + b);
        total += 0.5 * kl_term(a, m) + 0.5 * kl_term(b, m);
    }
    Ok(total.clamp(0.0, std::f64::consts::LN_2))
}

pub fn js_divergence(p: &Histogram, q: &Histogram) -> Result<f64, UpdaterError> {
    if !p.same_layout(q) {
        return Err(UpdaterError::MismatchedBins);
    }
    js_divergence_probs(&p.counts, &q.counts)
}

/// Histogram drift detection checked every `period` insertions.
#[derive(Debug, Clone, PartialEq)]
pub struct DistThresholdState {
    baseline: Histogram,
    current: Histogram,
    changes: usize,
    period: usize,
    threshold: f64,
    /// Divergence at the last check, for diagnostics.
    pub last_divergence: Option<f64>,
}

impl DistThresholdState {
    /// Bin edges span the member lengths present at construction.
    pub fn new(clusters: &[Cluster], bins: usize, threshold: f64, period: usize) -> Self {
        let lengths = clusters.iter().flat_map(|c| c.members().iter().map(|m| m.length));
        let (lo, hi) = lengths.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
        let empty = Histogram::new(lo, hi, bins);
        let mut state = Self {
            baseline: empty.clone(),
            current: empty,
            changes: 0,
            period: period.max(1),
            threshold,
            last_divergence: None,
        };
        state.rebase(clusters);
        state
    }

    /// Resets both histograms to the current membership.
    pub fn rebase(&mut self, clusters: &[Cluster]) {
        self.current.counts.iter_mut().for_each(|c| *c = 0.0);
        for m in clusters.iter().flat_map(|c| c.members()) {
            self.current.add(m.length);
        }
        self.baseline = self.current.clone();
        self.changes = 0;
    }

    pub fn baseline(&self) -> &Histogram {
        &self.baseline
    }

    pub fn current(&self) -> &Histogram {
        &self.current
    }

    pub fn changes_since_check(&self) -> usize {
        self.changes
    }

    pub fn insert(
        &mut self,
        clusters: &mut Vec<Cluster>,
        member: Member,
        ids: &mut IdGen,
    ) -> Result<InsertOutcome, UpdaterError> {
        let idx = closest_cluster(clusters, member.length).ok_or(UpdaterError::NoClusters)?;
        let id = clusters[idx].id;
        clusters[idx].push(member);
        self.current.add(member.length);
        self.changes += 1;
        if self.changes < self.period {
            return Ok(InsertOutcome::plain(id));
        }
        self.changes = 0;
        let divergence = js_divergence(&self.baseline, &self.current)?;
        self.last_divergence = Some(divergence);
        if divergence < self.threshold {
            return Ok(InsertOutcome::plain(id));
        }

        // the cluster whose probability mass moved the most, relative to
        // its baseline mass, over the bins its members span
        let mut target: Option<(usize, f64, usize, usize)> = None;
        let p_all = self.baseline.probabilities();
        let q_all = self.current.probabilities();
        for (i, c) in clusters.iter().enumerate() {
            if c.min_length() == c.max_length() {
                continue;
            }
            let lo = self.current.bin_of(c.min_length());
            let hi = self.current.bin_of(c.max_length());
            let p: f64 = p_all[lo..=hi].iter().sum();
            if p <= 0.0 {
                continue;
            }
            let q: f64 = q_all[lo..=hi].iter().sum();
            let change = (p - q).abs() / p;
            if target.is_none_or(|(_, best, _, _)| change > best) {
                target = Some((i, change, lo, hi));
            }
        }
        let Some((t, _, lo_bin, hi_bin)) = target else {
            return Ok(InsertOutcome::plain(id));
        };
        let Some(split) = split_in_place(clusters, t, ids) else {
            return Ok(InsertOutcome::plain(id));
        };
        self.baseline.counts[lo_bin..=hi_bin].copy_from_slice(&self.current.counts[lo_bin..=hi_bin]);
        let holder = clusters
            .iter()
            .find(|c| c.contains(member.app))
            .map(|c| c.id)
            .expect("inserted member is still clustered");
        Ok(InsertOutcome {
            split: Some(split),
            ..InsertOutcome::plain(holder)
        })
    }

    pub fn remove(&mut self, length: f64) {
        self.current.remove(length);
    }
}

// ---------------------------------------------------------------------------
// online k-means

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Center {
    pub cluster: ClusterId,
    pub value: f64,
    /// Live applications assigned to this center.
    pub owners: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OkEvent {
    Arrive(Member),
    Depart { member: Member, cluster: ClusterId },
}

/// What one online K-means step did to the center set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CenterChange {
    /// Center the arriving application was assigned to.
    pub assigned: Option<ClusterId>,
    pub added: Option<ClusterId>,
    pub retired: Option<ClusterId>,
    pub removed: Option<ClusterId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineKMeansState {
    centers: Vec<Center>,
    k: usize,
    w_star: f64,
    first_cost: f64,
    epoch: u32,
    added_in_epoch: usize,
    facility_cost: f64,
    seen: u64,
}

fn min_pairwise_sq(values: &[f64]) -> Option<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| (w[1] - w[0]).powi(2))
        .filter(|d| *d > 0.0)
        .min_by(f64::total_cmp)
}

impl OnlineKMeansState {
    /// Centers are the given clusters' centroids; `w*` is half the minimum
    /// squared distance between distinct centers.
    pub fn init(clusters: &[Cluster]) -> Result<Self, UpdaterError> {
        let centroids: Vec<f64> = clusters.iter().map(Cluster::centroid).collect();
        let sq = min_pairwise_sq(&centroids).ok_or(UpdaterError::DegenerateCenters)?;
        Ok(Self::with_w_star(clusters, sq / 2.0))
    }

    /// Like [`init`](Self::init), but with fewer than two distinct centers
    /// `w*` comes from the two closest distinct member lengths, or 1 when all
    /// lengths coincide.
    pub fn init_with_fallback(clusters: &[Cluster]) -> Self {
        if let Ok(state) = Self::init(clusters) {
            return state;
        }
        let lengths: Vec<f64> = clusters
            .iter()
            .flat_map(|c| c.members().iter().map(|m| m.length))
            .collect();
        let w_star = min_pairwise_sq(&lengths).map_or(1.0, |sq| sq / 2.0);
        Self::with_w_star(clusters, w_star)
    }

    fn with_w_star(clusters: &[Cluster], w_star: f64) -> Self {
        let centers: Vec<Center> = clusters
            .iter()
            .map(|c| Center {
                cluster: c.id,
                value: c.centroid(),
                owners: c.len(),
            })
            .collect();
        let k = centers.len().max(1);
        let first_cost = w_star / k as f64;
        Self {
            centers,
            k,
            w_star,
            first_cost,
            epoch: 1,
            added_in_epoch: 0,
            facility_cost: first_cost,
            seen: 0,
        }
    }

    pub fn centers(&self) -> &[Center] {
        &self.centers
    }

    pub fn w_star(&self) -> f64 {
        self.w_star
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn added_in_epoch(&self) -> usize {
        self.added_in_epoch
    }

    /// `f_r`, always `f_1 * 2^(r-1)`.
    pub fn facility_cost(&self) -> f64 {
        self.facility_cost
    }

    pub fn first_cost(&self) -> f64 {
        self.first_cost
    }

    pub fn points_seen(&self) -> u64 {
        self.seen
    }

    /// Center additions allowed in one epoch, `3k(1 + ln n)`; the log term
    /// is clamped at zero for `n <= 1`.
    pub fn epoch_threshold(&self) -> f64 {
        let log = if self.seen > 1 { (self.seen as f64).ln() } else { 0.0 };
        3.0 * self.k as f64 * (1.0 + log)
    }

    fn closest_center(&self, v: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.centers.iter().enumerate() {
            let d = (c.value - v).powi(2);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// One step of the online algorithm on the center set only.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        event: OkEvent,
        ids: &mut IdGen,
        rng: &mut R,
    ) -> CenterChange {
        self.seen += 1;
        match event {
            OkEvent::Arrive(member) => {
                let v = member.length;
                let mut change = CenterChange::default();
                let closest = self.closest_center(v);
                let dist_sq = closest.map_or(f64::INFINITY, |i| (self.centers[i].value - v).powi(2));
                let p = if self.facility_cost > 0.0 {
                    (dist_sq / self.facility_cost).min(1.0)
                } else {
                    1.0
                };
                let draw: f64 = rng.gen();
                if draw < p {
                    let id = ids.next_id();
                    self.centers.push(Center {
                        cluster: id,
                        value: v,
                        owners: 1,
                    });
                    change.added = Some(id);
                    change.assigned = Some(id);
                    self.added_in_epoch += 1;
                    if self.added_in_epoch as f64 >= self.epoch_threshold() {
                        self.epoch += 1;
                        self.added_in_epoch = 0;
                        self.facility_cost *= 2.0;
                    }
                    if let Some(i) = closest {
                        if self.centers[i].owners == 0 {
                            change.retired = Some(self.centers[i].cluster);
                            self.centers.remove(i);
                        }
                    }
                } else if let Some(i) = closest {
                    self.centers[i].owners += 1;
                    change.assigned = Some(self.centers[i].cluster);
                }
                change
            }
            OkEvent::Depart { member, cluster } => {
                let mut change = CenterChange::default();
                if let Some(i) = self.centers.iter().position(|c| c.cluster == cluster) {
                    let center = &mut self.centers[i];
                    center.owners = center.owners.saturating_sub(1);
                    if center.value == member.length && center.owners == 0 {
                        change.removed = Some(center.cluster);
                        self.centers.remove(i);
                    }
                }
                change
            }
        }
    }

    /// Drops the center of a cluster deleted elsewhere.
    pub fn forget(&mut self, id: ClusterId) {
        self.centers.retain(|c| c.cluster != id);
    }

    pub fn insert<R: Rng + ?Sized>(
        &mut self,
        clusters: &mut Vec<Cluster>,
        member: Member,
        ids: &mut IdGen,
        rng: &mut R,
    ) -> Result<InsertOutcome, UpdaterError> {
        if clusters.is_empty() {
            return Err(UpdaterError::NoClusters);
        }
        self.sync(clusters);
        let change = self.update(OkEvent::Arrive(member), ids, rng);
        let assigned = change.assigned.ok_or(UpdaterError::NoClusters)?;
        if change.added.is_some() {
            clusters.push(Cluster::new(assigned, vec![member]).expect("non-empty"));
        } else {
            let idx = cluster_of(clusters, assigned).ok_or(UpdaterError::NoClusters)?;
            clusters[idx].push(member);
        }
        if let Some(retired) = change.retired {
            // a center without applications has no cluster left to remove
            if let Some(idx) = cluster_of(clusters, retired) {
                debug_assert!(clusters[idx].is_empty());
                clusters.remove(idx);
            }
        }
        Ok(InsertOutcome {
            cluster: assigned,
            split: None,
            created: change.added,
            retired: change.retired,
        })
    }

    /// Adds centers for clusters created outside the online updates (for
    /// example a cluster opened when none existed).
    fn sync(&mut self, clusters: &[Cluster]) {
        for c in clusters {
            if !self.centers.iter().any(|x| x.cluster == c.id) {
                self.centers.push(Center {
                    cluster: c.id,
                    value: c.centroid(),
                    owners: c.len(),
                });
            }
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UpdaterKind {
    SimpleThreshold,
    DistributionThreshold,
    OnlineKMeans,
}

impl UpdaterKind {
    pub const ALL: [UpdaterKind; 3] = [
        UpdaterKind::SimpleThreshold,
        UpdaterKind::DistributionThreshold,
        UpdaterKind::OnlineKMeans,
    ];
}

impl FromStr for UpdaterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "st" | "simple" => Ok(Self::SimpleThreshold),
            "dt" | "distribution" => Ok(Self::DistributionThreshold),
            "ok" | "online" | "online-kmeans" => Ok(Self::OnlineKMeans),
            other => Err(format!("unknown updater {other:?} (expected st, dt or ok)")),
        }
    }
}

impl fmt::Display for UpdaterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SimpleThreshold => "st",
            Self::DistributionThreshold => "dt",
            Self::OnlineKMeans => "ok",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdaterConfig {
    pub drift_threshold: f64,
    /// `K_C`: cluster bound, split size bound and distribution check period.
    pub max_clusters: usize,
    pub bins: usize,
}

impl Default for UpdaterConfig {
    fn default() -> Self {
        Self {
            drift_threshold: DEFAULT_DRIFT_THRESHOLD,
            max_clusters: DEFAULT_MAX_CLUSTERS,
            bins: DEFAULT_BIN_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Updater {
    Simple(SimpleThresholdState),
    Distribution(DistThresholdState),
    OnlineKMeans(OnlineKMeansState),
}

impl Updater {
    pub fn new(kind: UpdaterKind, config: &UpdaterConfig, clusters: &[Cluster]) -> Self {
        match kind {
            UpdaterKind::SimpleThreshold => Updater::Simple(SimpleThresholdState::new(
                clusters,
                config.drift_threshold,
                config.max_clusters,
            )),
            UpdaterKind::DistributionThreshold => Updater::Distribution(DistThresholdState::new(
                clusters,
                config.bins,
                config.drift_threshold,
                config.max_clusters,
            )),
            UpdaterKind::OnlineKMeans => {
                Updater::OnlineKMeans(OnlineKMeansState::init_with_fallback(clusters))
            }
        }
    }

    pub fn kind(&self) -> UpdaterKind {
        match self {
            Updater::Simple(_) => UpdaterKind::SimpleThreshold,
            Updater::Distribution(_) => UpdaterKind::DistributionThreshold,
            Updater::OnlineKMeans(_) => UpdaterKind::OnlineKMeans,
        }
    }

    pub fn insert<R: Rng + ?Sized>(
        &mut self,
        clusters: &mut Vec<Cluster>,
        member: Member,
        ids: &mut IdGen,
        rng: &mut R,
    ) -> Result<InsertOutcome, UpdaterError> {
        match self {
            Updater::Simple(s) => s.insert(clusters, member, ids),
            Updater::Distribution(s) => s.insert(clusters, member, ids),
            Updater::OnlineKMeans(s) => s.insert(clusters, member, ids, rng),
        }
    }

    /// Removes a departing application from its cluster.
    pub fn remove<R: Rng + ?Sized>(
        &mut self,
        clusters: &mut Vec<Cluster>,
        app: AppId,
        ids: &mut IdGen,
        rng: &mut R,
    ) -> Result<Removal, UpdaterError> {
        let removal = remove_application(clusters, app)?;
        match self {
            Updater::Simple(s) => {
                if removal.deleted {
                    s.forget(removal.cluster);
                }
            }
            Updater::Distribution(s) => s.remove(removal.member.length),
            Updater::OnlineKMeans(s) => {
                s.update(
                    OkEvent::Depart {
                        member: removal.member,
                        cluster: removal.cluster,
                    },
                    ids,
                    rng,
                );
                if removal.deleted {
                    s.forget(removal.cluster);
                }
            }
        }
        Ok(removal)
    }
}
