//! Discrete-event simulation of periodic applications sharing a PFS and a
//! burst buffer.
//!
//! Time is continuous. Every scheduling pool (one per cluster, or a single
//! global pool for the baselines) ticks at its own time unit; an allocation
//! stays in force until the pool's next tick. Byte progress is settled lazily
//! at every event, and the completion of each transfer is predicted so that
//! rates are piecewise constant between events.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{batch_policy, cluster_batch, merge_clusters, BatchAction, Cluster, ClusterId, IdGen, Member};
use crate::error::SimError;
use crate::load::LoadDistribution;
use crate::model::{AppId, ApplicationSpec, ScenarioSpec, SystemConfig};
use crate::partition::{repartition, ClusterLoad, Lineage, Partition};
use crate::scheduler::{
    schedule_bios, schedule_cluster, AllocationCase, AppRate, PendingApp, PoolState, ScheduleOptions,
    Strategy,
};
use crate::updater::{Updater, UpdaterConfig, UpdaterKind};

/// Absolute slack for floating-point checks of rates and bytes.
pub const TOLERANCE: f64 = 1e-6;

/// Pool key of the single pool used by the baselines.
pub const GLOBAL_POOL: ClusterId = ClusterId(u32::MAX);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchedulerKind {
    /// Clustered partitions, each scheduled probabilistically.
    Dpsac,
    /// Probabilistic scheduling on one global pool.
    Mcios,
    /// Priority scheduling with a first-come buffer.
    Bios,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 3] = [SchedulerKind::Dpsac, SchedulerKind::Mcios, SchedulerKind::Bios];
}

impl FromStr for SchedulerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dpsac" => Ok(Self::Dpsac),
            "mcios" => Ok(Self::Mcios),
            "bios" => Ok(Self::Bios),
            other => Err(format!("unknown scheduler {other:?} (expected dpsac, mcios or bios)")),
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dpsac => "dpsac",
            Self::Mcios => "mcios",
            Self::Bios => "bios",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub system: SystemConfig,
    pub scheduler: SchedulerKind,
    pub updater: UpdaterKind,
    pub strategy: Strategy,
    /// Threshold, `K_C` and histogram bins; `K_C` also bounds the initial
    /// clustering.
    pub updater_config: UpdaterConfig,
    pub options: ScheduleOptions,
    /// The run fails once the clock passes this multiple of `Σ N_i T_i`.
    pub horizon_factor: f64,
    /// Keep every tick's allocation in the report.
    pub record_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            scheduler: SchedulerKind::Dpsac,
            updater: UpdaterKind::SimpleThreshold,
            strategy: Strategy::default(),
            updater_config: UpdaterConfig::default(),
            options: ScheduleOptions::default(),
            horizon_factor: 10.0,
            record_trace: false,
        }
    }
}

/// One pool's allocation at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub time: f64,
    pub pool: ClusterId,
    pub dt: f64,
    pub rates: Vec<AppRate>,
    pub drain_rate: f64,
    pub case: AllocationCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppReport {
    pub id: AppId,
    pub name: String,
    pub nodes: u32,
    pub release: f64,
    pub completion: Option<f64>,
    /// `ρ_i`.
    pub dedicated_efficiency: f64,
    /// `ρ̃_i(d_i)`.
    pub efficiency: f64,
    /// `ρ_i / ρ̃_i(d_i)`.
    pub dilation: f64,
    pub pfs_bytes: f64,
    pub buffer_bytes: f64,
    /// `N_i IO_i`.
    pub expected_bytes: f64,
}

/// Worst observed deviation for each simulation invariant; all of them are
/// zero up to rounding in a correct run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InvariantReport {
    /// Per-application `|pfs + buffer - N IO|`, GB.
    pub max_app_byte_drift: f64,
    /// `|Σ buffered in - Σ drained - Σ held|`, GB.
    pub buffer_byte_drift: f64,
    /// Largest `-L` or `L - capacity` seen, GB.
    pub max_occupancy_violation: f64,
    /// Largest allocated pool PFS usage above its drain budget, GB/s.
    pub max_pool_overuse: f64,
    /// Largest summed PFS allocation above `B`, GB/s.
    pub max_global_overuse: f64,
    /// Largest application rate above its `B_i`, GB/s.
    pub max_app_overrate: f64,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.max_app_byte_drift <= TOLERANCE
            && self.buffer_byte_drift <= TOLERANCE
            && self.max_occupancy_violation <= TOLERANCE
            && self.max_pool_overuse <= TOLERANCE
            && self.max_global_overuse <= TOLERANCE
            && self.max_app_overrate <= TOLERANCE
    }

    fn note(slot: &mut f64, value: f64) {
        if value > *slot {
            *slot = value;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub system_efficiency: f64,
    pub dilation: f64,
    /// `(1/N) Σ β_i ρ_i`, the efficiency with no contention.
    pub efficiency_ceiling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub scheduler: SchedulerKind,
    pub updater: UpdaterKind,
    pub strategy: Strategy,
    pub seed: u64,
    pub metrics: Metrics,
    pub apps: Vec<AppReport>,
    pub invariants: InvariantReport,
    pub end_time: f64,
    pub ticks: u64,
    pub repartitions: u32,
    pub max_clusters: usize,
    pub trace: Vec<TickRecord>,
}

impl MetricsReport {
    pub fn system_efficiency(&self) -> f64 {
        self.metrics.system_efficiency
    }

    pub fn dilation(&self) -> f64 {
        self.metrics.dilation
    }

    /// Invariants hold and efficiency stays under its ceiling.
    pub fn invariants_hold(&self) -> bool {
        self.invariants.holds()
            && self.metrics.system_efficiency <= self.metrics.efficiency_ceiling + 1e-12
    }
}

/// System efficiency and dilation over completed applications, with
/// `N = Σ β_i`.
pub fn compute_metrics(apps: &[AppReport]) -> Result<Metrics, SimError> {
    let unfinished = apps.iter().filter(|a| a.completion.is_none()).count();
    if unfinished > 0 {
        return Err(SimError::Unfinished(unfinished));
    }
    let nodes: f64 = apps.iter().map(|a| a.nodes as f64).sum();
    let weighted: f64 = apps.iter().map(|a| a.nodes as f64 * a.efficiency).sum();
    let ceiling: f64 = apps
        .iter()
        .map(|a| a.nodes as f64 * a.dedicated_efficiency)
        .sum();
    let dilation = apps.iter().map(|a| a.dilation).fold(1.0, f64::max);
    Ok(Metrics {
        system_efficiency: if nodes > 0.0 { weighted / nodes } else { 0.0 },
        dilation,
        efficiency_ceiling: if nodes > 0.0 { ceiling / nodes } else { 0.0 },
    })
}

/// Buffer dynamics over `tau` seconds at constant inflow and drain rates.
/// Draining stops when the buffer runs dry, after which it keeps pace with
/// the inflow. Returns the GB drained.
pub fn advance_buffer(part: &mut Partition, inflow_rate: f64, drain_rate: f64, tau: f64) -> f64 {
    let inflow = inflow_rate * tau;
    let available = part.buffered() + inflow;
    let drained = (drain_rate * tau).min(available);
    part.deposit(inflow);
    part.withdraw(drained)
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Pending,
    Compute,
    Io,
    Done,
}

#[derive(Debug, Clone)]
struct AppState {
    spec: ApplicationSpec,
    release: f64,
    probability: f64,
    phase: Phase,
    completed: u32,
    remaining: f64,
    pfs_rate: f64,
    buffer_rate: f64,
    epoch: u64,
    pool: Option<ClusterId>,
    pfs_bytes: f64,
    buffer_bytes: f64,
    completion: Option<f64>,
}

impl AppState {
    fn rate(&self) -> f64 {
        self.pfs_rate + self.buffer_rate
    }
}

#[derive(Debug, Clone)]
struct Pool {
    members: BTreeSet<usize>,
    dist: LoadDistribution,
    partition: Partition,
    dt: f64,
    centroid: f64,
    drain_rate: f64,
    epoch: u64,
}

#[derive(Debug, Clone, PartialEq)]
enum EventKind {
    Arrival(Vec<usize>),
    ComputeDone(usize),
    IoDone { app: usize, epoch: u64 },
    Tick { pool: ClusterId, epoch: u64 },
}

impl EventKind {
    fn class(&self) -> u8 {
        match self {
            EventKind::Arrival(_) => 0,
            EventKind::ComputeDone(_) | EventKind::IoDone { .. } => 1,
            EventKind::Tick { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    // reversed: BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.class().cmp(&self.kind.class()))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Engine<'a> {
    config: &'a SimConfig,
    now: f64,
    settled_at: f64,
    seq: u64,
    queue: BinaryHeap<Event>,
    apps: Vec<AppState>,
    pools: BTreeMap<ClusterId, Pool>,
    clusters: Vec<Cluster>,
    ids: IdGen,
    updater: Option<Updater>,
    sched_rng: ChaCha8Rng,
    upd_rng: ChaCha8Rng,
    pool_epoch: u64,
    done: usize,
    invariants: InvariantReport,
    buffered_in: f64,
    drained: f64,
    ticks: u64,
    repartitions: u32,
    max_clusters: usize,
    trace: Vec<TickRecord>,
}

fn mean_io<'b>(apps: impl Iterator<Item = &'b AppState>) -> Option<f64> {
    let (sum, n) = apps.fold((0.0, 0usize), |(s, n), a| (s + a.spec.io_time, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl<'a> Engine<'a> {
    fn new(scenario: &ScenarioSpec, config: &'a SimConfig, seed: u64) -> Self {
        let mut apps = Vec::new();
        let mut batch = Vec::new();
        for entry in &scenario.initial_batch {
            for _ in 0..entry.count {
                batch.push(apps.len());
                apps.push(Self::app_state(entry.spec.clone(), 0.0));
            }
        }
        let mut arrivals: Vec<(f64, Vec<usize>)> = vec![(0.0, batch)];
        for (at, spec) in scenario.join_schedule() {
            arrivals.push((at, vec![apps.len()]));
            apps.push(Self::app_state(spec, at));
        }
        let mut sched_rng = ChaCha8Rng::seed_from_u64(seed);
        sched_rng.set_stream(1);
        let mut upd_rng = ChaCha8Rng::seed_from_u64(seed);
        upd_rng.set_stream(2);
        let mut engine = Self {
            config,
            now: 0.0,
            settled_at: 0.0,
            seq: 0,
            queue: BinaryHeap::new(),
            apps,
            pools: BTreeMap::new(),
            clusters: Vec::new(),
            ids: IdGen::default(),
            updater: None,
            sched_rng,
            upd_rng,
            pool_epoch: 0,
            done: 0,
            invariants: InvariantReport::default(),
            buffered_in: 0.0,
            drained: 0.0,
            ticks: 0,
            repartitions: 0,
            max_clusters: 0,
            trace: Vec::new(),
        };
        for (at, group) in arrivals {
            engine.push(at, EventKind::Arrival(group));
        }
        engine
    }

    fn app_state(spec: ApplicationSpec, release: f64) -> AppState {
        AppState {
            probability: spec.io_probability(),
            spec,
            release,
            phase: Phase::Pending,
            completed: 0,
            remaining: 0.0,
            pfs_rate: 0.0,
            buffer_rate: 0.0,
            epoch: 0,
            pool: None,
            pfs_bytes: 0.0,
            buffer_bytes: 0.0,
            completion: None,
        }
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn horizon(&self) -> f64 {
        let serial: f64 = self
            .apps
            .iter()
            .map(|a| a.spec.instances as f64 * a.spec.period())
            .sum();
        self.config.horizon_factor * serial
    }

    fn run(mut self) -> Result<(Vec<AppState>, Self), SimError> {
        let horizon = self.horizon();
        while self.done < self.apps.len() {
            let Some(event) = self.queue.pop() else {
                break;
            };
            if event.time > horizon {
                return Err(SimError::Horizon {
                    horizon,
                    unfinished: self.apps.len() - self.done,
                });
            }
            self.settle(event.time);
            self.now = event.time;
            match event.kind {
                EventKind::Arrival(group) => self.on_arrival(group)?,
                EventKind::ComputeDone(app) => {
                    let a = &mut self.apps[app];
                    a.phase = Phase::Io;
                    a.remaining = a.spec.io_volume();
                }
                EventKind::IoDone { app, epoch } => {
                    if self.apps[app].epoch == epoch && self.apps[app].phase == Phase::Io {
                        self.on_io_done(app)?;
                    }
                }
                EventKind::Tick { pool, epoch } => {
                    if self.pools.get(&pool).is_some_and(|p| p.epoch == epoch) {
                        self.on_tick(pool)?;
                    }
                }
            }
        }
        if self.done < self.apps.len() {
            return Err(SimError::Unfinished(self.apps.len() - self.done));
        }
        let apps = std::mem::take(&mut self.apps);
        Ok((apps, self))
    }

    /// Moves bytes for the interval since the last settlement.
    fn settle(&mut self, t: f64) {
        let tau = t - self.settled_at;
        if tau <= 0.0 {
            return;
        }
        let mut inflow: BTreeMap<ClusterId, f64> = BTreeMap::new();
        for a in &mut self.apps {
            if a.phase != Phase::Io || a.remaining <= 0.0 {
                continue;
            }
            let rate = a.rate();
            if rate <= 0.0 {
                continue;
            }
            let moved = (rate * tau).min(a.remaining);
            let to_buffer = moved * a.buffer_rate / rate;
            a.pfs_bytes += moved - to_buffer;
            a.buffer_bytes += to_buffer;
            a.remaining -= moved;
            if to_buffer > 0.0 {
                *inflow.entry(a.pool.expect("transferring app has a pool")).or_default() += to_buffer;
            }
        }
        for (id, pool) in &mut self.pools {
            let bytes_in = inflow.get(id).copied().unwrap_or(0.0);
            self.buffered_in += bytes_in;
            self.drained += advance_buffer(&mut pool.partition, bytes_in / tau, pool.drain_rate, tau);
            let p = &pool.partition;
            InvariantReport::note(&mut self.invariants.max_occupancy_violation, -p.occupancy);
            InvariantReport::note(
                &mut self.invariants.max_occupancy_violation,
                p.occupancy - p.buffer_capacity as f64,
            );
        }
        self.settled_at = t;
    }

    fn on_arrival(&mut self, group: Vec<usize>) -> Result<(), SimError> {
        for &i in &group {
            let a = &mut self.apps[i];
            a.phase = Phase::Compute;
            let at = self.now + a.spec.compute_work;
            self.push(at, EventKind::ComputeDone(i));
        }
        match self.config.scheduler {
            SchedulerKind::Dpsac => self.dpsac_arrival(&group),
            SchedulerKind::Mcios | SchedulerKind::Bios => {
                self.global_arrival(&group);
                Ok(())
            }
        }
    }

    fn global_arrival(&mut self, group: &[usize]) {
        let system = &self.config.system;
        let fresh = !self.pools.contains_key(&GLOBAL_POOL);
        if fresh {
            self.pools.insert(
                GLOBAL_POOL,
                Pool {
                    members: BTreeSet::new(),
                    dist: LoadDistribution::empty(),
                    partition: Partition {
                        cluster: GLOBAL_POOL,
                        expected_load: 0.0,
                        share: 1.0,
                        buffer_capacity: system.buffer_size,
                        drain_budget: system.pfs_bandwidth,
                        occupancy: 0.0,
                        drain_debt: 0.0,
                    },
                    dt: 0.0,
                    centroid: 0.0,
                    drain_rate: 0.0,
                    epoch: 0,
                },
            );
            self.max_clusters = 1;
        }
        for &i in group {
            self.join_pool(GLOBAL_POOL, i);
        }
        if fresh {
            self.restart_ticks();
        }
    }

    fn join_pool(&mut self, id: ClusterId, app: usize) {
        let a = &mut self.apps[app];
        a.pool = Some(id);
        let (b, p) = (a.spec.bandwidth, a.probability);
        let pool = self.pools.get_mut(&id).expect("pool exists");
        pool.members.insert(app);
        pool.dist.add_app(b, p).expect("validated application");
        pool.partition.expected_load += p * b as f64;
        self.refresh_time_unit(id);
    }

    fn refresh_time_unit(&mut self, id: ClusterId) {
        let pool = &self.pools[&id];
        if let Some(dt) = mean_io(pool.members.iter().map(|&i| &self.apps[i])) {
            let pool = self.pools.get_mut(&id).expect("pool exists");
            pool.dt = dt;
            pool.centroid = dt;
        }
    }

    fn member(&self, i: usize) -> Member {
        Member {
            app: AppId(i as u32),
            length: self.apps[i].spec.io_time,
        }
    }

    fn fresh_updater(&mut self) {
        self.updater = Some(Updater::new(
            self.config.updater,
            &self.config.updater_config,
            &self.clusters,
        ));
    }

    fn dpsac_arrival(&mut self, group: &[usize]) -> Result<(), SimError> {
        let mut changed = false;
        match batch_policy(group.len(), &self.clusters) {
            BatchAction::ClusterAndMerge => {
                let members: Vec<Member> = group.iter().map(|&i| self.member(i)).collect();
                let new = cluster_batch(&members, self.config.updater_config.max_clusters, &mut self.ids)?;
                let old = std::mem::take(&mut self.clusters);
                self.clusters = merge_clusters(new, old);
                self.fresh_updater();
                changed = true;
            }
            BatchAction::Insert => {
                for &i in group {
                    let member = self.member(i);
                    if self.clusters.is_empty() {
                        let id = self.ids.next_id();
                        self.clusters.push(Cluster::new(id, vec![member]).expect("non-empty"));
                        self.fresh_updater();
                        changed = true;
                        continue;
                    }
                    let updater = self.updater.as_mut().expect("clusters imply an updater");
                    let outcome =
                        updater.insert(&mut self.clusters, member, &mut self.ids, &mut self.upd_rng)?;
                    if outcome.layout_changed() {
                        changed = true;
                    } else if !changed {
                        self.join_pool(outcome.cluster, i);
                    }
                }
            }
        }
        if changed {
            self.repartition_all()?;
        }
        Ok(())
    }

    /// Rebuilds every pool from the current clusters, carrying buffered bytes
    /// along cluster lineage, and restarts all pools' ticks now.
    fn repartition_all(&mut self) -> Result<(), SimError> {
        self.repartitions += 1;
        let mut loads = Vec::with_capacity(self.clusters.len());
        let mut memberships = Vec::with_capacity(self.clusters.len());
        for c in &self.clusters {
            let members: BTreeSet<usize> = c.members().iter().map(|m| m.app.0 as usize).collect();
            let eio = members
                .iter()
                .map(|&i| self.apps[i].probability * self.apps[i].spec.bandwidth as f64)
                .sum();
            loads.push(ClusterLoad {
                id: c.id,
                expected_load: eio,
                centroid: c.centroid(),
            });
            memberships.push(members);
        }
        let mut lineage = Lineage::new();
        for (old_id, pool) in &self.pools {
            if loads.iter().any(|l| l.id == *old_id) {
                continue;
            }
            let mut successors: Vec<ClusterId> = Vec::new();
            for (load, members) in loads.iter().zip(&memberships) {
                if !pool.members.is_disjoint(members) {
                    successors.push(load.id);
                }
            }
            if successors.is_empty() {
                if let Some(closest) = loads.iter().min_by(|a, b| {
                    (a.centroid - pool.centroid)
                        .abs()
                        .total_cmp(&(b.centroid - pool.centroid).abs())
                }) {
                    successors.push(closest.id);
                }
            }
            lineage.insert(*old_id, successors);
        }
        let old: Vec<Partition> = self.pools.values().map(|p| p.partition.clone()).collect();
        let layout = repartition(&old, &loads, &lineage, &self.config.system)?;

        for a in &mut self.apps {
            a.pfs_rate = 0.0;
            a.buffer_rate = 0.0;
            a.epoch += 1;
        }
        self.pools.clear();
        for (partition, members) in layout.partitions.into_iter().zip(memberships) {
            let id = partition.cluster;
            let mut dist = LoadDistribution::empty();
            for &i in &members {
                let a = &mut self.apps[i];
                a.pool = Some(id);
                dist.add_app(a.spec.bandwidth, a.probability)?;
            }
            self.pools.insert(
                id,
                Pool {
                    members,
                    dist,
                    partition,
                    dt: 0.0,
                    centroid: 0.0,
                    drain_rate: 0.0,
                    epoch: 0,
                },
            );
            self.refresh_time_unit(id);
        }
        self.max_clusters = self.max_clusters.max(self.pools.len());
        self.restart_ticks();
        Ok(())
    }

    fn restart_ticks(&mut self) {
        let ids: Vec<ClusterId> = self.pools.keys().copied().collect();
        for id in ids {
            self.pool_epoch += 1;
            let epoch = self.pool_epoch;
            let pool = self.pools.get_mut(&id).expect("listed above");
            pool.epoch = epoch;
            pool.drain_rate = 0.0;
            self.push(self.now, EventKind::Tick { pool: id, epoch });
        }
    }

    fn on_io_done(&mut self, app: usize) -> Result<(), SimError> {
        let a = &mut self.apps[app];
        // settle leaves at most rounding residue; attribute it by rate share
        if a.remaining > 0.0 {
            let rate = a.rate();
            let to_buffer = if rate > 0.0 {
                a.remaining * a.buffer_rate / rate
            } else {
                0.0
            };
            a.pfs_bytes += a.remaining - to_buffer;
            a.buffer_bytes += to_buffer;
            if to_buffer > 0.0 {
                let id = a.pool.expect("transferring app has a pool");
                self.buffered_in += to_buffer;
                if let Some(pool) = self.pools.get_mut(&id) {
                    pool.partition.deposit(to_buffer);
                }
            }
            a.remaining = 0.0;
        }
        a.pfs_rate = 0.0;
        a.buffer_rate = 0.0;
        a.epoch += 1;
        a.completed += 1;
        if a.completed < a.spec.instances {
            a.phase = Phase::Compute;
            let at = self.now + a.spec.compute_work;
            self.push(at, EventKind::ComputeDone(app));
            return Ok(());
        }
        a.phase = Phase::Done;
        a.completion = Some(self.now);
        self.done += 1;
        let expected = a.spec.instances as f64 * a.spec.io_volume();
        let drift = (a.pfs_bytes + a.buffer_bytes - expected).abs();
        InvariantReport::note(&mut self.invariants.max_app_byte_drift, drift);
        self.on_exit(app)
    }

    fn on_exit(&mut self, app: usize) -> Result<(), SimError> {
        let a = &self.apps[app];
        let (b, p) = (a.spec.bandwidth, a.probability);
        let id = a.pool.expect("live app has a pool");
        if let Some(pool) = self.pools.get_mut(&id) {
            pool.members.remove(&app);
            pool.dist.remove_app(b, p)?;
            pool.partition.expected_load -= p * b as f64;
        }
        self.refresh_time_unit(id);
        if self.config.scheduler != SchedulerKind::Dpsac {
            return Ok(());
        }
        let updater = self.updater.as_mut().expect("clusters imply an updater");
        let removal = updater.remove(
            &mut self.clusters,
            AppId(app as u32),
            &mut self.ids,
            &mut self.upd_rng,
        )?;
        // with no cluster left the pool keeps draining until one reappears
        if removal.deleted && !self.clusters.is_empty() {
            self.repartition_all()?;
        }
        Ok(())
    }

    fn pending(&self, members: &BTreeSet<usize>) -> Vec<(usize, PendingApp)> {
        members
            .iter()
            .filter(|&&i| self.apps[i].phase == Phase::Io && self.apps[i].remaining > 0.0)
            .map(|&i| {
                let a = &self.apps[i];
                (
                    i,
                    PendingApp {
                        id: AppId(i as u32),
                        bandwidth: a.spec.bandwidth,
                        nodes: a.spec.nodes,
                        release: a.release,
                        compute_work: a.spec.compute_work,
                        dedicated_efficiency: a.spec.dedicated_efficiency(),
                        completed: a.completed,
                    },
                )
            })
            .collect()
    }

    fn on_tick(&mut self, id: ClusterId) -> Result<(), SimError> {
        self.ticks += 1;
        let pool = &self.pools[&id];
        let indexed = self.pending(&pool.members);
        let pending: Vec<PendingApp> = indexed.iter().map(|(_, p)| p.clone()).collect();
        let state = PoolState {
            occupancy: pool.partition.occupancy,
            debt: pool.partition.drain_debt,
            capacity: pool.partition.buffer_capacity as f64,
            drain_budget: pool.partition.drain_budget as f64,
            dt: pool.dt,
        };
        let allocation = match self.config.scheduler {
            SchedulerKind::Dpsac | SchedulerKind::Mcios => schedule_cluster(
                &pending,
                &pool.dist,
                &state,
                self.config.strategy,
                self.now,
                self.config.options,
                &mut self.sched_rng,
            )?,
            SchedulerKind::Bios => schedule_bios(&pending, &state, self.config.strategy, self.now)?,
        };
        let members: Vec<usize> = pool.members.iter().copied().collect();
        let dt = pool.dt;

        for &i in &members {
            let a = &mut self.apps[i];
            a.pfs_rate = 0.0;
            a.buffer_rate = 0.0;
            a.epoch += 1;
        }
        for rate in &allocation.rates {
            let i = rate.app.0 as usize;
            let a = &mut self.apps[i];
            a.pfs_rate = rate.pfs_rate;
            a.buffer_rate = rate.buffer_rate;
            InvariantReport::note(
                &mut self.invariants.max_app_overrate,
                rate.total() - a.spec.bandwidth as f64,
            );
            let total = a.rate();
            if total > 0.0 {
                let at = self.now + a.remaining / total;
                let epoch = a.epoch;
                self.push(at, EventKind::IoDone { app: i, epoch });
            }
        }
        let pool = self.pools.get_mut(&id).expect("ticking pool exists");
        pool.drain_rate = allocation.drain_rate;
        InvariantReport::note(
            &mut self.invariants.max_pool_overuse,
            allocation.pfs_usage() - state.drain_budget,
        );
        let global: f64 = self
            .pools
            .values()
            .map(|p| p.drain_rate)
            .sum::<f64>()
            + self.apps.iter().map(|a| a.pfs_rate).sum::<f64>();
        InvariantReport::note(
            &mut self.invariants.max_global_overuse,
            global - self.config.system.pfs_bandwidth as f64,
        );
        if self.config.record_trace {
            self.trace.push(TickRecord {
                time: self.now,
                pool: id,
                dt,
                rates: allocation.rates.clone(),
                drain_rate: allocation.drain_rate,
                case: allocation.case,
            });
        }
        let epoch = self.pools[&id].epoch;
        self.push(self.now + dt, EventKind::Tick { pool: id, epoch });
        Ok(())
    }
}

/// Runs one scenario to completion.
pub fn run(scenario: &ScenarioSpec, config: &SimConfig, seed: u64) -> Result<MetricsReport, SimError> {
    scenario.validate()?;
    config.system.validate()?;
    let engine = Engine::new(scenario, config, seed);
    let (apps, engine) = engine.run()?;

    let reports: Vec<AppReport> = apps
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let rho = a.spec.dedicated_efficiency();
            let (efficiency, dilation) = match a.completion {
                Some(d) => {
                    let eff = a.spec.instances as f64 * a.spec.compute_work / (d - a.release);
                    (eff, rho / eff)
                }
                None => (0.0, f64::INFINITY),
            };
            AppReport {
                id: AppId(i as u32),
                name: a.spec.name.clone(),
                nodes: a.spec.nodes,
                release: a.release,
                completion: a.completion,
                dedicated_efficiency: rho,
                efficiency,
                dilation,
                pfs_bytes: a.pfs_bytes,
                buffer_bytes: a.buffer_bytes,
                expected_bytes: a.spec.instances as f64 * a.spec.io_volume(),
            }
        })
        .collect();
    let metrics = compute_metrics(&reports)?;
    let held: f64 = engine.pools.values().map(|p| p.partition.buffered()).sum();
    let mut invariants = engine.invariants;
    invariants.buffer_byte_drift = (engine.buffered_in - engine.drained - held).abs();
    Ok(MetricsReport {
        scenario: scenario.name.clone(),
        scheduler: config.scheduler,
        updater: config.updater,
        strategy: config.strategy,
        seed,
        metrics,
        apps: reports,
        invariants,
        end_time: engine.now,
        ticks: engine.ticks,
        repartitions: engine.repartitions,
        max_clusters: engine.max_clusters,
        trace: engine.trace,
    })
}
