//! Per-tick bandwidth allocation.
//!
//! [`schedule_cluster`] is the probabilistic scheduler run independently for
//! every cluster on its own partition; [`schedule_mcios`] runs the same
//! algorithm on one global pool and [`schedule_bios`] is plain priority
//! scheduling with a first-come buffer.
//!
//! Rates are GB/s. A pool's buffer state is in GB, so quantities that the
//! probabilistic model compares against per-time-unit loads are divided by
//! the pool's time unit `dt`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SchedulerError;
use crate::load::{p_full, LoadDistribution};
use crate::model::{AppId, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    /// Most delayed application first.
    MinDilation,
    /// Largest recoverable processor work first.
    MaxSysEff,
    /// Weighted rank blend; `gamma = 1` is MinDilation, `0` is MaxSysEff.
    MinMax { gamma: f64 },
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::MinMax { gamma: 0.5 }
    }
}

impl Strategy {
    pub fn min_max(gamma: f64) -> Result<Self, SchedulerError> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(SchedulerError::InvalidGamma(gamma));
        }
        Ok(Strategy::MinMax { gamma })
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            Strategy::MinMax { gamma } => Some(*gamma),
            _ => None,
        }
    }

    /// Short name without the parameter.
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::MinDilation => "mindilation",
            Strategy::MaxSysEff => "maxsyseff",
            Strategy::MinMax { .. } => "minmax",
        }
    }
}

impl FromStr for Strategy {
    type Err = SchedulerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "mindilation" | "min-dilation" => return Ok(Strategy::MinDilation),
            "maxsyseff" | "max-sys-eff" => return Ok(Strategy::MaxSysEff),
            "minmax" => return Ok(Strategy::default()),
            _ => {}
        }
        let gamma = lower
            .strip_prefix("minmax")
            .map(|rest| rest.trim_start_matches([':', '-', '=']))
            .and_then(|g| g.parse::<f64>().ok())
            .ok_or_else(|| SchedulerError::UnknownStrategy(s.to_string()))?;
        Strategy::min_max(gamma)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::MinMax { gamma } => write!(f, "minmax:{gamma}"),
            other => f.write_str(other.name()),
        }
    }
}

/// What the scheduler needs to know about an application waiting for I/O.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingApp {
    pub id: AppId,
    pub bandwidth: u32,
    pub nodes: u32,
    pub release: f64,
    pub compute_work: f64,
    /// `ρ_i`.
    pub dedicated_efficiency: f64,
    /// Instances fully completed so far.
    pub completed: u32,
}

/// `ρ̃_i(t) = n_i(t) W_i / (t - r_i)`, equal to `ρ_i` at `t = r_i`.
pub fn efficiency_now(app: &PendingApp, t: f64) -> Result<f64, SchedulerError> {
    if t < app.release {
        return Err(SchedulerError::BeforeRelease {
            t,
            release: app.release,
        });
    }
    if t == app.release {
        return Ok(app.dedicated_efficiency);
    }
    Ok(app.completed as f64 * app.compute_work / (t - app.release))
}

fn tie_break(a: &PendingApp, b: &PendingApp) -> Ordering {
    a.release.total_cmp(&b.release).then(a.id.cmp(&b.id))
}

fn sorted_by_key(apps: &[PendingApp], keys: &[f64], descending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..apps.len()).collect();
    order.sort_by(|&i, &j| {
        let primary = if descending {
            keys[j].total_cmp(&keys[i])
        } else {
            keys[i].total_cmp(&keys[j])
        };
        primary.then_with(|| tie_break(&apps[i], &apps[j]))
    });
    order
}

/// Indices of `apps` from highest to lowest priority at time `t`.
pub fn priority_order(
    apps: &[PendingApp],
    strategy: Strategy,
    t: f64,
) -> Result<Vec<usize>, SchedulerError> {
    let eff: Vec<f64> = apps
        .iter()
        .map(|a| efficiency_now(a, t))
        .collect::<Result<_, _>>()?;
    let slowdown: Vec<f64> = apps
        .iter()
        .zip(&eff)
        .map(|(a, &e)| e / a.dedicated_efficiency)
        .collect();
    let recoverable: Vec<f64> = apps
        .iter()
        .zip(&eff)
        .map(|(a, &e)| a.nodes as f64 * (a.dedicated_efficiency - e))
        .collect();
    match strategy {
        Strategy::MinDilation => Ok(sorted_by_key(apps, &slowdown, false)),
        Strategy::MaxSysEff => Ok(sorted_by_key(apps, &recoverable, true)),
        Strategy::MinMax { gamma } => {
            let mut rank_md = vec![0.0; apps.len()];
            for (pos, &i) in sorted_by_key(apps, &slowdown, false).iter().enumerate() {
                rank_md[i] = pos as f64;
            }
            let mut rank_ms = vec![0.0; apps.len()];
            for (pos, &i) in sorted_by_key(apps, &recoverable, true).iter().enumerate() {
                rank_ms[i] = pos as f64;
            }
            let score: Vec<f64> = rank_md
                .iter()
                .zip(&rank_ms)
                .map(|(md, ms)| gamma * md + (1.0 - gamma) * ms)
                .collect();
            Ok(sorted_by_key(apps, &score, false))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppRate {
    pub app: AppId,
    /// Direct transfer to the PFS, GB/s.
    pub pfs_rate: f64,
    /// Transfer into the burst buffer, GB/s.
    pub buffer_rate: f64,
}

impl AppRate {
    pub fn total(&self) -> f64 {
        self.pfs_rate + self.buffer_rate
    }
}

/// Which branch of the cluster scheduler produced an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AllocationCase {
    /// Every pending application fits in the drain budget.
    Uncongested,
    /// Selected applications overflow into the buffer.
    Buffered,
    /// Deterministic truncation at the drain budget.
    Truncated,
    /// Priority walk of the BIOS baseline.
    Greedy,
}

/// Rates for one scheduling interval of one pool. Every pending application
/// appears, possibly with zero rates, in priority order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub rates: Vec<AppRate>,
    /// PFS bandwidth spent emptying the buffer, GB/s.
    pub drain_rate: f64,
    pub case: AllocationCase,
}

impl Allocation {
    pub fn pfs_total(&self) -> f64 {
        self.rates.iter().map(|r| r.pfs_rate).sum()
    }

    pub fn buffer_total(&self) -> f64 {
        self.rates.iter().map(|r| r.buffer_rate).sum()
    }

    /// Allocated PFS bandwidth including draining.
    pub fn pfs_usage(&self) -> f64 {
        self.pfs_total() + self.drain_rate
    }

    pub fn rate_of(&self, app: AppId) -> Option<&AppRate> {
        self.rates.iter().find(|r| r.app == app)
    }

    /// GB drained during one interval of `dt` seconds with no inflow.
    pub fn drain_amount(&self, occupancy: f64, dt: f64) -> f64 {
        occupancy.min(self.drain_rate * dt)
    }
}

/// Buffer partition and bandwidth budget of one scheduling pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolState {
    /// GB buffered, within `capacity`.
    pub occupancy: f64,
    /// GB buffered beyond `capacity` after a repartition.
    pub debt: f64,
    pub capacity: f64,
    /// GB/s of PFS bandwidth owned by the pool.
    pub drain_budget: f64,
    /// Scheduling interval, seconds.
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScheduleOptions {
    /// Accept buffered transfers when `(Σ B - budget) dt - L < capacity`
    /// instead of requiring `L + (Σ B - budget) dt <= capacity`. Buffer
    /// rates are still clamped to the free space.
    pub literal_feasibility: bool,
}

fn full_rate(app: &PendingApp) -> AppRate {
    AppRate {
        app: app.id,
        pfs_rate: app.bandwidth as f64,
        buffer_rate: 0.0,
    }
}

fn idle(app: &PendingApp) -> AppRate {
    AppRate {
        app: app.id,
        pfs_rate: 0.0,
        buffer_rate: 0.0,
    }
}

/// Probabilistic scheduling of one cluster's pending applications.
///
/// When the pending demand fits in the drain budget everyone runs at full
/// rate and the rest of the budget drains the buffer. Otherwise the
/// applications before the cutoff rank `m` always transfer and the ones from
/// `m` on are drawn with probability `P_full^(i-m) (1 - P_full)`; if the
/// selection overflows the budget and the overflow fits in the buffer it is
/// buffered, else the allocation is truncated at the budget.
pub fn schedule_cluster<R: Rng + ?Sized>(
    pending: &[PendingApp],
    dist: &LoadDistribution,
    pool: &PoolState,
    strategy: Strategy,
    t: f64,
    options: ScheduleOptions,
    rng: &mut R,
) -> Result<Allocation, SchedulerError> {
    let order = priority_order(pending, strategy, t)?;
    let budget = pool.drain_budget;
    let demand: f64 = pending.iter().map(|a| a.bandwidth as f64).sum();
    if demand <= budget {
        return Ok(Allocation {
            rates: order.iter().map(|&i| full_rate(&pending[i])).collect(),
            drain_rate: budget - demand,
            case: AllocationCase::Uncongested,
        });
    }

    // with debt the partition is effectively full
    let occupancy = if pool.debt > 0.0 {
        pool.capacity
    } else {
        pool.occupancy.min(pool.capacity)
    };
    let prob_full = p_full(
        dist,
        occupancy / pool.dt,
        pool.capacity / pool.dt,
        budget,
    )?;

    // cutoff: first rank whose prefix demand reaches the budget
    let mut cutoff = order.len() - 1;
    let mut prefix = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        prefix += pending[i].bandwidth as f64;
        if prefix >= budget {
            cutoff = rank;
            break;
        }
    }

    let mut selected = vec![false; order.len()];
    for (rank, sel) in selected.iter_mut().enumerate() {
        if rank < cutoff {
            *sel = true;
        } else {
            let p = prob_full.powi((rank - cutoff) as i32) * (1.0 - prob_full);
            let draw: f64 = rng.gen();
            *sel = draw < p;
        }
    }
    let chosen: f64 = order
        .iter()
        .zip(&selected)
        .filter(|(_, &s)| s)
        .map(|(&i, _)| pending[i].bandwidth as f64)
        .sum();
    let overflow = (chosen - budget) * pool.dt;
    let fits = if options.literal_feasibility {
        overflow - occupancy < pool.capacity
    } else {
        occupancy + overflow <= pool.capacity
    };

    if chosen >= budget && pool.debt <= 0.0 && fits {
        let mut room = budget;
        let mut space = ((pool.capacity - occupancy) / pool.dt).max(0.0);
        let rates = order
            .iter()
            .zip(&selected)
            .map(|(&i, &sel)| {
                let app = &pending[i];
                if !sel {
                    return idle(app);
                }
                let b = app.bandwidth as f64;
                let pfs_rate = b.min(room);
                room -= pfs_rate;
                let buffer_rate = (b - pfs_rate).min(space);
                space -= buffer_rate;
                AppRate {
                    app: app.id,
                    pfs_rate,
                    buffer_rate,
                }
            })
            .collect();
        return Ok(Allocation {
            rates,
            drain_rate: 0.0,
            case: AllocationCase::Buffered,
        });
    }

    let mut used = 0.0;
    let rates = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let app = &pending[i];
            match rank.cmp(&cutoff) {
                Ordering::Less => {
                    used += app.bandwidth as f64;
                    full_rate(app)
                }
                Ordering::Equal => AppRate {
                    app: app.id,
                    pfs_rate: (budget - used).max(0.0),
                    buffer_rate: 0.0,
                },
                Ordering::Greater => idle(app),
            }
        })
        .collect();
    Ok(Allocation {
        rates,
        drain_rate: 0.0,
        case: AllocationCase::Truncated,
    })
}

/// The global pool of the single-pool baselines: the whole buffer and all of
/// the PFS bandwidth.
pub fn global_pool(system: &SystemConfig, occupancy: f64, dt: f64) -> PoolState {
    PoolState {
        occupancy,
        debt: 0.0,
        capacity: system.buffer_size as f64,
        drain_budget: system.pfs_bandwidth as f64,
        dt,
    }
}

/// The probabilistic scheduler on one pool holding every application.
#[allow(clippy::too_many_arguments)]
pub fn schedule_mcios<R: Rng + ?Sized>(
    pending: &[PendingApp],
    dist: &LoadDistribution,
    system: &SystemConfig,
    occupancy: f64,
    dt: f64,
    strategy: Strategy,
    t: f64,
    options: ScheduleOptions,
    rng: &mut R,
) -> Result<Allocation, SchedulerError> {
    let pool = global_pool(system, occupancy, dt);
    schedule_cluster(pending, dist, &pool, strategy, t, options, rng)
}

/// Priority walk granting `min(B_i, remaining)` of the PFS bandwidth; the
/// overflow goes to the buffer in the same order while it has room, and any
/// bandwidth left over drains the buffer.
pub fn schedule_bios(
    pending: &[PendingApp],
    pool: &PoolState,
    strategy: Strategy,
    t: f64,
) -> Result<Allocation, SchedulerError> {
    let order = priority_order(pending, strategy, t)?;
    let mut room = pool.drain_budget;
    let mut space = if pool.debt > 0.0 {
        0.0
    } else {
        ((pool.capacity - pool.occupancy) / pool.dt).max(0.0)
    };
    let rates = order
        .iter()
        .map(|&i| {
            let app = &pending[i];
            let b = app.bandwidth as f64;
            let pfs_rate = b.min(room);
            room -= pfs_rate;
            let buffer_rate = (b - pfs_rate).min(space);
            space -= buffer_rate;
            AppRate {
                app: app.id,
                pfs_rate,
                buffer_rate,
            }
        })
        .collect();
    Ok(Allocation {
        rates,
        drain_rate: room,
        case: AllocationCase::Greedy,
    })
}
