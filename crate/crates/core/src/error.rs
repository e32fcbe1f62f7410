use thiserror::Error;

use crate::cluster::ClusterId;
use crate::model::AppId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("io_time {io_time} must be in (0, period = {period})")]
    InvalidTiming { io_time: f64, period: f64 },
    #[error("application bandwidth must be a positive integer")]
    ZeroBandwidth,
    #[error("application needs at least one instance")]
    ZeroInstances,
    #[error("invalid system configuration: {0}")]
    InvalidSystem(&'static str),
    #[error("scale factor {0} must be positive and finite")]
    InvalidScale(f64),
    #[error("unknown application {0:?}")]
    UnknownApplication(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("group of applications is empty")]
    EmptyGroup,
    #[error("count for {0} must be at least 1")]
    ZeroCount(String),
    #[error("join period {0} must be positive")]
    InvalidJoinPeriod(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("cannot cluster an empty set of lengths")]
    EmptyInput,
    #[error("cluster count {k} must be in 1..={n}")]
    InvalidClusterCount { k: usize, n: usize },
    #[error("range {j}..={i} is outside 1..={n}")]
    RangeOutOfBounds { j: usize, i: usize, n: usize },
    #[error("length {0} is not finite")]
    NonFinite(f64),
    #[error("elbow selection needs at least one wss value")]
    EmptyCurve,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("application bandwidth must be a positive integer")]
    ZeroBandwidth,
    #[error("transfer probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("application (B = {bandwidth}, P = {probability}) is not part of the distribution")]
    NotPresent { bandwidth: u32, probability: f64 },
    #[error("cannot remove an application that always transfers; rebuild instead")]
    CertainApplication,
    #[error("occupancy {occupancy} is outside [0, {capacity}]")]
    OccupancyOutOfRange { occupancy: f64, capacity: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("every cluster has zero expected load")]
    NoLoad,
    #[error("occupancy of {0} cannot be attributed to a surviving cluster")]
    Unattributable(ClusterId),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UpdaterError {
    #[error("online k-means needs at least two distinct centers")]
    DegenerateCenters,
    #[error("histograms have different bin layouts")]
    MismatchedBins,
    #[error("{0} is not a member of any cluster")]
    UnknownApplication(AppId),
    #[error("no cluster to insert into")]
    NoClusters,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchedulerError {
    #[error("time {t} precedes the release time {release}")]
    BeforeRelease { t: f64, release: f64 },
    #[error("gamma {0} must be in [0, 1]")]
    InvalidGamma(f64),
    #[error("unknown strategy {0:?} (expected mindilation, maxsyseff or minmax:<gamma>)")]
    UnknownStrategy(String),
    #[error(transparent)]
    Load(#[from] LoadError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Updater(#[from] UpdaterError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("run exceeded its horizon of {horizon:.0} s with {unfinished} unfinished applications")]
    Horizon { horizon: f64, unfinished: usize },
    #[error("metrics requested while {0} applications are unfinished")]
    Unfinished(usize),
}
