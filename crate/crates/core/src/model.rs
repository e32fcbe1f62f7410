//! Platform and application models, the APEX application catalog, I/O-size
//! scaling and the built-in experiment scenarios.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Identifier of one live application instance inside a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AppId(pub u32);

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "app{}", self.0)
    }
}

/// Static description of the platform: PFS bandwidth, burst-buffer size and
/// compute nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Aggregate PFS bandwidth `B` in GB/s.
    pub pfs_bandwidth: u32,
    /// Burst-buffer capacity `S` in GB.
    pub buffer_size: u32,
    /// Number of compute nodes on the platform.
    pub total_nodes: u32,
    /// Peak injection bandwidth of one node, GB/s.
    pub node_peak_bandwidth: f64,
}

impl Default for SystemConfig {
    /// The Intrepid-like configuration used by all experiments.
    fn default() -> Self {
        Self {
            pfs_bandwidth: 100,
            buffer_size: 300,
            total_nodes: 40_960,
            node_peak_bandwidth: 1.0,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.pfs_bandwidth == 0 {
            return Err(ModelError::InvalidSystem("pfs_bandwidth must be positive"));
        }
        if self.buffer_size == 0 {
            return Err(ModelError::InvalidSystem("buffer_size must be positive"));
        }
        if self.total_nodes == 0 {
            return Err(ModelError::InvalidSystem("total_nodes must be positive"));
        }
        if !(self.node_peak_bandwidth > 0.0 && self.node_peak_bandwidth.is_finite()) {
            return Err(ModelError::InvalidSystem(
                "node_peak_bandwidth must be positive",
            ));
        }
        Ok(())
    }
}

/// Fraction of the period spent in the I/O phase.
pub fn derive_probability(io_time: f64, period: f64) -> Result<f64, ModelError> {
    if !(io_time > 0.0 && io_time < period && period.is_finite()) {
        return Err(ModelError::InvalidTiming { io_time, period });
    }
    Ok(io_time / period)
}

/// Static parameters of a periodic (checkpointing) application.
///
/// The compute work and the I/O time are stored; the period is their sum, so
/// `compute_work + io_time == period` holds exactly for every spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationSpec {
    pub name: String,
    /// Maximum transfer rate `B_i`, GB/s.
    pub bandwidth: u32,
    /// Compute seconds per instance `W_i`.
    pub compute_work: f64,
    /// Checkpoint (I/O phase) seconds per instance at full rate.
    pub io_time: f64,
    /// Number of compute+I/O instances `N_i`.
    pub instances: u32,
    /// Compute nodes `β_i`.
    pub nodes: u32,
}

impl ApplicationSpec {
    /// Builds a spec from catalog-style parameters. The node count is derived
    /// from the bandwidth and the per-node peak bandwidth.
    pub fn new(
        name: impl Into<String>,
        bandwidth: u32,
        period: f64,
        io_time: f64,
        instances: u32,
        node_peak_bandwidth: f64,
    ) -> Result<Self, ModelError> {
        derive_probability(io_time, period)?;
        if bandwidth == 0 {
            return Err(ModelError::ZeroBandwidth);
        }
        if instances == 0 {
            return Err(ModelError::ZeroInstances);
        }
        if !(node_peak_bandwidth > 0.0) {
            return Err(ModelError::InvalidSystem(
                "node_peak_bandwidth must be positive",
            ));
        }
        let nodes = ((bandwidth as f64) / node_peak_bandwidth).round().max(1.0) as u32;
        Ok(Self {
            name: name.into(),
            bandwidth,
            compute_work: period - io_time,
            io_time,
            instances,
            nodes,
        })
    }

    pub fn period(&self) -> f64 {
        self.compute_work + self.io_time
    }

    /// `P_i`, always recomputed from the I/O time and the period.
    pub fn io_probability(&self) -> f64 {
        self.io_time / self.period()
    }

    /// GB written per instance, `IO_i = P_i T_i B_i`.
    pub fn io_volume(&self) -> f64 {
        self.io_time * self.bandwidth as f64
    }

    /// Dedicated-mode efficiency `ρ_i = W_i / T_i`.
    pub fn dedicated_efficiency(&self) -> f64 {
        self.compute_work / self.period()
    }

    /// Expected bandwidth demand per time unit, `P_i B_i`.
    pub fn expected_load(&self) -> f64 {
        self.io_probability() * self.bandwidth as f64
    }

    pub fn with_instances(mut self, instances: u32) -> Self {
        self.instances = instances;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        derive_probability(self.io_time, self.period())?;
        if self.bandwidth == 0 {
            return Err(ModelError::ZeroBandwidth);
        }
        if self.instances == 0 {
            return Err(ModelError::ZeroInstances);
        }
        if self.nodes == 0 {
            return Err(ModelError::InvalidSystem("application needs at least one node"));
        }
        Ok(())
    }
}

/// The four APEX workflows: EAP, LAP, Silverton and VPIC.
pub fn apex_catalog() -> Vec<ApplicationSpec> {
    let peak = SystemConfig::default().node_peak_bandwidth;
    [
        ("EAP", 13, 160, 5671.0, 20.0),
        ("LAP", 4, 80, 12682.0, 25.0),
        ("Silverton", 2, 160, 15005.0, 280.0),
        ("VPIC", 1, 160, 4483.0, 23.4),
    ]
    .into_iter()
    .map(|(name, inst, bw, period, io)| {
        ApplicationSpec::new(name, bw, period, io, inst, peak).expect("catalog entries are valid")
    })
    .collect()
}

/// Looks up a catalog application by name, accepting a scale suffix such as
/// `EAP10` or `Silverton0.5`.
pub fn catalog_app(name: &str) -> Result<ApplicationSpec, ModelError> {
    let catalog = apex_catalog();
    let base = catalog
        .iter()
        .filter(|spec| name.starts_with(spec.name.as_str()))
        .max_by_key(|spec| spec.name.len())
        .ok_or_else(|| ModelError::UnknownApplication(name.to_string()))?;
    let suffix = &name[base.name.len()..];
    if suffix.is_empty() {
        return Ok(base.clone());
    }
    let factor: f64 = suffix
        .parse()
        .map_err(|_| ModelError::UnknownApplication(name.to_string()))?;
    scale_application(base, factor)
}

/// Scales the I/O phase length by `factor` while keeping the compute work
/// fixed; the period follows the I/O time.
pub fn scale_application(spec: &ApplicationSpec, factor: f64) -> Result<ApplicationSpec, ModelError> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(ModelError::InvalidScale(factor));
    }
    if factor == 1.0 {
        return Ok(spec.clone());
    }
    let scaled = ApplicationSpec {
        name: format!("{}{}", spec.name, factor),
        io_time: spec.io_time * factor,
        ..spec.clone()
    };
    if scaled.io_time >= scaled.period() {
        return Err(ModelError::InvalidTiming {
            io_time: scaled.io_time,
            period: scaled.period(),
        });
    }
    Ok(scaled)
}

/// Mean I/O time of a group of applications: the discretization quantum of
/// the probabilistic model.
pub fn time_unit<'a>(apps: impl IntoIterator<Item = &'a ApplicationSpec>) -> Result<f64, ModelError> {
    let (sum, n) = apps
        .into_iter()
        .fold((0.0, 0usize), |(s, n), a| (s + a.io_time, n + 1));
    if n == 0 {
        return Err(ModelError::EmptyGroup);
    }
    Ok(sum / n as f64)
}

/// `count` copies of one application released together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub spec: ApplicationSpec,
    pub count: u32,
}

/// An application that joins every `period` seconds, one copy per join.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicJoin {
    pub spec: ApplicationSpec,
    pub period: f64,
    pub instances: u32,
}

impl PeriodicJoin {
    /// The joining application, with its per-join instance count applied.
    pub fn joiner(&self) -> ApplicationSpec {
        self.spec.clone().with_instances(self.instances)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub initial_batch: Vec<BatchEntry>,
    #[serde(default)]
    pub periodic_joins: Vec<PeriodicJoin>,
    /// Joins happen at `k * period` for `k >= 1` while strictly before this
    /// time. `None` means no joins are generated.
    #[serde(default)]
    pub join_until: Option<f64>,
}

impl ScenarioSpec {
    /// `K_A`, the number of applications in the initial batch.
    pub fn application_count(&self) -> u32 {
        self.initial_batch.iter().map(|e| e.count).sum()
    }

    /// `TEIO` of the initial batch, `Σ P_i B_i`.
    pub fn total_expected_load(&self) -> f64 {
        self.initial_batch
            .iter()
            .map(|e| e.count as f64 * e.spec.expected_load())
            .sum()
    }

    /// Join times of every periodic joiner, sorted by time then by join
    /// declaration order.
    pub fn join_schedule(&self) -> Vec<(f64, ApplicationSpec)> {
        let Some(until) = self.join_until else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (order, join) in self.periodic_joins.iter().enumerate() {
            let mut k = 1u32;
            loop {
                let at = join.period * k as f64;
                if at >= until {
                    break;
                }
                out.push((at, order, join.joiner()));
                k += 1;
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.into_iter().map(|(t, _, spec)| (t, spec)).collect()
    }

    /// Keeps only the periodic joiner named `name`.
    pub fn with_only_joiner(mut self, name: &str) -> Result<Self, ModelError> {
        self.periodic_joins.retain(|j| j.spec.name == name);
        if self.periodic_joins.is_empty() {
            return Err(ModelError::UnknownApplication(name.to_string()));
        }
        self.name = format!("{}:{}", self.name, name);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.initial_batch.is_empty() {
            return Err(ModelError::EmptyGroup);
        }
        for entry in &self.initial_batch {
            entry.spec.validate()?;
            if entry.count == 0 {
                return Err(ModelError::ZeroCount(entry.spec.name.clone()));
            }
        }
        for join in &self.periodic_joins {
            join.spec.validate()?;
            if !(join.period > 0.0 && join.period.is_finite()) {
                return Err(ModelError::InvalidJoinPeriod(join.period));
            }
            if join.instances == 0 {
                return Err(ModelError::ZeroCount(join.spec.name.clone()));
            }
        }
        Ok(())
    }

    /// Warns when the expected aggregate load reaches the PFS bandwidth.
    /// Returns whether the scenario is overloaded.
    pub fn check_expected_load(&self, system: &SystemConfig) -> bool {
        let teio = self.total_expected_load();
        let overloaded = teio >= system.pfs_bandwidth as f64;
        if overloaded {
            log::warn!(
                "scenario {}: expected load {teio:.3} GB/s reaches PFS bandwidth {} GB/s",
                self.name,
                system.pfs_bandwidth
            );
        }
        overloaded
    }
}

/// Names of the built-in scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    /// One of the ten congestion sets, 1..=10.
    Set(u8),
    /// The mixed batch used as the starting point of the dynamic runs.
    Batch,
    /// The batch plus all three periodic joiners.
    Dynamic,
}

impl FromStr for ScenarioId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "batch" => return Ok(ScenarioId::Batch),
            "dynamic" => return Ok(ScenarioId::Dynamic),
            _ => {}
        }
        let digits = lower.strip_prefix("set").unwrap_or(&lower);
        let digits = digits.strip_prefix('#').unwrap_or(digits);
        match digits.parse::<u8>() {
            Ok(n) if (1..=10).contains(&n) => Ok(ScenarioId::Set(n)),
            _ => Err(ModelError::UnknownScenario(s.to_string())),
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioId::Set(n) => write!(f, "set{n}"),
            ScenarioId::Batch => f.write_str("batch"),
            ScenarioId::Dynamic => f.write_str("dynamic"),
        }
    }
}

/// Composition of the ten congestion sets, one row per application kind and
/// one column per set.
const SET_TABLE: [(&str, [u32; 10]); 9] = [
    ("EAP", [0, 0, 0, 0, 1, 0, 0, 0, 1, 0]),
    ("LAP", [10, 8, 6, 4, 2, 3, 2, 2, 0, 1]),
    ("VPIC", [0, 0, 0, 0, 0, 0, 1, 0, 1, 0]),
    ("EAP5", [0, 0, 0, 1, 0, 0, 1, 0, 0, 1]),
    ("LAP5", [2, 1, 1, 1, 1, 0, 0, 0, 0, 0]),
    ("Silverton0.5", [0, 0, 0, 1, 1, 1, 0, 2, 0, 1]),
    ("EAP10", [0, 0, 1, 1, 0, 0, 1, 0, 0, 0]),
    ("VPIC10", [0, 1, 0, 1, 1, 0, 0, 1, 0, 0]),
    ("Silverton", [1, 0, 0, 1, 1, 1, 0, 0, 1, 0]),
];

const BATCH_TABLE: [(&str, u32, u32); 6] = [
    ("EAP", 1, 13),
    ("LAP", 2, 4),
    ("LAP5", 1, 2),
    ("Silverton0.5", 1, 2),
    ("VPIC10", 1, 1),
    ("Silverton", 1, 1),
];

const JOIN_TABLE: [(&str, f64, u32); 3] = [
    ("EAP", 6.0 * 5671.0, 5),
    ("LAP5", 3.0 * 12682.0, 2),
    ("Silverton", 2.0 * 15005.0, 1),
];

/// Builds one of the built-in scenarios. Pure: repeated calls return equal
/// values.
pub fn build_scenario(id: ScenarioId) -> Result<ScenarioSpec, ModelError> {
    let scenario = match id {
        ScenarioId::Set(n) => {
            if !(1..=10).contains(&n) {
                return Err(ModelError::UnknownScenario(format!("set{n}")));
            }
            let col = (n - 1) as usize;
            let initial_batch = SET_TABLE
                .iter()
                .filter(|(_, counts)| counts[col] > 0)
                .map(|(name, counts)| {
                    Ok(BatchEntry {
                        spec: catalog_app(name)?,
                        count: counts[col],
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            ScenarioSpec {
                name: id.to_string(),
                initial_batch,
                periodic_joins: Vec::new(),
                join_until: None,
            }
        }
        ScenarioId::Batch => ScenarioSpec {
            name: id.to_string(),
            initial_batch: batch_entries()?,
            periodic_joins: Vec::new(),
            join_until: None,
        },
        ScenarioId::Dynamic => {
            let initial_batch = batch_entries()?;
            // joins stop once the longest batch application would have
            // finished in dedicated mode
            let until = initial_batch
                .iter()
                .map(|e| e.spec.instances as f64 * e.spec.period())
                .fold(0.0, f64::max);
            let periodic_joins = JOIN_TABLE
                .iter()
                .map(|(name, period, instances)| {
                    Ok(PeriodicJoin {
                        spec: catalog_app(name)?,
                        period: *period,
                        instances: *instances,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            ScenarioSpec {
                name: id.to_string(),
                initial_batch,
                periodic_joins,
                join_until: Some(until),
            }
        }
    };
    debug_assert!(scenario.validate().is_ok());
    scenario.check_expected_load(&SystemConfig::default());
    Ok(scenario)
}

fn batch_entries() -> Result<Vec<BatchEntry>, ModelError> {
    BATCH_TABLE
        .iter()
        .map(|(name, count, instances)| {
            Ok(BatchEntry {
                spec: catalog_app(name)?.with_instances(*instances),
                count: *count,
            })
        })
        .collect()
}

/// Resolves selectors such as `set5`, `batch`, `dynamic` or `dynamic:EAP`.
pub fn scenario_by_name(selector: &str) -> Result<ScenarioSpec, ModelError> {
    match selector.split_once(':') {
        Some((base, joiner)) => {
            let id: ScenarioId = base.parse()?;
            if id != ScenarioId::Dynamic {
                return Err(ModelError::UnknownScenario(selector.to_string()));
            }
            build_scenario(id)?.with_only_joiner(joiner)
        }
        None => build_scenario(selector.parse()?),
    }
}

/// Every selector accepted by [`scenario_by_name`].
pub fn scenario_names() -> Vec<String> {
    let mut names: Vec<String> = (1..=10).map(|n| format!("set{n}")).collect();
    names.push("batch".into());
    names.push("dynamic".into());
    names.extend(JOIN_TABLE.iter().map(|(name, _, _)| format!("dynamic:{name}")));
    names
}
