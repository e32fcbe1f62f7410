//! Instantaneous I/O load distribution of a group of applications and the
//! buffer-occupancy Markov chain built on top of it.
//!
//! Each application transfers at its full rate `B_i` during a time unit with
//! probability `P_i`, independently of the others. The aggregate load
//! `X = Σ B_i X_i` is integer valued (GB/s), so its law is a probability mass
//! function over `0..=Σ B_i`.

use crate::error::LoadError;

/// Exact law of the aggregate load of independent Bernoulli transfers.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadDistribution {
    pmf: Vec<f64>,
    apps: Vec<(u32, f64)>,
}

impl Default for LoadDistribution {
    fn default() -> Self {
        Self::empty()
    }
}

fn check_app(bandwidth: u32, probability: f64) -> Result<(), LoadError> {
    if bandwidth == 0 {
        return Err(LoadError::ZeroBandwidth);
    }
    if !(0.0..=1.0).contains(&probability) {
        return Err(LoadError::InvalidProbability(probability));
    }
    Ok(())
}

impl LoadDistribution {
    /// Point mass at zero load.
    pub fn empty() -> Self {
        Self {
            pmf: vec![1.0],
            apps: Vec::new(),
        }
    }

    /// Folds in every `(B_i, P_i)` pair one after another.
    pub fn build(apps: &[(u32, f64)]) -> Result<Self, LoadError> {
        let mut dist = Self::empty();
        for &(b, p) in apps {
            dist.add_app(b, p)?;
        }
        Ok(dist)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Contributing `(B_i, P_i)` pairs in insertion order.
    pub fn apps(&self) -> &[(u32, f64)] {
        &self.apps
    }

    /// Largest possible load, `Σ B_i`.
    pub fn max_load(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn prob(&self, load: usize) -> f64 {
        self.pmf.get(load).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// Adds one application in place; the support grows by `B_i`.
    pub fn add_app(&mut self, bandwidth: u32, probability: f64) -> Result<(), LoadError> {
        check_app(bandwidth, probability)?;
        let b = bandwidth as usize;
        self.pmf.resize(self.pmf.len() + b, 0.0);
        // descending so that pmf[k - b] still holds the previous value
        for k in (0..self.pmf.len()).rev() {
            let shifted = if k >= b { self.pmf[k - b] } else { 0.0 };
            self.pmf[k] = (1.0 - probability) * self.pmf[k] + probability * shifted;
        }
        self.apps.push((bandwidth, probability));
        Ok(())
    }

    /// Removes one previously added application by deconvolution; the support
    /// shrinks by `B_i`.
    pub fn remove_app(&mut self, bandwidth: u32, probability: f64) -> Result<(), LoadError> {
        check_app(bandwidth, probability)?;
        let pos = self
            .apps
            .iter()
            .position(|&(b, p)| b == bandwidth && p.to_bits() == probability.to_bits())
            .ok_or(LoadError::NotPresent {
                bandwidth,
                probability,
            })?;
        if probability >= 1.0 {
            return Err(LoadError::CertainApplication);
        }
        let b = bandwidth as usize;
        let new_len = self.pmf.len() - b;
        let mut out = vec![0.0; new_len];
        if probability <= 0.5 {
            // forward recursion: errors shrink by p / (1 - p) <= 1 per step
            for k in 0..new_len {
                let prev = if k >= b { out[k - b] } else { 0.0 };
                out[k] = (self.pmf[k] - probability * prev) / (1.0 - probability);
            }
        } else {
            // backward recursion from the top of the support is the stable
            // direction when p > 1/2
            let full = self.pmf.len();
            let mut ext = vec![0.0; full];
            for k in (b..full).rev() {
                let upper = if k < new_len { ext[k] } else { 0.0 };
                ext[k - b] = (self.pmf[k] - (1.0 - probability) * upper) / probability;
            }
            out.copy_from_slice(&ext[..new_len]);
        }
        for v in &mut out {
            *v = v.clamp(0.0, 1.0);
        }
        self.pmf = out;
        self.apps.remove(pos);
        Ok(())
    }

    /// `Pr(X >= ceil(threshold))`.
    pub fn tail(&self, threshold: f64) -> f64 {
        if threshold <= 0.0 {
            return 1.0;
        }
        let start = threshold.ceil();
        if start > self.max_load() as f64 {
            return 0.0;
        }
        self.pmf[start as usize..].iter().sum::<f64>().min(1.0)
    }
}

/// Builds the load distribution of a list of `(B_i, P_i)` pairs.
pub fn load_distribution(apps: &[(u32, f64)]) -> Result<LoadDistribution, LoadError> {
    LoadDistribution::build(apps)
}

/// One-step transition matrix of a buffer partition over occupancy states
/// `0..=capacity` (GB), when `drain` GB leave per time unit.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<f64>>,
    drain: u32,
}

impl TransitionMatrix {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn drain(&self) -> u32 {
        self.drain
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }
}

/// Interior transitions are `P[m][n] = pmf(n - m + drain)`; mass below state
/// zero collects in the empty state and mass above the capacity in the full
/// state.
pub fn transition_matrix(dist: &LoadDistribution, capacity: u32, drain: u32) -> TransitionMatrix {
    let states = capacity as usize + 1;
    let mut rows = vec![vec![0.0; states]; states];
    for (m, row) in rows.iter_mut().enumerate() {
        for (load, &p) in dist.pmf().iter().enumerate() {
            let next = m as i64 + load as i64 - drain as i64;
            let idx = next.clamp(0, capacity as i64) as usize;
            row[idx] += p;
        }
    }
    TransitionMatrix { rows, drain }
}

/// Probability that one time unit moves a partition holding `occupancy` into
/// its full state: the load reaches the free space plus what drains.
pub fn p_full(
    dist: &LoadDistribution,
    occupancy: f64,
    capacity: f64,
    drain: f64,
) -> Result<f64, LoadError> {
    if !(occupancy >= 0.0 && occupancy <= capacity) {
        return Err(LoadError::OccupancyOutOfRange {
            occupancy,
            capacity,
        });
    }
    Ok(dist.tail(capacity - occupancy + drain))
}
