//! Job grids, parallel execution and CSV rows.

use std::path::Path;
use std::time::Instant;

use dpsac_core::model::{scenario_by_name, ScenarioSpec};
use dpsac_core::sim::{run, MetricsReport, SchedulerKind, SimConfig};
use dpsac_core::updater::UpdaterKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

/// Applications that join the dynamic scenario, one sweep column each.
pub const FIG7_JOINERS: [&str; 3] = ["EAP", "LAP5", "Silverton"];

/// One configuration run over several seeds.
#[derive(Debug, Clone)]
pub struct Job {
    pub scenario: ScenarioSpec,
    pub config: SimConfig,
    pub seeds: Vec<u64>,
}

impl Job {
    pub fn new(selector: &str, config: SimConfig, seeds: Vec<u64>) -> Result<Self, CliError> {
        let scenario = scenario_by_name(selector).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { scenario, config, seeds })
    }

    pub fn from_run_config(cfg: &RunConfig) -> Result<Self, CliError> {
        Self::new(&cfg.scenario, cfg.sim_config(), cfg.seeds.clone())
    }

    fn label(&self, seed: u64) -> String {
        format!(
            "{} / {} / {} / seed {seed}",
            self.scenario.name,
            self.config.scheduler,
            updater_label(&self.config)
        )
    }
}

/// Result of a single seeded run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: MetricsReport,
    pub wall_ms: u64,
}

/// Runs every (job, seed) pair, possibly in parallel. The result keeps the
/// job-major, seed-minor order of the input. The first failure in that order
/// is reported.
pub fn execute(jobs: &[Job], timing: bool) -> Result<Vec<Vec<Outcome>>, CliError> {
    let pairs: Vec<(usize, u64)> = jobs
        .iter()
        .enumerate()
        .flat_map(|(j, job)| job.seeds.iter().map(move |&s| (j, s)))
        .collect();
    let results: Vec<Result<Outcome, CliError>> = pairs
        .par_iter()
        .map(|&(j, seed)| {
            let job = &jobs[j];
            let start = Instant::now();
            let report = run(&job.scenario, &job.config, seed)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", job.label(seed))))?;
            if !report.invariants_hold() {
                return Err(CliError::Runtime(format!(
                    "{}: invariant violated: {:?}",
                    job.label(seed),
                    report.invariants
                )));
            }
            let wall_ms = if timing { start.elapsed().as_millis() as u64 } else { 0 };
            Ok(Outcome { report, wall_ms })
        })
        .collect();

    let mut iter = results.into_iter();
    let mut grouped = Vec::with_capacity(jobs.len());
    for job in jobs {
        let mut outs = Vec::with_capacity(job.seeds.len());
        for _ in &job.seeds {
            outs.push(iter.next().expect("one result per pair")?);
        }
        grouped.push(outs);
    }
    Ok(grouped)
}

/// One CSV line. Aggregate rows carry `seed = "mean"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario: String,
    pub scheduler: String,
    pub updater: String,
    pub strategy: String,
    pub gamma: Option<f64>,
    pub seed: String,
    pub syseff: f64,
    pub dilation: f64,
    pub wall_ms: u64,
}

pub const CSV_HEADER: [&str; 9] = [
    "scenario", "scheduler", "updater", "strategy", "gamma", "seed", "syseff", "dilation", "wall_ms",
];

impl Row {
    pub fn is_aggregate(&self) -> bool {
        self.seed == "mean"
    }
}

/// Baselines have no updater; their column reads `-`.
fn updater_label(config: &SimConfig) -> String {
    match config.scheduler {
        SchedulerKind::Dpsac => config.updater.to_string(),
        _ => "-".into(),
    }
}

fn base_row(job: &Job) -> Row {
    Row {
        scenario: job.scenario.name.clone(),
        scheduler: job.config.scheduler.to_string(),
        updater: updater_label(&job.config),
        strategy: job.config.strategy.name().to_string(),
        gamma: job.config.strategy.gamma(),
        seed: String::new(),
        syseff: 0.0,
        dilation: 0.0,
        wall_ms: 0,
    }
}

/// Per-seed rows followed by the mean row, for each job in order.
pub fn rows(jobs: &[Job], outcomes: &[Vec<Outcome>]) -> Vec<Row> {
    let mut out = Vec::new();
    for (job, outs) in jobs.iter().zip(outcomes) {
        let base = base_row(job);
        for o in outs {
            out.push(Row {
                seed: o.report.seed.to_string(),
                syseff: o.report.system_efficiency(),
                dilation: o.report.dilation(),
                wall_ms: o.wall_ms,
                ..base.clone()
            });
        }
        let n = outs.len().max(1) as f64;
        out.push(Row {
            seed: "mean".into(),
            syseff: outs.iter().map(|o| o.report.system_efficiency()).sum::<f64>() / n,
            dilation: outs.iter().map(|o| o.report.dilation()).sum::<f64>() / n,
            wall_ms: (outs.iter().map(|o| o.wall_ms).sum::<u64>() as f64 / n).round() as u64,
            ..base
        });
    }
    out
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    if rows.is_empty() {
        w.write_record(CSV_HEADER).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<Row>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<Row>, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Sets 1 to 10 against every scheduler, min-max strategy with gamma 0.5.
pub fn fig6_jobs(seeds: &[u64]) -> Result<Vec<Job>, CliError> {
    let mut jobs = Vec::new();
    for n in 1..=10 {
        for scheduler in SchedulerKind::ALL {
            let config = SimConfig { scheduler, ..SimConfig::default() };
            jobs.push(Job::new(&format!("set{n}"), config, seeds.to_vec())?);
        }
    }
    Ok(jobs)
}

/// The dynamic scenario with each joining application against every
/// updater, all under DPSAC.
pub fn fig7_jobs(seeds: &[u64]) -> Result<Vec<Job>, CliError> {
    let mut jobs = Vec::new();
    for joiner in FIG7_JOINERS {
        for updater in UpdaterKind::ALL {
            let config = SimConfig { scheduler: SchedulerKind::Dpsac, updater, ..SimConfig::default() };
            jobs.push(Job::new(&format!("dynamic:{joiner}"), config, seeds.to_vec())?);
        }
    }
    Ok(jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_per_job_and_mean() {
        let job = Job::new("set5", SimConfig::default(), vec![3, 4]).unwrap();
        let outcomes = execute(std::slice::from_ref(&job), false).unwrap();
        let rows = rows(&[job], &outcomes);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].seed, "3");
        assert_eq!(rows[1].seed, "4");
        assert!(rows[2].is_aggregate());
        assert!((rows[2].syseff - (rows[0].syseff + rows[1].syseff) / 2.0).abs() < 1e-12);
        assert_eq!(rows[2].gamma, Some(0.5));
        assert_eq!(rows[2].wall_ms, 0);
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(fig6_jobs(&[1]).unwrap().len(), 30);
        assert_eq!(fig7_jobs(&[1]).unwrap().len(), 9);
    }

    #[test]
    fn baselines_have_no_updater() {
        let job = Job::new("set1", SimConfig { scheduler: SchedulerKind::Bios, ..SimConfig::default() }, vec![1]).unwrap();
        assert_eq!(base_row(&job).updater, "-");
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("dpsac-rt-{}", std::process::id()));
        let path = dir.join("x.csv");
        let row = Row {
            scenario: "set1".into(),
            scheduler: "bios".into(),
            updater: "-".into(),
            strategy: "maxsyseff".into(),
            gamma: None,
            seed: "mean".into(),
            syseff: 0.5,
            dilation: 1.25,
            wall_ms: 7,
        };
        write_csv(&path, std::slice::from_ref(&row)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("scenario,scheduler,updater,strategy,gamma,seed,syseff,dilation,wall_ms\n"));
        assert_eq!(read_csv(&path).unwrap(), vec![row]);
        std::fs::remove_dir_all(dir).ok();
    }
}
