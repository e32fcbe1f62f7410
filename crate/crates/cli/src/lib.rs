//! Experiment runner for the DPSAC simulator: configuration, seeded runs,
//! figure sweeps, CSV and SVG output.

pub mod chart;
pub mod config;
pub mod runner;

use std::path::{Path, PathBuf};

use dpsac_core::model::{scenario_by_name, scenario_names};

use chart::{Column, Metric};
use config::RunConfig;
use runner::{Job, Row};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

/// Runs one configuration over its seeds and writes the CSV.
pub fn cmd_run(cfg: &RunConfig) -> Result<(PathBuf, Vec<Row>), CliError> {
    let job = Job::from_run_config(cfg)?;
    let jobs = [job];
    let outcomes = runner::execute(&jobs, cfg.timing)?;
    let rows = runner::rows(&jobs, &outcomes);
    let path = cfg.csv_path();
    runner::write_csv(&path, &rows)?;
    Ok((path, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Congestion,
    Updaters,
}

impl Figure {
    pub fn stem(self) -> &'static str {
        match self {
            Figure::Congestion => "fig6",
            Figure::Updaters => "fig7",
        }
    }

    fn jobs(self, seeds: &[u64]) -> Result<Vec<Job>, CliError> {
        match self {
            Figure::Congestion => runner::fig6_jobs(seeds),
            Figure::Updaters => runner::fig7_jobs(seeds),
        }
    }

    /// Default chart layout: x-axis groups and bar series.
    pub fn columns(self) -> (Column, Column) {
        match self {
            Figure::Congestion => (Column::Scenario, Column::Scheduler),
            Figure::Updaters => (Column::Scenario, Column::Updater),
        }
    }
}

/// Files written by a sweep.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub csv: PathBuf,
    pub charts: Vec<PathBuf>,
    pub rows: Vec<Row>,
}

pub fn cmd_sweep(fig: Figure, seeds: &[u64], out_dir: &Path, timing: bool) -> Result<SweepOutput, CliError> {
    if seeds.is_empty() {
        return Err(CliError::Config("at least one seed is required".into()));
    }
    let jobs = fig.jobs(seeds)?;
    let outcomes = runner::execute(&jobs, timing)?;
    let rows = runner::rows(&jobs, &outcomes);
    let csv = out_dir.join(format!("{}.csv", fig.stem()));
    runner::write_csv(&csv, &rows)?;
    let (group, series) = fig.columns();
    let charts = cmd_plot(&csv, group, series, out_dir, fig.stem())?;
    Ok(SweepOutput { csv, charts, rows })
}

/// Draws the efficiency and dilation charts of a CSV file. Only the file's
/// contents are used.
pub fn cmd_plot(csv: &Path, group: Column, series: Column, out_dir: &Path, stem: &str) -> Result<Vec<PathBuf>, CliError> {
    let rows = runner::read_csv(csv)?;
    let mut paths = Vec::new();
    for (metric, suffix) in [(Metric::Efficiency, "efficiency"), (Metric::Dilation, "dilation")] {
        let path = out_dir.join(format!("{stem}_{suffix}.svg"));
        chart::grouped_bars(&rows, group, series, metric, &format!("{stem}: {suffix}"), &path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// One line per selector: name, application count, periodic joiners.
pub fn list_scenarios() -> Result<String, CliError> {
    let mut out = String::new();
    for name in scenario_names() {
        let s = scenario_by_name(&name).map_err(|e| CliError::Runtime(e.to_string()))?;
        let apps: Vec<String> = s
            .initial_batch
            .iter()
            .map(|e| format!("{}x{}", e.count, e.spec.name))
            .collect();
        let joins: Vec<String> = s.periodic_joins.iter().map(|j| format!("+{}", j.spec.name)).collect();
        out.push_str(format!("{name:<18} {} {}", apps.join(" "), joins.join(" ")).trim_end());
        out.push('\n');
    }
    Ok(out)
}
