//! Grouped bar charts drawn from the aggregate CSV rows.

use std::path::Path;

use plotters::prelude::*;

use crate::runner::Row;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Efficiency,
    Dilation,
}

impl Metric {
    fn value(self, row: &Row) -> f64 {
        match self {
            Metric::Efficiency => row.syseff,
            Metric::Dilation => row.dilation,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::Efficiency => "system efficiency",
            Metric::Dilation => "dilation",
        }
    }
}

/// Which row column forms the x-axis groups and which forms the bars.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Scenario,
    Scheduler,
    Updater,
}

impl Column {
    fn of(self, row: &Row) -> &str {
        match self {
            Column::Scenario => &row.scenario,
            Column::Scheduler => &row.scheduler,
            Column::Updater => &row.updater,
        }
    }
}

impl std::str::FromStr for Column {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scenario" => Ok(Column::Scenario),
            "scheduler" => Ok(Column::Scheduler),
            "updater" => Ok(Column::Updater),
            other => Err(CliError::Config(format!("unknown column {other:?}"))),
        }
    }
}

/// Aggregate values per (group, series), in first-appearance order. A later row for
/// the same pair replaces the earlier one.
pub fn table(rows: &[Row], group: Column, series: Column, metric: Metric) -> (Vec<String>, Vec<String>, Vec<Vec<Option<f64>>>) {
    let mut groups: Vec<String> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    for row in rows.iter().filter(|r| r.is_aggregate()) {
        let g = position_or_push(&mut groups, group.of(row));
        let s = position_or_push(&mut names, series.of(row));
        cells.retain(|&(cg, cs, _)| (cg, cs) != (g, s));
        cells.push((g, s, metric.value(row)));
    }
    let mut values = vec![vec![None; names.len()]; groups.len()];
    for (g, s, v) in cells {
        values[g][s] = Some(v);
    }
    (groups, names, values)
}

fn position_or_push(list: &mut Vec<String>, key: &str) -> usize {
    match list.iter().position(|k| k == key) {
        Some(i) => i,
        None => {
            list.push(key.to_string());
            list.len() - 1
        }
    }
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

/// Writes an SVG grouped bar chart of the aggregate rows.
pub fn grouped_bars(rows: &[Row], group: Column, series: Column, metric: Metric, title: &str, path: &Path) -> Result<(), CliError> {
    let (groups, names, values) = table(rows, group, series, metric);
    if groups.is_empty() {
        return Err(CliError::Config(format!("no aggregate rows to plot for {}", path.display())));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| crate::runner::io_error(dir, e))?;
    }
    let top = values.iter().flatten().flatten().copied().fold(0.0_f64, f64::max);
    let y_max = match metric {
        Metric::Efficiency => 1.0,
        Metric::Dilation => (top * 1.1).max(1.2),
    };
    let draw = || -> Result<(), Box<dyn std::error::Error>> {
        let width = (groups.len() as u32 * 90).max(480) + 160;
        let root = SVGBackend::new(path, (width, 420)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(56)
            .build_cartesian_2d(0.0..groups.len() as f64, 0.0..y_max)?;
        let labels = groups.clone();
        chart
            .configure_mesh()
            .disable_x_mesh()
            .x_labels(groups.len() * 2 + 1)
            .x_label_formatter(&move |x| {
                let i = x.floor() as usize;
                if (x - i as f64 - 0.5).abs() < 1e-6 && i < labels.len() {
                    labels[i].clone()
                } else {
                    String::new()
                }
            })
            .light_line_style(WHITE)
            .y_desc(metric.label())
            .draw()?;

        let width = 0.8 / names.len() as f64;
        for (s, name) in names.iter().enumerate() {
            let color = PALETTE[s % PALETTE.len()];
            let bars = values.iter().enumerate().filter_map(|(g, row)| {
                row[s].map(|v| {
                    let x0 = g as f64 + 0.1 + s as f64 * width;
                    Rectangle::new([(x0, 0.0), (x0 + width, v.min(y_max))], color.filled())
                })
            });
            chart
                .draw_series(bars)?
                .label(name.as_str())
                .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
        }
        chart
            .configure_series_labels()
            .position(SeriesLabelPosition::UpperRight)
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scenario: &str, scheduler: &str, seed: &str, syseff: f64) -> Row {
        Row {
            scenario: scenario.into(),
            scheduler: scheduler.into(),
            updater: "-".into(),
            strategy: "minmax".into(),
            gamma: Some(0.5),
            seed: seed.into(),
            syseff,
            dilation: 1.0,
            wall_ms: 0,
        }
    }

    #[test]
    fn table_uses_aggregates_only() {
        let rows = vec![
            row("set1", "dpsac", "1", 0.1),
            row("set1", "dpsac", "mean", 0.2),
            row("set1", "bios", "mean", 0.3),
            row("set2", "bios", "mean", 0.4),
        ];
        let (g, s, v) = table(&rows, Column::Scenario, Column::Scheduler, Metric::Efficiency);
        assert_eq!(g, ["set1", "set2"]);
        assert_eq!(s, ["dpsac", "bios"]);
        assert_eq!(v, vec![vec![Some(0.2), Some(0.3)], vec![None, Some(0.4)]]);
    }

    #[test]
    fn writes_svg() {
        let path = std::env::temp_dir().join(format!("dpsac-chart-{}.svg", std::process::id()));
        let rows = vec![row("set1", "dpsac", "mean", 0.9), row("set1", "bios", "mean", 0.5)];
        grouped_bars(&rows, Column::Scenario, Column::Scheduler, Metric::Efficiency, "t", &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("set1"));
        std::fs::remove_file(path).ok();
    }
}
