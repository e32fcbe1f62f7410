use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpsac_cli::chart::Column;
use dpsac_cli::config::{env_out_dir, RawConfig, DEFAULT_OUT_DIR, DEFAULT_REPEATS};
use dpsac_cli::{cmd_plot, cmd_run, cmd_sweep, list_scenarios, CliError, Figure};

#[derive(Parser)]
#[command(name = "dpsac", version, about = "Burst-buffer I/O scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over several seeds.
    Run(RunArgs),
    /// Congestion sets 1-10 against dpsac, mcios and bios.
    SweepFig6(SweepArgs),
    /// Dynamic scenario against the st, dt and ok updaters.
    SweepFig7(SweepArgs),
    /// Print the built-in scenario selectors.
    ListScenarios,
    /// Check a config file and print the resolved configuration.
    ValidateConfig(RunArgs),
    /// Redraw the charts of an existing CSV file.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// set1..set10, batch, dynamic or dynamic:<APP>.
    #[arg(long)]
    scenario: Option<String>,
    /// dpsac, mcios or bios.
    #[arg(long)]
    scheduler: Option<String>,
    /// st, dt or ok.
    #[arg(long)]
    updater: Option<String>,
    /// mindilation, maxsyseff, minmax or minmax:<gamma>.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// First seed, default 1.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds, default 5.
    #[arg(long)]
    repeats: Option<u32>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// CSV file name inside the output directory, default run.csv.
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    drift_threshold: Option<f64>,
    #[arg(long)]
    max_clusters: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    /// Use the looser buffered-transfer feasibility test.
    #[arg(long)]
    literal_feasibility: bool,
    /// Fill wall_ms with measured run times.
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn flags(&self) -> RawConfig {
        RawConfig {
            scenario: self.scenario.clone(),
            scheduler: self.scheduler.clone(),
            updater: self.updater.clone(),
            strategy: self.strategy.clone(),
            gamma: self.gamma,
            seed: self.seed,
            seeds: None,
            repeats: self.repeats,
            out_dir: self.out_dir.clone(),
            output: self.output.clone(),
            drift_threshold: self.drift_threshold,
            max_clusters: self.max_clusters,
            bins: self.bins,
            literal_feasibility: self.literal_feasibility.then_some(true),
            timing: self.timing.then_some(true),
        }
    }

    fn raw(&self) -> Result<RawConfig, CliError> {
        let file = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        Ok(file.overlay(&self.flags()))
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: u32,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct PlotArgs {
    csv: PathBuf,
    /// Column for the x-axis groups.
    #[arg(long, default_value = "scenario")]
    group: String,
    /// Column for the bars within a group.
    #[arg(long, default_value = "scheduler")]
    series: String,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// File name prefix, default the CSV file stem.
    #[arg(long)]
    stem: Option<String>,
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(env_out_dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn sweep(fig: Figure, args: &SweepArgs) -> Result<(), CliError> {
    if args.repeats == 0 {
        return Err(CliError::Config("repeats must be at least 1".into()));
    }
    let first = args.seed.unwrap_or(1);
    let seeds: Vec<u64> = (0..args.repeats as u64).map(|i| first.wrapping_add(i)).collect();
    let out = cmd_sweep(fig, &seeds, &out_dir(&args.out_dir), args.timing)?;
    println!("{}", out.csv.display());
    for c in &out.charts {
        println!("{}", c.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.raw()?.resolve(env_out_dir())?;
            let (path, rows) = cmd_run(&cfg)?;
            if let Some(mean) = rows.last() {
                log::info!("{}: syseff {:.4} dilation {:.4}", cfg.scenario, mean.syseff, mean.dilation);
            }
            println!("{}", path.display());
            Ok(())
        }
        Command::SweepFig6(args) => sweep(Figure::Congestion, &args),
        Command::SweepFig7(args) => sweep(Figure::Updaters, &args),
        Command::ListScenarios => {
            print!("{}", list_scenarios()?);
            Ok(())
        }
        Command::ValidateConfig(args) => {
            let cfg = args.raw()?.resolve(env_out_dir())?;
            println!("{cfg:#?}");
            Ok(())
        }
        Command::Plot(args) => {
            let group: Column = args.group.parse()?;
            let series: Column = args.series.parse()?;
            let stem = match &args.stem {
                Some(s) => s.clone(),
                None => args
                    .csv
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "chart".into()),
            };
            let dir = match &args.out_dir {
                Some(d) => d.clone(),
                None => args.csv.parent().map(PathBuf::from).unwrap_or_default(),
            };
            for p in cmd_plot(&args.csv, group, series, &dir, &stem)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpsac: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
