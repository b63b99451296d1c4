use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rhodep::harness::{
    estimate_series, parse_report_csv, run_experiment, summary_csv, to_pretty_json, write_report, ExperimentConfig,
};
use rhodep::io::{read_model_file, read_series, write_series, DEFAULT_MODEL_BUDGET};
use rhodep::spacing::{make_s_grid, select_s};
use rhodep::Error;

#[derive(Parser)]
#[command(name = "rhodep", version, about = "Robust density estimation from dependent series")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the series of one replicate of a configured experiment.
    Simulate {
        /// Replicate index to simulate.
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        /// Also write the independent hold-out runs.
        #[arg(long)]
        holdout: bool,
    },
    /// Fit a model to a series.
    Estimate {
        /// Series CSV.
        #[arg(long)]
        series: PathBuf,
        /// Model file (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Block spacing.
        #[arg(long, default_value_t = 0)]
        s: usize,
        /// Aggregation slack.
        #[arg(long, default_value_t = 1.0)]
        iota: f64,
        /// Include the criterion and objective tables.
        #[arg(long)]
        tables: bool,
    },
    /// Select the spacing with a second, independent series.
    SelectS {
        /// Series used to fit one estimate per spacing.
        #[arg(long)]
        series1: PathBuf,
        /// Independent series used to choose among them.
        #[arg(long)]
        series2: PathBuf,
        /// Model file (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Ratio of the geometric spacing grid; at least e.
        #[arg(long, default_value_t = std::f64::consts::E)]
        tau: f64,
        /// Aggregation slack.
        #[arg(long, default_value_t = 1.0)]
        iota: f64,
    },
    /// Run a configured experiment end to end.
    Experiment,
    /// Summarize a report CSV for plotting.
    Report {
        /// `report.csv` or a directory containing it.
        #[arg(long)]
        input: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Independence(_) => 2,
        _ => 3,
    }
}

/// Reads an input file; a missing or unreadable input is a configuration error.
fn input<T>(path: &Path, read: impl FnOnce(&Path) -> rhodep::Result<T>) -> rhodep::Result<T> {
    read(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
        other => other,
    })
}

fn load_config(global: &Global) -> rhodep::Result<ExperimentConfig> {
    let path = global
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut config = input(path, ExperimentConfig::read)?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write(path: PathBuf, text: String) -> rhodep::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> rhodep::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Simulate { replicate, holdout } => {
            let config = load_config(g)?;
            fs::create_dir_all(&g.out)?;
            for (ni, n) in config.n.iter().enumerate() {
                let series = config.simulate(replicate, ni, false)?;
                write_series(&g.out.join(format!("series-n{n}.csv")), &series)?;
                if holdout {
                    let series = config.simulate(replicate, ni, true)?;
                    write_series(&g.out.join(format!("holdout-n{n}.csv")), &series)?;
                }
            }
        }
        Command::Estimate {
            series,
            model,
            s,
            iota,
            tables,
        } => {
            let series = input(&series, read_series)?;
            let loaded = input(&model, read_model_file)?.model.build(DEFAULT_MODEL_BUDGET)?;
            let result = estimate_series(&loaded, &series, s, iota, tables)?;
            write(g.out.join("result.json"), to_pretty_json(&result))?;
        }
        Command::SelectS {
            series1,
            series2,
            model,
            tau,
            iota,
        } => {
            let a = input(&series1, read_series)?;
            let b = input(&series2, read_series)?;
            if a.provenance.is_none() || b.provenance.is_none() {
                return Err(Error::Independence(
                    "both series need a provenance tag to document their independence".into(),
                ));
            }
            let loaded = input(&model, read_model_file)?.model.build(DEFAULT_MODEL_BUDGET)?;
            let sample1 = loaded.sample(&a.y, a.provenance.as_deref())?;
            let sample2 = loaded.sample(&b.y, b.provenance.as_deref())?;
            let grid = make_s_grid(sample1.len(), tau)?;
            let model = loaded.model.clone();
            let selection = select_s(&sample1, &sample2, &grid.values, |_| Ok(model.clone()), iota)?;
            write(g.out.join("selection.json"), to_pretty_json(&selection))?;
        }
        Command::Experiment => {
            let config = load_config(g)?;
            let report = run_experiment(&config)?;
            write_report(&g.out, &report, &config)?;
            if !report.failures.is_empty() {
                eprintln!("{} replicate(s) failed; see failures.json", report.failures.len());
            }
        }
        Command::Report { input: path } => {
            let path = if path.is_dir() { path.join("report.csv") } else { path };
            let text = input(&path, |p| Ok(fs::read_to_string(p)?))?;
            let rows = parse_report_csv(&text)?;
            write(g.out.join("summary.csv"), summary_csv(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
